import random

import pytest

from pns_toolkit.graph import (
    CausalGraph,
    CycleDetected,
    DuplicateEdge,
    GraphFormatError,
    OverlappingSets,
    UnknownNode,
    dump_graph_json,
    dump_graph_text,
    load_graph_json,
    load_graph_text,
    parse_graph,
)

from oracles import all_labeled_dags, dsep_bruteforce, random_dag


def confounder_graph():
    # Z -> X, Z -> Y, X -> Y
    return CausalGraph(["X", "Y", "Z"], [("Z", "X"), ("Z", "Y"), ("X", "Y")])


def outcome_covariate_graph():
    # Z -> Y, X -> Y
    return CausalGraph(["X", "Y", "Z"], [("Z", "Y"), ("X", "Y")])


def diabetes_graph():
    return CausalGraph(
        ["Diabetes", "DietCoke", "Fatness"],
        [("Diabetes", "DietCoke"), ("Diabetes", "Fatness"), ("DietCoke", "Fatness")],
    )


class TestConstruction:
    def test_confounder_graph_builds(self):
        g = confounder_graph()
        assert g.nodes == ("X", "Y", "Z")
        assert set(g.edges) == {("Z", "X"), ("Z", "Y"), ("X", "Y")}

    def test_single_node_no_edges(self):
        g = CausalGraph(["A"])
        assert g.nodes == ("A",)
        assert g.edges == ()

    def test_two_cycle_rejected(self):
        with pytest.raises(CycleDetected) as err:
            CausalGraph(["A", "B"], [("A", "B"), ("B", "A")])
        assert "A" in str(err.value) and "B" in str(err.value)

    def test_longer_cycle_named(self):
        with pytest.raises(CycleDetected) as err:
            CausalGraph(["A", "B", "C"], [("A", "B"), ("B", "C"), ("C", "A")])
        assert "->" in str(err.value)

    def test_self_loop_rejected(self):
        with pytest.raises(CycleDetected):
            CausalGraph(["A"], [("A", "A")])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(DuplicateEdge):
            CausalGraph(["A", "B"], [("A", "B"), ("A", "B")])

    def test_unknown_endpoint_rejected(self):
        with pytest.raises(UnknownNode):
            CausalGraph(["A"], [("A", "B")])


class TestClosures:
    def test_chain_descendants(self):
        g = CausalGraph(["A", "B", "C"], [("A", "B"), ("B", "C")])
        assert g.descendants("A") == {"B", "C"}
        assert g.ancestors("C") == {"A", "B"}

    def test_diabetes_graph_descendants(self):
        g = diabetes_graph()
        assert g.descendants("Diabetes") == {"DietCoke", "Fatness"}

    def test_isolated_node(self):
        g = CausalGraph(["A", "B"], [])
        assert g.descendants("A") == frozenset()
        assert g.ancestors("A") == frozenset()

    def test_unknown_node(self):
        g = CausalGraph(["A"])
        with pytest.raises(UnknownNode):
            g.descendants("missing")


class TestDSeparation:
    def test_blocked_chain(self):
        g = CausalGraph(["X", "M", "Y"], [("X", "M"), ("M", "Y")])
        assert g.d_separated({"X"}, {"Y"}, {"M"})
        assert not g.d_separated({"X"}, {"Y"}, set())

    def test_collider_rules(self):
        g = CausalGraph(["X", "C", "Y"], [("X", "C"), ("Y", "C")])
        assert g.d_separated({"X"}, {"Y"}, set())
        assert not g.d_separated({"X"}, {"Y"}, {"C"})

    def test_collider_descendant_opens_path(self):
        g = CausalGraph(["X", "C", "Y", "D"], [("X", "C"), ("Y", "C"), ("C", "D")])
        assert not g.d_separated({"X"}, {"Y"}, {"D"})

    def test_confounder_direct_edge_not_separable(self):
        g = confounder_graph()
        assert not g.d_separated({"X"}, {"Y"}, {"Z"})

    def test_overlapping_sets_rejected(self):
        g = confounder_graph()
        with pytest.raises(OverlappingSets):
            g.d_separated({"X"}, {"X"}, set())
        with pytest.raises(OverlappingSets):
            g.d_separated({"X"}, {"Y"}, {"X"})

    def test_unknown_node_rejected(self):
        g = confounder_graph()
        with pytest.raises(UnknownNode):
            g.d_separated({"X"}, {"W"}, set())

    def test_symmetry_on_random_dags(self):
        rng = random.Random(11)
        for _ in range(40):
            g = random_dag(rng, 6)
            nodes = list(g.nodes)
            rng.shuffle(nodes)
            a, b = {nodes[0]}, {nodes[1]}
            z = set(nodes[2 : 2 + rng.randrange(0, 4)])
            assert g.d_separated(a, b, z) == g.d_separated(b, a, z)

    def test_agrees_with_bruteforce_exhaustive_small(self):
        rng = random.Random(7)
        for _ in range(60):
            g = random_dag(rng, 5, p_edge=0.45)
            names = g.nodes
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    a, b = names[i], names[j]
                    rest = [v for v in names if v not in (a, b)]
                    for mask in range(2 ** len(rest)):
                        z = {rest[k] for k in range(len(rest)) if mask >> k & 1}
                        expected = dsep_bruteforce(g, {a}, {b}, z)
                        assert g.d_separated({a}, {b}, z) == expected


class TestBackdoor:
    def test_diabetes_set_admissible(self):
        g = diabetes_graph()
        assert g.satisfies_backdoor("DietCoke", "Fatness", {"Diabetes"})

    def test_no_arrow_into_x_empty_set_admissible(self):
        assert outcome_covariate_graph().satisfies_backdoor("X", "Y", set())

    def test_confounder_empty_set_inadmissible(self):
        assert not confounder_graph().satisfies_backdoor("X", "Y", set())

    def test_descendant_of_x_inadmissible(self):
        g = CausalGraph(["X", "M", "Y"], [("X", "M"), ("M", "Y")])
        assert not g.satisfies_backdoor("X", "Y", {"M"})

    def test_find_sets_diabetes(self):
        g = diabetes_graph()
        assert g.find_backdoor_sets("DietCoke", "Fatness") == [frozenset({"Diabetes"})]

    def test_find_sets_no_backdoor_paths(self):
        assert outcome_covariate_graph().find_backdoor_sets("X", "Y") == [frozenset()]

    def test_find_sets_x_without_parents(self):
        g = CausalGraph(["X", "Y", "W"], [("X", "Y"), ("W", "Y")])
        assert g.find_backdoor_sets("X", "Y") == [frozenset()]

    def test_returned_sets_admissible_and_minimal(self):
        rng = random.Random(23)
        for _ in range(40):
            g = random_dag(rng, 6)
            x, y = g.nodes[0], g.nodes[-1]
            for z in g.find_backdoor_sets(x, y, max_size=3):
                assert g.satisfies_backdoor(x, y, z)
                assert z & g.descendants(x) == frozenset()
                for member in z:
                    assert not g.satisfies_backdoor(x, y, z - {member})


class TestFileFormats:
    def test_text_round_trip(self):
        g = diabetes_graph()
        text = dump_graph_text(g)
        assert parse_graph(text) == g
        assert dump_graph_text(parse_graph(text)) == text

    def test_text_comments_and_isolated_nodes(self):
        text = "# a comment\nnodes: Lonely A B\nA -> B  # inline comment\n"
        g = load_graph_text(text)
        assert g.nodes == ("Lonely", "A", "B")
        assert g.edges == (("A", "B"),)

    def test_text_rejects_undirected(self):
        with pytest.raises(GraphFormatError):
            load_graph_text("A -- B\n")

    def test_text_rejects_garbage(self):
        with pytest.raises(GraphFormatError) as err:
            load_graph_text("nodes: A\nA => B\n")
        assert "line 2" in str(err.value)

    def test_json_round_trip(self):
        g = confounder_graph()
        text = dump_graph_json(g)
        assert parse_graph(text) == g
        assert dump_graph_json(load_graph_json(text)) == text

    def test_json_missing_fields(self):
        with pytest.raises(GraphFormatError):
            load_graph_json('{"nodes": ["A"]}')


def test_exhaustive_three_node_dags_vs_bruteforce():
    names = ("A", "B", "C")
    count = 0
    for g in all_labeled_dags(names):
        count += 1
        for a, b in [("A", "B"), ("A", "C"), ("B", "C")]:
            rest = [v for v in names if v not in (a, b)]
            for mask in range(2 ** len(rest)):
                z = {rest[k] for k in range(len(rest)) if mask >> k & 1}
                assert g.d_separated({a}, {b}, z) == dsep_bruteforce(g, {a}, {b}, z)
    assert count == 25  # labeled DAGs on 3 nodes
