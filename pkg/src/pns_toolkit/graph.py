"""Directed acyclic graphs with d-separation and backdoor-criterion queries.

Node names are case-sensitive exact strings (survey variable codes are
case-significant). Graphs are immutable after construction and every query
is read-only, so instances can be shared freely across threads.
"""

from __future__ import annotations

import json
from collections import deque
from itertools import combinations
from typing import Iterable

from .errors import ToolkitError


class UnknownNode(ToolkitError):
    """A query or edge referenced a node that is not in the graph."""


class CycleDetected(ToolkitError):
    """The edge set admits no topological order; the message names one cycle."""


class DuplicateEdge(ToolkitError):
    """The same parent -> child pair was declared twice."""


class OverlappingSets(ToolkitError):
    """Node sets that must be pairwise disjoint overlap."""


class GraphFormatError(ToolkitError):
    """A graph file could not be parsed; the message names the line."""


def _check_name(name: str) -> str:
    if not isinstance(name, str) or not name or name != name.strip():
        raise GraphFormatError(f"invalid node name {name!r}")
    if any(ch.isspace() for ch in name) or "#" in name or "->" in name:
        raise GraphFormatError(f"invalid node name {name!r}")
    return name


class CausalGraph:
    """Immutable DAG over named nodes.

    ``nodes`` preserves declaration order (an ordered set); ``edges`` is the
    tuple of (parent, child) pairs in declaration order. Construction rejects
    unknown endpoints, duplicate edges, self-loops, and cycles.
    """

    __slots__ = ("nodes", "edges", "_parents", "_children")

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()):
        self.nodes: tuple[str, ...] = tuple(dict.fromkeys(_check_name(n) for n in nodes))
        node_set = set(self.nodes)
        parents: dict[str, set[str]] = {v: set() for v in self.nodes}
        children: dict[str, set[str]] = {v: set() for v in self.nodes}
        edge_list: list[tuple[str, str]] = []
        for parent, child in edges:
            for end in (parent, child):
                if end not in node_set:
                    raise UnknownNode(f"edge endpoint {end!r} is not a declared node")
            if parent == child:
                raise CycleDetected(f"cycle: {parent} -> {parent} (self-loop)")
            if child in children[parent]:
                raise DuplicateEdge(f"duplicate edge {parent} -> {child}")
            children[parent].add(child)
            parents[child].add(parent)
            edge_list.append((parent, child))
        self.edges: tuple[tuple[str, str], ...] = tuple(edge_list)
        self._parents = {v: frozenset(ps) for v, ps in parents.items()}
        self._children = {v: frozenset(cs) for v, cs in children.items()}
        cycle = self._find_cycle()
        if cycle is not None:
            raise CycleDetected("cycle: " + " -> ".join(cycle))

    # -- basic queries ---------------------------------------------------

    def __contains__(self, name: str) -> bool:
        return name in self._parents

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return self.nodes == other.nodes and set(self.edges) == set(other.edges)

    def __hash__(self) -> int:
        return hash((self.nodes, frozenset(self.edges)))

    def __repr__(self) -> str:
        return f"CausalGraph(nodes={list(self.nodes)!r}, edges={list(self.edges)!r})"

    def _require(self, name: str) -> None:
        if name not in self._parents:
            raise UnknownNode(f"unknown node {name!r}")

    def parents(self, v: str) -> frozenset[str]:
        self._require(v)
        return self._parents[v]

    def children(self, v: str) -> frozenset[str]:
        self._require(v)
        return self._children[v]

    def ancestors(self, v: str) -> frozenset[str]:
        """Transitive closure along reversed edges, excluding ``v`` itself."""
        return self._closure(v, self._parents)

    def descendants(self, v: str) -> frozenset[str]:
        """Transitive closure along edge direction, excluding ``v`` itself."""
        return self._closure(v, self._children)

    def _closure(self, v: str, step: dict[str, frozenset[str]]) -> frozenset[str]:
        self._require(v)
        seen: set[str] = set()
        stack = list(step[v])
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(step[u])
        return frozenset(seen)

    def topological_order(self) -> tuple[str, ...]:
        indeg = {v: len(self._parents[v]) for v in self.nodes}
        ready = deque(v for v in self.nodes if indeg[v] == 0)
        order: list[str] = []
        while ready:
            v = ready.popleft()
            order.append(v)
            for c in sorted(self._children[v]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return tuple(order)

    def _find_cycle(self) -> list[str] | None:
        order = self.topological_order()
        if len(order) == len(self.nodes):
            return None
        remaining = set(self.nodes) - set(order)
        # every remaining node keeps a parent inside `remaining`; walk until repeat
        v = sorted(remaining)[0]
        trail = [v]
        seen = {v}
        while True:
            v = sorted(p for p in self._parents[v] if p in remaining)[0]
            if v in seen:
                cycle = trail[trail.index(v):] + [v]
                cycle.reverse()
                return cycle
            trail.append(v)
            seen.add(v)

    # -- d-separation ----------------------------------------------------

    def d_separated(
        self,
        a: Iterable[str] | str,
        b: Iterable[str] | str,
        z: Iterable[str] = (),
    ) -> bool:
        """True iff every path between ``a`` and ``b`` is blocked by ``z``.

        A path is blocked when some chain or fork middle node lies in ``z``,
        or some collider has neither itself nor any descendant in ``z``.
        Uses the linear-time reachability formulation; the path-enumeration
        definition is retained as a test oracle.
        """
        a_set = frozenset([a] if isinstance(a, str) else a)
        b_set = frozenset([b] if isinstance(b, str) else b)
        z_set = frozenset(z)
        for v in a_set | b_set | z_set:
            self._require(v)
        if a_set & b_set or a_set & z_set or b_set & z_set:
            raise OverlappingSets(
                f"sets must be pairwise disjoint: a={sorted(a_set)}, "
                f"b={sorted(b_set)}, z={sorted(z_set)}"
            )
        return not (self._reachable(a_set, z_set) & b_set)

    def _reachable(self, sources: frozenset[str], z: frozenset[str]) -> set[str]:
        # nodes that are in z or have a descendant in z: exactly the colliders
        # that an active path may pass through
        anc_z = set(z)
        stack = list(z)
        while stack:
            v = stack.pop()
            for p in self._parents[v]:
                if p not in anc_z:
                    anc_z.add(p)
                    stack.append(p)

        # (node, arrived-from-child?) states; sources behave as if entered
        # from a phantom child so both directions open
        reach: set[str] = set()
        visited: set[tuple[str, bool]] = set()
        queue: deque[tuple[str, bool]] = deque((s, True) for s in sources)
        while queue:
            v, from_child = queue.popleft()
            if (v, from_child) in visited:
                continue
            visited.add((v, from_child))
            if v not in z:
                reach.add(v)
            if from_child:
                if v not in z:
                    for p in self._parents[v]:
                        queue.append((p, True))
                    for c in self._children[v]:
                        queue.append((c, False))
            else:
                if v not in z:
                    for c in self._children[v]:
                        queue.append((c, False))
                if v in anc_z:  # collider open: v in z or has a descendant in z
                    for p in self._parents[v]:
                        queue.append((p, True))
        return reach

    # -- backdoor criterion ----------------------------------------------

    def satisfies_backdoor(self, x: str, y: str, z: Iterable[str] = ()) -> bool:
        """True iff ``z`` has no descendant of ``x`` and blocks every path
        from ``x`` to ``y`` that starts with an arrow into ``x``."""
        self._require(x)
        self._require(y)
        z_set = frozenset(z)
        for v in z_set:
            self._require(v)
        if x == y:
            raise OverlappingSets("x and y must be distinct")
        if x in z_set or y in z_set:
            raise OverlappingSets(f"adjustment set must exclude {x!r} and {y!r}")
        if z_set & self.descendants(x):
            return False
        # deleting x's outgoing edges leaves exactly the paths that reach x
        # through an incoming arrow
        backdoor_view = CausalGraph(self.nodes, [e for e in self.edges if e[0] != x])
        return backdoor_view.d_separated({x}, {y}, z_set)

    def find_backdoor_sets(self, x: str, y: str, max_size: int = 4) -> list[frozenset[str]]:
        """All minimal admissible adjustment sets of size <= max_size.

        Ordered by size then lexicographically. Descendants of ``x`` are never
        admissible members, so the subset search skips them.
        """
        self._require(x)
        self._require(y)
        if x == y:
            raise OverlappingSets("x and y must be distinct")
        candidates = sorted(set(self.nodes) - {x, y} - self.descendants(x))
        minimal: list[frozenset[str]] = []
        for size in range(0, max_size + 1):
            for combo in combinations(candidates, size):
                cand = frozenset(combo)
                if any(found < cand for found in minimal):
                    continue
                if self.satisfies_backdoor(x, y, cand):
                    minimal.append(cand)
        return minimal


# -- file formats ----------------------------------------------------------

def dump_graph_text(g: CausalGraph) -> str:
    """Line-oriented format: a ``nodes:`` header then one ``parent -> child``
    per line. Round-trips bit-exactly through :func:`load_graph_text`."""
    lines = ["nodes: " + " ".join(g.nodes)]
    lines.extend(f"{p} -> {c}" for p, c in g.edges)
    return "\n".join(lines) + "\n"


def load_graph_text(text: str) -> CausalGraph:
    declared: list[str] = []
    edges: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("nodes:"):
            declared.extend(line[len("nodes:"):].replace(",", " ").split())
        elif "->" in line:
            parts = [s.strip() for s in line.split("->")]
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise GraphFormatError(f"line {lineno}: expected 'parent -> child'")
            edges.append((parts[0], parts[1]))
        elif "--" in line:
            raise GraphFormatError(
                f"line {lineno}: undirected edge not allowed in a DAG file"
            )
        else:
            raise GraphFormatError(f"line {lineno}: expected 'parent -> child'")
    ordered = dict.fromkeys(declared)
    for p, c in edges:
        ordered.setdefault(p)
        ordered.setdefault(c)
    try:
        return CausalGraph(ordered, edges)
    except ToolkitError:
        raise


def dump_graph_json(g: CausalGraph) -> str:
    doc = {"nodes": list(g.nodes), "edges": [list(e) for e in g.edges]}
    return json.dumps(doc, sort_keys=True) + "\n"


def load_graph_json(text: str) -> CausalGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON graph: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphFormatError("JSON graph requires 'nodes' and 'edges' fields")
    edges = [tuple(e) for e in doc["edges"]]
    if any(len(e) != 2 for e in edges):
        raise GraphFormatError("each edge must be a [parent, child] pair")
    return CausalGraph(doc["nodes"], edges)


def parse_graph(text: str) -> CausalGraph:
    """Accept either the line-oriented or the JSON graph serialization."""
    if text.lstrip().startswith("{"):
        return load_graph_json(text)
    return load_graph_text(text)
