"""Independent brute-force oracles used to validate the library.

Everything here is deliberately naive: d-separation by enumerating every
simple trail and applying the blocking rules directly, and random DAG
generation for equivalence sweeps. None of it shares code with the package
implementations it checks.
"""

from __future__ import annotations

import random

from pns_toolkit.graph import CausalGraph


def all_simple_trails(g: CausalGraph, a: str, b: str) -> list[tuple[str, ...]]:
    """Every simple (node-repetition-free) trail between a and b, ignoring
    edge direction."""
    neighbours = {
        v: sorted(g.parents(v) | g.children(v)) for v in g.nodes
    }
    trails: list[tuple[str, ...]] = []
    stack: list[tuple[str, tuple[str, ...]]] = [(a, (a,))]
    while stack:
        node, path = stack.pop()
        if node == b:
            trails.append(path)
            continue
        for nxt in neighbours[node]:
            if nxt not in path:
                stack.append((nxt, path + (nxt,)))
    return trails


def trail_blocked(g: CausalGraph, trail: tuple[str, ...], z: frozenset[str]) -> bool:
    """Blocking per the chain/fork/collider rules."""
    for i in range(1, len(trail) - 1):
        prev, mid, nxt = trail[i - 1], trail[i], trail[i + 1]
        arrow_in_from_prev = mid in g.children(prev)
        arrow_in_from_next = mid in g.children(nxt)
        if arrow_in_from_prev and arrow_in_from_next:  # collider at mid
            if mid not in z and not (g.descendants(mid) & z):
                return True
        else:  # chain or fork at mid
            if mid in z:
                return True
    return False


def dsep_bruteforce(g: CausalGraph, a_set, b_set, z) -> bool:
    z = frozenset(z)
    for a in a_set:
        for b in b_set:
            for trail in all_simple_trails(g, a, b):
                if not trail_blocked(g, trail, z):
                    return False
    return True


def random_dag(rng: random.Random, n_nodes: int, p_edge: float = 0.4) -> CausalGraph:
    """Random labeled DAG: random topological order, independent edges."""
    names = [f"N{i}" for i in range(n_nodes)]
    order = names[:]
    rng.shuffle(order)
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_edge:
                edges.append((order[i], order[j]))
    return CausalGraph(names, edges)


def all_labeled_dags(names: tuple[str, ...]):
    """Yield every labeled DAG on the given nodes (3^pairs orientations,
    acyclic only). Intended for very small node counts."""
    pairs = [(names[i], names[j]) for i in range(len(names)) for j in range(i + 1, len(names))]
    n = len(pairs)
    total = 3 ** n
    for code in range(total):
        edges = []
        c = code
        for (u, v) in pairs:
            c, choice = divmod(c, 3)
            if choice == 1:
                edges.append((u, v))
            elif choice == 2:
                edges.append((v, u))
        try:
            yield CausalGraph(names, edges)
        except Exception:
            continue
