"""Finite structural causal models as a ground-truth engine.

Exogenous distributions are stored as exact rationals, so enumerating the
exogenous space yields exact interventional probabilities and the exact
probability of necessity and sufficiency. Sampling is vectorized through a
seeded, splittable counter-based generator (numpy Philox) whose identifier
is recorded in every emitted dataset header.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import lcm
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import DiscreteDataset, Level, canon_level
from .errors import ToolkitError
from .estimate import JointTable
from .graph import CausalGraph, UnknownNode
from .pns import CausalQuantities, StratumQuantities

RNG_ID = "numpy-philox4x64-10"


class StateSpaceTooLarge(ToolkitError):
    """The exogenous space exceeds the enumeration cap."""


class NonBinaryVariable(ToolkitError):
    """Counterfactual enumeration requires binary 0/1 treatment and outcome."""


class ScmFormatError(ToolkitError):
    """An SCM spec (file or in-memory) is malformed; message names the part."""


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    return Fraction(p)


@dataclass(frozen=True)
class Mechanism:
    """Endogenous variable: deterministic truth table over its parents."""

    name: str
    parents: tuple[str, ...]
    table: Mapping[tuple[Level, ...], Level]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        canon = {}
        for key, out in self.table.items():
            key = tuple(canon_level(k) for k in (key if isinstance(key, tuple) else (key,)))
            if len(key) != len(self.parents):
                raise ScmFormatError(
                    f"{self.name}: table row {key!r} does not match parents {self.parents!r}"
                )
            canon[key] = canon_level(out)
        object.__setattr__(self, "table", canon)


@dataclass(frozen=True)
class ScmSpec:
    """Exogenous distributions plus endogenous truth tables.

    Distributions are normalized to exact rationals at construction (inputs
    may be floats, Fractions, or "a/b" strings and must sum to 1 within
    1e-12). Truth tables must be total over their parents' domains.
    """

    exogenous: tuple[tuple[str, tuple[tuple[Level, Fraction], ...]], ...]
    mechanisms: tuple[Mechanism, ...]
    seed: int | None = None

    def __post_init__(self):
        exo = []
        for name, dist in self.exogenous:
            items = dist.items() if isinstance(dist, Mapping) else dist
            pairs = [(canon_level(lvl), _as_fraction(p)) for lvl, p in items]
            if any(p < 0 for _, p in pairs):
                raise ScmFormatError(f"{name}: negative probability")
            total = sum(p for _, p in pairs)
            if abs(float(total) - 1.0) > 1e-12 or total == 0:
                raise ScmFormatError(f"{name}: distribution sums to {float(total)!r}")
            pairs = [(lvl, p / total) for lvl, p in pairs]
            if len({lvl for lvl, _ in pairs}) != len(pairs):
                raise ScmFormatError(f"{name}: duplicate levels")
            exo.append((name, tuple(sorted(pairs, key=lambda kv: str(kv[0])))))
        object.__setattr__(self, "exogenous", tuple(exo))
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))

        names = [n for n, _ in self.exogenous] + [m.name for m in self.mechanisms]
        if len(set(names)) != len(names):
            raise ScmFormatError("variable names must be unique")
        # graph construction validates acyclicity and unknown parents
        self.graph
        domains = {n: tuple(lvl for lvl, _ in dist) for n, dist in self.exogenous}
        for m in self.topological_mechanisms:
            expected = set(product(*(domains[p] for p in m.parents)))
            got = set(m.table.keys())
            if got != expected:
                missing = sorted(expected - got, key=str)[:3]
                extra = sorted(got - expected, key=str)[:3]
                raise ScmFormatError(
                    f"{m.name}: truth table not total over parent domain "
                    f"(missing {missing!r}, extra {extra!r})"
                )
            domains[m.name] = tuple(sorted(set(m.table.values()), key=str))
        object.__setattr__(self, "_domains", domains)

    @cached_property
    def graph(self) -> CausalGraph:
        """Induced graph over exogenous and endogenous variables."""
        nodes = [n for n, _ in self.exogenous] + [m.name for m in self.mechanisms]
        edges = []
        for m in self.mechanisms:
            for p in m.parents:
                if p not in nodes:
                    raise UnknownNode(f"{m.name}: unknown parent {p!r}")
                edges.append((p, m.name))
        return CausalGraph(nodes, edges)

    @cached_property
    def topological_mechanisms(self) -> tuple[Mechanism, ...]:
        by_name = {m.name: m for m in self.mechanisms}
        order = [v for v in self.graph.topological_order() if v in by_name]
        return tuple(by_name[v] for v in order)

    @property
    def endogenous_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.mechanisms)

    def domain(self, name: str) -> tuple[Level, ...]:
        try:
            return self._domains[name]
        except KeyError:
            raise UnknownNode(f"unknown variable {name!r}") from None

    def is_endogenous(self, name: str) -> bool:
        return any(m.name == name for m in self.mechanisms)

    def evaluate(
        self,
        exogenous_values: Mapping[str, Level],
        interventions: Mapping[str, Level] | None = None,
    ) -> dict[str, Level]:
        """Deterministic full assignment given exogenous values; intervened
        variables take their forced value and ignore their mechanism."""
        do = dict(interventions or {})
        values: dict[str, Level] = dict(exogenous_values)
        for m in self.topological_mechanisms:
            if m.name in do:
                values[m.name] = do[m.name]
            else:
                values[m.name] = m.table[tuple(values[p] for p in m.parents)]
        return values


@dataclass(frozen=True)
class CounterfactualProfile:
    """Exact interventional marginals, exact PNS, and the observational
    joint over the endogenous variables (all exact rationals)."""

    variables: tuple[str, ...]
    levels: tuple[tuple[Level, ...], ...]
    p_yx: Fraction
    p_yxp: Fraction
    exact_pns: Fraction
    joint: Mapping[tuple[Level, ...], Fraction]

    def __post_init__(self):
        if self.exact_pns > min(self.p_yx, 1 - self.p_yxp):
            raise ScmFormatError("internal: PNS exceeds min(P(y_x), P(y'_x'))")

    def joint_table(self) -> JointTable:
        """The exact joint as integer counts over a common denominator."""
        denom = lcm(*(p.denominator for p in self.joint.values())) if self.joint else 1
        counts = {cell: int(p * denom) for cell, p in self.joint.items() if p > 0}
        return JointTable(self.variables, self.levels, counts, denom)


def _require_binary(m: ScmSpec, name: str) -> None:
    if not m.is_endogenous(name):
        raise UnknownNode(f"{name!r} is not an endogenous variable")
    if set(m.domain(name)) != {0, 1}:
        raise NonBinaryVariable(
            f"{name!r} has domain {m.domain(name)!r}; need exactly {{0, 1}}"
        )


def _exogenous_space(m: ScmSpec, cap: int):
    size = 1
    for _, dist in m.exogenous:
        size *= len(dist)
    if size > cap:
        raise StateSpaceTooLarge(f"exogenous space {size} exceeds cap {cap}")
    names = [n for n, _ in m.exogenous]
    for combo in product(*(dist for _, dist in m.exogenous)):
        p = Fraction(1)
        values = {}
        for name, (lvl, pr) in zip(names, combo):
            p *= pr
            values[name] = lvl
        if p == 0:
            continue
        yield values, p


def enumerate_counterfactuals(
    m: ScmSpec, x: str, y: str, cap: int = 1 << 24
) -> CounterfactualProfile:
    """Iterate every exogenous assignment, evaluating the outcome under
    do(x=1), do(x=0), and no intervention, accumulating exact PNS,
    interventional marginals, and the observational joint."""
    _require_binary(m, x)
    _require_binary(m, y)
    endo = m.endogenous_names
    p_yx = Fraction(0)
    p_yxp = Fraction(0)
    pns = Fraction(0)
    joint: dict[tuple[Level, ...], Fraction] = {}
    for values, p in _exogenous_space(m, cap):
        natural = m.evaluate(values)
        y1 = m.evaluate(values, {x: 1})[y]
        y0 = m.evaluate(values, {x: 0})[y]
        if y1 == 1:
            p_yx += p
        if y0 == 1:
            p_yxp += p
        if y1 == 1 and y0 == 0:
            pns += p
        cell = tuple(natural[v] for v in endo)
        joint[cell] = joint.get(cell, Fraction(0)) + p
    return CounterfactualProfile(
        variables=endo,
        levels=tuple(m.domain(v) for v in endo),
        p_yx=p_yx,
        p_yxp=p_yxp,
        exact_pns=pns,
        joint=joint,
    )


def stratified_counterfactuals(
    m: ScmSpec, x: str, y: str, z_vars: Sequence[str], cap: int = 1 << 24
) -> tuple[list[StratumQuantities], Fraction]:
    """Exact per-stratum quantities for covariates measured in the natural
    regime (valid bounds inputs when no z is a descendant of x), plus the
    exact population PNS."""
    _require_binary(m, x)
    _require_binary(m, y)
    z_vars = tuple(z_vars)
    for v in z_vars:
        m.domain(v)
    acc: dict[tuple[Level, ...], dict[str, Fraction]] = {}
    pns_total = Fraction(0)
    for values, p in _exogenous_space(m, cap):
        natural = m.evaluate(values)
        y1 = m.evaluate(values, {x: 1})[y]
        y0 = m.evaluate(values, {x: 0})[y]
        key = tuple(natural[v] for v in z_vars)
        slot = acc.setdefault(
            key,
            {k: Fraction(0) for k in ("w", "p_yx", "p_yxp", "xy", "xyp", "xpy", "xpyp")},
        )
        slot["w"] += p
        if y1 == 1:
            slot["p_yx"] += p
        if y0 == 1:
            slot["p_yxp"] += p
        if y1 == 1 and y0 == 0:
            pns_total += p
        xv, yv = natural[x], natural[y]
        cell = {(1, 1): "xy", (1, 0): "xyp", (0, 1): "xpy", (0, 0): "xpyp"}[(xv, yv)]
        slot[cell] += p
    strata = []
    for key in sorted(acc, key=str):
        slot = acc[key]
        w = slot["w"]
        if w == 0:
            continue
        label = ",".join(f"{v}={lvl}" for v, lvl in zip(z_vars, key))
        q = CausalQuantities(
            p_yx=float(slot["p_yx"] / w),
            p_yxp=float(slot["p_yxp"] / w),
            p_xy=float(slot["xy"] / w),
            p_xyp=float(slot["xyp"] / w),
            p_xpy=float(slot["xpy"] / w),
            p_xpyp=float(slot["xpyp"] / w),
        )
        strata.append(StratumQuantities(label, float(w), q))
    return strata, pns_total


def sample(m: ScmSpec, n: int, seed: int) -> DiscreteDataset:
    """n i.i.d. draws from the observational distribution, deterministic
    given the seed (Philox counter-based generator)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    index: dict[str, np.ndarray] = {}
    for name, dist in m.exogenous:
        probs = np.array([float(p) for _, p in dist])
        probs = probs / probs.sum()
        index[name] = rng.choice(len(dist), size=n, p=probs)
    for mech in m.topological_mechanisms:
        parent_domains = [m.domain(p) for p in mech.parents]
        out_domain = m.domain(mech.name)
        out_pos = {lvl: i for i, lvl in enumerate(out_domain)}
        lookup = np.zeros([len(d) for d in parent_domains] or [1], dtype=np.int64)
        for combo_idx in product(*(range(len(d)) for d in parent_domains)):
            key = tuple(d[i] for d, i in zip(parent_domains, combo_idx))
            lookup[combo_idx if combo_idx else (0,)] = out_pos[mech.table[key]]
        if mech.parents:
            index[mech.name] = lookup[tuple(index[p] for p in mech.parents)]
        else:
            index[mech.name] = np.full(n, lookup[0], dtype=np.int64)
    endo = m.endogenous_names
    columns = [np.asarray(m.domain(v), dtype=object)[index[v]] for v in endo]
    rows = tuple(zip(*columns)) if columns else ()
    rows = tuple(tuple(canon_level(c) for c in row) for row in rows)
    meta = {"rng": RNG_ID, "seed": str(seed), "n": str(n)}
    return DiscreteDataset(endo, tuple(m.domain(v) for v in endo), rows, meta)


def random_scm(n_covariates: int, seed: int, mode: str = "confounder") -> ScmSpec:
    """Random binary SCM whose covariates are non-descendants of X.

    mode "confounder": every covariate is a parent of both X and Y (the
    joint covariate set is backdoor-admissible); "outcome": covariates feed
    Y only; "mixed": each covariate picks one role at random. Exogenous
    probabilities are rationals with denominator 32 so enumeration sums stay
    exactly representable; treatment propensities stay inside (0, 1) in
    every stratum.
    """
    if not 0 <= n_covariates <= 4:
        raise ValueError("n_covariates must be in 0..4")
    if mode not in ("confounder", "outcome", "mixed"):
        raise ValueError(f"unknown mode {mode!r}")
    rnd = random.Random(seed)
    z_names = [f"Z{i + 1}" for i in range(n_covariates)]
    roles = {
        z: (mode == "confounder" or (mode == "mixed" and rnd.random() < 0.5))
        for z in z_names
    }
    exogenous: list[tuple[str, dict[Level, Fraction]]] = []
    mechanisms: list[Mechanism] = []
    for z in z_names:
        p1 = Fraction(rnd.randint(4, 28), 32)
        exogenous.append((f"U_{z}", {0: 1 - p1, 1: p1}))
        mechanisms.append(Mechanism(z, (f"U_{z}",), {(0,): 0, (1,): 1}))
    x_parents = tuple(z for z in z_names if roles[z])
    exogenous.append(("U_X", {i: Fraction(1, 4) for i in range(4)}))
    x_table = {}
    for combo in product((0, 1), repeat=len(x_parents)):
        cut = rnd.randint(1, 3)  # keeps both treatment arms reachable
        for u in range(4):
            x_table[combo + (u,)] = 1 if u < cut else 0
    mechanisms.append(Mechanism("X", x_parents + ("U_X",), x_table))
    # each (stratum, noise) cell draws a response type, so the outcome's two
    # potential values range over never/always/complier/defier takers and the
    # exact PNS can land anywhere inside the bounds
    exogenous.append(("U_Y", {i: Fraction(1, 8) for i in range(8)}))
    responses = ((0, 0), (1, 1), (0, 1), (1, 0))  # (y under x=0, y under x=1)
    y_table = {}
    for combo in product((0, 1), repeat=len(z_names)):
        for u in range(8):
            y0, y1 = responses[rnd.randrange(4)]
            y_table[combo + (0, u)] = y0
            y_table[combo + (1, u)] = y1
    mechanisms.append(Mechanism("Y", tuple(z_names) + ("X", "U_Y"), y_table))
    return ScmSpec(tuple(exogenous), tuple(mechanisms), seed=seed)


# -- spec file -----------------------------------------------------------------

def dump_scm(m: ScmSpec) -> str:
    doc = {
        "exogenous": {
            name: {str(lvl): f"{p.numerator}/{p.denominator}" for lvl, p in dist}
            for name, dist in m.exogenous
        },
        "mechanisms": [
            {
                "name": mech.name,
                "parents": list(mech.parents),
                "table": [list(k) + [v] for k, v in sorted(mech.table.items(), key=str)],
            }
            for mech in m.mechanisms
        ],
        "seed": m.seed,
    }
    return json.dumps(doc, indent=2) + "\n"  # field order is already canonical


def load_scm(text: str) -> ScmSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScmFormatError(f"invalid SCM file: {exc}") from exc
    if not isinstance(doc, dict) or "exogenous" not in doc or "mechanisms" not in doc:
        raise ScmFormatError("SCM file needs 'exogenous' and 'mechanisms'")
    exogenous = tuple(
        (name, {canon_level(lvl): _as_fraction(p) for lvl, p in dist.items()})
        for name, dist in doc["exogenous"].items()
    )
    mechanisms = []
    for item in doc["mechanisms"]:
        try:
            rows = {tuple(row[:-1]): row[-1] for row in item["table"]}
            mechanisms.append(Mechanism(item["name"], tuple(item["parents"]), rows))
        except (KeyError, TypeError, IndexError) as exc:
            raise ScmFormatError(f"bad mechanism entry {item!r}: {exc}") from exc
    return ScmSpec(exogenous, tuple(mechanisms), seed=doc.get("seed"))
