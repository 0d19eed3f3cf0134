"""Bounds on the probability of necessity and sufficiency.

Three routes: population tight bounds from interventional + observational
probabilities, covariate-stratified bounds for covariate sets containing no
descendant of the treatment, and purely observational bounds when the
covariates satisfy the backdoor criterion. Stratum sums use compensated
summation so results are reproducible regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

from .dataset import DiscreteDataset
from .errors import ToolkitError
from .estimate import (
    Event,
    JointTable,
    PositivityViolation,
    UnknownVariable,
    do_adjust,
    prob,
    tabulate,
)
from .graph import CausalGraph

_EPS = 1e-9


class InvalidQuantities(ToolkitError):
    """A probability input violates its invariants; the message names which."""


class WeightMismatch(ToolkitError):
    """Stratum weights do not sum to one."""


class NoAdmissibleSet(ToolkitError):
    """No backdoor-admissible adjustment set could be selected."""


def _check_unit(name: str, v: float) -> float:
    if not (-_EPS <= v <= 1.0 + _EPS) or math.isnan(v):
        raise InvalidQuantities(f"{name}={v!r} is not a probability")
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class CausalQuantities:
    """Inputs to the population bounds: interventional P(y_x), P(y_x') and
    the four observational joint cells. p_y is derived unless supplied."""

    p_yx: float
    p_yxp: float
    p_xy: float
    p_xyp: float
    p_xpy: float
    p_xpyp: float
    p_y: float | None = None

    def __post_init__(self):
        for name in ("p_yx", "p_yxp", "p_xy", "p_xyp", "p_xpy", "p_xpyp"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))
        cells = self.p_xy + self.p_xyp + self.p_xpy + self.p_xpyp
        if abs(cells - 1.0) > _EPS:
            raise InvalidQuantities(f"joint cells sum to {cells!r}, not 1")
        marginal = self.p_xy + self.p_xpy
        if self.p_y is None:
            object.__setattr__(self, "p_y", marginal)
        elif abs(self.p_y - marginal) > _EPS:
            raise InvalidQuantities(
                f"p_y={self.p_y!r} inconsistent with P(x,y)+P(x',y)={marginal!r}"
            )


@dataclass(frozen=True)
class StratumQuantities:
    """CausalQuantities conditional on one covariate stratum."""

    label: str
    weight: float
    quantities: CausalQuantities

    def __post_init__(self):
        if not (-_EPS <= self.weight <= 1.0 + _EPS) or math.isnan(self.weight):
            raise InvalidQuantities(f"stratum {self.label!r} weight {self.weight!r}")
        object.__setattr__(self, "weight", min(1.0, max(0.0, self.weight)))


@dataclass(frozen=True)
class PnsInterval:
    """A [lower, upper] interval with the bound route and, per stratum, the
    max/min argument that was active."""

    lower: float
    upper: float
    method: str  # "tp" | "thm1" | "thm2"
    binding_terms: tuple[tuple[str, str, str], ...]  # (stratum, lower term, upper term)

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise InvalidQuantities("bound is NaN")
        lower = min(1.0, max(0.0, self.lower))
        upper = min(1.0, max(0.0, self.upper))
        if abs(lower - self.lower) > _EPS or abs(upper - self.upper) > _EPS:
            raise InvalidQuantities(
                f"bounds [{self.lower!r}, {self.upper!r}] escape [0, 1]"
            )
        if lower > upper + 1e-12:
            raise InvalidQuantities(
                f"infeasible quantities: lower {lower!r} exceeds upper {upper!r}"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", min(1.0, max(upper, lower)))

    def width(self) -> float:
        return self.upper - self.lower


def _tp_terms(q: CausalQuantities) -> tuple[float, str, float, str]:
    lower_args = (
        ("0", 0.0),
        ("P(y_x)-P(y_x')", q.p_yx - q.p_yxp),
        ("P(y)-P(y_x')", q.p_y - q.p_yxp),
        ("P(y_x)-P(y)", q.p_yx - q.p_y),
    )
    upper_args = (
        ("P(y_x)", q.p_yx),
        ("P(y'_x')", 1.0 - q.p_yxp),
        ("P(x,y)+P(x',y')", q.p_xy + q.p_xpyp),
        ("P(y_x)-P(y_x')+P(x,y')+P(x',y)", q.p_yx - q.p_yxp + q.p_xyp + q.p_xpy),
    )
    low_name, low = max(lower_args, key=lambda kv: kv[1])
    up_name, up = min(upper_args, key=lambda kv: kv[1])
    return low, low_name, up, up_name


def pns_bounds_tp(q: CausalQuantities) -> PnsInterval:
    """Population tight bounds from interventional and observational inputs."""
    low, low_name, up, up_name = _tp_terms(q)
    return PnsInterval(low, up, "tp", (("", low_name, up_name),))


def pns_bounds_thm1(strata: Sequence[StratumQuantities]) -> PnsInterval:
    """Stratified bounds for a covariate set with no descendant of the
    treatment: the population max/min moves inside the stratum sum."""
    if not strata:
        raise WeightMismatch("no strata supplied")
    total = math.fsum(s.weight for s in strata)
    if abs(total - 1.0) > _EPS:
        raise WeightMismatch(f"stratum weights sum to {total!r}, not 1")
    lows: list[float] = []
    ups: list[float] = []
    binding: list[tuple[str, str, str]] = []
    for s in strata:
        if s.weight == 0.0:
            continue  # zero-weight strata contribute nothing
        low, low_name, up, up_name = _tp_terms(s.quantities)
        lows.append(low * s.weight)
        ups.append(up * s.weight)
        binding.append((s.label, low_name, up_name))
    return PnsInterval(math.fsum(lows), math.fsum(ups), "thm1", tuple(binding))


def _binary_pair(table: JointTable, event: Event, what: str):
    if len(event.assignments) != 1:
        raise InvalidQuantities(f"{what} event must assign exactly one variable")
    (var, level), = event.assignments
    levels = table.levels_of(var)
    if len(levels) != 2:
        raise InvalidQuantities(
            f"{what} variable {var!r} must be binary, has levels {levels!r}"
        )
    if level not in levels:
        raise UnknownVariable(f"level {level!r} not declared for {var!r}")
    other = levels[0] if level == levels[1] else levels[1]
    return var, level, other


def pns_bounds_thm2(
    table: JointTable,
    x_event: Event,
    y_event: Event,
    adjust: Iterable[str] = (),
    alpha: float = 0.0,
) -> PnsInterval:
    """Observational bounds under a backdoor-admissible covariate set:
    sum over z of max{0, P(y|x,z)-P(y|x',z)} * P(z) below and
    min{P(y|x,z), P(y'|x',z)} * P(z) above."""
    x_var, x1, x0 = _binary_pair(table, x_event, "treatment")
    y_var, _, _ = _binary_pair(table, y_event, "outcome")
    z_vars = tuple(adjust)
    for v in z_vars:
        if v in (x_var, y_var):
            raise UnknownVariable(f"adjustment variable {v!r} overlaps x/y")
        table.index_of(v)
    lows: list[float] = []
    ups: list[float] = []
    binding: list[tuple[str, str, str]] = []
    for combo in product(*(table.levels_of(v) for v in z_vars)):
        z_event = Event(tuple(zip(z_vars, combo)))
        n_z = table.count(z_event) if z_vars else table.total
        if n_z == 0:
            continue
        weight = n_z / table.total
        arm_x = Event(z_event.assignments + ((x_var, x1),))
        arm_xp = Event(z_event.assignments + ((x_var, x0),))
        if alpha == 0.0:
            for arm in (arm_x, arm_xp):
                if table.count(arm) == 0:
                    raise PositivityViolation(
                        f"stratum {z_event} has {n_z} rows but none with {arm}"
                    )
        p_y_xz = prob(table, y_event, arm_x, alpha=alpha).value
        p_y_xpz = prob(table, y_event, arm_xp, alpha=alpha).value
        low_args = (("0", 0.0), ("P(y|x,z)-P(y|x',z)", p_y_xz - p_y_xpz))
        up_args = (("P(y|x,z)", p_y_xz), ("P(y'|x',z)", 1.0 - p_y_xpz))
        low_name, low = max(low_args, key=lambda kv: kv[1])
        up_name, up = min(up_args, key=lambda kv: kv[1])
        lows.append(low * weight)
        ups.append(up * weight)
        binding.append((str(z_event), low_name, up_name))
    if not binding:
        raise WeightMismatch("no populated covariate stratum")
    return PnsInterval(math.fsum(lows), math.fsum(ups), "thm2", tuple(binding))


# -- quantity builders --------------------------------------------------------

def observational_quantities(
    table: JointTable,
    x_event: Event,
    y_event: Event,
    p_yx: float,
    p_yxp: float,
) -> CausalQuantities:
    """Assemble CausalQuantities from a table's (X, Y) joint plus externally
    supplied interventional probabilities."""
    x_var, x1, x0 = _binary_pair(table, x_event, "treatment")
    y_var, y1, y0 = _binary_pair(table, y_event, "outcome")
    cell = lambda xv, yv: table.count(Event(((x_var, xv), (y_var, yv)))) / table.total
    return CausalQuantities(
        p_yx=p_yx,
        p_yxp=p_yxp,
        p_xy=cell(x1, y1),
        p_xyp=cell(x1, y0),
        p_xpy=cell(x0, y1),
        p_xpyp=cell(x0, y0),
    )


def adjusted_quantities(
    table: JointTable,
    x_event: Event,
    y_event: Event,
    adjust: Iterable[str] = (),
    alpha: float = 0.0,
) -> CausalQuantities:
    """CausalQuantities whose interventional terms come from the backdoor
    adjustment formula applied to the same table."""
    x_var, x1, x0 = _binary_pair(table, x_event, "treatment")
    p_yx = do_adjust(table, Event(((x_var, x1),)), y_event, adjust, alpha=alpha)
    p_yxp = do_adjust(table, Event(((x_var, x0),)), y_event, adjust, alpha=alpha)
    return observational_quantities(table, x_event, y_event, p_yx, p_yxp)


def stratified_observational_quantities(
    table: JointTable,
    x_event: Event,
    y_event: Event,
    adjust: Iterable[str],
    alpha: float = 0.0,
) -> list[StratumQuantities]:
    """Per-stratum quantities treating P(y_x | z) as P(y | x, z), valid when
    the strata themselves form the full backdoor set."""
    x_var, x1, x0 = _binary_pair(table, x_event, "treatment")
    y_var, y1, y0 = _binary_pair(table, y_event, "outcome")
    z_vars = tuple(adjust)
    out: list[StratumQuantities] = []
    for combo in product(*(table.levels_of(v) for v in z_vars)):
        z_event = Event(tuple(zip(z_vars, combo)))
        n_z = table.count(z_event) if z_vars else table.total
        if n_z == 0:
            continue
        cond = lambda xv, yv: table.count(
            Event(z_event.assignments + ((x_var, xv), (y_var, yv)))
        ) / n_z
        arm = lambda xv: Event(z_event.assignments + ((x_var, xv),))
        if alpha == 0.0 and (table.count(arm(x1)) == 0 or table.count(arm(x0)) == 0):
            raise PositivityViolation(f"stratum {z_event} lacks a treatment arm")
        p_y_xz = prob(table, y_event, arm(x1), alpha=alpha).value
        p_y_xpz = prob(table, y_event, arm(x0), alpha=alpha).value
        q = CausalQuantities(
            p_yx=p_y_xz,
            p_yxp=p_y_xpz,
            p_xy=cond(x1, y1),
            p_xyp=cond(x1, y0),
            p_xpy=cond(x0, y1),
            p_xpyp=cond(x0, y0),
        )
        out.append(StratumQuantities(str(z_event), n_z / table.total, q))
    return out


# -- pipeline ------------------------------------------------------------------

@dataclass(frozen=True)
class PnsReport:
    """Composed result: the covariate set used, both bound routes, and the
    stratum provenance backing them."""

    x_event: Event
    y_event: Event
    z_used: tuple[str, ...]
    z_source: str  # "explicit" | "backdoor-search"
    admissible: bool | None
    n: int
    tp: PnsInterval
    thm2: PnsInterval
    strata: tuple[tuple[str, float, int], ...]
    minimal_sets: tuple[tuple[str, ...], ...] | None


def pns_report(
    dataset: DiscreteDataset,
    graph: CausalGraph | None,
    x_event: Event,
    y_event: Event,
    adjust: Iterable[str] | None = None,
    max_size: int = 4,
    alpha: float = 0.0,
) -> PnsReport:
    """Select a covariate set (explicit, or the first minimal backdoor set),
    then compute the observational bounds and the population bounds fed with
    adjusted interventional terms."""
    (x_var, _), = x_event.assignments
    (y_var, _), = y_event.assignments
    minimal: tuple[tuple[str, ...], ...] | None = None
    admissible: bool | None = None
    if adjust is not None:
        z_used = tuple(adjust)
        z_source = "explicit"
        if graph is not None and x_var in graph and y_var in graph:
            try:
                admissible = graph.satisfies_backdoor(x_var, y_var, z_used)
            except ToolkitError:
                admissible = None
    else:
        if graph is None:
            raise NoAdmissibleSet("no graph given and no explicit adjustment set")
        if x_var not in graph or y_var not in graph:
            raise NoAdmissibleSet(
                f"graph lacks {x_var!r} or {y_var!r}; cannot search for a backdoor set"
            )
        sets = graph.find_backdoor_sets(x_var, y_var, max_size=max_size)
        if not sets:
            raise NoAdmissibleSet(
                f"no admissible set of size <= {max_size} for ({x_var}, {y_var})"
            )
        minimal = tuple(tuple(sorted(s)) for s in sets)
        z_used = minimal[0]
        z_source = "backdoor-search"
        admissible = True
    table = tabulate(dataset, (x_var, y_var) + tuple(z_used))
    thm2 = pns_bounds_thm2(table, x_event, y_event, z_used, alpha=alpha)
    tp = pns_bounds_tp(adjusted_quantities(table, x_event, y_event, z_used, alpha=alpha))
    strata = tuple(
        (s.label, s.weight, table.count(Event.parse(s.label)) if s.label else table.total)
        for s in stratified_observational_quantities(table, x_event, y_event, z_used, alpha=alpha)
    )
    return PnsReport(
        x_event=x_event,
        y_event=y_event,
        z_used=tuple(z_used),
        z_source=z_source,
        admissible=admissible,
        n=dataset.n,
        tp=tp,
        thm2=thm2,
        strata=strata,
        minimal_sets=minimal,
    )
