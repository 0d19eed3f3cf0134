"""Subgroup stratification with the minimum-sample-size rule.

Each subgroup gets the same analysis as the full population: backdoor
do-estimates plus observational PNS bounds, flagged (never hidden) when the
group is too small for the requested margin of error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from .dataset import DiscreteDataset, Level, canon_level
from .errors import ToolkitError
from .estimate import (
    EmptyCondition,
    Event,
    PositivityViolation,
    UnknownVariable,
    do_adjust,
    tabulate,
)
from .pns import PnsInterval, pns_bounds_thm2

Z_SCORES = {0.90: 1.645, 0.95: 1.960, 0.99: 2.576}


class InvalidMargin(ToolkitError):
    """Margin outside (0, 1) or confidence level without a tabulated z."""


def required_n(margin: float, confidence: float = 0.95) -> int:
    """Worst-case (p = 0.5) binomial sample size: ceil(z^2 / 4 margin^2)."""
    if not 0 < margin < 1:
        raise InvalidMargin(f"margin must be in (0, 1), got {margin!r}")
    z = Z_SCORES.get(confidence)
    if z is None:
        raise InvalidMargin(
            f"confidence must be one of {sorted(Z_SCORES)}, got {confidence!r}"
        )
    return math.ceil(z * z * 0.25 / (margin * margin))


def achieved_margin(n: int, confidence: float = 0.95) -> float:
    """Worst-case margin of error actually attained by n observations."""
    z = Z_SCORES.get(confidence)
    if z is None:
        raise InvalidMargin(f"confidence must be one of {sorted(Z_SCORES)}")
    return z * 0.5 / math.sqrt(n)


@dataclass(frozen=True)
class SubgroupSpec:
    """Named conjunction of (variable, allowed levels) constraints."""

    name: str
    constraints: tuple[tuple[str, frozenset], ...]

    def __post_init__(self):
        canon = []
        for var, levels in self.constraints:
            if isinstance(levels, (str, int)):
                levels = (levels,)
            canon.append((var, frozenset(canon_level(l) for l in levels)))
        names = [v for v, _ in canon]
        if len(set(names)) != len(names):
            raise ValueError(f"{self.name}: contradictory duplicate constraints on {names}")
        if any(not lv for _, lv in canon):
            raise ValueError(f"{self.name}: empty level set")
        object.__setattr__(self, "constraints", tuple(canon))

    @classmethod
    def of(cls, name: str, **constraints: Level | Iterable[Level]) -> "SubgroupSpec":
        return cls(name, tuple(constraints.items()))


@dataclass(frozen=True)
class SubgroupReport:
    """Per-subgroup bounds, do-estimates, and the size-rule verdict."""

    spec: SubgroupSpec
    n: int
    interval: PnsInterval
    do_x1: float
    do_x0: float
    meets_size: bool
    margin: float


@dataclass(frozen=True)
class AnalysisConfig:
    margin: float = 0.05
    confidence: float = 0.95
    alpha_smoothing: float = 0.0


def filter_subgroup(d: DiscreteDataset, spec: SubgroupSpec) -> DiscreteDataset:
    """Rows matching every constraint; schema (variables, levels) unchanged."""
    cols = []
    for var, levels in spec.constraints:
        idx = d.column_index(var)  # raises UnknownVariable
        declared = set(d.levels_of(var))
        bad = levels - declared
        if bad:
            raise UnknownVariable(
                f"{spec.name}: levels {sorted(bad, key=str)} not declared for {var!r}"
            )
        cols.append((idx, levels))
    rows = tuple(
        row for row in d.rows if all(row[i] in levels for i, levels in cols)
    )
    if not rows:
        raise EmptyCondition(f"subgroup {spec.name!r} matches no rows")
    meta = dict(d.meta)
    meta["subgroup"] = spec.name
    return DiscreteDataset(d.variables, d.levels, rows, meta)


def analyze_subgroup(
    d: DiscreteDataset,
    spec: SubgroupSpec,
    x_event: Event,
    y_event: Event,
    adjust: Sequence[str] = (),
    config: AnalysisConfig = AnalysisConfig(),
) -> SubgroupReport:
    """Observational PNS bounds and do-estimates inside the subgroup.

    Undersized groups are analyzed and flagged via meets_size rather than
    suppressed. Positivity failures are re-raised with the subgroup name.
    """
    sub = filter_subgroup(d, spec)
    (x_var, x1), = x_event.assignments
    x_levels = sub.levels_of(x_var)
    if len(x_levels) != 2:
        raise UnknownVariable(f"treatment {x_var!r} must be binary")
    x0 = x_levels[0] if x1 == x_levels[1] else x_levels[1]
    table = tabulate(sub, (x_var,) + tuple(y_event.variables) + tuple(adjust))
    alpha = config.alpha_smoothing
    try:
        interval = pns_bounds_thm2(table, x_event, y_event, adjust, alpha=alpha)
        do_x1 = do_adjust(table, Event(((x_var, x1),)), y_event, adjust, alpha=alpha)
        do_x0 = do_adjust(table, Event(((x_var, x0),)), y_event, adjust, alpha=alpha)
    except (PositivityViolation, EmptyCondition) as exc:
        raise type(exc)(f"subgroup {spec.name!r}: {exc}") from exc
    needed = required_n(config.margin, config.confidence)
    return SubgroupReport(
        spec=spec,
        n=sub.n,
        interval=interval,
        do_x1=do_x1,
        do_x0=do_x0,
        meets_size=sub.n >= needed,
        margin=achieved_margin(sub.n, config.confidence),
    )


def scan_subgroups(
    d: DiscreteDataset,
    candidate_vars: Sequence[str],
    x_event: Event,
    y_event: Event,
    adjust: Sequence[str] = (),
    config: AnalysisConfig = AnalysisConfig(),
    depth: int = 1,
    min_n: int = 0,
) -> list[SubgroupReport]:
    """Enumerate single-level constraint combinations over the candidate
    variables up to ``depth``, skip groups under ``min_n`` rows, and return
    reports sorted by lower bound (descending), ties broken by name.

    Groups whose strata break positivity are skipped with a warning rather
    than aborting the scan.
    """
    reserved = set(x_event.variables) | set(y_event.variables) | set(adjust)
    for var in candidate_vars:
        d.column_index(var)
        if var in reserved:
            raise UnknownVariable(f"candidate {var!r} overlaps x/y/adjustment")
    reports: list[SubgroupReport] = []
    for size in range(1, depth + 1):
        for subset in combinations(candidate_vars, size):
            for combo in product(*(d.levels_of(v) for v in subset)):
                name = "_".join(f"{v}={lvl}" for v, lvl in zip(subset, combo))
                spec = SubgroupSpec(name, tuple((v, frozenset([lvl])) for v, lvl in zip(subset, combo)))
                idx = [d.column_index(v) for v in subset]
                n = sum(
                    1 for row in d.rows
                    if all(row[i] == lvl for i, lvl in zip(idx, combo))
                )
                if n < max(min_n, 1):
                    continue
                try:
                    reports.append(
                        analyze_subgroup(d, spec, x_event, y_event, adjust, config)
                    )
                except (PositivityViolation, EmptyCondition) as exc:
                    warnings.warn(f"skipping {name}: {exc}", stacklevel=2)
    reports.sort(key=lambda r: (-r.interval.lower, r.spec.name))
    return reports
