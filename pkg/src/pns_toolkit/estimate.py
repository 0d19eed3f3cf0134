"""Empirical probabilities over a discrete dataset and backdoor adjustment.

All probability arithmetic is plain binary64; stratum sums use compensated
summation (math.fsum). Estimates are maximum-likelihood cell frequencies
unless an additive smoothing alpha is passed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, NamedTuple

from .dataset import DiscreteDataset, Level
from .errors import ToolkitError


class UnknownVariable(ToolkitError):
    """A referenced variable is not part of the table or dataset."""


class EmptyCondition(ToolkitError):
    """The conditioning event has zero support, so the estimate is undefined."""


class PositivityViolation(ToolkitError):
    """A covariate stratum with positive weight has an empty treatment arm."""


@dataclass(frozen=True)
class Event:
    """A partial assignment of levels to variables, e.g. X=1."""

    assignments: tuple[tuple[str, Level], ...]

    def __post_init__(self):
        names = [v for v, _ in self.assignments]
        if len(set(names)) != len(names):
            raise UnknownVariable(f"event repeats a variable: {names}")
        object.__setattr__(self, "assignments", tuple(sorted(self.assignments)))

    @classmethod
    def of(cls, **kwargs: Level) -> "Event":
        return cls(tuple(kwargs.items()))

    @classmethod
    def parse(cls, text: str) -> "Event":
        """Parse ``VAR=LEVEL`` (comma-separated for joint events)."""
        pairs = []
        for part in text.split(","):
            if "=" not in part:
                raise UnknownVariable(f"expected VAR=LEVEL, got {part!r}")
            name, _, raw = part.partition("=")
            pairs.append((name.strip(), _canon_level(raw.strip())))
        return cls(tuple(pairs))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.assignments)

    def items(self):
        return iter(self.assignments)

    def __str__(self) -> str:
        return ",".join(f"{v}={lvl}" for v, lvl in self.assignments)


def _canon_level(raw) -> Level:
    """Levels that look like integers are integers; anything else stays str."""
    if isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    text = str(raw)
    try:
        return int(text)
    except ValueError:
        return text


class ProbEstimate(NamedTuple):
    value: float
    support: int  # rows matching the conditioning event


@dataclass(frozen=True)
class JointTable:
    """Exact count table over a tuple of variables.

    ``counts`` maps full level assignments (in ``variables`` order) to
    nonnegative counts; cells with zero count may be omitted. ``levels``
    carries each variable's declared level alphabet, which may exceed the
    observed support.
    """

    variables: tuple[str, ...]
    levels: tuple[tuple[Level, ...], ...]
    counts: Mapping[tuple[Level, ...], int]
    total: int

    def __post_init__(self):
        if self.total != sum(self.counts.values()):
            raise ValueError("total must equal the sum of counts")
        if self.total < 1:
            raise ValueError("joint table must contain at least one observation")

    def index_of(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise UnknownVariable(f"variable {var!r} not in table") from None

    def levels_of(self, var: str) -> tuple[Level, ...]:
        return self.levels[self.index_of(var)]

    def count(self, event: Event) -> int:
        idx = [(self.index_of(v), lvl) for v, lvl in event.items()]
        return sum(
            c for cell, c in self.counts.items()
            if all(cell[i] == lvl for i, lvl in idx)
        )


def tabulate(dataset: DiscreteDataset, variables: Iterable[str] | None = None) -> JointTable:
    """Exact marginal count table over the given variables (all by default)."""
    names = tuple(variables) if variables is not None else dataset.variables
    cols = [dataset.column_index(v) for v in names]  # raises UnknownVariable
    counts: dict[tuple[Level, ...], int] = {}
    for row in dataset.rows:
        cell = tuple(row[i] for i in cols)
        counts[cell] = counts.get(cell, 0) + 1
    levels = tuple(dataset.levels_of(v) for v in names)
    return JointTable(names, levels, counts, dataset.n)


def marginalize(table: JointTable, variables: Iterable[str]) -> JointTable:
    names = tuple(variables)
    cols = [table.index_of(v) for v in names]
    counts: dict[tuple[Level, ...], int] = {}
    for cell, c in table.counts.items():
        key = tuple(cell[i] for i in cols)
        counts[key] = counts.get(key, 0) + c
    levels = tuple(table.levels[i] for i in cols)
    return JointTable(names, levels, counts, table.total)


def _check_disjoint(event: Event, given: Event) -> None:
    overlap = set(event.variables) & set(given.variables)
    if overlap:
        raise UnknownVariable(f"event and condition share variables: {sorted(overlap)}")


def _n_event_cells(table: JointTable, event: Event) -> int:
    n = 1
    for v, _ in event.items():
        n *= len(table.levels_of(v))
    return n


def prob(
    table: JointTable,
    event: Event,
    given: Event = Event(()),
    alpha: float = 0.0,
) -> ProbEstimate:
    """Conditional relative frequency P(event | given) with its support count.

    Raises EmptyCondition when no row matches ``given``, distinguishing an
    undefined estimate from a genuine 0.0.
    """
    _check_disjoint(event, given)
    for v, lvl in list(event.items()) + list(given.items()):
        if lvl not in table.levels_of(v):
            raise UnknownVariable(f"level {lvl!r} not declared for {v!r}")
    n_given = table.count(given) if given.assignments else table.total
    if n_given == 0 and alpha == 0.0:
        raise EmptyCondition(f"no rows match condition {given}")
    joint = Event(given.assignments + event.assignments)
    n_joint = table.count(joint)
    denom = n_given + alpha * _n_event_cells(table, event)
    if denom == 0:
        raise EmptyCondition(f"no rows match condition {given}")
    return ProbEstimate((n_joint + alpha) / denom, n_given)


def do_adjust(
    table: JointTable,
    x_event: Event,
    y_event: Event,
    adjust: Iterable[str] = (),
    alpha: float = 0.0,
) -> float:
    """Backdoor adjustment: sum over z of P(y | x, z) * P(z).

    Strata with zero weight are skipped; a stratum with positive weight but
    no rows in the x arm raises PositivityViolation naming the stratum.
    With an empty adjustment set this reduces bit-for-bit to prob(y | x).
    """
    z_vars = tuple(adjust)
    used = set(x_event.variables) | set(y_event.variables)
    for v in z_vars:
        if v in used:
            raise UnknownVariable(f"adjustment variable {v!r} overlaps x/y events")
        table.index_of(v)
    terms: list[float] = []
    for combo in product(*(table.levels_of(v) for v in z_vars)):
        z_event = Event(tuple(zip(z_vars, combo)))
        n_z = table.count(z_event) if z_vars else table.total
        if n_z == 0:
            continue
        xz_event = Event(x_event.assignments + z_event.assignments)
        n_xz = table.count(xz_event)
        if n_xz == 0 and alpha == 0.0:
            raise PositivityViolation(
                f"stratum {z_event} has {n_z} rows but none with {x_event}"
            )
        p_y_given_xz = prob(table, y_event, xz_event, alpha=alpha).value
        terms.append(p_y_given_xz * (n_z / table.total))
    return math.fsum(terms)
