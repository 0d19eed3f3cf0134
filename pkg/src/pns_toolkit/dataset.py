"""Ingest survey tables (XPT / CSV), merge them on a respondent key, and
recode raw variables into binary analysis variables.

Raw cells are float | str | None (None = missing). A cell is treated as
missing either because the source file had no value or because its value is
listed in the variable's missing codes. Recoding emits a DiscreteDataset,
which never contains missing cells: rows that still miss an emitted variable
are dropped and the drop counts recorded in the dataset metadata.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import xpt
from .errors import ToolkitError
from .xpt import MalformedHeader, TruncatedRecord, UnsupportedVersion  # noqa: F401

Level = int | str
RawCell = float | int | str | None

# NHANES questionnaire convention: refused / don't know codes. Applied only
# where a recode config opts in ("nhanes"), never silently: 7.0 is a valid
# A1C reading.
NHANES_MISSING = frozenset({7, 77, 777, 7777, 9, 99, 999, 9999})


class RaggedRow(ToolkitError):
    """A CSV row has a different cell count than the header."""


class EmptyHeader(ToolkitError):
    """The CSV header row is absent or empty."""


class MissingKey(ToolkitError):
    """A table lacks the merge key variable."""


class DuplicateKey(ToolkitError):
    """A key value occurs more than once within one table."""


class UnmappedValue(ToolkitError):
    """A raw value is outside a recode rule's domain and not a missing code."""


class UnknownSource(ToolkitError):
    """A recode rule references a variable absent from the table."""


class DatasetFormatError(ToolkitError):
    """A dataset or recode-config file could not be parsed."""


def canon_value(v: RawCell) -> RawCell:
    """Integral floats become ints so codes compare equal across sources."""
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def canon_level(v) -> Level:
    if isinstance(v, bool):
        raise ValueError("levels must be int or str")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    text = str(v)
    try:
        return int(text)
    except ValueError:
        return text


def _level_sort_key(lvl: Level):
    return (0, lvl, "") if isinstance(lvl, int) else (1, 0, lvl)


@dataclass(frozen=True)
class VariableSchema:
    """Declared kind and missing codes for one raw variable."""

    name: str
    kind: str = "continuous"  # "continuous" | "categorical"
    levels: tuple[Level, ...] = ()
    missing_codes: frozenset = frozenset()
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"{self.name}: duplicate level codes")
        codes = frozenset(canon_value(c) for c in self.missing_codes)
        if codes & set(self.levels):
            raise ValueError(f"{self.name}: missing codes overlap declared levels")
        object.__setattr__(self, "missing_codes", codes)

    def is_missing(self, cell: RawCell) -> bool:
        return cell is None or canon_value(cell) in self.missing_codes


@dataclass(frozen=True)
class RawTable:
    """Rectangular table of raw cells, immutable once returned."""

    schema: tuple[VariableSchema, ...]
    rows: tuple[tuple[RawCell, ...], ...]
    key_variable: str | None = None

    def __post_init__(self):
        width = len(self.schema)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRow(f"row {i} has {len(row)} cells, expected {width}")
        if self.key_variable is not None:
            keys = self.column(self.key_variable)
            seen = set()
            for k in keys:
                ck = canon_value(k)
                if ck in seen:
                    raise DuplicateKey(f"key {self.key_variable}={k!r} repeats")
                seen.add(ck)

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.schema)

    @property
    def n(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        for i, s in enumerate(self.schema):
            if s.name == name:
                return i
        raise MissingKey(f"variable {name!r} not in table")

    def column(self, name: str) -> list[RawCell]:
        i = self.column_index(name)
        return [row[i] for row in self.rows]

    def schema_for(self, name: str) -> VariableSchema:
        return self.schema[self.column_index(name)]


def parse_xpt(data: bytes) -> RawTable:
    """Parse the first member of a SAS Transport V5 file."""
    member = xpt.parse_member(data)
    schema = tuple(
        VariableSchema(
            name=v.name,
            kind="continuous" if v.is_numeric else "categorical",
            label=v.label,
        )
        for v in member.variables
    )
    return RawTable(schema, tuple(member.rows))


def parse_csv(data: bytes | str) -> RawTable:
    """RFC-style CSV with a header row; numeric-looking cells become floats,
    empty cells become missing."""
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyHeader("input has no header row")
    header = [h.strip() for h in header]
    if not header or any(not h for h in header):
        raise EmptyHeader(f"blank column name in header {header!r}")
    rows = []
    for lineno, record in enumerate(reader, 2):
        if not record:
            continue
        if len(record) != len(header):
            raise RaggedRow(
                f"line {lineno}: {len(record)} cells, header has {len(header)}"
            )
        rows.append(tuple(_parse_csv_cell(c) for c in record))
    numeric = [
        all(isinstance(r[i], (int, float)) or r[i] is None for r in rows)
        for i in range(len(header))
    ]
    schema = tuple(
        VariableSchema(name, "continuous" if numeric[i] else "categorical")
        for i, name in enumerate(header)
    )
    return RawTable(schema, tuple(rows))


def _parse_csv_cell(cell: str) -> RawCell:
    cell = cell.strip()
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        return cell


def merge_by_key(tables: Sequence[RawTable], key: str) -> RawTable:
    """Inner join on ``key``: only keys present in every table survive.

    Column order is first-table-first; a later table contributing a column
    name that already exists is skipped (first occurrence wins). Row order
    follows the first table's key order.
    """
    if not tables:
        raise MissingKey("no tables to merge")
    indexed = []
    for t in tables:
        ki = t.column_index(key)  # raises MissingKey
        by_key: dict[RawCell, tuple[RawCell, ...]] = {}
        for row in t.rows:
            ck = canon_value(row[ki])
            if ck in by_key:
                raise DuplicateKey(f"key {key}={row[ki]!r} repeats in a table")
            by_key[ck] = row
        indexed.append(by_key)

    shared = [k for k in indexed[0] if all(k in ix for ix in indexed[1:])]
    schema: list[VariableSchema] = list(tables[0].schema)
    names = set(tables[0].columns)
    picks: list[list[int]] = [list(range(len(tables[0].schema)))]
    for t in tables[1:]:
        cols = []
        for i, s in enumerate(t.schema):
            if s.name == key or s.name in names:
                continue
            names.add(s.name)
            schema.append(s)
            cols.append(i)
        picks.append(cols)

    rows = []
    for k in shared:
        cells = list(indexed[0][k])
        for ix, cols, t in zip(indexed[1:], picks[1:], tables[1:]):
            src = ix[k]
            cells.extend(src[i] for i in cols)
        rows.append(tuple(cells))
    return RawTable(tuple(schema), tuple(rows), key_variable=key)


def with_missing_codes(table: RawTable, codes: Mapping[str, Iterable]) -> RawTable:
    """Return a copy whose schema declares the given missing codes."""
    schema = []
    for s in table.schema:
        if s.name in codes:
            schema.append(
                VariableSchema(s.name, s.kind, s.levels, frozenset(codes[s.name]), s.label)
            )
        else:
            schema.append(s)
    return RawTable(tuple(schema), table.rows, table.key_variable)


def drop_missing(table: RawTable, variables: Iterable[str]) -> tuple[RawTable, int]:
    """Remove rows whose listed cells are missing; returns (table, dropped)."""
    cols = [(table.column_index(v), table.schema_for(v)) for v in variables]
    kept = [
        row for row in table.rows
        if not any(s.is_missing(row[i]) for i, s in cols)
    ]
    dropped = table.n - len(kept)
    return RawTable(table.schema, tuple(kept), table.key_variable), dropped


# -- recoding ----------------------------------------------------------------

_THRESHOLD_OPS = {
    "ge": lambda v, t: v >= t,
    "gt": lambda v, t: v > t,
    "le": lambda v, t: v <= t,
    "lt": lambda v, t: v < t,
}


@dataclass(frozen=True)
class RecodeRule:
    """Map one raw source variable to a binary target.

    op: ge/gt/le/lt compare numerically against ``value``; ``in`` emits 1
    when the raw code is in ``values`` (else 0); ``map`` uses an explicit
    raw -> {0,1} mapping and raises UnmappedValue outside it. Rules sharing
    a target OR together (any 1 wins; otherwise any missing input leaves the
    target missing). missing: "drop" removes rows whose source is missing,
    "keep" leaves the target missing for downstream complete-case handling.
    """

    target: str
    source: str
    op: str
    value: float | None = None
    values: frozenset = frozenset()
    mapping: tuple[tuple[Level, int], ...] = ()
    missing: str = "drop"

    def __post_init__(self):
        if self.op not in ("ge", "gt", "le", "lt", "in", "map"):
            raise ValueError(f"unknown recode op {self.op!r}")
        if self.op in _THRESHOLD_OPS and self.value is None:
            raise ValueError(f"{self.target}: op {self.op!r} needs a value")
        if self.op == "in":
            object.__setattr__(
                self, "values", frozenset(canon_value(v) for v in self.values)
            )
        if self.op == "map":
            mapping = tuple((canon_level(k), int(v)) for k, v in self.mapping)
            if any(v not in (0, 1) for _, v in mapping):
                raise ValueError(f"{self.target}: map outputs must be 0/1")
            object.__setattr__(self, "mapping", mapping)
        if self.missing not in ("drop", "keep"):
            raise ValueError(f"{self.target}: missing policy must be drop|keep")

    def apply(self, cell: RawCell) -> int:
        """Recode one non-missing cell; raises UnmappedValue outside domain."""
        if self.op in _THRESHOLD_OPS:
            if not isinstance(cell, (int, float)):
                raise UnmappedValue(
                    f"{self.source}={cell!r} is not numeric for op {self.op}"
                )
            return int(_THRESHOLD_OPS[self.op](cell, self.value))
        if self.op == "in":
            return int(canon_value(cell) in self.values)
        lookup = dict(self.mapping)
        key = canon_level(cell)
        if key not in lookup:
            raise UnmappedValue(f"{self.source}={cell!r} not covered by map rule")
        return lookup[key]


@dataclass(frozen=True)
class DiscreteDataset:
    """Complete-case table of categorical observations.

    Every cell is one of the variable's declared levels; levels are stored
    sorted (ints before strings). ``meta`` carries provenance strings such
    as the sampling RNG or recode drop counts.
    """

    variables: tuple[str, ...]
    levels: tuple[tuple[Level, ...], ...]
    rows: tuple[tuple[Level, ...], ...]
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        for name in self.variables:
            if not name or any(ch.isspace() for ch in name) or "," in name:
                raise ValueError(f"invalid variable name {name!r}")
        if len(self.levels) != len(self.variables):
            raise ValueError("levels must align with variables")
        canon = tuple(
            tuple(sorted((canon_level(l) for l in lvls), key=_level_sort_key))
            for lvls in self.levels
        )
        object.__setattr__(self, "levels", canon)
        for lvls in canon:
            for l in lvls:
                if isinstance(l, str) and (l == "" or any(ch.isspace() for ch in l) or "," in l):
                    raise ValueError(f"invalid level {l!r}")
        if not self.rows:
            raise ValueError("dataset must contain at least one row")
        sets = [set(lvls) for lvls in canon]
        for row in self.rows:
            if len(row) != len(self.variables):
                raise ValueError("row width mismatch")
            for cell, ok in zip(row, sets):
                if cell not in ok:
                    raise ValueError(f"cell {cell!r} outside declared levels")

    @property
    def n(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            from .estimate import UnknownVariable

            raise UnknownVariable(f"variable {name!r} not in dataset") from None

    def levels_of(self, name: str) -> tuple[Level, ...]:
        return self.levels[self.column_index(name)]


def apply_recode(
    table: RawTable,
    rules: Sequence[RecodeRule],
    passthrough: Iterable[str] = (),
) -> DiscreteDataset:
    """Emit the binary targets (plus passthrough categoricals) as a
    complete-case DiscreteDataset.

    Rules sharing a target OR together. Rows whose sources are missing are
    dropped eagerly for missing="drop" rules; rows still missing any emitted
    cell afterwards are dropped at materialization. Drop counts land in
    dataset meta.
    """
    targets: dict[str, list[RecodeRule]] = {}
    for rule in rules:
        table.schema_for(rule.source)  # raises MissingKey; remap to UnknownSource
        targets.setdefault(rule.target, []).append(rule)
    pass_vars = list(passthrough)
    for name in pass_vars:
        if name in targets:
            raise ValueError(f"passthrough variable {name!r} clashes with a target")
        table.column_index(name)

    emitted = list(targets) + pass_vars
    out_rows: list[tuple[Level, ...]] = []
    dropped_rule = 0
    dropped_incomplete = 0
    src_index = {r: (table.column_index(r.source), table.schema_for(r.source)) for r in rules}
    pass_index = [(v, table.column_index(v), table.schema_for(v)) for v in pass_vars]

    for row in table.rows:
        cells: list[Level | None] = []
        drop_row = False
        for target, target_rules in targets.items():
            value: int | None = 0 if target_rules else None
            saw_missing = False
            for rule in target_rules:
                i, schema = src_index[rule]
                cell = row[i]
                if schema.is_missing(cell):
                    saw_missing = True
                    if rule.missing == "drop":
                        drop_row = True
                    continue
                if rule.apply(cell) == 1:
                    value = 1
            if value != 1 and saw_missing:
                value = None  # cannot rule the target in or out
            cells.append(value)
        if drop_row:
            dropped_rule += 1
            continue
        for _, i, schema in pass_index:
            cell = row[i]
            cells.append(None if schema.is_missing(cell) else canon_level(cell))
        if any(c is None for c in cells):
            dropped_incomplete += 1
            continue
        out_rows.append(tuple(cells))

    if not out_rows:
        raise DatasetFormatError("recoding left no complete rows")
    levels: list[tuple[Level, ...]] = [(0, 1)] * len(targets)
    for k, (name, _, _) in enumerate(pass_index):
        observed = sorted({r[len(targets) + k] for r in out_rows}, key=_level_sort_key)
        levels.append(tuple(observed))
    meta = {
        "rows_in": str(table.n),
        "rows_dropped_missing_source": str(dropped_rule),
        "rows_dropped_incomplete": str(dropped_incomplete),
    }
    return DiscreteDataset(tuple(emitted), tuple(levels), tuple(out_rows), meta)


# -- recode config file -------------------------------------------------------

def load_recode_config(text: str) -> dict:
    """Parse a recode config: key, per-variable missing codes, rules,
    passthrough list. Missing-code value "nhanes" expands to the
    questionnaire convention set."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"invalid recode config: {exc}") from exc
    if not isinstance(doc, dict) or "rules" not in doc:
        raise DatasetFormatError("recode config needs a 'rules' list")
    rules = []
    for item in doc["rules"]:
        try:
            rules.append(
                RecodeRule(
                    target=item["target"],
                    source=item["source"],
                    op=item["op"],
                    value=item.get("value"),
                    values=frozenset(item.get("values", ())),
                    mapping=tuple(item.get("map", {}).items()),
                    missing=item.get("missing", "drop"),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetFormatError(f"bad recode rule {item!r}: {exc}") from exc
    missing: dict[str, frozenset] = {}
    for name, codes in doc.get("missing_codes", {}).items():
        if codes == "nhanes":
            missing[name] = NHANES_MISSING
        else:
            missing[name] = frozenset(canon_value(c) for c in codes)
    return {
        "key": doc.get("key"),
        "rules": rules,
        "missing_codes": missing,
        "passthrough": list(doc.get("passthrough", ())),
    }


# -- dataset file format ------------------------------------------------------

def dump_dataset(d: DiscreteDataset) -> str:
    """Columnar text: '#' schema header, then a CSV body. Round-trips."""
    lines = ["# pns-dataset v1"]
    for k in sorted(d.meta):
        lines.append(f"# meta {k}: {d.meta[k]}")
    for name, lvls in zip(d.variables, d.levels):
        lines.append(f"# var {name}: " + " ".join(str(l) for l in lvls))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(d.variables)
    for row in d.rows:
        writer.writerow(row)
    return "\n".join(lines) + "\n" + buf.getvalue()


def load_dataset(text: str) -> DiscreteDataset:
    meta: dict[str, str] = {}
    declared: dict[str, tuple[Level, ...]] = {}
    body_lines = []
    for raw in text.splitlines():
        if raw.startswith("#"):
            line = raw[1:].strip()
            if line.startswith("meta "):
                key, _, value = line[len("meta "):].partition(":")
                meta[key.strip()] = value.strip()
            elif line.startswith("var "):
                name, _, lvls = line[len("var "):].partition(":")
                declared[name.strip()] = tuple(canon_level(t) for t in lvls.split())
        elif raw.strip():
            body_lines.append(raw)
    if not body_lines:
        raise DatasetFormatError("dataset file has no header row")
    reader = csv.reader(io.StringIO("\n".join(body_lines)))
    header = [h.strip() for h in next(reader)]
    rows = []
    for lineno, record in enumerate(reader, 2):
        if not record:
            continue
        if len(record) != len(header):
            raise RaggedRow(f"dataset body line {lineno}: ragged row")
        rows.append(tuple(canon_level(c) for c in record))
    levels = []
    for i, name in enumerate(header):
        if name in declared:
            levels.append(declared[name])
        else:
            levels.append(tuple(sorted({r[i] for r in rows}, key=_level_sort_key)))
    try:
        return DiscreteDataset(tuple(header), tuple(levels), tuple(rows), meta)
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from exc
