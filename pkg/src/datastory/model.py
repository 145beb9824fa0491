"""Core domain types: tables, facts, clauses, and stories.

All types are immutable after construction and safe to share across
threads. Operations here are pure functions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import InputError, ScopeError

Scalar = Any  # str | int | float | None


class ColumnKind(str, Enum):
    CATEGORICAL = "categorical"
    TEMPORAL = "temporal"
    QUANTITATIVE = "quantitative"


class FactType(str, Enum):
    VALUE = "value"
    TREND = "trend"
    COMPARISON = "comparison"
    DEVIATION = "deviation"
    EXTREME = "extreme"
    DISTRIBUTION = "distribution"
    CORRELATION = "correlation"
    RANK = "rank"
    PROPORTION = "proportion"


# Frequently seen short forms in model replies.
_FACT_TYPE_ALIASES = {
    "compare": FactType.COMPARISON,
    "correlate": FactType.CORRELATION,
    "difference": FactType.COMPARISON,
    "outlier": FactType.DEVIATION,
}


def parse_fact_type(raw: str) -> FactType:
    token = raw.strip().lower()
    if token in _FACT_TYPE_ALIASES:
        return _FACT_TYPE_ALIASES[token]
    try:
        return FactType(token)
    except ValueError:
        raise InputError(f"unknown fact type {raw!r}") from None


class ClauseKind(str, Enum):
    FACTUAL = "factual"
    BACKGROUND = "background"


class Clarity(str, Enum):
    CLEAR = "clear"
    VAGUE = "vague"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind


@dataclass(frozen=True)
class DataTable:
    """A flat table with typed columns and null-capable cells."""

    name: str
    columns: tuple[Column, ...]
    rows: tuple[Mapping[str, Scalar], ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if any(not n for n in names):
            raise InputError("table has an empty column name")
        if len(set(names)) != len(names):
            raise InputError("table has duplicate column names")
        for i, row in enumerate(self.rows):
            missing = [n for n in names if n not in row]
            if missing:
                raise InputError(f"row {i} is missing columns {missing}")
        for col in self.columns:
            if col.kind is not ColumnKind.QUANTITATIVE:
                continue
            for i, row in enumerate(self.rows):
                v = row[col.name]
                if v is None:
                    continue
                if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
                    raise InputError(
                        f"row {i}, column {col.name!r}: {v!r} is not a finite number"
                    )

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise ScopeError(f"unknown column {name!r} in table {self.name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def quantitative_columns(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.kind is ColumnKind.QUANTITATIVE)

    def values(self, name: str) -> tuple[Scalar, ...]:
        """Non-null cell values of a column, in row order."""
        self.column(name)
        return tuple(r[name] for r in self.rows if r[name] is not None)

    def distinct_values(self, name: str) -> tuple[Scalar, ...]:
        """Distinct non-null values in first-appearance order."""
        seen: dict[Scalar, None] = {}
        for v in self.values(name):
            if v not in seen:
                seen[v] = None
        return tuple(seen)


def _normalize_filter(raw: Optional[Mapping[str, Any]]) -> dict[str, tuple[Scalar, ...]]:
    """Normalize a column->values filter: tuple values, sorted, deduplicated."""
    out: dict[str, tuple[Scalar, ...]] = {}
    for key in sorted(raw or {}):
        vals = raw[key]
        if not isinstance(vals, (list, tuple)):
            vals = [vals]
        uniq: dict[Scalar, None] = {}
        for v in vals:
            if v not in uniq:
                uniq[v] = None
        out[key] = tuple(sorted(uniq, key=lambda v: (str(type(v).__name__), str(v))))
    return out


def _ordered_unique(items: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for it in items:
        if it not in seen:
            seen[it] = None
    return tuple(seen)


@dataclass(frozen=True)
class DataFact:
    """The 6-part structure behind one narrative statement about the data.

    ``context`` filters the table down to the fact's subspace,
    ``breakdowns`` split it into groups, ``measures`` say what is read off
    each group, and ``focus`` marks the emphasized slice.  ``parameters``
    is an opaque scalar map for type-specific detail.
    """

    type: FactType
    measures: tuple[str, ...]
    parameters: Mapping[str, Scalar] = field(default_factory=dict)
    context: Mapping[str, tuple[Scalar, ...]] = field(default_factory=dict)
    breakdowns: tuple[str, ...] = ()
    focus: Mapping[str, tuple[Scalar, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "measures", _ordered_unique(self.measures))
        object.__setattr__(self, "breakdowns", _ordered_unique(self.breakdowns))
        object.__setattr__(self, "context", _normalize_filter(self.context))
        object.__setattr__(self, "focus", _normalize_filter(self.focus))
        object.__setattr__(self, "parameters", dict(self.parameters or {}))

    def canonical_key(self) -> tuple:
        """Order-insensitive structural identity, used for deduplication."""
        return (
            self.type.value,
            tuple(sorted((k, str(v)) for k, v in self.parameters.items())),
            tuple(sorted(self.measures)),
            tuple(sorted((k, v) for k, v in self.context.items())),
            tuple(sorted(self.breakdowns)),
            tuple(sorted((k, v) for k, v in self.focus.items())),
        )

    def replace(self, **changes: Any) -> "DataFact":
        current = {
            "type": self.type,
            "measures": self.measures,
            "parameters": self.parameters,
            "context": self.context,
            "breakdowns": self.breakdowns,
            "focus": self.focus,
        }
        current.update(changes)
        return DataFact(**current)

    def to_json(self) -> dict:
        return {
            "type": self.type.value,
            "parameters": dict(self.parameters),
            "measures": list(self.measures),
            "context": {k: list(v) for k, v in self.context.items()},
            "breakdowns": list(self.breakdowns),
            "focus": {k: list(v) for k, v in self.focus.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "DataFact":
        if not isinstance(data, Mapping):
            raise InputError(f"fact must be an object, got {type(data).__name__}")
        raw_type = data.get("type")
        if not isinstance(raw_type, str):
            raise InputError("fact is missing a 'type' string")
        measures = data.get("measures", data.get("measure", []))
        if isinstance(measures, str):
            measures = [measures]
        breakdowns = data.get("breakdowns", data.get("breakdown", []))
        if isinstance(breakdowns, str):
            breakdowns = [breakdowns]
        context = data.get("context") or {}
        focus = data.get("focus") or {}
        if not isinstance(context, Mapping) or not isinstance(focus, Mapping):
            raise InputError("fact context/focus must be objects")
        return cls(
            type=parse_fact_type(raw_type),
            parameters=data.get("parameters") or {},
            measures=tuple(str(m) for m in measures),
            context=context,
            breakdowns=tuple(str(b) for b in breakdowns),
            focus=focus,
        )

    def canonical_json(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _column_value_set(table: DataTable, column: str) -> set:
    return set(table.values(column))


def validate_fact(fact: DataFact, table: DataTable) -> ValidationReport:
    """Check a fact's structural invariants against its table."""
    problems: list[str] = []
    quantitative = set(table.quantitative_columns())

    if not fact.measures:
        problems.append("empty measures")
    for m in fact.measures:
        if not table.has_column(m):
            problems.append(f"measure {m!r} not a table column")
        elif m not in quantitative:
            problems.append(f"measure {m!r} is not quantitative")

    overlap = set(fact.breakdowns) & set(fact.measures)
    if overlap:
        problems.append(f"breakdowns overlap measures: {sorted(overlap)}")
    for b in fact.breakdowns:
        if not table.has_column(b):
            problems.append(f"breakdown {b!r} not a table column")
        elif b in quantitative:
            problems.append(f"breakdown {b!r} is quantitative")

    for label, filt in (("context", fact.context), ("focus", fact.focus)):
        for col, vals in filt.items():
            if not table.has_column(col):
                problems.append(f"{label} column {col!r} not a table column")
                continue
            present = _column_value_set(table, col)
            for v in vals:
                if v not in present:
                    problems.append(f"{label} value not in column: {col}={v!r}")

    for col in set(fact.focus) & set(fact.context):
        extra = set(fact.focus[col]) - set(fact.context[col])
        if extra:
            problems.append(f"focus exceeds context on {col!r}: {sorted(map(str, extra))}")

    return ValidationReport(tuple(problems))


def rows_matching(table: DataTable, filt: Mapping[str, Sequence[Scalar]]) -> frozenset[int]:
    """Row indices where every filter key's cell is one of its permitted
    values.  Null cells never match.  Unknown columns raise ScopeError."""
    for col in filt:
        table.column(col)
    out = []
    for i, row in enumerate(table.rows):
        ok = True
        for col, vals in filt.items():
            v = row[col]
            if v is None or v not in vals:
                ok = False
                break
        if ok:
            out.append(i)
    return frozenset(out)


def fact_data_scope(fact: DataFact, table: DataTable) -> frozenset[int]:
    """Rows selected by the fact's context (its data subspace)."""
    return rows_matching(table, fact.context)


def fact_focus_scope(fact: DataFact, table: DataTable) -> frozenset[int]:
    """Rows emphasized by the fact: inside the context and matching focus."""
    combined = dict(fact.context)
    for col, vals in fact.focus.items():
        if col in combined:
            combined[col] = tuple(v for v in combined[col] if v in vals)
        else:
            combined[col] = vals
    return rows_matching(table, combined)


def dedupe_facts(facts: Iterable[DataFact]) -> list[DataFact]:
    """Drop canonical duplicates, keeping first occurrences."""
    seen: dict[tuple, None] = {}
    out: list[DataFact] = []
    for f in facts:
        key = f.canonical_key()
        if key not in seen:
            seen[key] = None
            out.append(f)
    return out


@dataclass(frozen=True)
class Sentence:
    id: int
    text: str
    paragraph_id: int


@dataclass(frozen=True)
class Clause:
    """One narrative unit; the granularity facts are extracted at."""

    id: int
    text: str
    sentence_id: int
    kind: ClauseKind
    clarity: Clarity = Clarity.UNKNOWN
    candidates: tuple[tuple[DataFact, float], ...] = ()
    paragraph_id: int = 0

    def __post_init__(self):
        if self.kind is ClauseKind.BACKGROUND and self.candidates:
            raise InputError(f"background clause {self.id} must not carry candidates")

    def replace(self, **changes: Any) -> "Clause":
        current = {
            "id": self.id,
            "text": self.text,
            "sentence_id": self.sentence_id,
            "kind": self.kind,
            "clarity": self.clarity,
            "candidates": self.candidates,
            "paragraph_id": self.paragraph_id,
        }
        current.update(changes)
        return Clause(**current)


@dataclass(frozen=True)
class Story:
    """Clauses in narrative order plus the fact sets keyed by clause id."""

    clauses: tuple[Clause, ...]
    facts: Mapping[int, tuple[DataFact, ...]] = field(default_factory=dict)

    def __post_init__(self):
        ids = {c.id for c in self.clauses}
        for cid in self.facts:
            if cid not in ids:
                raise InputError(f"facts map references unknown clause id {cid}")
        object.__setattr__(self, "facts", dict(self.facts))

    def clause(self, clause_id: int) -> Clause:
        for c in self.clauses:
            if c.id == clause_id:
                return c
        raise KeyError(clause_id)

    def factual_clauses(self) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if c.kind is ClauseKind.FACTUAL)

    def clear_clauses(self) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if c.clarity is Clarity.CLEAR)

    def to_json(self) -> dict:
        return {
            "version": "1",
            "clauses": [
                {
                    "id": c.id,
                    "text": c.text,
                    "sentence_id": c.sentence_id,
                    "paragraph_id": c.paragraph_id,
                    "kind": c.kind.value,
                    "clarity": c.clarity.value,
                    "candidates": [
                        {"fact": f.to_json(), "similarity": s} for f, s in c.candidates
                    ],
                }
                for c in self.clauses
            ],
            "facts": {
                str(cid): [f.to_json() for f in facts]
                for cid, facts in sorted(self.facts.items())
            },
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Story":
        try:
            clauses = tuple(
                Clause(
                    id=int(c["id"]),
                    text=c["text"],
                    sentence_id=int(c["sentence_id"]),
                    paragraph_id=int(c.get("paragraph_id", 0)),
                    kind=ClauseKind(c["kind"]),
                    clarity=Clarity(c["clarity"]),
                    candidates=tuple(
                        (DataFact.from_json(e["fact"]), float(e["similarity"]))
                        for e in c.get("candidates", [])
                    ),
                )
                for c in data["clauses"]
            )
            facts = {
                int(cid): tuple(DataFact.from_json(f) for f in fl)
                for cid, fl in data.get("facts", {}).items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed story document: {exc}") from exc
        return cls(clauses=clauses, facts=facts)
