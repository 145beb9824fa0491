"""Abstract declarative chart specs and their Vega-Lite serialization.

A ``ChartSpec`` is deliberately small: a mark, up to three encodings, a
context filter (``data_scope``), an emphasis filter rendered via opacity
and stroke, and an optional aligned second chart for side-by-side use.
Multi-measure charts fold their measures into a synthetic series field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional

from .errors import InputError
from .model import ColumnKind, DataFact, DataTable, Scalar, rows_matching

SERIES_FIELD = "__series__"
VALUE_FIELD = "__value__"

VEGA_LITE_SCHEMA = "https://vega.github.io/schema/vega-lite/v5.json"


class Mark(str, Enum):
    BAR = "bar"
    STACKED_BAR = "stacked-bar"
    GROUPED_BAR = "grouped-bar"
    LINE = "line"
    MULTI_LINE = "multi-line"
    POINT = "point"
    TICK = "tick"


class Orientation(str, Enum):
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class Encoding:
    column: str
    kind: ColumnKind
    domain: Optional[tuple] = None
    palette: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.domain is not None:
            object.__setattr__(self, "domain", tuple(self.domain))
        if self.palette is not None:
            object.__setattr__(self, "palette", tuple(self.palette))

    def signature(self) -> tuple:
        return (self.column, self.kind.value, self.domain, self.palette)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"column": self.column, "kind": self.kind.value}
        if self.domain is not None:
            out["domain"] = list(self.domain)
        if self.palette is not None:
            out["palette"] = list(self.palette)
        return out

    @classmethod
    def from_json(cls, data: Optional[Mapping[str, Any]]) -> Optional["Encoding"]:
        if data is None:
            return None
        return cls(
            column=data["column"],
            kind=ColumnKind(data["kind"]),
            domain=tuple(data["domain"]) if data.get("domain") is not None else None,
            palette=tuple(data["palette"]) if data.get("palette") is not None else None,
        )


def _normalize_filter(raw: Optional[Mapping[str, Any]]) -> dict[str, tuple[Scalar, ...]]:
    out: dict[str, tuple[Scalar, ...]] = {}
    for key in sorted(raw or {}):
        vals = raw[key]
        if not isinstance(vals, (list, tuple)):
            vals = [vals]
        out[key] = tuple(sorted(set(vals), key=lambda v: (str(type(v).__name__), str(v))))
    return out


@dataclass(frozen=True)
class ChartSpec:
    mark: Mark
    measures: tuple[str, ...]
    x: Optional[Encoding] = None
    y: Optional[Encoding] = None
    color: Optional[Encoding] = None
    data_scope: Mapping[str, tuple[Scalar, ...]] = field(default_factory=dict)
    emphasis: Mapping[str, tuple[Scalar, ...]] = field(default_factory=dict)
    title: str = ""
    skeleton: bool = False
    fact: Optional[DataFact] = field(default=None, compare=False)
    pair: Optional["ChartSpec"] = None
    pair_align: Optional[str] = None
    pair_orientation: Optional[Orientation] = None

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(self.measures))
        object.__setattr__(self, "data_scope", _normalize_filter(self.data_scope))
        object.__setattr__(self, "emphasis", _normalize_filter(self.emphasis))
        if self.pair is not None and self.pair.pair is not None:
            raise InputError("chart pairs cannot nest")

    def replace(self, **changes: Any) -> "ChartSpec":
        current = {
            "mark": self.mark,
            "measures": self.measures,
            "x": self.x,
            "y": self.y,
            "color": self.color,
            "data_scope": self.data_scope,
            "emphasis": self.emphasis,
            "title": self.title,
            "skeleton": self.skeleton,
            "fact": self.fact,
            "pair": self.pair,
            "pair_align": self.pair_align,
            "pair_orientation": self.pair_orientation,
        }
        current.update(changes)
        return ChartSpec(**current)

    def parts(self) -> tuple["ChartSpec", ...]:
        """The one or two single charts of this (possibly paired) spec."""
        if self.pair is None:
            return (self,)
        return (
            self.replace(pair=None, pair_align=None, pair_orientation=None),
            self.pair,
        )

    def rendered_fields(self) -> tuple[str, ...]:
        """Real table columns this chart displays (synthetic series fields
        excluded), across both parts of a pair."""
        fields: dict[str, None] = {}
        for part in self.parts():
            for enc in (part.x, part.y, part.color):
                if enc is not None and not enc.column.startswith("__"):
                    fields.setdefault(enc.column, None)
            for m in part.measures:
                fields.setdefault(m, None)
        return tuple(fields)

    def signature(self, with_emphasis: bool = True) -> tuple:
        """Structural identity used by cost and activation models.

        Titles and the originating fact are cosmetic and excluded; run
        identity additionally ignores emphasis.
        """
        def one(part: "ChartSpec") -> tuple:
            return (
                part.mark.value,
                part.measures,
                part.x.signature() if part.x else None,
                part.y.signature() if part.y else None,
                part.color.signature() if part.color else None,
                tuple(part.data_scope.items()),
                tuple(part.emphasis.items()) if with_emphasis else None,
                part.skeleton,
            )

        parts = self.parts()
        if len(parts) == 1:
            return ("single", one(parts[0]))
        return (
            "pair",
            one(parts[0]),
            one(parts[1]),
            self.pair_align,
            self.pair_orientation.value if self.pair_orientation else None,
        )

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "mark": self.mark.value,
            "measures": list(self.measures),
            "x": self.x.to_json() if self.x else None,
            "y": self.y.to_json() if self.y else None,
            "color": self.color.to_json() if self.color else None,
            "data_scope": {k: list(v) for k, v in self.data_scope.items()},
            "emphasis": {k: list(v) for k, v in self.emphasis.items()},
            "title": self.title,
            "skeleton": self.skeleton,
            "fact": self.fact.to_json() if self.fact else None,
        }
        if self.pair is not None:
            out["pair"] = self.pair.to_json()
            out["pair_align"] = self.pair_align
            out["pair_orientation"] = (
                self.pair_orientation.value if self.pair_orientation else None
            )
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ChartSpec":
        return cls(
            mark=Mark(data["mark"]),
            measures=tuple(data.get("measures", [])),
            x=Encoding.from_json(data.get("x")),
            y=Encoding.from_json(data.get("y")),
            color=Encoding.from_json(data.get("color")),
            data_scope=data.get("data_scope", {}),
            emphasis=data.get("emphasis", {}),
            title=data.get("title", ""),
            skeleton=bool(data.get("skeleton", False)),
            fact=DataFact.from_json(data["fact"]) if data.get("fact") else None,
            pair=cls.from_json(data["pair"]) if data.get("pair") else None,
            pair_align=data.get("pair_align"),
            pair_orientation=(
                Orientation(data["pair_orientation"])
                if data.get("pair_orientation")
                else None
            ),
        )


def specs_equal(a: Optional[ChartSpec], b: Optional[ChartSpec], with_emphasis: bool = True) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.signature(with_emphasis) == b.signature(with_emphasis)


def _emphasis_predicate(emphasis: Mapping[str, tuple[Scalar, ...]]) -> str:
    clauses = []
    for col, vals in emphasis.items():
        ors = " || ".join(
            f"datum[{json.dumps(col)}] === {json.dumps(v)}" for v in vals
        )
        clauses.append(f"({ors})")
    return " && ".join(clauses)


def _axis_encoding(enc: Encoding) -> dict:
    out: dict[str, Any] = {"field": enc.column}
    if enc.kind is ColumnKind.QUANTITATIVE or enc.column == VALUE_FIELD:
        out["type"] = "quantitative"
        if enc.domain is not None:
            out["scale"] = {"domain": list(enc.domain)}
    elif enc.kind is ColumnKind.TEMPORAL:
        # Month-name style temporal columns render as ordered categories.
        out["type"] = "ordinal"
        if enc.domain is not None:
            out["sort"] = list(enc.domain)
    else:
        out["type"] = "nominal"
        if enc.domain is not None:
            out["sort"] = list(enc.domain)
    return out


def _single_to_vega_lite(spec: ChartSpec, table: DataTable) -> dict:
    rows = rows_matching(table, spec.data_scope)
    used: dict[str, None] = {}
    for enc in (spec.x, spec.y, spec.color):
        if enc is not None and not enc.column.startswith("__"):
            used.setdefault(enc.column, None)
    for m in spec.measures:
        used.setdefault(m, None)
    for col in spec.emphasis:
        used.setdefault(col, None)
    values = [
        {col: table.rows[i][col] for col in used} for i in sorted(rows)
    ]

    mark_type = {
        Mark.BAR: "bar",
        Mark.STACKED_BAR: "bar",
        Mark.GROUPED_BAR: "bar",
        Mark.LINE: "line",
        Mark.MULTI_LINE: "line",
        Mark.POINT: "point",
        Mark.TICK: "tick",
    }[spec.mark]
    mark: dict[str, Any] = {"type": mark_type}
    if mark_type == "point":
        mark["filled"] = True

    encoding: dict[str, Any] = {}
    folded = len(spec.measures) > 1 and spec.y is not None and spec.y.column == VALUE_FIELD
    transform = []
    if folded:
        transform.append({"fold": list(spec.measures), "as": [SERIES_FIELD, VALUE_FIELD]})

    if spec.x is not None:
        encoding["x"] = _axis_encoding(spec.x)
    if spec.y is not None:
        encoding["y"] = _axis_encoding(spec.y)
        if folded:
            encoding["y"]["title"] = " / ".join(spec.measures)
    if spec.color is not None:
        color: dict[str, Any] = {
            "field": spec.color.column,
            "type": "nominal",
        }
        scale: dict[str, Any] = {}
        if spec.color.domain is not None:
            scale["domain"] = list(spec.color.domain)
        if spec.color.palette is not None:
            scale["range"] = list(spec.color.palette)
        if scale:
            color["scale"] = scale
        if spec.color.column == SERIES_FIELD:
            color["title"] = "series"
        encoding["color"] = color
    elif spec.y is not None and spec.y.palette:
        mark["color"] = spec.y.palette[0]

    if spec.mark is Mark.GROUPED_BAR and spec.color is not None:
        encoding["xOffset"] = {"field": spec.color.column}
    if spec.mark is Mark.LINE or spec.mark is Mark.MULTI_LINE:
        mark["point"] = True

    if spec.skeleton:
        encoding["opacity"] = {"value": 0.0}
    elif spec.emphasis:
        test = _emphasis_predicate(spec.emphasis)
        encoding["opacity"] = {
            "condition": {"test": test, "value": 1.0},
            "value": 0.3,
        }
        encoding["strokeWidth"] = {
            "condition": {"test": test, "value": 2.0},
            "value": 0.0,
        }
        mark["stroke"] = "#333333"

    out: dict[str, Any] = {
        "data": {"values": values},
        "mark": mark,
        "encoding": encoding,
    }
    if transform:
        out["transform"] = transform
    if spec.title:
        out["title"] = spec.title
    return out


def to_vega_lite(spec: ChartSpec, table: DataTable) -> dict:
    """Serialize to a Vega-Lite v5 compatible JSON document."""
    parts = spec.parts()
    if len(parts) == 1:
        doc = _single_to_vega_lite(parts[0], table)
        doc["$schema"] = VEGA_LITE_SCHEMA
        return doc
    subs = [_single_to_vega_lite(p, table) for p in parts]
    key = (
        "hconcat"
        if spec.pair_orientation is Orientation.HORIZONTAL
        else "vconcat"
    )
    doc = {
        "$schema": VEGA_LITE_SCHEMA,
        key: subs,
        "resolve": {"scale": {"color": "independent"}},
    }
    if spec.title:
        doc["title"] = spec.title
    return doc
