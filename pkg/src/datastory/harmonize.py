"""Cross-chart consistency: shared scale domains, palettes, and orders.

Identical fields always share a color and scale domain. Quantitative
fields judged semantically comparable (by the model, or exact-name match
offline) share one padded domain and graded shades of a single hue.
Category orders are fixed globally to table order. The pass never touches
marks, data scopes, or emphasis.
"""
from __future__ import annotations

import colorsys
from typing import Optional, Sequence

from .charts import ChartSpec, Encoding, SERIES_FIELD, VALUE_FIELD
from .errors import GatewayError, InputError
from .gateway import GenerationRequest, LlmGateway
from .model import ColumnKind, DataTable
from .prompts import PromptLibrary
from .tables import table_schema_text
from .analysis import extract_json_payload

DEFAULT_PALETTE = (
    "#4c78a8",
    "#f58518",
    "#e45756",
    "#72b7b2",
    "#54a24b",
    "#eeca3b",
    "#b279a2",
    "#ff9da6",
    "#9d755d",
    "#bab0ac",
)

DOMAIN_PADDING = 0.05


def _hex_to_rgb(color: str) -> tuple[float, float, float]:
    color = color.lstrip("#")
    return tuple(int(color[i : i + 2], 16) / 255.0 for i in (0, 2, 4))


def _rgb_to_hex(rgb: tuple[float, float, float]) -> str:
    return "#" + "".join(f"{round(max(0.0, min(1.0, c)) * 255):02x}" for c in rgb)


def shade_palette(base: str, count: int) -> list[str]:
    """Graded shades of one hue, light to dark, deterministic."""
    if count <= 1:
        return [base]
    h, l, s = colorsys.rgb_to_hls(*_hex_to_rgb(base))
    lo, hi = 0.30, 0.70
    shades = []
    for i in range(count):
        level = hi - (hi - lo) * i / (count - 1)
        shades.append(_rgb_to_hex(colorsys.hls_to_rgb(h, level, s)))
    return shades


def collect_fields(candidate_sets: Sequence[Sequence[ChartSpec]], table: DataTable):
    """Quantitative and categorical fields in first-appearance order."""
    quantitative: dict[str, None] = {}
    categorical: dict[str, None] = {}
    for cands in candidate_sets:
        for spec in cands:
            for part in spec.parts():
                for m in part.measures:
                    quantitative.setdefault(m, None)
                for enc in (part.x, part.y, part.color):
                    if enc is None or enc.column.startswith("__"):
                        continue
                    if table.column(enc.column).kind is ColumnKind.QUANTITATIVE:
                        quantitative.setdefault(enc.column, None)
                    else:
                        categorical.setdefault(enc.column, None)
    return list(quantitative), list(categorical)


def match_comparable_fields(
    fields: Sequence[str],
    table: DataTable,
    gateway: Optional[LlmGateway],
    prompts: Optional[PromptLibrary] = None,
    temperature: float = 0.3,
) -> list[list[str]]:
    """Group fields that should share a scale; falls back to exact-name
    matching (singleton groups) when no model is available."""
    singletons = [[f] for f in fields]
    if gateway is None or not fields:
        return singletons
    prompts = prompts or PromptLibrary()
    prompt = prompts.render(
        "fields",
        table_schema=table_schema_text(table),
        fields="\n".join(f"- {f}" for f in fields),
    )
    try:
        reply = gateway.generate(GenerationRequest(prompt=prompt, temperature=temperature))
        payload = extract_json_payload(reply)
    except (GatewayError, InputError):
        return singletons
    if not isinstance(payload, list):
        return singletons
    groups: list[list[str]] = []
    assigned: set[str] = set()
    for entry in payload:
        if not isinstance(entry, list):
            continue
        members = [str(f) for f in entry if str(f) in fields and str(f) not in assigned]
        if members:
            groups.append(members)
            assigned.update(members)
    for f in fields:
        if f not in assigned:
            groups.append([f])
    return groups


def group_domain(group: Sequence[str], table: DataTable) -> tuple[float, float]:
    """Padded shared min/max over the group's data."""
    values: list[float] = []
    for col in group:
        values.extend(float(v) for v in table.values(col))
    if not values:
        return (0.0, 1.0)
    lo, hi = min(values), max(values)
    span = hi - lo if hi > lo else (abs(hi) or 1.0)
    pad = DOMAIN_PADDING * span
    return (lo - pad, hi + pad)


class HarmonyPlan:
    """Resolved per-field domains and colors, applied uniformly."""

    def __init__(
        self,
        candidate_sets: Sequence[Sequence[ChartSpec]],
        table: DataTable,
        gateway: Optional[LlmGateway] = None,
        prompts: Optional[PromptLibrary] = None,
        palette: Sequence[str] = DEFAULT_PALETTE,
    ):
        self.table = table
        quantitative, categorical = collect_fields(candidate_sets, table)
        groups = match_comparable_fields(quantitative, table, gateway, prompts)

        self.field_domain: dict[str, tuple[float, float]] = {}
        self.field_color: dict[str, str] = {}
        order = {f: i for i, f in enumerate(quantitative)}
        groups = sorted(groups, key=lambda g: min(order[f] for f in g))
        for gi, group in enumerate(groups):
            domain = group_domain(group, table)
            base = palette[gi % len(palette)]
            members = sorted(group, key=lambda f: order[f])
            shades = shade_palette(base, len(members))
            for f, shade in zip(members, shades):
                self.field_domain[f] = domain
                self.field_color[f] = shade

        self.category_order: dict[str, tuple] = {}
        self.category_palette: dict[str, tuple[str, ...]] = {}
        for col in categorical:
            values = table.distinct_values(col)
            self.category_order[col] = values
            self.category_palette[col] = tuple(
                palette[i % len(palette)] for i in range(len(values))
            )

    def _encoding(self, enc: Optional[Encoding], spec: ChartSpec, channel: str):
        if enc is None:
            return None
        col = enc.column
        if col == VALUE_FIELD:
            domains = [self.field_domain[m] for m in spec.measures if m in self.field_domain]
            if not domains:
                return enc
            lo = min(d[0] for d in domains)
            hi = max(d[1] for d in domains)
            return Encoding(column=col, kind=enc.kind, domain=(lo, hi))
        if col == SERIES_FIELD:
            colors = tuple(self.field_color.get(m, DEFAULT_PALETTE[0]) for m in spec.measures)
            return Encoding(
                column=col, kind=enc.kind, domain=tuple(spec.measures), palette=colors
            )
        kind = self.table.column(col).kind
        if kind is ColumnKind.QUANTITATIVE:
            domain = self.field_domain.get(col)
            palette = (self.field_color[col],) if col in self.field_color else None
            return Encoding(
                column=col,
                kind=enc.kind,
                domain=domain,
                palette=palette if channel == "y" else None,
            )
        order = self.category_order.get(col)
        palette = self.category_palette.get(col) if channel == "color" else None
        return Encoding(column=col, kind=enc.kind, domain=order, palette=palette)

    def apply(self, spec: ChartSpec) -> ChartSpec:
        def one(part: ChartSpec) -> ChartSpec:
            return part.replace(
                x=self._encoding(part.x, part, "x"),
                y=self._encoding(part.y, part, "y"),
                color=self._encoding(part.color, part, "color"),
            )

        parts = spec.parts()
        out = one(parts[0])
        if len(parts) > 1:
            out = out.replace(
                pair=one(parts[1]),
                pair_align=spec.pair_align,
                pair_orientation=spec.pair_orientation,
            )
        return out


def harmonize(
    candidate_sets: Sequence[Sequence[ChartSpec]],
    table: DataTable,
    gateway: Optional[LlmGateway] = None,
    prompts: Optional[PromptLibrary] = None,
    palette: Sequence[str] = DEFAULT_PALETTE,
) -> list[list[ChartSpec]]:
    plan = HarmonyPlan(candidate_sets, table, gateway, prompts, palette)
    return [[plan.apply(spec) for spec in cands] for cands in candidate_sets]
