"""Fact-to-chart mapping and candidate adjustments for vague clauses."""
from __future__ import annotations

from typing import Optional, Sequence

from .charts import (
    ChartSpec,
    Encoding,
    Mark,
    Orientation,
    SERIES_FIELD,
    VALUE_FIELD,
    specs_equal,
)
from .errors import UnmappableFactError
from .model import (
    Clarity,
    Clause,
    ColumnKind,
    DataFact,
    DataTable,
    FactType,
)

PAIRED_TYPES = (FactType.COMPARISON, FactType.CORRELATION)


def effective_breakdowns(fact: DataFact, table: DataTable) -> tuple[str, ...]:
    """Breakdown columns to place on the grouping axis.

    Falls back to the categorical/temporal columns the fact filters on,
    then to the table's first categorical/temporal column.
    """
    if fact.breakdowns:
        return fact.breakdowns
    quantitative = set(table.quantitative_columns())
    fallback = [
        col
        for filt in (fact.focus, fact.context)
        for col in filt
        if col not in quantitative
    ]
    if fallback:
        seen: dict[str, None] = {}
        for col in fallback:
            seen.setdefault(col, None)
        return tuple(seen)
    for col in table.columns:
        if col.kind is not ColumnKind.QUANTITATIVE:
            return (col.name,)
    return ()


def _axis(table: DataTable, column: str) -> Encoding:
    return Encoding(column=column, kind=table.column(column).kind)


def _measure_axis(measures: Sequence[str]) -> tuple[Encoding, Optional[Encoding]]:
    """Y (and the folded series color) for one or many measures."""
    if len(measures) == 1:
        return Encoding(column=measures[0], kind=ColumnKind.QUANTITATIVE), None
    y = Encoding(column=VALUE_FIELD, kind=ColumnKind.QUANTITATIVE)
    color = Encoding(
        column=SERIES_FIELD, kind=ColumnKind.CATEGORICAL, domain=tuple(measures)
    )
    return y, color


def _title(measures: Sequence[str], x_col: Optional[str]) -> str:
    joined = " & ".join(measures)
    return f"{joined} by {x_col}" if x_col else joined


def _single_chart(
    fact: DataFact, table: DataTable, mark: Mark, x_col: str
) -> ChartSpec:
    y, color = _measure_axis(fact.measures)
    if mark is Mark.GROUPED_BAR and color is None:
        mark = Mark.BAR
    if mark is Mark.MULTI_LINE and color is None:
        mark = Mark.LINE
    return ChartSpec(
        mark=mark,
        measures=fact.measures,
        x=_axis(table, x_col),
        y=y,
        color=color,
        data_scope=fact.context,
        emphasis=fact.focus,
        title=_title(fact.measures, x_col),
        fact=fact,
    )


def _stacked_chart(fact: DataFact, table: DataTable, breakdowns: Sequence[str]) -> ChartSpec:
    x_col = breakdowns[0]
    if len(breakdowns) > 1 and len(fact.measures) == 1:
        return ChartSpec(
            mark=Mark.STACKED_BAR,
            measures=fact.measures,
            x=_axis(table, x_col),
            y=Encoding(column=fact.measures[0], kind=ColumnKind.QUANTITATIVE),
            color=_axis(table, breakdowns[1]),
            data_scope=fact.context,
            emphasis=fact.focus,
            title=f"{fact.measures[0]} by {x_col} and {breakdowns[1]}",
            fact=fact,
        )
    spec = _single_chart(fact, table, Mark.STACKED_BAR, x_col)
    return spec


def _scatter_chart(fact: DataFact, table: DataTable) -> ChartSpec:
    m1, m2 = fact.measures[0], fact.measures[1]
    return ChartSpec(
        mark=Mark.POINT,
        measures=(m1, m2),
        x=Encoding(column=m1, kind=ColumnKind.QUANTITATIVE),
        y=Encoding(column=m2, kind=ColumnKind.QUANTITATIVE),
        data_scope=fact.context,
        emphasis=fact.focus,
        title=f"{m2} vs {m1}",
        fact=fact,
    )


def _side_by_side(fact: DataFact, table: DataTable, x_col: str) -> ChartSpec:
    """Aligned pair over the first two measures, sharing the breakdown axis.

    Charts stack vertically when the aligned axis runs horizontally so
    the shared axes stay parallel.
    """
    x = _axis(table, x_col)
    mark = Mark.LINE if x.kind is ColumnKind.TEMPORAL else Mark.BAR

    def one(measure: str) -> ChartSpec:
        return ChartSpec(
            mark=mark,
            measures=(measure,),
            x=x,
            y=Encoding(column=measure, kind=ColumnKind.QUANTITATIVE),
            data_scope=fact.context,
            emphasis=fact.focus,
            title=_title([measure], x_col),
            fact=fact,
        )

    first, second = one(fact.measures[0]), one(fact.measures[1])
    return first.replace(
        pair=second,
        pair_align=x_col,
        pair_orientation=Orientation.VERTICAL,
        title=_title(fact.measures[:2], x_col),
    )


def map_fact_to_charts(fact: DataFact, table: DataTable) -> list[ChartSpec]:
    """Candidate charts for one fact, keyed on its type.

    Comparison and correlation facts with two or more measures also offer
    a side-by-side pair; the sequence optimizer picks between the
    alternatives.
    """
    breakdowns = effective_breakdowns(fact, table)
    temporal = [
        b for b in breakdowns if table.column(b).kind is ColumnKind.TEMPORAL
    ]

    if fact.type is FactType.TREND:
        if not temporal:
            raise UnmappableFactError(
                f"trend fact over {fact.measures} has no temporal breakdown"
            )
        mark = Mark.MULTI_LINE if len(fact.measures) > 1 else Mark.LINE
        return [_single_chart(fact, table, mark, temporal[0])]

    if fact.type is FactType.CORRELATION:
        if len(fact.measures) >= 2:
            charts = [_scatter_chart(fact, table)]
            if breakdowns:
                charts.append(_side_by_side(fact, table, breakdowns[0]))
            return charts
        if not breakdowns:
            raise UnmappableFactError("correlation fact needs two measures or a breakdown")
        return [_single_chart(fact, table, Mark.POINT, breakdowns[0])]

    if not breakdowns:
        raise UnmappableFactError(
            f"{fact.type.value} fact over {fact.measures} has no grouping column"
        )
    x_col = breakdowns[0]

    if fact.type is FactType.COMPARISON:
        mark = Mark.GROUPED_BAR if len(fact.measures) > 1 else Mark.BAR
        charts = [_single_chart(fact, table, mark, x_col)]
        if len(fact.measures) >= 2:
            charts.append(_side_by_side(fact, table, x_col))
        return charts

    if fact.type is FactType.DISTRIBUTION:
        charts = [_single_chart(fact, table, Mark.BAR, x_col)]
        if len(fact.measures) == 1:
            charts.append(_single_chart(fact, table, Mark.TICK, x_col))
        return charts

    if fact.type is FactType.PROPORTION:
        return [_stacked_chart(fact, table, breakdowns)]

    # value / extreme / rank / deviation: bar with the focus emphasized
    return [_single_chart(fact, table, Mark.BAR, x_col)]


def _dedupe_specs(specs: Sequence[ChartSpec]) -> list[ChartSpec]:
    out: list[ChartSpec] = []
    for spec in specs:
        if not any(specs_equal(spec, kept) for kept in out):
            out.append(spec)
    return out


def _skeleton_of(spec: ChartSpec) -> ChartSpec:
    """Axes and title only: same encodings, no visible marks or emphasis."""
    parts = spec.parts()
    base = parts[0].replace(emphasis={}, skeleton=True)
    if len(parts) > 1:
        return base.replace(
            pair=parts[1].replace(emphasis={}, skeleton=True),
            pair_align=spec.pair_align,
            pair_orientation=spec.pair_orientation,
        )
    return base


def adjust_candidates(
    clauses: Sequence[Clause],
    candidate_sets: Sequence[Sequence[ChartSpec]],
) -> list[list[ChartSpec]]:
    """Apply the vague/no-fact visual rules to per-clause candidates.

    The first chart-bearing clause is the sequence opener: a vague opener
    loses its emphasis. A later vague clause may also mimic the previous
    clause's visuals, so copies of them join its candidates. No-fact
    positions carry the previous candidates forward, except ahead of the
    opener where they show the next chart's axes-and-title skeleton.
    """
    if len(clauses) != len(candidate_sets):
        raise ValueError("clauses and candidate sets differ in length")

    first_real = next(
        (i for i, cands in enumerate(candidate_sets) if cands), None
    )
    adjusted: list[list[ChartSpec]] = []
    for i, (clause, cands) in enumerate(zip(clauses, candidate_sets)):
        cands = list(cands)
        if not cands:
            if first_real is not None and i < first_real:
                adjusted.append([_skeleton_of(s) for s in candidate_sets[first_real]])
            elif i > 0 and adjusted[i - 1]:
                adjusted.append(list(adjusted[i - 1]))
            else:
                adjusted.append([])
            continue
        if clause.clarity is Clarity.VAGUE:
            if i == first_real:
                cands = _dedupe_specs([s.replace(emphasis={}) for s in cands])
            elif i > 0:
                carried = [s for s in adjusted[i - 1] if not s.skeleton]
                cands = _dedupe_specs(cands + carried)
        adjusted.append(cands)
    return adjusted
