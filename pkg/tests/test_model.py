from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datastory.errors import ScopeError
from datastory.model import (
    Column,
    ColumnKind,
    DataFact,
    DataTable,
    FactType,
    dedupe_facts,
    fact_data_scope,
    fact_focus_scope,
    rows_matching,
    validate_fact,
)
from datastory.errors import InputError

from conftest import make_fact, MONTHS


def test_table_rejects_duplicate_columns():
    with pytest.raises(InputError, match="duplicate"):
        DataTable(
            name="bad",
            columns=(Column("a", ColumnKind.CATEGORICAL), Column("a", ColumnKind.CATEGORICAL)),
            rows=(),
        )


def test_table_rejects_non_numeric_quantitative():
    with pytest.raises(InputError, match="finite"):
        DataTable(
            name="bad",
            columns=(Column("v", ColumnKind.QUANTITATIVE),),
            rows=({"v": "twelve"},),
        )


def test_table_rejects_missing_cells():
    with pytest.raises(InputError, match="missing"):
        DataTable(
            name="bad",
            columns=(Column("a", ColumnKind.CATEGORICAL), Column("b", ColumnKind.CATEGORICAL)),
            rows=({"a": "x"},),
        )


def test_extreme_december_fact_is_valid(weather_table):
    fact = make_fact(
        type=FactType.EXTREME,
        measures=("Average low", "Record low"),
        focus={"Month": ["Dec"]},
    )
    assert validate_fact(fact, weather_table).ok


def test_empty_measures_is_a_violation(weather_table):
    fact = make_fact(measures=())
    report = validate_fact(fact, weather_table)
    assert not report.ok
    assert any("empty measures" in v for v in report.violations)


def test_focus_value_absent_from_column(weather_table):
    fact = make_fact(focus={"Month": ["Smarch"]})
    report = validate_fact(fact, weather_table)
    assert any("focus value not in column" in v for v in report.violations)


def test_breakdown_measure_overlap_flagged(weather_table):
    fact = make_fact(measures=("Rainfall",), breakdowns=("Rainfall",))
    report = validate_fact(fact, weather_table)
    assert any("overlap" in v for v in report.violations)


def test_focus_must_stay_inside_context(weather_table):
    fact = make_fact(context={"Month": ["Jan"]}, focus={"Month": ["Feb"]})
    report = validate_fact(fact, weather_table)
    assert any("focus exceeds context" in v for v in report.violations)


def test_validate_fact_is_pure(weather_table):
    fact = make_fact(focus={"Month": ["Smarch"]})
    assert validate_fact(fact, weather_table) == validate_fact(fact, weather_table)


def test_empty_context_scope_is_whole_table(weather_table):
    fact = make_fact()
    assert fact_data_scope(fact, weather_table) == frozenset(range(12))


def test_single_month_context_selects_one_row(weather_table):
    fact = make_fact(context={"Month": ["Dec"]})
    scope = fact_data_scope(fact, weather_table)
    assert len(scope) == 1
    (idx,) = scope
    assert weather_table.rows[idx]["Month"] == "Dec"


def _station_table() -> DataTable:
    columns = (
        Column("Month", ColumnKind.TEMPORAL),
        Column("Station", ColumnKind.CATEGORICAL),
        Column("Reading", ColumnKind.QUANTITATIVE),
    )
    rows = tuple(
        {"Month": m, "Station": s, "Reading": float(i)}
        for i, (m, s) in enumerate(
            (m, s) for m in ("Apr", "May", "Jun", "Jul") for s in ("A", "B")
        )
    )
    return DataTable(name="stations", columns=columns, rows=rows)


def test_multi_key_context_uses_intersection_semantics():
    table = _station_table()
    filt = {"Month": ("May", "Jun"), "Station": ("A",)}
    # brute-force oracle: independent set intersection over rows
    expected = frozenset(
        i
        for i, row in enumerate(table.rows)
        if row["Month"] in {"May", "Jun"}
    ) & frozenset(i for i, row in enumerate(table.rows) if row["Station"] == "A")
    assert rows_matching(table, filt) == expected
    assert len(expected) == 2


def test_unknown_scope_column_raises():
    table = _station_table()
    with pytest.raises(ScopeError):
        rows_matching(table, {"Altitude": ("high",)})


def test_null_cells_are_excluded_from_scopes():
    table = DataTable(
        name="nulls",
        columns=(Column("k", ColumnKind.CATEGORICAL), Column("v", ColumnKind.QUANTITATIVE)),
        rows=({"k": "a", "v": 1.0}, {"k": None, "v": 2.0}, {"k": "a", "v": None}),
    )
    assert rows_matching(table, {"k": ("a",)}) == frozenset({0, 2})
    assert rows_matching(table, {"k": (None,)}) == frozenset()


@given(
    context_months=st.sets(st.sampled_from(MONTHS), min_size=1, max_size=12),
    focus_size=st.integers(min_value=1, max_value=3),
)
@settings(max_examples=50, deadline=None)
def test_focus_never_widens_scope(weather_table, context_months, focus_size):
    months = sorted(context_months, key=MONTHS.index)
    focus = months[:focus_size]
    fact = make_fact(context={"Month": months}, focus={"Month": focus})
    scope = fact_data_scope(fact, weather_table)
    focus_rows = fact_focus_scope(fact, weather_table)
    assert focus_rows <= scope


_fact_strategy = st.builds(
    make_fact,
    type=st.sampled_from(list(FactType)),
    measures=st.lists(
        st.sampled_from(["Average low", "Record low", "Rainfall"]), min_size=1, max_size=3
    ).map(tuple),
    context=st.dictionaries(
        st.just("Month"),
        st.lists(st.sampled_from(MONTHS), min_size=1, max_size=4),
        max_size=1,
    ),
    breakdowns=st.sampled_from([(), ("Month",)]),
    parameters=st.dictionaries(st.sampled_from(["delta", "rank"]), st.integers(-5, 5), max_size=2),
)


@given(fact=_fact_strategy)
@settings(max_examples=100, deadline=None)
def test_fact_json_round_trip_is_identity(fact):
    reparsed = DataFact.from_json(json.loads(fact.canonical_json()))
    assert reparsed == fact
    assert reparsed.canonical_key() == fact.canonical_key()


def test_canonical_equality_ignores_ordering():
    a = DataFact(
        type=FactType.COMPARISON,
        measures=("Average low", "Record low"),
        context={"Month": ["Jan", "Feb"]},
    )
    b = DataFact(
        type=FactType.COMPARISON,
        measures=("Record low", "Average low"),
        context={"Month": ["Feb", "Jan"]},
    )
    assert a.canonical_key() == b.canonical_key()
    assert len(dedupe_facts([a, b])) == 1


def test_fact_type_aliases_parse():
    assert DataFact.from_json({"type": "compare", "measures": ["Rainfall"]}).type is FactType.COMPARISON
    assert DataFact.from_json({"type": "correlate", "measures": ["Rainfall"]}).type is FactType.CORRELATION
