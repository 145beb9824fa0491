"""Emitted chart documents must validate against the Vega-Lite grammar.

Uses the schema bundled with altair so the check runs offline.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

import jsonschema
import pytest

altair = pytest.importorskip("altair")

from datastory.charts import to_vega_lite
from datastory.mapping import map_fact_to_charts
from datastory.harmonize import harmonize
from datastory.model import FactType

from conftest import make_fact, random_instance


@pytest.fixture(scope="module")
def vega_lite_schema():
    root = Path(altair.__file__).parent
    hits = list(root.glob("**/vega-lite-schema.json"))
    assert hits, "altair did not ship a vega-lite schema"
    return json.loads(hits[0].read_text(encoding="utf-8"))


def _validate(doc, schema):
    jsonschema.validate(doc, schema)


def test_representative_charts_are_schema_valid(weather_table, vega_lite_schema):
    facts = [
        make_fact(type=FactType.EXTREME, measures=("Average low",), breakdowns=("Month",),
                  focus={"Month": ["Dec"]}),
        make_fact(type=FactType.TREND, measures=("Average low", "Average high"),
                  breakdowns=("Month",)),
        make_fact(type=FactType.COMPARISON, measures=("Average low", "Rainfall"),
                  breakdowns=("Month",)),
        make_fact(type=FactType.CORRELATION, measures=("Average low", "Rainfall"),
                  breakdowns=("Month",)),
        make_fact(type=FactType.DISTRIBUTION, measures=("Rainfall",), breakdowns=("Month",)),
        make_fact(type=FactType.PROPORTION, measures=("Rainfall", "Average low"),
                  breakdowns=("Month",)),
    ]
    sets = [map_fact_to_charts(f, weather_table) for f in facts]
    sets = harmonize(sets, weather_table)
    count = 0
    for cands in sets:
        for spec in cands:
            _validate(to_vega_lite(spec, weather_table), vega_lite_schema)
            count += 1
    assert count >= 8


def test_random_charts_are_schema_valid(weather_table, vega_lite_schema):
    rng = random.Random(17)
    _, sets = random_instance(rng, 4, 2)
    for cands in harmonize(sets, weather_table):
        for spec in cands:
            _validate(to_vega_lite(spec, weather_table), vega_lite_schema)


def test_golden_storyboard_charts_are_schema_valid(vega_lite_schema):
    board = json.loads(
        (Path(__file__).parent / "data" / "weather" / "storyboard.golden.json").read_text(
            encoding="utf-8"
        )
    )
    for frame in board["frames"]:
        for chart in frame["charts"]:
            _validate(chart["vega_lite"], vega_lite_schema)
