#!/usr/bin/env python3
"""Regenerate the committed Weather fixture corpus and golden outputs.

Usage: python3 tools/make_weather_fixtures.py

Writes tests/data/weather/{narrative.txt,fixtures/,story.golden.json,
storyboard.golden.json} by running the full pipeline against the
scripted backend and recording every request. Run after changing prompt
templates, the weather table, the narrative plan, or pipeline logic that
alters prompts or outputs.
"""
from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tools"))

from datastory.config import PipelineConfig
from datastory.gateway import FixtureBackend, LlmGateway, RecordingBackend
from datastory.pipeline import run_pipeline
from datastory.storyboard import dumps_storyboard
from datastory.tables import load_table

from weather_fixture_plan import NARRATIVE, PlannedBackend, write_inputs


def main() -> int:
    data_dir = REPO / "tests" / "data" / "weather"
    fixtures = data_dir / "fixtures"
    if fixtures.exists():
        shutil.rmtree(fixtures)
    write_inputs(data_dir)

    table = load_table(REPO / "tests" / "data" / "weather.csv", name="weather")
    config = PipelineConfig()

    recorder = RecordingBackend(PlannedBackend(), fixtures)
    story, board = run_pipeline(NARRATIVE, table, LlmGateway(recorder), config)

    story_json = (
        json.dumps(story.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    )
    board_json = dumps_storyboard(board)
    (data_dir / "story.golden.json").write_text(story_json, encoding="utf-8")
    (data_dir / "storyboard.golden.json").write_text(board_json, encoding="utf-8")

    # replay from the recorded fixtures must reproduce the bytes exactly
    replay_story, replay_board = run_pipeline(
        NARRATIVE, table, LlmGateway(FixtureBackend(fixtures)), config
    )
    assert dumps_storyboard(replay_board) == board_json, "replay diverged"
    assert (
        json.dumps(replay_story.to_json(), indent=2, sort_keys=True, ensure_ascii=False)
        + "\n"
        == story_json
    ), "story replay diverged"

    n_fixtures = len(list(fixtures.glob("*.json")))
    print(f"wrote {n_fixtures} fixture files, golden story and storyboard")
    print(f"frames: {len(board['frames'])}, transitions: {len(board['transitions'])}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
