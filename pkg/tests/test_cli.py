from __future__ import annotations

import csv
import json
import shutil
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from datastory.cli import main
from datastory.model import Story
from datastory.storyboard import validate_storyboard

import sys

TOOLS = Path(__file__).parent.parent / "tools"
if str(TOOLS) not in sys.path:
    sys.path.insert(0, str(TOOLS))

from weather_fixture_plan import PlannedBackend  # noqa: E402

DATA = Path(__file__).parent / "data"
WEATHER_DIR = DATA / "weather"


def run_cli(*args) -> int:
    return main([str(a) for a in args])


def _analyze_args(out, fixture_dir=None):
    return [
        "analyze",
        "--narrative", WEATHER_DIR / "narrative.txt",
        "--table", DATA / "weather.csv",
        "--fixture-dir", fixture_dir or (WEATHER_DIR / "fixtures"),
        "--out", out,
    ]


def test_missing_table_exits_2(tmp_path, capsys):
    code = run_cli(
        "analyze",
        "--narrative", WEATHER_DIR / "narrative.txt",
        "--table", tmp_path / "missing.csv",
        "--fixture-dir", WEATHER_DIR / "fixtures",
        "--out", tmp_path / "story.json",
    )
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_missing_backend_exits_2(tmp_path):
    code = run_cli(
        "analyze",
        "--narrative", WEATHER_DIR / "narrative.txt",
        "--table", DATA / "weather.csv",
        "--out", tmp_path / "story.json",
    )
    assert code == 2


def test_fixture_miss_exits_3(tmp_path):
    empty = tmp_path / "empty-fixtures"
    empty.mkdir()
    code = run_cli(*_analyze_args(tmp_path / "story.json", fixture_dir=empty))
    assert code == 3


def test_analyze_writes_deterministic_story(tmp_path):
    out = tmp_path / "story.json"
    assert run_cli(*_analyze_args(out)) == 0
    golden = (WEATHER_DIR / "story.golden.json").read_text(encoding="utf-8")
    assert out.read_text(encoding="utf-8") == golden
    story = Story.from_json(json.loads(out.read_text(encoding="utf-8")))
    assert len(story.clauses) == 5


def test_generate_from_story(tmp_path):
    out = tmp_path / "sb.json"
    code = run_cli(
        "generate",
        "--story", WEATHER_DIR / "story.golden.json",
        "--table", DATA / "weather.csv",
        "--fixture-dir", WEATHER_DIR / "fixtures",
        "--weights", "1,0.5,2",
        "--out", out,
    )
    assert code == 0
    board = json.loads(out.read_text(encoding="utf-8"))
    validate_storyboard(board)
    golden = (WEATHER_DIR / "storyboard.golden.json").read_text(encoding="utf-8")
    assert out.read_text(encoding="utf-8") == golden


def test_run_end_to_end_is_byte_identical_across_runs(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        code = run_cli(
            "run",
            "--narrative", WEATHER_DIR / "narrative.txt",
            "--table", DATA / "weather.csv",
            "--fixture-dir", WEATHER_DIR / "fixtures",
            "--out", out,
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    golden = (WEATHER_DIR / "storyboard.golden.json").read_bytes()
    assert outs[0] == golden


def test_zero_exhaustive_bound_forces_beam(tmp_path):
    out = tmp_path / "sb.json"
    code = run_cli(
        "generate",
        "--story", WEATHER_DIR / "story.golden.json",
        "--table", DATA / "weather.csv",
        "--fixture-dir", WEATHER_DIR / "fixtures",
        "--exhaustive-bound", 0,
        "--out", out,
    )
    assert code == 0
    board = json.loads(out.read_text(encoding="utf-8"))
    validate_storyboard(board)


def test_dump_scores_prints_sequence_heads(tmp_path, capsys):
    out = tmp_path / "sb.json"
    code = run_cli(
        "generate",
        "--story", WEATHER_DIR / "story.golden.json",
        "--table", DATA / "weather.csv",
        "--fixture-dir", WEATHER_DIR / "fixtures",
        "--dump-scores",
        "--out", out,
    )
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("pos=")]
    assert lines
    assert all("T=" in l and "B=" in l and "P=" in l and "F=" in l for l in lines)


def test_config_file_merges_under_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"wpm": 300, "min_anim_ms": 250}), encoding="utf-8")
    out = tmp_path / "sb.json"
    code = run_cli(
        "--config", cfg,
        "run",
        "--narrative", WEATHER_DIR / "narrative.txt",
        "--table", DATA / "weather.csv",
        "--fixture-dir", WEATHER_DIR / "fixtures",
        "--out", out,
    )
    assert code == 0
    board = json.loads(out.read_text(encoding="utf-8"))
    golden = json.loads((WEATHER_DIR / "storyboard.golden.json").read_text())
    assert board["frames"][0]["end_ms"] == golden["frames"][0]["end_ms"] // 2


def test_report_renders_frames_and_csv(tmp_path):
    out_dir = tmp_path / "report"
    code = run_cli(
        "report",
        "--storyboard", WEATHER_DIR / "storyboard.golden.json",
        "--table", DATA / "weather.csv",
        "--out-dir", out_dir,
    )
    assert code == 0
    board = json.loads((WEATHER_DIR / "storyboard.golden.json").read_text())
    pngs = sorted(out_dir.glob("frame_*.png"))
    assert len(pngs) == len(board["frames"])
    with (out_dir / "frames.csv").open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(board["frames"])
    assert rows[1]["incoming_transition"] == board["transitions"][0]["kind"]
    assert all(int(r["end_ms"]) > int(r["start_ms"]) for r in rows)


class _PlannedHttpHandler(BaseHTTPRequestHandler):
    """OpenAI-compatible endpoint backed by the scripted plan.

    Session ids do not travel over the wire, so all extraction sessions
    answer alike here; recording correctness is what's under test, not
    the planned story itself.
    """

    backend = PlannedBackend()

    def do_POST(self):
        from datastory.gateway import GenerationRequest

        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        if self.path.endswith("/chat/completions"):
            req = GenerationRequest(
                prompt=payload["messages"][0]["content"],
                temperature=payload.get("temperature", 0.3),
            )
            body = {"choices": [{"message": {"content": self.backend.complete(req)}}]}
        else:
            vector = self.backend.embed_text(payload["input"])
            body = {"data": [{"embedding": list(vector.values)}]}
        blob = json.dumps(body).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


def test_record_mode_writes_fixtures_for_every_digest(tmp_path, monkeypatch):
    monkeypatch.setenv("NP_API_KEY", "test-key")
    server = ThreadingHTTPServer(("127.0.0.1", 0), _PlannedHttpHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        fixture_dir = tmp_path / "recorded"
        out = tmp_path / "story.json"
        code = main(
            [
                "analyze",
                "--narrative", str(WEATHER_DIR / "narrative.txt"),
                "--table", str(DATA / "weather.csv"),
                "--llm-endpoint", f"http://127.0.0.1:{server.server_port}",
                "--llm-model", "planned",
                "--embed-model", "planned-embed",
                "--fixture-dir", str(fixture_dir),
                "--record",
                "--out", str(out),
            ]
        )
        assert code == 0
        recorded = {p.name for p in fixture_dir.glob("*.json")}
        assert "meta.json" in recorded and "index.json" in recorded
        index = json.loads((fixture_dir / "index.json").read_text(encoding="utf-8"))
        assert recorded - {"meta.json", "index.json"} == {f"{d}.json" for d in index}

        # the recorded corpus replays offline to the same story
        replay_out = tmp_path / "replay.json"
        code = run_cli(*_analyze_args(replay_out, fixture_dir=fixture_dir))
        assert code == 0
        assert replay_out.read_text(encoding="utf-8") == out.read_text(encoding="utf-8")
    finally:
        server.shutdown()
