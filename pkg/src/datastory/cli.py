"""Command-line entry point.

Subcommands: ``analyze`` (narrative -> story JSON), ``generate`` (story ->
storyboard JSON), ``run`` (end to end), ``report`` (storyboard -> PNG
frames + frames.csv). Exit codes: 2 input problems, 3 gateway failures,
4 unresolvable narratives.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, parse_weights
from .errors import GatewayError, InputError, UnresolvedClauseError
from .model import Story
from .pipeline import (
    analyze_narrative,
    build_gateway,
    generate_storyboard,
    run_pipeline,
)
from .report import write_report
from .storyboard import dumps_storyboard, validate_storyboard
from .tables import load_table

EXIT_INPUT = 2
EXIT_GATEWAY = 3
EXIT_UNRESOLVED = 4


def _add_gateway_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--llm-endpoint", help="OpenAI-compatible base URL")
    p.add_argument("--llm-model", help="chat model name")
    p.add_argument("--embed-model", help="embedding model name")
    p.add_argument("--fixture-dir", help="directory of recorded fixtures")
    p.add_argument(
        "--record",
        action="store_true",
        default=None,
        help="record fixtures from the live endpoint into --fixture-dir",
    )


def _add_table_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--table", required=True, help="CSV or JSON table path")
    p.add_argument("--schema", help="JSON sidecar overriding column kinds")


def _add_generate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", help="objective weights w1,w2,w3")
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--exhaustive-bound", type=int, dest="exhaustive_bound")
    p.add_argument("--no-pruning", action="store_true", default=None)
    p.add_argument("--cost-table", dest="cost_table", help="cost tiers JSON file")
    p.add_argument("--min-anim-ms", type=int, dest="min_anim_ms")
    p.add_argument("--wpm", type=int, help="narration words per minute")
    p.add_argument("--tts-url", dest="tts_url", help="HTTP TTS provider endpoint")
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--dump-scores",
        action="store_true",
        help="print (T, B, P, F) per considered sequence head",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datastory",
        description="Turn a data narrative and its table into a timed chart storyboard.",
    )
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="extract the story from a narrative")
    p_an.add_argument("--narrative", required=True)
    _add_table_flags(p_an)
    _add_gateway_flags(p_an)
    p_an.add_argument("--out", required=True, help="story JSON output path")

    p_gen = sub.add_parser("generate", help="turn a story into a storyboard")
    p_gen.add_argument("--story", required=True, help="story JSON from analyze")
    _add_table_flags(p_gen)
    _add_gateway_flags(p_gen)
    _add_generate_flags(p_gen)
    p_gen.add_argument("--out", required=True, help="storyboard JSON output path")

    p_run = sub.add_parser("run", help="analyze + generate in one step")
    p_run.add_argument("--narrative", required=True)
    _add_table_flags(p_run)
    _add_gateway_flags(p_run)
    _add_generate_flags(p_run)
    p_run.add_argument("--out", required=True, help="storyboard JSON output path")
    p_run.add_argument("--story-out", help="also write the intermediate story JSON")

    p_rep = sub.add_parser("report", help="render storyboard frames to PNG + CSV")
    p_rep.add_argument("--storyboard", required=True)
    _add_table_flags(p_rep)
    p_rep.add_argument("--out-dir", required=True)

    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    flags = {
        "llm_endpoint": getattr(args, "llm_endpoint", None),
        "llm_model": getattr(args, "llm_model", None),
        "embed_model": getattr(args, "embed_model", None),
        "fixture_dir": getattr(args, "fixture_dir", None),
        "record": getattr(args, "record", None),
        "beam_width": getattr(args, "beam_width", None),
        "exhaustive_bound": getattr(args, "exhaustive_bound", None),
        "cost_table": getattr(args, "cost_table", None),
        "min_anim_ms": getattr(args, "min_anim_ms", None),
        "wpm": getattr(args, "wpm", None),
        "tts_url": getattr(args, "tts_url", None),
        "seed": getattr(args, "seed", None),
    }
    if getattr(args, "weights", None):
        flags["weights"] = parse_weights(args.weights)
    if getattr(args, "no_pruning", None):
        flags["pruning"] = False
    return PipelineConfig.resolve(flags=flags, config_file=args.config)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _write_json(path: str, payload: str) -> None:
    try:
        Path(path).write_text(payload, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def _score_printer(args: argparse.Namespace):
    if not getattr(args, "dump_scores", False):
        return None

    def emit(position: int, indices: tuple[int, ...], score) -> None:
        head = ",".join(str(i) for i in indices)
        print(
            f"pos={position} head=[{head}] "
            f"T={score.transition:.3f} B={score.focus:.0f} "
            f"P={score.retrieval:.5f} F={score.objective:.5f}"
        )

    return emit


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config_from_args(args)
        if args.command == "report":
            table = load_table(args.table, args.schema)
            board = json.loads(_read_text(args.storyboard))
            validate_storyboard(board)
            written = write_report(board, table, args.out_dir)
            print(f"wrote {len(written)} files to {args.out_dir}")
            return 0

        table = load_table(args.table, args.schema)
        if args.command == "analyze":
            gateway = build_gateway(config)
            narrative = _read_text(args.narrative)
            story = analyze_narrative(narrative, table, gateway, config)
            _write_json(
                args.out,
                json.dumps(story.to_json(), indent=2, sort_keys=True, ensure_ascii=False)
                + "\n",
            )
            print(f"wrote story with {len(story.clauses)} clauses to {args.out}")
            return 0

        if args.command == "generate":
            story = Story.from_json(json.loads(_read_text(args.story)))
            gateway = None
            if config.fixture_dir or config.llm_endpoint:
                gateway = build_gateway(config)
            board = generate_storyboard(
                story, table, config, gateway, trace=_score_printer(args)
            )
            _write_json(args.out, dumps_storyboard(board))
            print(f"wrote storyboard with {len(board['frames'])} frames to {args.out}")
            return 0

        # run
        gateway = build_gateway(config)
        narrative = _read_text(args.narrative)
        story, board = run_pipeline(
            narrative, table, gateway, config, trace=_score_printer(args)
        )
        if args.story_out:
            _write_json(
                args.story_out,
                json.dumps(story.to_json(), indent=2, sort_keys=True, ensure_ascii=False)
                + "\n",
            )
        _write_json(args.out, dumps_storyboard(board))
        print(f"wrote storyboard with {len(board['frames'])} frames to {args.out}")
        return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnresolvedClauseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNRESOLVED
    except GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATEWAY


if __name__ == "__main__":
    sys.exit(main())
