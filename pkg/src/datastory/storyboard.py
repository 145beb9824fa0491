"""Transition planning, clause timing, and storyboard assembly.

The storyboard is the timed document a renderer or player consumes:
frames with chart specs and subtitles, transition plans keyed by frame
boundary, and optional audio offsets. Serialization uses UTF-8 JSON with
sorted keys so identical runs are byte-identical.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Protocol, Sequence

import jsonschema
import requests

from .charts import ChartSpec, to_vega_lite
from .errors import StoryboardError
from .model import Clause, DataTable
from .optimizer import (
    CostTable,
    VisualizationSequence,
    joined_interim_states,
    transition_cost_joined,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
MIN_ANIMATION_MS = 500
DEFAULT_WPM = 150
MIN_FRAME_MS = 1000


class TransitionKind:
    NONE = "none"
    ONE_TO_ONE = "one-to-one"
    ONE_TO_TWO = "one-to-two"
    TWO_TO_ONE = "two-to-one"
    TWO_TO_TWO = "two-to-two"


@dataclass(frozen=True)
class TransitionStep:
    action: str  # enter | exit | morph | interpolate-via
    target: str
    duration_ms: int
    offset_ms: int = 0
    interim: Optional[ChartSpec] = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "action": self.action,
            "target": self.target,
            "duration_ms": self.duration_ms,
            "offset_ms": self.offset_ms,
        }
        if self.interim is not None:
            out["interim"] = self.interim.to_json()
        return out


@dataclass(frozen=True)
class TransitionPlan:
    kind: str
    steps: tuple[TransitionStep, ...] = ()

    def to_json(self) -> dict:
        return {"kind": self.kind, "steps": [s.to_json() for s in self.steps]}


def _chart_ids(frame_index: int, composite: ChartSpec) -> list[str]:
    return [f"f{frame_index}.{i}" for i in range(len(composite.parts()))]


def _split_duration(total: int, pieces: int) -> list[int]:
    base = total // pieces
    out = [base] * pieces
    out[-1] += total - base * pieces
    return out


def plan_transition(
    prev: ChartSpec,
    cur: ChartSpec,
    prev_frame: int,
    cur_frame: int,
    duration_ms: int,
    costs: CostTable = CostTable(),
) -> TransitionPlan:
    """Typed animation plan between two adjacent chosen visuals.

    Disjoint charts cut with no effects. Joined one-to-one transitions
    interpolate through interim specs on the shared data. Asymmetric
    cases move the cheaper pairing first (entering second, exiting
    first); two-to-two morphs both chosen pairings simultaneously.
    """
    prev_parts = prev.parts()
    cur_parts = cur.parts()
    prev_ids = _chart_ids(prev_frame, prev)
    cur_ids = _chart_ids(cur_frame, cur)

    shared_fields = set(prev.rendered_fields()) & set(cur.rendered_fields())
    any_join = any(
        joined_interim_states(p, c) is not None
        for p in prev_parts
        for c in cur_parts
    )
    if not shared_fields and not any_join:
        return TransitionPlan(kind=TransitionKind.NONE)

    def morph_steps(
        s: ChartSpec, target_id: str, e: ChartSpec, total: int, offset: int
    ) -> list[TransitionStep]:
        interim = joined_interim_states(s, e)
        if interim is None:
            return [TransitionStep("morph", target_id, total, offset)]
        s_i, e_i = interim
        d1, d2, d3 = _split_duration(total, 3)
        return [
            TransitionStep("interpolate-via", target_id, d1, offset, interim=s_i),
            TransitionStep("interpolate-via", target_id, d2, offset + d1, interim=e_i),
            TransitionStep("morph", target_id, d3, offset + d1 + d2),
        ]

    if len(prev_parts) == 1 and len(cur_parts) == 1:
        return TransitionPlan(
            kind=TransitionKind.ONE_TO_ONE,
            steps=tuple(
                morph_steps(prev_parts[0], cur_ids[0], cur_parts[0], duration_ms, 0)
            ),
        )

    if len(prev_parts) == 1 and len(cur_parts) == 2:
        cost0 = transition_cost_joined(prev_parts[0], cur_parts[0], costs)
        cost1 = transition_cost_joined(prev_parts[0], cur_parts[1], costs)
        primary = 0 if cost0 <= cost1 else 1
        secondary = 1 - primary
        d_morph, d_enter = _split_duration(duration_ms, 2)
        steps = morph_steps(
            prev_parts[0], cur_ids[primary], cur_parts[primary], d_morph, 0
        )
        steps.append(TransitionStep("enter", cur_ids[secondary], d_enter, d_morph))
        return TransitionPlan(kind=TransitionKind.ONE_TO_TWO, steps=tuple(steps))

    if len(prev_parts) == 2 and len(cur_parts) == 1:
        cost0 = transition_cost_joined(prev_parts[0], cur_parts[0], costs)
        cost1 = transition_cost_joined(prev_parts[1], cur_parts[0], costs)
        primary = 0 if cost0 <= cost1 else 1
        secondary = 1 - primary
        d_exit, d_morph = _split_duration(duration_ms, 2)
        steps = [TransitionStep("exit", prev_ids[secondary], d_exit, 0)]
        steps.extend(
            morph_steps(
                prev_parts[primary], cur_ids[0], cur_parts[0], d_morph, d_exit
            )
        )
        return TransitionPlan(kind=TransitionKind.TWO_TO_ONE, steps=tuple(steps))

    straight = transition_cost_joined(
        prev_parts[0], cur_parts[0], costs
    ) + transition_cost_joined(prev_parts[1], cur_parts[1], costs)
    crossed = transition_cost_joined(
        prev_parts[0], cur_parts[1], costs
    ) + transition_cost_joined(prev_parts[1], cur_parts[0], costs)
    pairing = ((0, 0), (1, 1)) if straight <= crossed else ((0, 1), (1, 0))
    steps = []
    for src, dst in pairing:
        steps.extend(
            morph_steps(prev_parts[src], cur_ids[dst], cur_parts[dst], duration_ms, 0)
        )
    return TransitionPlan(kind=TransitionKind.TWO_TO_TWO, steps=tuple(steps))


# ----------------------------------------------------------------------
# Timeline
# ----------------------------------------------------------------------

class DurationProvider(Protocol):
    def durations(self, texts: Sequence[str]) -> list[int]: ...

    def audio_reference(self) -> Optional[dict]: ...


@dataclass
class WordRateEstimator:
    """Silent narration-length estimator at a fixed reading rate."""

    wpm: int = DEFAULT_WPM
    min_frame_ms: int = MIN_FRAME_MS

    def durations(self, texts: Sequence[str]) -> list[int]:
        out = []
        for text in texts:
            words = len(text.split())
            ms = round(words / self.wpm * 60_000)
            out.append(max(ms, self.min_frame_ms) if words else self.min_frame_ms)
        return out

    def audio_reference(self) -> Optional[dict]:
        return None


@dataclass
class HttpTtsProvider:
    """Slot for a speech service returning per-clause durations.

    Expected reply: ``{"durations_ms": [...], "audio_file": optional}``.
    """

    url: str
    timeout: float = 60.0
    _audio: Optional[dict] = field(default=None, init=False, repr=False)

    def durations(self, texts: Sequence[str]) -> list[int]:
        resp = requests.post(self.url, json={"texts": list(texts)}, timeout=self.timeout)
        resp.raise_for_status()
        data = resp.json()
        durations = [int(d) for d in data["durations_ms"]]
        if len(durations) != len(texts):
            raise StoryboardError("TTS provider returned wrong duration count")
        if data.get("audio_file"):
            self._audio = {"file": data["audio_file"]}
        return durations

    def audio_reference(self) -> Optional[dict]:
        return self._audio


def compute_timeline(
    clauses: Sequence[Clause],
    provider: Optional[DurationProvider] = None,
    wpm: int = DEFAULT_WPM,
    min_frame_ms: int = MIN_FRAME_MS,
) -> list[tuple[int, int]]:
    """Contiguous per-clause (start, end) milliseconds from 0.

    Provider-supplied durations win; on provider failure the word-rate
    estimator takes over with a warning.
    """
    estimator = WordRateEstimator(wpm=wpm, min_frame_ms=min_frame_ms)
    texts = [c.text for c in clauses]
    durations: Optional[list[int]] = None
    if provider is not None:
        try:
            durations = provider.durations(texts)
        except Exception as exc:  # provider failure falls back, never aborts
            log.warning("TTS provider failed (%s); falling back to estimator", exc)
    if durations is None:
        durations = estimator.durations(texts)

    intervals = []
    clock = 0
    for d in durations:
        intervals.append((clock, clock + d))
        clock += d
    return intervals


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------

def _load_schema() -> dict:
    data = (resources.files("datastory") / "storyboard-schema.json").read_text(
        encoding="utf-8"
    )
    return json.loads(data)


def validate_storyboard(doc: dict) -> None:
    """Schema plus structural invariants: contiguous frames from 0 and
    one transition per interior boundary."""
    jsonschema.validate(doc, _load_schema())
    frames = doc["frames"]
    if frames and frames[0]["start_ms"] != 0:
        raise StoryboardError("first frame must start at 0")
    for i in range(len(frames)):
        if frames[i]["end_ms"] <= frames[i]["start_ms"]:
            raise StoryboardError(f"frame {i} has a non-positive duration")
        if i and frames[i]["start_ms"] != frames[i - 1]["end_ms"]:
            raise StoryboardError(f"frame {i} does not start at the previous end")
    if len(doc["transitions"]) != max(len(frames) - 1, 0):
        raise StoryboardError("transition count must be frame count - 1")


def assemble_storyboard(
    sequence: VisualizationSequence,
    clauses: Sequence[Clause],
    timeline: Sequence[tuple[int, int]],
    table: DataTable,
    min_anim_ms: int = MIN_ANIMATION_MS,
    costs: CostTable = CostTable(),
    audio: Optional[dict] = None,
) -> dict:
    """Build the final storyboard document.

    Subtitles are the clause texts. Transition durations run at the
    minimum animation duration, clamped down to the incoming frame's
    length when the clause is shorter than that.
    """
    chosen = [c for c in sequence.charts[1:]]
    if not (len(chosen) == len(clauses) == len(timeline)):
        raise StoryboardError("sequence, clauses, and timeline lengths differ")

    frames = []
    for i, (spec, clause, (start, end)) in enumerate(zip(chosen, clauses, timeline)):
        charts = []
        for j, part in enumerate(spec.parts()):
            charts.append(
                {
                    "id": f"f{i}.{j}",
                    "spec": part.to_json(),
                    "vega_lite": to_vega_lite(part, table),
                }
            )
        frames.append(
            {
                "clause_id": clause.id,
                "subtitle": clause.text,
                "start_ms": start,
                "end_ms": end,
                "charts": charts,
                "layout": {
                    "paired": spec.pair is not None,
                    "orientation": (
                        spec.pair_orientation.value if spec.pair_orientation else None
                    ),
                },
            }
        )

    transitions = []
    for i in range(1, len(chosen)):
        frame_ms = timeline[i][1] - timeline[i][0]
        duration = min(min_anim_ms, frame_ms)
        plan = plan_transition(
            chosen[i - 1], chosen[i], i - 1, i, duration, costs
        )
        transitions.append({"boundary": i, **plan.to_json()})

    doc = {
        "version": SCHEMA_VERSION,
        "table": table.name,
        "frames": frames,
        "transitions": transitions,
        "audio": audio,
        "score": {
            "transition_cost": sequence.score.transition,
            "focus_bonus": sequence.score.focus,
            "retrieval_probability": sequence.score.retrieval,
            "objective": sequence.score.objective,
        },
    }
    validate_storyboard(doc)
    return doc


def dumps_storyboard(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_storyboard(doc: dict, path: str | Path) -> None:
    Path(path).write_text(dumps_storyboard(doc), encoding="utf-8")
