"""Visualization sequence scoring and search.

The objective trades off three terms over a sequence with a leading null
spec: summed transition cost T (edit-operation tiers, extended for joined
data and chart pairs), a visual focus bonus B counted on clear clauses,
and the retrieval probability P of the most activated visualization,
where a visualization's activation grows with the number and length of
its runs. F = -w1*T + w2*B + w3*P is maximized.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .charts import ChartSpec
from .errors import InputError
from .model import Clarity, Clause

ALPHA_DEFAULT = 1.0
BETA_DEFAULT = 0.5


@dataclass(frozen=True)
class CostTable:
    """Edit-operation tiers for the transition cost model."""

    mark_change: float = 1.0
    encoding_change: float = 0.6
    scale_change: float = 0.3
    scope_change: float = 0.3
    emphasis_change: float = 0.1

    @classmethod
    def from_file(cls, path: str | Path) -> "CostTable":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read cost table {path}: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown cost table entries: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class ObjectiveWeights:
    transition: float = 1.0
    focus: float = 0.5
    retrieval: float = 2.0
    alpha: float = ALPHA_DEFAULT
    beta: float = BETA_DEFAULT

    def __post_init__(self):
        if self.focus < 0 or self.retrieval < 0:
            raise InputError("focus and retrieval weights must be non-negative")


@dataclass
class SearchConfig:
    exhaustive_bound: int = 20_000
    beam_width: int = 50
    pruning: bool = True
    seed: int = 0


@dataclass(frozen=True)
class SequenceScore:
    transition: float
    focus: float
    retrieval: float
    objective: float


@dataclass(frozen=True)
class VisualizationSequence:
    """One chart per clause behind a leading null spec, plus its score."""

    charts: tuple[Optional[ChartSpec], ...]
    indices: tuple[int, ...]
    score: SequenceScore

    def __post_init__(self):
        if not self.charts or self.charts[0] is not None:
            raise InputError("sequence must start with the null spec")


# ----------------------------------------------------------------------
# Transition cost model
# ----------------------------------------------------------------------

def _null_cost(spec: ChartSpec, costs: CostTable) -> float:
    total = 0.0
    for part in spec.parts():
        total += costs.mark_change
        total += costs.encoding_change * sum(
            1 for enc in (part.x, part.y, part.color) if enc is not None
        )
    return total


def _axis_columns(spec: ChartSpec) -> dict[str, str]:
    out = {}
    for channel, enc in (("x", spec.x), ("y", spec.y)):
        if enc is not None and not enc.column.startswith("__"):
            out[channel] = enc.column
    return out


def _scope_intersection(a: ChartSpec, b: ChartSpec) -> Optional[dict]:
    """Combined filter selecting the data shared by both scopes, or None
    when some column's permitted values become empty."""
    merged: dict[str, tuple] = {}
    for col in sorted(set(a.data_scope) | set(b.data_scope)):
        if col in a.data_scope and col in b.data_scope:
            vals = tuple(v for v in a.data_scope[col] if v in b.data_scope[col])
            if not vals:
                return None
            merged[col] = vals
        else:
            merged[col] = a.data_scope.get(col, b.data_scope.get(col))
    return merged


def transition_cost(
    s: Optional[ChartSpec], e: Optional[ChartSpec], costs: CostTable = CostTable()
) -> float:
    """Static edit-operation cost between two single charts.

    Zero exactly for structurally equal specs; the null spec charges the
    add-cost of the mark and each encoding of the other side.
    """
    if s is None and e is None:
        return 0.0
    if s is None:
        return _null_cost(e, costs)
    if e is None:
        return _null_cost(s, costs)
    if s.signature() == e.signature():
        return 0.0

    total = 0.0
    if s.mark is not e.mark:
        total += costs.mark_change
    for enc_s, enc_e in ((s.x, e.x), (s.y, e.y), (s.color, e.color)):
        if enc_s is None and enc_e is None:
            continue
        if enc_s is None or enc_e is None:
            total += costs.encoding_change
        elif enc_s.column != enc_e.column:
            total += costs.encoding_change
        elif enc_s.signature() != enc_e.signature():
            total += costs.scale_change
    if s.measures != e.measures and s.y is not None and e.y is not None and (
        s.y.column == e.y.column
    ):
        # Folded series swap not visible through the synthetic value axis.
        if s.y.column.startswith("__"):
            total += costs.encoding_change
    if s.data_scope != e.data_scope:
        total += costs.scope_change
    if s.emphasis != e.emphasis:
        total += costs.emphasis_change
    if s.skeleton != e.skeleton:
        total += costs.emphasis_change
    if total == 0.0:
        # Differ structurally (e.g. title-bearing fields) but in no tier.
        total = costs.emphasis_change
    return total


def _has_join_key(s: ChartSpec, e: ChartSpec) -> bool:
    ax_s, ax_e = _axis_columns(s), _axis_columns(e)
    return any(ax_s.get(ch) == ax_e.get(ch) and ax_s.get(ch) for ch in ("x", "y"))


def transition_cost_joined(
    s: Optional[ChartSpec], e: Optional[ChartSpec], costs: CostTable = CostTable()
) -> float:
    """One-to-one cost with interim states on joined data.

    When the charts keep a shared key axis and the same mark but vary in
    their data fields and ranges, the transition goes through interim
    states restricted to the shared data, and only those restrictions
    are charged.
    """
    if s is None or e is None:
        return transition_cost(s, e, costs)
    interim = joined_interim_states(s, e)
    if interim is not None:
        s_interim, e_interim = interim
        return transition_cost(s, s_interim, costs) + transition_cost(
            e_interim, e, costs
        )
    return transition_cost(s, e, costs)


def joined_interim_states(
    s: ChartSpec, e: ChartSpec
) -> Optional[tuple[ChartSpec, ChartSpec]]:
    """The interim specs used by the joined transition, if it applies.

    Equal scopes leave nothing to interpolate over, so the join needs the
    data ranges to actually differ alongside the varied fields.
    """
    varied_fields = s.rendered_fields() != e.rendered_fields()
    if (
        varied_fields
        and s.mark is e.mark
        and s.data_scope != e.data_scope
        and _has_join_key(s, e)
    ):
        shared = _scope_intersection(s, e)
        if shared is not None:
            return s.replace(data_scope=shared), e.replace(data_scope=shared)
    return None


def _parts_or_null(v: Optional[ChartSpec]) -> tuple[Optional[ChartSpec], ...]:
    if v is None:
        return (None,)
    return v.parts()


def transition_cost_composite(
    prev: Optional[ChartSpec],
    cur: Optional[ChartSpec],
    costs: CostTable = CostTable(),
) -> float:
    """Transition cost between composites (singles or aligned pairs).

    One-to-two and two-to-one sum the costs of both chart pairings; a
    two-to-two transition takes the cheaper of the two cross pairings,
    since each chart moves independently.
    """
    s = _parts_or_null(prev)
    e = _parts_or_null(cur)
    if len(s) == 1 and len(e) == 1:
        return transition_cost_joined(s[0], e[0], costs)
    if len(s) == 1 and len(e) == 2:
        return transition_cost_joined(s[0], e[0], costs) + transition_cost_joined(
            s[0], e[1], costs
        )
    if len(s) == 2 and len(e) == 1:
        return transition_cost_joined(s[0], e[0], costs) + transition_cost_joined(
            s[1], e[0], costs
        )
    straight = transition_cost_joined(s[0], e[0], costs) + transition_cost_joined(
        s[1], e[1], costs
    )
    crossed = transition_cost_joined(s[0], e[1], costs) + transition_cost_joined(
        s[1], e[0], costs
    )
    return min(straight, crossed)


def total_transition_cost(
    charts: Sequence[Optional[ChartSpec]], costs: CostTable = CostTable()
) -> float:
    return sum(
        transition_cost_composite(charts[i - 1], charts[i], costs)
        for i in range(1, len(charts))
    )


# ----------------------------------------------------------------------
# Focus bonus and activation
# ----------------------------------------------------------------------

def focus_bonus(
    charts: Sequence[Optional[ChartSpec]], clauses: Sequence[Clause]
) -> float:
    """Count of clear clauses whose chosen chart's fact carries a focus."""
    chosen = list(charts[1:])
    if len(chosen) != len(clauses):
        raise InputError("sequence/clause length mismatch")
    bonus = 0
    for spec, clause in zip(chosen, clauses):
        if spec is None or clause.clarity is not Clarity.CLEAR:
            continue
        if spec.fact is not None and spec.fact.focus:
            bonus += 1
    return float(bonus)


class _RunLedger:
    """Incremental run bookkeeping for the activation model.

    For visualization i with runs of lengths n_{i,k}, the activation is
    A_i = sum_k (alpha + beta * n_{i,k}) = alpha*runs_i + beta*count_i.
    """

    __slots__ = ("stats", "last")

    def __init__(self):
        self.stats: dict[tuple, tuple[int, int]] = {}
        self.last: Optional[tuple] = None

    def clone(self) -> "_RunLedger":
        out = _RunLedger()
        out.stats = dict(self.stats)
        out.last = self.last
        return out

    def push(self, signature: tuple) -> None:
        runs, count = self.stats.get(signature, (0, 0))
        if signature == self.last:
            self.stats[signature] = (runs, count + 1)
        else:
            self.stats[signature] = (runs + 1, count + 1)
        self.last = signature

    def retrieval_probability(self, alpha: float, beta: float) -> float:
        if not self.stats:
            return 1.0
        activations = [
            alpha * runs + beta * count for runs, count in self.stats.values()
        ]
        top = max(activations)
        denom = sum(math.exp(a - top) for a in activations)
        return 1.0 / denom


def retrieval_probability(
    charts: Sequence[Optional[ChartSpec]],
    alpha: float = ALPHA_DEFAULT,
    beta: float = BETA_DEFAULT,
) -> float:
    """Max softmax over per-visualization activations.

    Positions group into maximal runs of identical visualizations (run
    identity ignores emphasis); the null opener is excluded.
    """
    ledger = _RunLedger()
    for spec in charts:
        if spec is None:
            continue
        ledger.push(spec.signature(with_emphasis=False))
    if ledger.last is None:
        raise InputError("cannot score an empty sequence")
    return ledger.retrieval_probability(alpha, beta)


def objective(
    transition: float,
    focus: float,
    retrieval: float,
    weights: ObjectiveWeights = ObjectiveWeights(),
) -> float:
    return (
        -weights.transition * transition
        + weights.focus * focus
        + weights.retrieval * retrieval
    )


def score_sequence(
    charts: Sequence[Optional[ChartSpec]],
    clauses: Sequence[Clause],
    weights: ObjectiveWeights = ObjectiveWeights(),
    costs: CostTable = CostTable(),
) -> SequenceScore:
    t = total_transition_cost(charts, costs)
    b = focus_bonus(charts, clauses)
    p = retrieval_probability(charts, weights.alpha, weights.beta)
    return SequenceScore(
        transition=t, focus=b, retrieval=p, objective=objective(t, b, p, weights)
    )


# ----------------------------------------------------------------------
# Search
# ----------------------------------------------------------------------

@dataclass
class _BeamState:
    indices: tuple[int, ...]
    last: Optional[ChartSpec]
    transition: float
    focus: float
    ledger: _RunLedger
    fields_seen: dict[str, str] = field(default_factory=dict)
    has_focus: bool = False

    def objective(self, weights: ObjectiveWeights) -> float:
        p = (
            self.ledger.retrieval_probability(weights.alpha, weights.beta)
            if self.ledger.last is not None
            else 1.0
        )
        return objective(self.transition, self.focus, p, weights)


def _mark_conflict(fields_seen: dict[str, str], spec: ChartSpec) -> bool:
    for part in spec.parts():
        mark = part.mark.value
        for col in part.rendered_fields():
            seen = fields_seen.get(col)
            if seen is not None and seen != mark:
                return True
    return False


def _register_marks(fields_seen: dict[str, str], spec: ChartSpec) -> dict[str, str]:
    out = dict(fields_seen)
    for part in spec.parts():
        for col in part.rendered_fields():
            out.setdefault(col, part.mark.value)
    return out


def select_sequence(
    candidate_sets: Sequence[Sequence[ChartSpec]],
    clauses: Sequence[Clause],
    weights: ObjectiveWeights = ObjectiveWeights(),
    costs: CostTable = CostTable(),
    config: SearchConfig = SearchConfig(),
    trace: Optional[Callable[[int, tuple[int, ...], SequenceScore], None]] = None,
) -> VisualizationSequence:
    """Pick one chart per clause maximizing the weighted objective.

    Small instances are searched exhaustively; larger ones use beam
    search over clause positions. Pruning (when enabled) drops choices
    that re-render a seen field with a new mark type, and prefixes that
    end the last focus-capable clause with no focus anywhere. Ties break
    lexicographically on the candidate index list.
    """
    if len(candidate_sets) != len(clauses):
        raise InputError("candidate sets and clauses differ in length")
    for i, cands in enumerate(candidate_sets):
        if not cands:
            raise InputError(f"clause {clauses[i].id} has no chart candidates")

    total = 1
    for cands in candidate_sets:
        total *= len(cands)
        if total > max(config.exhaustive_bound, 1):
            break

    n = len(candidate_sets)
    # Precomputed per-candidate data: costs between adjacent positions,
    # run signatures, focus flags, and rendered field->mark fragments.
    sigs = [
        [spec.signature(with_emphasis=False) for spec in cands]
        for cands in candidate_sets
    ]
    null_cost = [transition_cost_composite(None, c, costs) for c in candidate_sets[0]]
    step_cost = [
        [
            [transition_cost_composite(a, b, costs) for b in candidate_sets[pos]]
            for a in candidate_sets[pos - 1]
        ]
        for pos in range(1, n)
    ]
    focus_flag = [
        [
            clauses[pos].clarity is Clarity.CLEAR
            and spec.fact is not None
            and bool(spec.fact.focus)
            for spec in cands
        ]
        for pos, cands in enumerate(candidate_sets)
    ]
    field_marks = [
        [
            tuple(
                (col, part.mark.value)
                for part in spec.parts()
                for col in part.rendered_fields()
            )
            for spec in cands
        ]
        for cands in candidate_sets
    ]

    focusable = [
        pos for pos in range(n) if any(focus_flag[pos])
    ]
    last_focusable = focusable[-1] if focusable else None

    def cost_of(pos: int, prev_idx: Optional[int], idx: int) -> float:
        if pos == 0:
            return null_cost[idx]
        return step_cost[pos - 1][prev_idx][idx]

    def conflicts(fields_seen: dict[str, str], pos: int, idx: int) -> bool:
        return any(
            fields_seen.get(col) not in (None, mark)
            for col, mark in field_marks[pos][idx]
        )

    def register(fields_seen: dict[str, str], pos: int, idx: int) -> dict[str, str]:
        out = dict(fields_seen)
        for col, mark in field_marks[pos][idx]:
            out.setdefault(col, mark)
        return out

    def run_beam(width: int, pruning: bool) -> list[_BeamState]:
        frontier = [_BeamState((), None, 0.0, 0.0, _RunLedger())]
        for pos in range(n):
            def expansions(state: _BeamState, prune: bool):
                prev_idx = state.indices[-1] if state.indices else None
                for ci in range(len(candidate_sets[pos])):
                    if prune and conflicts(state.fields_seen, pos, ci):
                        continue
                    focused = focus_flag[pos][ci]
                    has_focus = state.has_focus or focused
                    if (
                        prune
                        and last_focusable is not None
                        and pos >= last_focusable
                        and not has_focus
                    ):
                        continue
                    ledger = state.ledger.clone()
                    ledger.push(sigs[pos][ci])
                    yield _BeamState(
                        indices=state.indices + (ci,),
                        last=candidate_sets[pos][ci],
                        transition=state.transition + cost_of(pos, prev_idx, ci),
                        focus=state.focus + (1.0 if focused else 0.0),
                        ledger=ledger,
                        fields_seen=register(state.fields_seen, pos, ci),
                        has_focus=has_focus,
                    )

            expanded: list[_BeamState] = [
                st for state in frontier for st in expansions(state, config.pruning)
            ]
            if not expanded and config.pruning:
                # Pruning starved the frontier; redo this step without it.
                expanded = [
                    st for state in frontier for st in expansions(state, False)
                ]
            expanded.sort(key=lambda st: (-st.objective(weights), st.indices))
            # States agreeing on everything the future depends on (last
            # candidate, run history, focus flag, seen fields) are
            # interchangeable; keeping only the best per class frees slots.
            merged: dict[tuple, _BeamState] = {}
            for st in expanded:
                key = (
                    st.indices[-1],
                    tuple(sorted(st.ledger.stats.items())),
                    st.has_focus,
                    tuple(sorted(st.fields_seen.items())),
                )
                if key not in merged:
                    merged[key] = st
            expanded = list(merged.values())
            if trace is not None:
                for st in expanded[: min(len(expanded), width)]:
                    p = st.ledger.retrieval_probability(weights.alpha, weights.beta)
                    trace(
                        pos,
                        st.indices,
                        SequenceScore(
                            transition=st.transition,
                            focus=st.focus,
                            retrieval=p,
                            objective=st.objective(weights),
                        ),
                    )
            frontier = expanded[:width]
        return frontier

    def finish(indices: tuple[int, ...]) -> VisualizationSequence:
        charts = [None] + [candidate_sets[i][ci] for i, ci in enumerate(indices)]
        score = score_sequence(charts, clauses, weights, costs)
        return VisualizationSequence(
            charts=tuple(charts), indices=indices, score=score
        )

    if total <= config.exhaustive_bound:
        best: Optional[tuple[float, tuple[int, ...]]] = None
        for combo in itertools.product(*(range(len(c)) for c in candidate_sets)):
            if config.pruning:
                fields: dict[str, str] = {}
                conflict = False
                for pos, ci in enumerate(combo):
                    if conflicts(fields, pos, ci):
                        conflict = True
                        break
                    fields = register(fields, pos, ci)
                if conflict:
                    continue
                if last_focusable is not None and not any(
                    focus_flag[pos][ci] for pos, ci in enumerate(combo)
                ):
                    continue
            t = null_cost[combo[0]]
            for pos in range(1, n):
                t += step_cost[pos - 1][combo[pos - 1]][combo[pos]]
            b = float(sum(1 for pos, ci in enumerate(combo) if focus_flag[pos][ci]))
            ledger = _RunLedger()
            for pos, ci in enumerate(combo):
                ledger.push(sigs[pos][ci])
            p = ledger.retrieval_probability(weights.alpha, weights.beta)
            f = objective(t, b, p, weights)
            if trace is not None:
                trace(n - 1, combo, SequenceScore(t, b, p, f))
            if best is None or f > best[0]:
                best = (f, combo)
        if best is None:
            # Pruning rejected everything; fall back to the unpruned search.
            relaxed = SearchConfig(
                exhaustive_bound=config.exhaustive_bound,
                beam_width=config.beam_width,
                pruning=False,
                seed=config.seed,
            )
            return select_sequence(
                candidate_sets, clauses, weights, costs, relaxed, trace
            )
        return finish(best[1])

    frontier = run_beam(max(config.beam_width, 1), config.pruning)
    if not frontier:
        raise InputError("beam search produced no sequence")
    return finish(frontier[0].indices)
