from __future__ import annotations

import itertools
import math
import random

import pytest

from datastory.charts import ChartSpec, Encoding, Mark
from datastory.errors import InputError
from datastory.model import Clarity, Clause, ClauseKind, ColumnKind
from datastory.optimizer import (
    CostTable,
    ObjectiveWeights,
    SearchConfig,
    focus_bonus,
    objective,
    retrieval_probability,
    score_sequence,
    select_sequence,
    total_transition_cost,
    transition_cost,
    transition_cost_composite,
    transition_cost_joined,
)

from conftest import (
    make_fact,
    random_composite_spec,
    random_instance,
    random_single_spec,
)

COSTS = CostTable()


def simple_spec(
    mark=Mark.BAR,
    measure="Average low",
    scope=None,
    emphasis=None,
    x_col="Month",
    fact=None,
) -> ChartSpec:
    return ChartSpec(
        mark=mark,
        measures=(measure,),
        x=Encoding(column=x_col, kind=ColumnKind.TEMPORAL),
        y=Encoding(column=measure, kind=ColumnKind.QUANTITATIVE),
        data_scope=scope or {},
        emphasis=emphasis or {},
        title=f"{measure} by {x_col}",
        fact=fact,
    )


def paired(a: ChartSpec, b: ChartSpec) -> ChartSpec:
    return a.replace(pair=b, pair_align="Month")


# ----------------------------------------------------------------------
# T: static cost
# ----------------------------------------------------------------------

def test_identical_specs_cost_zero():
    a = simple_spec()
    assert transition_cost(a, a, COSTS) == 0.0


def test_mark_change_costs_one_tier():
    a = simple_spec(mark=Mark.BAR)
    b = simple_spec(mark=Mark.LINE)
    assert transition_cost(a, b, COSTS) == pytest.approx(COSTS.mark_change)


def test_null_to_chart_charges_add_costs():
    spec = simple_spec()
    # oracle: summation over the cost table entries for mark + encodings
    expected = COSTS.mark_change + 2 * COSTS.encoding_change
    assert transition_cost(None, spec, COSTS) == pytest.approx(expected)
    with_color = spec.replace(
        color=Encoding(column="Month", kind=ColumnKind.TEMPORAL)
    )
    assert transition_cost(None, with_color, COSTS) == pytest.approx(
        COSTS.mark_change + 3 * COSTS.encoding_change
    )


def test_scope_change_costs_scope_tier():
    a = simple_spec(scope={"Month": ["Jan", "Feb"]})
    b = simple_spec(scope={"Month": ["Jan"]})
    assert transition_cost(a, b, COSTS) == pytest.approx(COSTS.scope_change)


def test_emphasis_only_change_costs_emphasis_tier():
    a = simple_spec(emphasis={"Month": ["Dec"]})
    b = simple_spec()
    assert transition_cost(a, b, COSTS) == pytest.approx(COSTS.emphasis_change)


def test_encoding_field_change_costs_encoding_tier():
    a = simple_spec(measure="Average low")
    b = simple_spec(measure="Rainfall")
    assert transition_cost(a, b, COSTS) == pytest.approx(COSTS.encoding_change)


def test_scale_domain_change_costs_scale_tier():
    a = simple_spec()
    b = a.replace(y=Encoding(column="Average low", kind=ColumnKind.QUANTITATIVE, domain=(0, 30)))
    assert transition_cost(a, b, COSTS) == pytest.approx(COSTS.scale_change)


def test_cost_zero_iff_structural_equality_on_random_specs():
    rng = random.Random(11)
    for _ in range(500):
        a = random_single_spec(rng)
        assert transition_cost(a, a, COSTS) == 0.0
        b = random_single_spec(rng)
        cost = transition_cost(a, b, COSTS)
        assert cost >= 0.0
        if a.signature() == b.signature():
            assert cost == 0.0
        else:
            assert cost > 0.0


# ----------------------------------------------------------------------
# T': joined cost
# ----------------------------------------------------------------------

def test_no_join_key_falls_back_to_static_cost():
    a = simple_spec(measure="Average low", x_col="Month")
    b = simple_spec(measure="Rainfall", x_col="gender")
    assert transition_cost_joined(a, b, COSTS) == transition_cost(a, b, COSTS)


def test_joined_cost_charges_interim_restrictions():
    # shared Month axis, different measures, overlapping scopes
    a = simple_spec(measure="Average low", scope={"Month": ["Jan", "Feb", "Mar"]})
    b = simple_spec(measure="Rainfall", scope={"Month": ["Feb", "Mar", "Apr"]})
    shared = {"Month": ("Feb", "Mar")}
    s_i = a.replace(data_scope=shared)
    e_i = b.replace(data_scope=shared)
    expected = transition_cost(a, s_i, COSTS) + transition_cost(e_i, b, COSTS)
    assert transition_cost_joined(a, b, COSTS) == pytest.approx(expected)
    assert expected == pytest.approx(2 * COSTS.scope_change)


def test_joined_identity_is_zero():
    a = simple_spec()
    assert transition_cost_joined(a, a, COSTS) == 0.0


def test_disjoint_scopes_disable_the_join():
    a = simple_spec(measure="Average low", scope={"Month": ["Jan"]})
    b = simple_spec(measure="Rainfall", scope={"Month": ["Jul"]})
    assert transition_cost_joined(a, b, COSTS) == transition_cost(a, b, COSTS)


# ----------------------------------------------------------------------
# T'': composite cost
# ----------------------------------------------------------------------

def test_single_to_single_equals_joined():
    a, b = simple_spec(), simple_spec(measure="Rainfall")
    assert transition_cost_composite(a, b, COSTS) == transition_cost_joined(a, b, COSTS)


def test_identical_pairs_cost_zero():
    a = simple_spec(measure="Average low")
    b = simple_spec(measure="Rainfall")
    assert transition_cost_composite(paired(a, b), paired(a, b), COSTS) == 0.0


def test_swapped_pairs_cost_zero_via_cross_pairing():
    a = simple_spec(measure="Average low")
    b = simple_spec(measure="Rainfall")
    assert transition_cost_composite(paired(a, b), paired(b, a), COSTS) == 0.0


def test_one_to_two_sums_both_pairings():
    s = simple_spec(measure="Average low")
    e1 = simple_spec(measure="Average low")
    e2 = simple_spec(measure="Rainfall")
    expected = transition_cost_joined(s, e1, COSTS) + transition_cost_joined(s, e2, COSTS)
    assert transition_cost_composite(s, paired(e1, e2), COSTS) == pytest.approx(expected)


def test_two_to_one_sums_both_pairings():
    s1 = simple_spec(measure="Average low")
    s2 = simple_spec(measure="Rainfall")
    e = simple_spec(measure="Average low")
    expected = transition_cost_joined(s1, e, COSTS) + transition_cost_joined(s2, e, COSTS)
    assert transition_cost_composite(paired(s1, s2), e, COSTS) == pytest.approx(expected)


def test_two_to_two_takes_min_cross_pairing_on_random_pairs():
    rng = random.Random(23)
    for _ in range(500):
        s1, s2 = random_single_spec(rng), random_single_spec(rng)
        e1, e2 = random_single_spec(rng), random_single_spec(rng)
        got = transition_cost_composite(paired(s1, s2), paired(e1, e2), COSTS)
        # direct enumeration of both cross pairings
        straight = transition_cost_joined(s1, e1, COSTS) + transition_cost_joined(
            s2, e2, COSTS
        )
        crossed = transition_cost_joined(s1, e2, COSTS) + transition_cost_joined(
            s2, e1, COSTS
        )
        assert got == pytest.approx(min(straight, crossed))
        assert got <= straight + 1e-12 and got <= crossed + 1e-12


# ----------------------------------------------------------------------
# B: focus bonus
# ----------------------------------------------------------------------

def _clause(cid, clarity):
    return Clause(
        id=cid, text=f"c{cid}", sentence_id=cid, kind=ClauseKind.FACTUAL, clarity=clarity
    )


def _focused_spec(month="Dec"):
    fact = make_fact(focus={"Month": [month]})
    return simple_spec(emphasis={"Month": [month]}, fact=fact)


def _unfocused_spec():
    return simple_spec(fact=make_fact())


def test_focus_bonus_counts_clear_clauses_with_focus():
    charts = [None, _focused_spec(), _focused_spec("Jan"), _focused_spec("Feb")]
    clauses = [_clause(i, Clarity.CLEAR) for i in range(3)]
    assert focus_bonus(charts, clauses) == 3.0


def test_focus_bonus_ignores_vague_clauses():
    charts = [None, _focused_spec(), _focused_spec("Jan")]
    clauses = [_clause(0, Clarity.VAGUE), _clause(1, Clarity.VAGUE)]
    assert focus_bonus(charts, clauses) == 0.0


def test_focus_bonus_mixed_fixture():
    clarities = [Clarity.CLEAR, Clarity.VAGUE, Clarity.CLEAR, Clarity.CLEAR, Clarity.VAGUE]
    specs = [
        _focused_spec("Jan"),
        _focused_spec("Feb"),
        _focused_spec("Mar"),
        _unfocused_spec(),
        _focused_spec("Apr"),
    ]
    charts = [None] + specs
    clauses = [_clause(i, c) for i, c in enumerate(clarities)]
    # direct count: clear AND focused -> positions 0 and 2
    assert focus_bonus(charts, clauses) == 2.0


# ----------------------------------------------------------------------
# P: retrieval probability
# ----------------------------------------------------------------------

def test_single_visualization_has_probability_one():
    a = simple_spec()
    assert retrieval_probability([None, a, a, a]) == pytest.approx(1.0)


def test_aab_hand_derived_value():
    a = simple_spec(measure="Average low")
    b = simple_spec(measure="Rainfall")
    # hand evaluation: A_A = 1 + 0.5*2 = 2, A_B = 1 + 0.5*1 = 1.5
    expected = math.exp(2.0) / (math.exp(2.0) + math.exp(1.5))
    got = retrieval_probability([None, a, a, b], alpha=1.0, beta=0.5)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(0.62246, abs=1e-5)


def test_split_runs_raise_activation():
    a = simple_spec(measure="Average low")
    b = simple_spec(measure="Rainfall")
    merged = retrieval_probability([None, a, a, b])  # A_A: one run of 2 -> 2.0
    split = retrieval_probability([None, a, b, a])  # A_A: two runs of 1 -> 3.0
    assert split > merged


def test_run_identity_ignores_emphasis():
    a1 = simple_spec(emphasis={"Month": ["Dec"]})
    a2 = simple_spec(emphasis={"Month": ["Jan"]})
    assert retrieval_probability([None, a1, a2]) == pytest.approx(1.0)


def test_probability_in_unit_interval_on_random_sequences():
    rng = random.Random(5)
    for _ in range(1000):
        n = rng.randint(1, 8)
        charts = [None] + [random_composite_spec(rng) for _ in range(n)]
        p = retrieval_probability(charts)
        assert 0.0 < p <= 1.0


def test_extending_argmax_run_does_not_decrease_p():
    a = simple_spec(measure="Average low")
    b = simple_spec(measure="Rainfall")
    for length in range(2, 6):
        shorter = retrieval_probability([None] + [a] * (length - 1) + [b])
        longer = retrieval_probability([None] + [a] * length + [b])
        assert longer >= shorter


def test_empty_sequence_rejected():
    with pytest.raises(InputError):
        retrieval_probability([None])


# ----------------------------------------------------------------------
# F and selection
# ----------------------------------------------------------------------

def _brute_force_best(candidate_sets, clauses, weights, costs):
    """All-assignments oracle with independent aggregation."""
    best = None
    for combo in itertools.product(*(range(len(c)) for c in candidate_sets)):
        charts = [None] + [candidate_sets[i][ci] for i, ci in enumerate(combo)]
        t = sum(
            transition_cost_composite(charts[i - 1], charts[i], costs)
            for i in range(1, len(charts))
        )
        b = sum(
            1.0
            for spec, clause in zip(charts[1:], clauses)
            if clause.clarity is Clarity.CLEAR and spec.fact is not None and spec.fact.focus
        )
        # independent run grouping via itertools.groupby
        sigs = [c.signature(with_emphasis=False) for c in charts[1:]]
        runs: dict = {}
        for sig, group in itertools.groupby(sigs):
            n = len(list(group))
            r, c = runs.get(sig, (0, 0))
            runs[sig] = (r + 1, c + n)
        acts = [weights.alpha * r + weights.beta * c for r, c in runs.values()]
        denom = sum(math.exp(x) for x in acts)
        p = max(math.exp(x) for x in acts) / denom
        f = -weights.transition * t + weights.focus * b + weights.retrieval * p
        if best is None or f > best[0]:
            best = (f, combo)
    return best


def test_forced_choice_returns_the_only_sequence():
    clauses = [_clause(0, Clarity.CLEAR)]
    spec = _focused_spec()
    seq = select_sequence([[spec]], clauses)
    assert seq.indices == (0,)
    assert seq.charts[0] is None
    assert seq.score.retrieval == pytest.approx(1.0)


def test_constant_sequence_scores_t_zero_p_one():
    spec = _focused_spec()
    clauses = [_clause(i, Clarity.CLEAR) for i in range(4)]
    seq = select_sequence([[spec]] * 4, clauses)
    assert seq.score.transition == pytest.approx(
        transition_cost(None, spec, COSTS)
    )  # only the opening null->chart step costs
    assert seq.score.retrieval == pytest.approx(1.0)
    assert total_transition_cost(seq.charts[1:], COSTS) == 0.0


def test_degenerate_weights_pure_retrieval_prefers_constant_sequence():
    weights = ObjectiveWeights(transition=0.0, focus=0.0, retrieval=1.0)
    a, b = _focused_spec("Jan"), _focused_spec("Feb")
    clauses = [_clause(i, Clarity.CLEAR) for i in range(3)]
    seq = select_sequence(
        [[a, b], [a, b], [a, b]], clauses, weights, config=SearchConfig(pruning=False)
    )
    assert seq.score.retrieval == pytest.approx(1.0)
    sigs = {c.signature(with_emphasis=False) for c in seq.charts[1:]}
    assert len(sigs) == 1


def test_degenerate_weights_pure_transition_minimizes_cost():
    weights = ObjectiveWeights(transition=1.0, focus=0.0, retrieval=0.0)
    rng = random.Random(3)
    clauses, sets = random_instance(rng, 4, 3)
    seq = select_sequence(sets, clauses, weights, config=SearchConfig(pruning=False))
    best_cost = min(
        sum(
            transition_cost_composite(charts[i - 1], charts[i], COSTS)
            for i in range(1, len(charts))
        )
        for combo in itertools.product(*(range(len(c)) for c in sets))
        for charts in [[None] + [sets[i][ci] for i, ci in enumerate(combo)]]
    )
    assert seq.score.transition == pytest.approx(best_cost)


def test_exhaustive_matches_brute_force_oracle():
    rng = random.Random(42)
    weights = ObjectiveWeights()
    for trial in range(50):
        clauses, sets = random_instance(rng, rng.randint(1, 6), 4)
        seq = select_sequence(
            sets, clauses, weights, config=SearchConfig(pruning=False)
        )
        best_f, _ = _brute_force_best(sets, clauses, weights, COSTS)
        assert seq.score.objective == pytest.approx(best_f, abs=1e-9)


def test_wide_beam_equals_exhaustive():
    rng = random.Random(99)
    weights = ObjectiveWeights()
    for trial in range(25):
        clauses, sets = random_instance(rng, rng.randint(2, 5), 3)
        exhaustive = select_sequence(
            sets, clauses, weights, config=SearchConfig(pruning=False)
        )
        beam = select_sequence(
            sets,
            clauses,
            weights,
            config=SearchConfig(exhaustive_bound=0, beam_width=10**6, pruning=False),
        )
        assert beam.score.objective == pytest.approx(
            exhaustive.score.objective, abs=1e-9
        )


def test_selection_is_deterministic():
    rng = random.Random(12)
    clauses, sets = random_instance(rng, 5, 4)
    a = select_sequence(sets, clauses)
    b = select_sequence(sets, clauses)
    assert a.indices == b.indices
    assert a.score == b.score


def test_empty_candidate_list_is_an_error():
    with pytest.raises(InputError):
        select_sequence([[]], [_clause(0, Clarity.CLEAR)])


def test_mark_conflict_pruning_drops_inconsistent_candidates():
    a_bar = simple_spec(mark=Mark.BAR, measure="Average low", fact=make_fact(focus={"Month": ["Dec"]}))
    a_line = simple_spec(mark=Mark.LINE, measure="Average low", fact=make_fact(focus={"Month": ["Dec"]}))
    clauses = [_clause(0, Clarity.CLEAR), _clause(1, Clarity.CLEAR)]
    weights = ObjectiveWeights(transition=0.0, focus=0.0, retrieval=0.0)
    # pruned: bar then line for the same field is inconsistent
    seq = select_sequence(
        [[a_bar], [a_line, a_bar]],
        clauses,
        weights,
        config=SearchConfig(exhaustive_bound=0, beam_width=4, pruning=True),
    )
    assert seq.charts[2].mark is Mark.BAR


def test_focusless_sequences_pruned_when_focus_available():
    focused = _focused_spec()
    plain = _unfocused_spec()
    clauses = [_clause(0, Clarity.CLEAR)]
    weights = ObjectiveWeights(transition=1.0, focus=0.0, retrieval=0.0)
    # without pruning, both score identically and index order would pick 0
    seq = select_sequence(
        [[plain, focused]],
        clauses,
        weights,
        config=SearchConfig(pruning=True),
    )
    assert seq.charts[1].fact.focus


def test_objective_sign_convention():
    w = ObjectiveWeights(transition=2.0, focus=3.0, retrieval=5.0)
    assert objective(1.5, 2.0, 0.5, w) == pytest.approx(-3.0 + 6.0 + 2.5)


def test_score_sequence_decomposition_consistency():
    rng = random.Random(8)
    clauses, sets = random_instance(rng, 4, 2)
    seq = select_sequence(sets, clauses, config=SearchConfig(pruning=False))
    score = score_sequence(seq.charts, clauses)
    assert score == seq.score
