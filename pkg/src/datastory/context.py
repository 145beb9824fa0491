"""Contextual inference for vague clauses and fact-set completion.

Vague clauses are resolved by binding their keywords to table properties
and values, intersecting those with the qualified facts of neighbouring
clear clauses, and emitting candidates aligned to each reference. Fact
sets are then closed under three expansion heuristics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import InputError, UnresolvedClauseError
from .gateway import GenerationRequest, LlmGateway
from .model import (
    Clarity,
    Clause,
    DataFact,
    DataTable,
    Scalar,
    Story,
    dedupe_facts,
    fact_focus_scope,
    fact_data_scope,
    validate_fact,
)
from .prompts import PromptLibrary
from .tables import table_schema_text
from .analysis import extract_json_payload

COMPLETION_CAP = 8


@dataclass(frozen=True)
class KeywordBinding:
    keyword: str
    candidate_properties: tuple[str, ...] = ()
    candidate_values: tuple[tuple[str, Scalar], ...] = ()


def fact_properties(fact: DataFact) -> set[str]:
    """Column names a fact touches in any slot."""
    return (
        set(fact.measures)
        | set(fact.breakdowns)
        | set(fact.context)
        | set(fact.focus)
    )


def fact_values(fact: DataFact) -> set[tuple[str, Scalar]]:
    """(column, value) pairs a fact pins down via context or focus."""
    pairs: set[tuple[str, Scalar]] = set()
    for filt in (fact.context, fact.focus):
        for col, vals in filt.items():
            pairs.update((col, v) for v in vals)
    return pairs


def parse_keyword_bindings(reply: str, table: DataTable) -> list[KeywordBinding]:
    payload = extract_json_payload(reply)
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list):
        raise InputError("keyword reply is not a JSON array")
    bindings = []
    cell_values = {c.name: set(table.values(c.name)) for c in table.columns}
    for entry in payload:
        if not isinstance(entry, Mapping):
            continue
        props = tuple(
            str(p) for p in entry.get("properties", []) if table.has_column(str(p))
        )
        vals = []
        for v in entry.get("values", []):
            if not isinstance(v, Mapping):
                continue
            col = str(v.get("column", ""))
            if col in cell_values and v.get("value") in cell_values[col]:
                vals.append((col, v["value"]))
        bindings.append(
            KeywordBinding(
                keyword=str(entry.get("keyword", "")),
                candidate_properties=props,
                candidate_values=tuple(vals),
            )
        )
    return bindings


def select_references(story: Story, clause: Clause) -> list[Clause]:
    """Nearest preceding and following clear clauses in the same paragraph."""
    position = next(i for i, c in enumerate(story.clauses) if c.id == clause.id)
    before: Optional[Clause] = None
    after: Optional[Clause] = None
    for c in story.clauses[:position]:
        if c.clarity is Clarity.CLEAR and c.paragraph_id == clause.paragraph_id:
            before = c
    for c in story.clauses[position + 1 :]:
        if c.clarity is Clarity.CLEAR and c.paragraph_id == clause.paragraph_id:
            after = c
            break
    return [c for c in (before, after) if c is not None]


@dataclass(frozen=True)
class ReferenceIntersection:
    reference: Clause
    properties: tuple[str, ...]
    values: tuple[tuple[str, Scalar], ...]


def intersect_with_reference(
    bindings: Sequence[KeywordBinding], reference: Clause
) -> ReferenceIntersection:
    """Intersection of the bound candidate set with one reference clause's
    qualified facts, keeping binding order for determinism."""
    cand_props: list[str] = []
    cand_vals: list[tuple[str, Scalar]] = []
    for b in bindings:
        for p in b.candidate_properties:
            if p not in cand_props:
                cand_props.append(p)
        for v in b.candidate_values:
            if v not in cand_vals:
                cand_vals.append(v)
    ref_props: set[str] = set()
    ref_vals: set[tuple[str, Scalar]] = set()
    for fact, _score in reference.candidates:
        ref_props |= fact_properties(fact)
        ref_vals |= fact_values(fact)
    return ReferenceIntersection(
        reference=reference,
        properties=tuple(p for p in cand_props if p in ref_props),
        values=tuple(v for v in cand_vals if v in ref_vals),
    )


def filtered_binding_set(
    intersections: Sequence[ReferenceIntersection],
) -> tuple[tuple[str, ...], tuple[tuple[str, Scalar], ...]]:
    """Union of the per-reference intersections."""
    props: list[str] = []
    vals: list[tuple[str, Scalar]] = []
    for inter in intersections:
        for p in inter.properties:
            if p not in props:
                props.append(p)
        for v in inter.values:
            if v not in vals:
                vals.append(v)
    return tuple(props), tuple(vals)


class ContextResolver:
    """Resolves vague clauses and completes fact sets over a story."""

    def __init__(
        self,
        gateway: Optional[LlmGateway],
        table: DataTable,
        prompts: Optional[PromptLibrary] = None,
        completion_cap: int = COMPLETION_CAP,
        temperature: float = 0.3,
    ):
        self.gateway = gateway
        self.table = table
        self.prompts = prompts or PromptLibrary()
        self.completion_cap = completion_cap
        self.temperature = temperature

    # ------------------------------------------------------------------
    # Vague clause inference
    # ------------------------------------------------------------------

    def bind_keywords(self, clause: Clause, narrative: str) -> list[KeywordBinding]:
        if self.gateway is None:
            return []
        prompt = self.prompts.render(
            "keywords",
            table_schema=table_schema_text(self.table),
            narrative=narrative,
            clause=clause.text,
        )
        reply = self.gateway.generate(
            GenerationRequest(prompt=prompt, temperature=self.temperature)
        )
        return parse_keyword_bindings(reply, self.table)

    def _nearest_clear(self, story: Story, clause: Clause) -> Clause:
        position = next(i for i, c in enumerate(story.clauses) if c.id == clause.id)
        best: Optional[Clause] = None
        best_dist = None
        for i, c in enumerate(story.clauses):
            if c.clarity is not Clarity.CLEAR or not c.candidates:
                continue
            dist = abs(i - position)
            if best_dist is None or dist < best_dist:
                best, best_dist = c, dist
        if best is None:
            raise UnresolvedClauseError(
                f"clause {clause.id} cannot be resolved: story has no clear clause"
            )
        return best

    def _aligned_fact(
        self,
        inter: ReferenceIntersection,
        values_as_focus: bool = False,
        extra: Optional[ReferenceIntersection] = None,
    ) -> Optional[DataFact]:
        """Shape a fact for the vague clause from one reference's
        intersection (optionally merged with a second for the combined
        candidate)."""
        template_fact = inter.reference.candidates[0][0]
        props = list(inter.properties)
        vals = list(inter.values)
        if extra is not None:
            for p in extra.properties:
                if p not in props:
                    props.append(p)
            for v in extra.values:
                if v not in vals:
                    vals.append(v)

        quantitative = set(self.table.quantitative_columns())
        measures = tuple(p for p in props if p in quantitative)
        if not measures:
            measures = template_fact.measures
        breakdowns = tuple(
            p for p in props if self.table.has_column(p) and p not in quantitative
        )
        if not breakdowns:
            breakdowns = template_fact.breakdowns

        bound: dict[str, list[Scalar]] = {}
        for col, v in vals:
            bound.setdefault(col, []).append(v)
        if values_as_focus and bound:
            context = {
                col: tuple(set(template_fact.context.get(col, ())) | set(vs))
                for col, vs in bound.items()
            }
            for col, vs in template_fact.context.items():
                context.setdefault(col, vs)
            fact = template_fact.replace(
                measures=measures,
                breakdowns=breakdowns,
                context=context,
                focus=bound,
            )
        else:
            context = bound if bound else template_fact.context
            fact = template_fact.replace(
                measures=measures,
                breakdowns=breakdowns,
                context=context,
                focus={},
            )
        if not validate_fact(fact, self.table).ok:
            return None
        return fact

    def infer_vague_facts(
        self,
        clause: Clause,
        story: Story,
        narrative: str,
        bindings: Optional[Sequence[KeywordBinding]] = None,
    ) -> list[DataFact]:
        """Resolve one vague clause against its clear neighbours.

        Steps: bind keywords (unless ``bindings`` is given), pick up to
        two reference clauses, intersect the bound candidate set with
        each reference's qualified facts, and emit candidates aligned to
        reference one, reference two, and their combination. An empty
        filtered set falls back to a copy of the nearest clear clause's
        facts.
        """
        if clause.clarity is not Clarity.VAGUE:
            raise InputError(f"clause {clause.id} is not vague")
        if bindings is None:
            bindings = self.bind_keywords(clause, narrative)
        references = [
            r for r in select_references(story, clause) if r.candidates
        ]
        intersections = [intersect_with_reference(bindings, r) for r in references]
        props, vals = filtered_binding_set(intersections)

        if not props and not vals:
            nearest = self._nearest_clear(story, clause)
            return [fact for fact, _ in nearest.candidates]

        if len(intersections) == 1:
            intersections = [intersections[0], intersections[0]]
        first, second = intersections[0], intersections[1]
        emitted = [
            self._aligned_fact(first),
            self._aligned_fact(second),
            self._aligned_fact(first, values_as_focus=True, extra=second),
        ]
        facts = [f for f in emitted if f is not None]
        if not facts:
            nearest = self._nearest_clear(story, clause)
            return [fact for fact, _ in nearest.candidates]
        return facts

    # ------------------------------------------------------------------
    # Completion heuristics
    # ------------------------------------------------------------------

    def _swap_candidates(self, fact: DataFact) -> list[DataFact]:
        """H1: interchange focus and context when the focus covers a
        strictly smaller data range (or the context is empty)."""
        if not fact.focus:
            return []
        if fact.context:
            focus_rows = fact_focus_scope(fact, self.table)
            context_rows = fact_data_scope(fact, self.table)
            if not focus_rows < context_rows:
                return []
        swapped = fact.replace(context=fact.focus, focus=fact.context)
        if not validate_fact(swapped, self.table).ok:
            return []
        return [swapped]

    @staticmethod
    def _cross_combine(a: DataFact, b: DataFact) -> list[DataFact]:
        """H2: same measures and breakdowns, different type/parameters ->
        exchange type and parameters both ways."""
        if sorted(a.measures) != sorted(b.measures):
            return []
        if sorted(a.breakdowns) != sorted(b.breakdowns):
            return []
        if (a.type, a.parameters) == (b.type, b.parameters):
            return []
        return [
            a.replace(type=b.type, parameters=b.parameters),
            b.replace(type=a.type, parameters=a.parameters),
        ]

    @staticmethod
    def _context_subset(small: Mapping, big: Mapping) -> bool:
        """Strict subset between column->values filters."""
        if small == big:
            return False
        for col, vals in small.items():
            if col not in big or not set(vals) <= set(big[col]):
                return False
        return True

    def _neighbor_expansions(self, fact: DataFact, neighbor: DataFact) -> list[DataFact]:
        """H3: equal on measures or context with the other a strict
        subset of the neighbour's -> widen to match."""
        out = []
        same_measures = sorted(fact.measures) == sorted(neighbor.measures)
        same_context = fact.context == neighbor.context
        if same_context and not same_measures:
            if set(fact.measures) < set(neighbor.measures):
                out.append(fact.replace(measures=neighbor.measures))
        if same_measures and not same_context:
            if self._context_subset(fact.context, neighbor.context):
                widened = fact.replace(context=neighbor.context)
                if validate_fact(widened, self.table).ok:
                    out.append(widened)
        return out

    def complete_facts(self, story: Story) -> Story:
        """Close each clause's fact set under swap, cross-combination and
        neighbour expansion, then deduplicate and cap per clause."""
        scores: dict[int, dict[tuple, float]] = {}
        sets: dict[int, list[DataFact]] = {}
        for clause in story.clauses:
            facts = list(story.facts.get(clause.id, ()))
            sets[clause.id] = facts
            clause_scores = {f.canonical_key(): s for f, s in clause.candidates}
            scores[clause.id] = {
                f.canonical_key(): clause_scores.get(f.canonical_key(), 0.0)
                for f in facts
            }

        ordered_ids = [c.id for c in story.clauses if c.id in story.facts]

        def inherit(cid: int, child: DataFact, parent: DataFact) -> None:
            key = child.canonical_key()
            if key not in scores[cid]:
                scores[cid][key] = scores[cid].get(parent.canonical_key(), 0.0)

        changed = True
        while changed:
            changed = False
            snapshot = {cid: list(facts) for cid, facts in sets.items()}
            for cid in ordered_ids:
                current = sets[cid]
                known = {f.canonical_key() for f in current}

                def add(fact: DataFact, parent: DataFact) -> None:
                    nonlocal changed
                    key = fact.canonical_key()
                    if key not in known:
                        known.add(key)
                        current.append(fact)
                        inherit(cid, fact, parent)
                        changed = True

                for fact in list(current):
                    for swapped in self._swap_candidates(fact):
                        add(swapped, fact)
                for i, a in enumerate(list(current)):
                    for b in list(current)[i + 1 :]:
                        for combined in self._cross_combine(a, b):
                            add(combined, a)
                pos = ordered_ids.index(cid)
                neighbors: list[DataFact] = []
                if pos > 0:
                    neighbors.extend(snapshot[ordered_ids[pos - 1]])
                if pos + 1 < len(ordered_ids):
                    neighbors.extend(snapshot[ordered_ids[pos + 1]])
                for fact in list(current):
                    for neighbor in neighbors:
                        for widened in self._neighbor_expansions(fact, neighbor):
                            add(widened, fact)

        completed: dict[int, tuple[DataFact, ...]] = {}
        for cid in ordered_ids:
            facts = dedupe_facts(sets[cid])
            if len(facts) > self.completion_cap:
                order = sorted(
                    range(len(facts)),
                    key=lambda i: (-scores[cid].get(facts[i].canonical_key(), 0.0), i),
                )
                keep = sorted(order[: self.completion_cap])
                facts = [facts[i] for i in keep]
            completed[cid] = tuple(facts)
        return Story(clauses=story.clauses, facts=completed)
