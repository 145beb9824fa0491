"""End-to-end orchestration: narrative -> story -> storyboard."""
from __future__ import annotations

import logging
from typing import Callable, Optional

from .analysis import AnalysisSettings, NarrativeAnalyzer
from .charts import ChartSpec
from .config import PipelineConfig
from .context import ContextResolver
from .errors import (
    GatewayError,
    InputError,
    UnmappableFactError,
    UnresolvedClauseError,
)
from .gateway import (
    FixtureBackend,
    HttpBackend,
    LlmGateway,
    RecordingBackend,
)
from .harmonize import harmonize
from .mapping import adjust_candidates, map_fact_to_charts
from .model import Clarity, Clause, ClauseKind, DataTable, Story
from .optimizer import (
    CostTable,
    ObjectiveWeights,
    SearchConfig,
    SequenceScore,
    select_sequence,
)
from .prompts import PromptLibrary
from .storyboard import (
    HttpTtsProvider,
    assemble_storyboard,
    compute_timeline,
)

log = logging.getLogger(__name__)


def build_gateway(config: PipelineConfig) -> LlmGateway:
    if config.fixture_dir and not config.record:
        return LlmGateway(FixtureBackend(config.fixture_dir))
    if not config.llm_endpoint:
        raise InputError(
            "no backend configured: pass --fixture-dir for offline runs "
            "or --llm-endpoint for live ones"
        )
    if not config.api_key:
        raise GatewayError("NP_API_KEY is not set for the live endpoint")
    live = HttpBackend(
        base_url=config.llm_endpoint,
        api_key=config.api_key,
        generation_model=config.llm_model,
        embedding_model=config.embed_model,
    )
    if config.record:
        if not config.fixture_dir:
            raise InputError("--record needs --fixture-dir to write into")
        return LlmGateway(RecordingBackend(live, config.fixture_dir))
    return LlmGateway(live)


def analyze_narrative(
    narrative: str,
    table: DataTable,
    gateway: LlmGateway,
    config: PipelineConfig = PipelineConfig(),
    prompts: Optional[PromptLibrary] = None,
) -> Story:
    """Slice, classify, extract, resolve vague clauses, complete facts."""
    narrative = narrative.strip()
    prompts = prompts or PromptLibrary()
    settings = AnalysisSettings(
        similarity_threshold=config.similarity_threshold,
        clear_quorum=config.clear_quorum,
        temperature=config.temperature,
    )
    analyzer = NarrativeAnalyzer(gateway, table, prompts, settings)
    clauses = analyzer.analyze(narrative)

    resolver = ContextResolver(
        gateway,
        table,
        prompts,
        completion_cap=config.completion_cap,
        temperature=config.temperature,
    )
    story = Story(clauses=tuple(clauses))
    resolved: list[Clause] = []
    for clause in clauses:
        if clause.kind is ClauseKind.FACTUAL and clause.clarity is Clarity.VAGUE:
            # The below-threshold candidates are unreliable; the inferred
            # facts take their place.
            try:
                inferred = resolver.infer_vague_facts(clause, story, narrative)
            except UnresolvedClauseError:
                log.warning(
                    "clause %d has no clear reference; carrying no facts", clause.id
                )
                inferred = []
            seen: set[tuple] = set()
            candidates = []
            for fact in inferred:
                key = fact.canonical_key()
                if key not in seen:
                    seen.add(key)
                    candidates.append((fact, 0.0))
            clause = clause.replace(candidates=tuple(candidates))
        resolved.append(clause)

    facts = {
        c.id: tuple(f for f, _ in c.candidates)
        for c in resolved
        if c.kind is ClauseKind.FACTUAL and c.candidates
    }
    story = Story(clauses=tuple(resolved), facts=facts)
    return resolver.complete_facts(story)


def chart_candidates(
    story: Story, table: DataTable
) -> tuple[list[Clause], list[list[ChartSpec]]]:
    """Per-clause chart candidates before harmonization/adjustment."""
    clauses = list(story.clauses)
    sets: list[list[ChartSpec]] = []
    for clause in clauses:
        specs: list[ChartSpec] = []
        for fact in story.facts.get(clause.id, ()):
            try:
                specs.extend(map_fact_to_charts(fact, table))
            except UnmappableFactError as exc:
                log.debug("dropping unmappable fact on clause %d: %s", clause.id, exc)
        sets.append(specs)
    return clauses, sets


def generate_storyboard(
    story: Story,
    table: DataTable,
    config: PipelineConfig = PipelineConfig(),
    gateway: Optional[LlmGateway] = None,
    trace: Optional[Callable[[int, tuple[int, ...], SequenceScore], None]] = None,
) -> dict:
    """Map facts to charts, pick the optimal sequence, emit the storyboard."""
    clauses, candidate_sets = chart_candidates(story, table)
    if not any(candidate_sets):
        raise UnresolvedClauseError("story has no mappable facts on any clause")

    candidate_sets = harmonize(candidate_sets, table, gateway)
    candidate_sets = adjust_candidates(clauses, candidate_sets)

    keep = [i for i, cands in enumerate(candidate_sets) if cands]
    if len(keep) != len(clauses):
        dropped = [clauses[i].id for i in range(len(clauses)) if i not in keep]
        log.warning("dropping clauses with no visuals at all: %s", dropped)
    clauses = [clauses[i] for i in keep]
    candidate_sets = [candidate_sets[i] for i in keep]

    weights = ObjectiveWeights(
        transition=config.weights[0],
        focus=config.weights[1],
        retrieval=config.weights[2],
        alpha=config.alpha,
        beta=config.beta,
    )
    costs = CostTable.from_file(config.cost_table) if config.cost_table else CostTable()
    search = SearchConfig(
        exhaustive_bound=config.exhaustive_bound,
        beam_width=config.beam_width,
        pruning=config.pruning,
        seed=config.seed,
    )
    sequence = select_sequence(
        candidate_sets, clauses, weights, costs, search, trace=trace
    )

    provider = HttpTtsProvider(config.tts_url) if config.tts_url else None
    timeline = compute_timeline(
        clauses, provider, wpm=config.wpm, min_frame_ms=config.min_frame_ms
    )
    audio = provider.audio_reference() if provider else None
    if audio is not None:
        audio = {"file": audio["file"], "offsets_ms": [s for s, _ in timeline]}
    return assemble_storyboard(
        sequence,
        clauses,
        timeline,
        table,
        min_anim_ms=config.min_anim_ms,
        costs=costs,
        audio=audio,
    )


def run_pipeline(
    narrative: str,
    table: DataTable,
    gateway: LlmGateway,
    config: PipelineConfig = PipelineConfig(),
    trace: Optional[Callable[[int, tuple[int, ...], SequenceScore], None]] = None,
) -> tuple[Story, dict]:
    story = analyze_narrative(narrative, table, gateway, config)
    board = generate_storyboard(story, table, config, gateway, trace=trace)
    return story, board
