"""datastory: data narratives + tables -> timed chart storyboards."""

from .model import (
    Clarity,
    Clause,
    ClauseKind,
    Column,
    ColumnKind,
    DataFact,
    DataTable,
    FactType,
    Story,
    fact_data_scope,
    validate_fact,
)
from .charts import ChartSpec, Encoding, Mark
from .gateway import (
    EmbeddingVector,
    FixtureBackend,
    GenerationRequest,
    HttpBackend,
    LlmGateway,
    cosine_similarity,
)
from .optimizer import (
    CostTable,
    ObjectiveWeights,
    SearchConfig,
    VisualizationSequence,
    retrieval_probability,
    select_sequence,
    transition_cost,
    transition_cost_composite,
    transition_cost_joined,
)
from .pipeline import analyze_narrative, generate_storyboard, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Clarity",
    "Clause",
    "ClauseKind",
    "Column",
    "ColumnKind",
    "DataFact",
    "DataTable",
    "FactType",
    "Story",
    "fact_data_scope",
    "validate_fact",
    "ChartSpec",
    "Encoding",
    "Mark",
    "EmbeddingVector",
    "FixtureBackend",
    "GenerationRequest",
    "HttpBackend",
    "LlmGateway",
    "cosine_similarity",
    "CostTable",
    "ObjectiveWeights",
    "SearchConfig",
    "VisualizationSequence",
    "retrieval_probability",
    "select_sequence",
    "transition_cost",
    "transition_cost_composite",
    "transition_cost_joined",
    "analyze_narrative",
    "generate_storyboard",
    "run_pipeline",
    "__version__",
]
