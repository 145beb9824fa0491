from __future__ import annotations

import hashlib
import math
import random
from pathlib import Path
from typing import Callable, Optional

import pytest

from datastory.charts import ChartSpec, Encoding, Mark
from datastory.gateway import EmbeddingVector, GenerationRequest, LlmGateway
from datastory.model import (
    Clarity,
    Clause,
    ClauseKind,
    ColumnKind,
    DataFact,
    DataTable,
    FactType,
)
from datastory.tables import load_table

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def weather_table() -> DataTable:
    return load_table(DATA_DIR / "weather.csv", name="weather")


@pytest.fixture(scope="session")
def grades_table() -> DataTable:
    return load_table(DATA_DIR / "grades.csv", name="grades")


def make_fact(
    type: FactType = FactType.VALUE,
    measures=("Average low",),
    context=None,
    breakdowns=(),
    focus=None,
    parameters=None,
) -> DataFact:
    return DataFact(
        type=type,
        measures=tuple(measures),
        context=context or {},
        breakdowns=tuple(breakdowns),
        focus=focus or {},
        parameters=parameters or {},
    )


# ----------------------------------------------------------------------
# Deterministic embedding construction with exact target cosines
# ----------------------------------------------------------------------

def unit_vector(label: str, dim: int = 8) -> tuple[float, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    raw = [(digest[i] / 255.0) * 2.0 - 1.0 for i in range(dim)]
    norm = math.sqrt(sum(v * v for v in raw))
    return tuple(v / norm for v in raw)


def vector_with_cosine(base: tuple[float, ...], target: float, salt: str) -> tuple[float, ...]:
    """A unit vector whose cosine with ``base`` is exactly ``target``."""
    other = unit_vector("orthogonal:" + salt, dim=len(base))
    dot = sum(a * b for a, b in zip(base, other))
    perp = [o - dot * b for o, b in zip(other, base)]
    norm = math.sqrt(sum(v * v for v in perp))
    if norm < 1e-9:  # pathological collinearity; re-salt
        return vector_with_cosine(base, target, salt + "#")
    perp = [v / norm for v in perp]
    sin = math.sqrt(max(0.0, 1.0 - target * target))
    return tuple(target * b + sin * p for b, p in zip(base, perp))


class FunctionBackend:
    """Backend driven by two callables; handy for scripted unit tests."""

    def __init__(
        self,
        complete: Optional[Callable[[GenerationRequest], str]] = None,
        embed: Optional[Callable[[str], EmbeddingVector]] = None,
        generation_model: str = "scripted",
        embedding_model: str = "scripted-embed",
    ):
        self._complete = complete
        self._embed = embed
        self.generation_model = generation_model
        self.embedding_model = embedding_model
        self.completion_calls = 0
        self.embed_calls = 0

    def complete(self, req: GenerationRequest) -> str:
        self.completion_calls += 1
        if self._complete is None:
            raise AssertionError("unexpected completion call")
        return self._complete(req)

    def embed_text(self, text: str) -> EmbeddingVector:
        self.embed_calls += 1
        if self._embed is None:
            raise AssertionError("unexpected embedding call")
        return self._embed(text)


def scripted_gateway(complete=None, embed=None) -> LlmGateway:
    return LlmGateway(FunctionBackend(complete, embed))


# ----------------------------------------------------------------------
# Random chart/candidate instance generation for oracle tests
# ----------------------------------------------------------------------

WEATHER_MEASURES = (
    "Daily mean",
    "Average high",
    "Average low",
    "Record high",
    "Record low",
    "Rainfall",
)
MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def random_fact(rng: random.Random, with_focus: Optional[bool] = None) -> DataFact:
    measures = rng.sample(WEATHER_MEASURES, rng.randint(1, 2))
    scope_months = sorted(rng.sample(MONTHS, rng.randint(3, 12)), key=MONTHS.index)
    context = {"Month": scope_months} if rng.random() < 0.7 else {}
    focused = rng.random() < 0.5 if with_focus is None else with_focus
    focus = {}
    if focused:
        pool = context.get("Month", MONTHS)
        focus = {"Month": sorted(rng.sample(list(pool), 1))}
    ftype = rng.choice(
        [FactType.VALUE, FactType.EXTREME, FactType.COMPARISON, FactType.DISTRIBUTION]
    )
    return DataFact(
        type=ftype,
        measures=tuple(measures),
        context=context,
        breakdowns=("Month",),
        focus=focus,
    )


def random_single_spec(rng: random.Random, with_focus: Optional[bool] = None) -> ChartSpec:
    fact = random_fact(rng, with_focus)
    mark = rng.choice([Mark.BAR, Mark.LINE, Mark.POINT, Mark.TICK])
    measures = fact.measures[:1]
    return ChartSpec(
        mark=mark,
        measures=measures,
        x=Encoding(column="Month", kind=ColumnKind.TEMPORAL),
        y=Encoding(column=measures[0], kind=ColumnKind.QUANTITATIVE),
        data_scope=fact.context,
        emphasis=fact.focus,
        title=f"{measures[0]} by Month",
        fact=fact,
    )


def random_composite_spec(rng: random.Random) -> ChartSpec:
    spec = random_single_spec(rng)
    if rng.random() < 0.4:
        other = random_single_spec(rng)
        spec = spec.replace(pair=other, pair_align="Month")
    return spec


def random_instance(
    rng: random.Random,
    n_clauses: int,
    max_candidates: int,
    exact: bool = False,
) -> tuple[list[Clause], list[list[ChartSpec]]]:
    clauses = []
    sets = []
    for cid in range(n_clauses):
        clarity = rng.choice([Clarity.CLEAR, Clarity.CLEAR, Clarity.VAGUE])
        n = max_candidates if exact else rng.randint(1, max_candidates)
        cands: list[ChartSpec] = []
        seen: set = set()
        attempts = 0
        while len(cands) < n:
            spec = random_composite_spec(rng)
            sig = spec.signature()
            attempts += 1
            if sig in seen and attempts < 50 * n:
                continue
            seen.add(sig)
            cands.append(spec)
        first_fact = cands[0].fact
        clauses.append(
            Clause(
                id=cid,
                text=f"clause {cid}",
                sentence_id=cid,
                kind=ClauseKind.FACTUAL,
                clarity=clarity,
                candidates=((first_fact, 0.9),),
            )
        )
        sets.append(cands)
    return clauses, sets
