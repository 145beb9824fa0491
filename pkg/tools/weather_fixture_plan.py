"""Scripted model replies for the Weather mini-narrative.

``PlannedBackend`` answers every prompt of the pipeline from a fixed
plan, so running the pipeline against it (optionally through a
``RecordingBackend``) yields a reproducible fixture corpus and golden
outputs. Embeddings are unit vectors engineered to hit exact cosine
targets against each clause's base vector, which drives the
clear/vague outcomes.

Regenerate the committed corpus with ``tools/make_weather_fixtures.py``
after changing prompt templates, the weather table, or the narrative.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path

from datastory.gateway import EmbeddingVector, GenerationRequest
from datastory.model import DataFact

NARRATIVE = (
    "Welcome to the year-round story of our city's weather. "
    "The chill of winter finds its way into the city each year. "
    "December's average low sits at a cool 12.5°C and a record low dips "
    "to an almost freezing 1.7°C. "
    "Rainfall peaks in the spring months, especially in May and June."
)

S_BACKGROUND = "Welcome to the year-round story of our city's weather."
S_WINTER = "The chill of winter finds its way into the city each year."
S_DECEMBER = (
    "December's average low sits at a cool 12.5°C and a record low dips "
    "to an almost freezing 1.7°C."
)
S_SPRING = "Rainfall peaks in the spring months, especially in May and June."

C_WINTER = S_WINTER
C_DEC_AVG = "December's average low sits at a cool 12.5°C"
C_DEC_REC = "and a record low dips to an almost freezing 1.7°C"
C_SPRING = S_SPRING

CLASSIFICATIONS = {
    S_BACKGROUND: "BACKGROUND",
    S_WINTER: "FACTUAL",
    S_DECEMBER: "FACTUAL",
    S_SPRING: "FACTUAL",
}

CLAUSE_SPLITS = {
    S_WINTER: [C_WINTER],
    S_DECEMBER: [C_DEC_AVG, C_DEC_REC],
    S_SPRING: [C_SPRING],
}


def _fact(type, measures, context=None, breakdowns=None, focus=None):
    return {
        "type": type,
        "parameters": {},
        "measures": list(measures),
        "context": context or {},
        "breakdowns": breakdowns or [],
        "focus": focus or {},
    }


# per clause: three extraction sessions and, per distinct fact, the
# rewrite sentence plus its target cosine against the clause embedding
WINTER_FACTS = [
    (_fact("trend", ["Daily mean"], breakdowns=["Month"]),
     "The daily mean temperature falls through the winter months.", 0.90),
    (_fact("value", ["Average low"], context={"Month": ["Jan"]}),
     "January's average low reaches its coldest value.", 0.88),
    (_fact("extreme", ["Record low"], breakdowns=["Month"], focus={"Month": ["Jan"]}),
     "January holds the record low of the year.", 0.86),
    (_fact("value", ["Daily mean"], context={"Month": ["Feb"]}),
     "February's daily mean stays low.", 0.84),
    (_fact("trend", ["Average high"], breakdowns=["Month"]),
     "Average highs decline toward the year's end.", 0.80),
    (_fact("distribution", ["Average low"], breakdowns=["Month"]),
     "Average lows vary widely across the twelve months.", 0.75),
    (_fact("value", ["Record high"], context={"Month": ["Jul"]}),
     "July carries the record high of the year.", 0.70),
    (_fact("comparison", ["Average low", "Average high"], breakdowns=["Month"]),
     "Average lows and highs move together month by month.", 0.60),
    (_fact("value", ["Rainfall"], context={"Month": ["Dec"]}),
     "December rainfall is the lightest of the year.", 0.50),
]

DEC_AVG_FACTS = [
    (_fact("value", ["Average low"], context={"Month": ["Dec"]}),
     "December's average low is 12.5°C.", 0.97),
    (_fact("extreme", ["Average low"], breakdowns=["Month"], focus={"Month": ["Dec"]}),
     "December stands out for its cool average low.", 0.90),
    (_fact("value", ["Average low", "Daily mean"], context={"Month": ["Dec"]}),
     "December's average low and daily mean are both cool.", 0.88),
    (_fact("value", ["Average high"], context={"Month": ["Dec"]}),
     "December's average high stays mild.", 0.50),
]

DEC_REC_FACTS = [
    (_fact("value", ["Record low"], context={"Month": ["Dec"]}),
     "December's record low is 1.7°C.", 0.96),
    (_fact("extreme", ["Record low"], breakdowns=["Month"], focus={"Month": ["Dec"]}),
     "December's record low nearly touches freezing.", 0.90),
    (_fact("value", ["Record low", "Average low"], context={"Month": ["Dec"]}),
     "December's record and average lows are both cold.", 0.87),
    (_fact("value", ["Rainfall"], context={"Month": ["Dec"]}),
     "December is the driest month.", 0.45),
]

SPRING_FACTS = [
    (_fact("extreme", ["Rainfall"], breakdowns=["Month"], focus={"Month": ["May", "Jun"]}),
     "Rainfall is highest in May and June.", 0.95),
    (_fact("trend", ["Rainfall"], breakdowns=["Month"]),
     "Rainfall climbs through spring and falls after summer.", 0.90),
    (_fact("value", ["Rainfall"], context={"Month": ["Mar", "Apr", "May", "Jun"]},
           focus={"Month": ["May", "Jun"]}),
     "Spring rainfall peaks in May and June.", 0.86),
    (_fact("rank", ["Rainfall"], breakdowns=["Month"], focus={"Month": ["May"]}),
     "May ranks among the wettest months.", 0.40),
]


def _sessions(facts, layout):
    """Three session replies drawing from the (fact, rewrite, score) rows."""
    return [[facts[i][0] for i in session] for session in layout]


CLAUSE_PLANS = {
    C_WINTER: {
        "rows": WINTER_FACTS,
        "sessions": _sessions(WINTER_FACTS, [[0, 1, 2], [3, 4, 5], [6, 7, 8]]),
    },
    C_DEC_AVG: {
        "rows": DEC_AVG_FACTS,
        "sessions": _sessions(DEC_AVG_FACTS, [[0, 1, 2], [0, 1, 2], [0, 1, 3]]),
    },
    C_DEC_REC: {
        "rows": DEC_REC_FACTS,
        "sessions": _sessions(DEC_REC_FACTS, [[0, 1, 2], [0, 1, 2], [0, 1, 3]]),
    },
    C_SPRING: {
        "rows": SPRING_FACTS,
        "sessions": _sessions(SPRING_FACTS, [[0, 1, 2], [0, 1, 2], [0, 1, 3]]),
    },
}

KEYWORD_REPLIES = {
    C_WINTER: [
        {
            "keyword": "chill",
            "properties": [
                "Daily mean",
                "Average high",
                "Average low",
                "Record high",
                "Record low",
            ],
            "values": [],
        },
        {
            "keyword": "winter",
            "properties": [],
            "values": [
                {"column": "Month", "value": "Dec"},
                {"column": "Month", "value": "Jan"},
                {"column": "Month", "value": "Feb"},
            ],
        },
    ]
}

FIELD_GROUPS = [
    ["Daily mean", "Average high", "Average low", "Record high", "Record low"],
    ["Rainfall"],
]


def _unit(label: str, dim: int = 8) -> list[float]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    raw = [(digest[i] / 255.0) * 2.0 - 1.0 for i in range(dim)]
    norm = math.sqrt(sum(v * v for v in raw))
    return [v / norm for v in raw]


def _with_cosine(base: list[float], target: float, salt: str) -> list[float]:
    other = _unit("orthogonal:" + salt, dim=len(base))
    dot = sum(a * b for a, b in zip(base, other))
    perp = [o - dot * b for o, b in zip(other, base)]
    norm = math.sqrt(sum(v * v for v in perp))
    if norm < 1e-9:
        return _with_cosine(base, target, salt + "#")
    sin = math.sqrt(max(0.0, 1.0 - target * target))
    return [target * b + sin * p / norm for b, p in zip(base, perp)]


def _rewrite_targets() -> dict[str, tuple[str, float]]:
    """rewrite text -> (clause it belongs to, cosine target)."""
    out: dict[str, tuple[str, float]] = {}
    for clause, plan in CLAUSE_PLANS.items():
        for _fact_json, rewrite, score in plan["rows"]:
            out[rewrite] = (clause, score)
    return out


class PlannedBackend:
    """Answers the Weather pipeline's prompts from the plan above."""

    generation_model = "planned"
    embedding_model = "planned-embed"

    def __init__(self):
        self._rewrites = _rewrite_targets()
        self._fact_rewrites = {
            (clause, json.dumps(DataFact.from_json(f).to_json(), sort_keys=True, ensure_ascii=False)):
                rewrite
            for clause, plan in CLAUSE_PLANS.items()
            for f, rewrite, _ in plan["rows"]
        }

    @staticmethod
    def _between(prompt: str, start: str, end: str) -> str:
        m = re.search(re.escape(start) + r"\n(.*?)\n\n" + re.escape(end), prompt, re.S)
        if not m:
            raise AssertionError(f"cannot parse prompt section {start!r}")
        return m.group(1).strip()

    def complete(self, req: GenerationRequest) -> str:
        prompt = req.prompt
        if "Answer with a single word" in prompt:
            sentence = self._between(prompt, "Sentence to label:", "Does this sentence")
            return CLASSIFICATIONS[sentence]
        if "Split the sentence below into clauses" in prompt:
            sentence = self._between(prompt, "Sentence:", "Reply with a JSON array")
            return json.dumps(CLAUSE_SPLITS[sentence], ensure_ascii=False)
        if "Describe up to three data facts" in prompt:
            clause = self._between(prompt, "Target clause:", "Describe up to three data facts")
            sessions = CLAUSE_PLANS[clause]["sessions"]
            return json.dumps(sessions[req.session_id], ensure_ascii=False)
        if "dug out" in prompt:
            clause = self._between(prompt, "Original clause:", "Candidate data fact (JSON):")
            m = re.search(
                r"Candidate data fact \(JSON\):\n(.*?)\n\nWrite one declarative",
                prompt,
                re.S,
            )
            fact = DataFact.from_json(json.loads(m.group(1)))
            key = (clause, json.dumps(fact.to_json(), sort_keys=True, ensure_ascii=False))
            return self._fact_rewrites[key]
        if "Identify its keywords" in prompt:
            clause = self._between(prompt, "Vague clause:", "Reply with a JSON array")
            return json.dumps(KEYWORD_REPLIES[clause], ensure_ascii=False)
        if "semantically comparable" in prompt:
            return json.dumps(FIELD_GROUPS, ensure_ascii=False)
        raise AssertionError(f"unplanned prompt: {prompt[:120]!r}")

    def embed_text(self, text: str) -> EmbeddingVector:
        if text in self._rewrites:
            clause, target = self._rewrites[text]
            values = _with_cosine(_unit("clause:" + clause), target, "rewrite:" + text)
        else:
            values = _unit("clause:" + text)
        return EmbeddingVector(
            values=tuple(round(v, 12) for v in values), model_id=self.embedding_model
        )


def write_inputs(data_dir: Path) -> None:
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "narrative.txt").write_text(NARRATIVE + "\n", encoding="utf-8")
