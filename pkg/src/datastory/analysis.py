"""Narrative analysis: slice text, classify, extract and rerank facts.

The reranking step rewrites each clause from a candidate fact, embeds
both texts, and keeps the candidates whose rewrite stays close to the
original. Clarity of a clause is a pure function of the nine similarity
scores.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    ClassificationError,
    DataStoryError,
    ExtractionError,
    InputError,
    SegmentationError,
)
from .gateway import GenerationRequest, LlmGateway, cosine_similarity
from .model import (
    Clarity,
    Clause,
    ClauseKind,
    DataFact,
    DataTable,
    Sentence,
    dedupe_facts,
    validate_fact,
)
from .prompts import PromptLibrary
from .tables import table_schema_text

SIMILARITY_THRESHOLD = 0.85
CLEAR_QUORUM = 6
SESSIONS = 3
FACTS_PER_SESSION = 3

# Abbreviations whose trailing period never ends a sentence.
DEFAULT_ABBREVIATIONS = (
    "e.g", "i.e", "etc", "vs", "cf",
    "Dr", "Mr", "Mrs", "Ms", "Prof", "St", "No", "Fig", "Eq",
)

_TERMINALS = ".?!"


def segment_sentences(
    narrative: str,
    abbreviations: Sequence[str] = DEFAULT_ABBREVIATIONS,
) -> list[Sentence]:
    """Split a narrative into sentences on terminal punctuation.

    A run of ``.?!`` ends a sentence when followed by whitespace and an
    uppercase letter/digit/quote, or by end of text. Decimal points never
    qualify (no whitespace follows) and known abbreviations are skipped.
    Paragraphs are blocks separated by blank lines.
    """
    if not narrative or not narrative.strip():
        raise InputError("narrative is empty")

    abbrev = {a.lower().rstrip(".") for a in abbreviations}
    sentences: list[Sentence] = []
    sid = 0
    for pid, para in enumerate(re.split(r"\n\s*\n", narrative)):
        text = para.strip()
        if not text:
            continue
        start = 0
        i = 0
        while i < len(text):
            if text[i] not in _TERMINALS:
                i += 1
                continue
            j = i
            while j < len(text) and text[j] in _TERMINALS:
                j += 1
            at_end = j >= len(text)
            next_starts_upper = False
            if not at_end and text[j].isspace():
                k = j
                while k < len(text) and text[k].isspace():
                    k += 1
                if k < len(text):
                    ch = text[k]
                    if ch in "\"'“‘(" and k + 1 < len(text):
                        ch = text[k + 1]
                    next_starts_upper = ch.isupper() or ch.isdigit()
            if not (at_end or next_starts_upper):
                i = j
                continue
            if text[i] == "." and j - i == 1:
                word = re.search(r"([A-Za-z][\w.]*)$", text[start:i])
                if word:
                    token = word.group(1).lower().rstrip(".")
                    word_at = start + word.start(1)
                    standalone = word_at == 0 or text[word_at - 1].isspace()
                    # standalone single letters are initials ("p. 5")
                    if token in abbrev or (len(token) == 1 and standalone):
                        i = j
                        continue
            piece = text[start:j].strip()
            if piece:
                sentences.append(Sentence(id=sid, text=piece, paragraph_id=pid))
                sid += 1
            start = j
            i = j
        tail = text[start:].strip()
        if tail:
            sentences.append(Sentence(id=sid, text=tail, paragraph_id=pid))
            sid += 1
    return sentences


def parse_classification(reply: str) -> ClauseKind:
    """Case-insensitive parse of a FACTUAL/BACKGROUND reply."""
    lowered = reply.lower()
    pos_f = lowered.find("factual")
    pos_b = lowered.find("background")
    if pos_f < 0 and pos_b < 0:
        raise ClassificationError("classification reply has no verdict", reply)
    if pos_b < 0 or (0 <= pos_f < pos_b):
        return ClauseKind.FACTUAL
    return ClauseKind.BACKGROUND


def extract_json_payload(reply: str):
    """Pull the first JSON array/object out of a model reply."""
    text = reply.strip()
    fence = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if fence:
        text = fence.group(1).strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    for opener, closer in (("[", "]"), ("{", "}")):
        start = text.find(opener)
        end = text.rfind(closer)
        if 0 <= start < end:
            try:
                return json.loads(text[start : end + 1])
            except json.JSONDecodeError:
                continue
    raise InputError(f"reply carries no JSON payload: {reply[:200]!r}")


def check_clause_reconstruction(sentence: str, clause_texts: Sequence[str]) -> None:
    """Clauses must be in-order contiguous substrings covering the
    sentence up to punctuation/whitespace residue."""
    if not clause_texts:
        raise SegmentationError(f"no clauses returned for: {sentence!r}")
    cursor = 0
    covered = []
    for text in clause_texts:
        frag = text.strip()
        if not frag:
            raise SegmentationError("empty clause in reply")
        idx = sentence.find(frag, cursor)
        if idx < 0:
            raise SegmentationError(
                f"clause {frag!r} does not appear (in order) in sentence {sentence!r}"
            )
        covered.append((idx, idx + len(frag)))
        cursor = idx + len(frag)
    residue = []
    pos = 0
    for lo, hi in covered:
        residue.append(sentence[pos:lo])
        pos = hi
    residue.append(sentence[pos:])
    leftover = "".join(residue)
    if re.search(r"[A-Za-z0-9]", leftover):
        raise SegmentationError(
            f"clauses do not reconstruct the sentence; leftover text {leftover.strip()!r}"
        )


def rank_candidates(
    candidates: Sequence[DataFact],
    scores: Sequence[float],
    threshold: float = SIMILARITY_THRESHOLD,
    quorum: int = CLEAR_QUORUM,
    keep: int = 3,
) -> tuple[Clarity, list[tuple[DataFact, float]]]:
    """Apply the strict >threshold / quorum-of-n clarity rule and keep the
    top candidates by similarity, deduplicated, ties broken by index."""
    if len(candidates) != len(scores):
        raise InputError("candidate/score length mismatch")
    above = sum(1 for s in scores if s > threshold)
    clarity = Clarity.CLEAR if above >= quorum else Clarity.VAGUE

    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    qualified: list[tuple[DataFact, float]] = []
    seen: set[tuple] = set()
    for i in order:
        key = candidates[i].canonical_key()
        if key in seen:
            continue
        seen.add(key)
        qualified.append((candidates[i], scores[i]))
        if len(qualified) >= keep:
            break
    return clarity, qualified


@dataclass
class AnalysisSettings:
    similarity_threshold: float = SIMILARITY_THRESHOLD
    clear_quorum: int = CLEAR_QUORUM
    sessions: int = SESSIONS
    facts_per_session: int = FACTS_PER_SESSION
    temperature: float = 0.3
    parse_retries: int = 2


class NarrativeAnalyzer:
    """Drives classification, extraction, and rewrite-based validation."""

    def __init__(
        self,
        gateway: LlmGateway,
        table: DataTable,
        prompts: Optional[PromptLibrary] = None,
        settings: Optional[AnalysisSettings] = None,
    ):
        self.gateway = gateway
        self.table = table
        self.prompts = prompts or PromptLibrary()
        self.settings = settings or AnalysisSettings()
        self._schema_text = table_schema_text(table)

    def _generate(self, prompt: str, session_id: int = 0) -> str:
        req = GenerationRequest(
            prompt=prompt,
            temperature=self.settings.temperature,
            session_id=session_id,
        )
        return self.gateway.generate(req)

    def classify_sentence(self, sentence: Sentence, narrative: str) -> ClauseKind:
        prompt = self.prompts.render(
            "classify",
            table_schema=self._schema_text,
            narrative=narrative,
            sentence=sentence.text,
        )
        return parse_classification(self._generate(prompt))

    def segment_clauses(self, sentence: Sentence) -> list[str]:
        prompt = self.prompts.render("clauses", sentence=sentence.text)
        reply = self._generate(prompt)
        try:
            payload = extract_json_payload(reply)
        except InputError as exc:
            raise SegmentationError(str(exc)) from exc
        if not isinstance(payload, list) or not all(isinstance(c, str) for c in payload):
            raise SegmentationError(f"clause reply is not a string array: {reply[:200]!r}")
        texts = [c.strip() for c in payload if c.strip()]
        check_clause_reconstruction(sentence.text, texts)
        return texts

    def _parse_session_facts(self, reply: str) -> list[DataFact]:
        payload = extract_json_payload(reply)
        if isinstance(payload, dict):
            payload = [payload]
        if not isinstance(payload, list):
            raise InputError("extraction reply is not a JSON array")
        facts = []
        for entry in payload[: self.settings.facts_per_session]:
            fact = DataFact.from_json(entry)
            if validate_fact(fact, self.table).ok:
                facts.append(fact)
        if not facts:
            raise InputError("no valid facts in extraction reply")
        return facts

    def extract_fact_candidates(self, clause: Clause, narrative: str) -> list[DataFact]:
        """Run the per-clause extraction sessions and return exactly
        sessions*facts_per_session candidates in (session, index) order."""
        prompt = self.prompts.render(
            "extract",
            table_schema=self._schema_text,
            narrative=narrative,
            clause=clause.text,
        )
        per_session: list[list[DataFact]] = []
        for session in range(self.settings.sessions):
            facts: list[DataFact] = []
            for _attempt in range(1 + self.settings.parse_retries):
                try:
                    facts = self._parse_session_facts(self._generate(prompt, session))
                    break
                except (InputError, json.JSONDecodeError):
                    facts = []
            per_session.append(facts)

        if not any(per_session):
            raise ExtractionError(f"all extraction sessions failed for clause {clause.id}")

        # A failed session borrows the nearest producing session's output,
        # and short sessions are padded by repeating their last fact.
        filled = [list(facts) for facts in per_session]
        prev: Optional[list[DataFact]] = None
        for idx, facts in enumerate(filled):
            if facts:
                prev = facts
            elif prev is not None:
                filled[idx] = list(prev)
        nxt: Optional[list[DataFact]] = None
        for idx in range(len(filled) - 1, -1, -1):
            if filled[idx]:
                nxt = filled[idx]
            elif nxt is not None:
                filled[idx] = list(nxt)
        candidates: list[DataFact] = []
        for facts in filled:
            while len(facts) < self.settings.facts_per_session:
                facts.append(facts[-1])
            candidates.extend(facts[: self.settings.facts_per_session])
        return candidates

    def rewrite_clause(self, clause: Clause, fact: DataFact, narrative: str) -> str:
        marked = narrative.replace(clause.text, f"[[{clause.text}]]", 1)
        prompt = self.prompts.render(
            "rewrite",
            narrative_marked=marked,
            clause=clause.text,
            fact_json=fact.canonical_json(),
        )
        return self._generate(prompt).strip()

    def validate_candidates(
        self, clause: Clause, candidates: Sequence[DataFact], narrative: str
    ) -> tuple[Clarity, list[tuple[DataFact, float]]]:
        original = self.gateway.embed(clause.text)
        scores = []
        for fact in candidates:
            rewritten = self.rewrite_clause(clause, fact, narrative)
            scores.append(cosine_similarity(original, self.gateway.embed(rewritten)))
        return rank_candidates(
            candidates,
            scores,
            threshold=self.settings.similarity_threshold,
            quorum=self.settings.clear_quorum,
        )

    def analyze(self, narrative: str) -> list[Clause]:
        """Full pass: sentences -> clauses with clarity and candidates."""
        clauses: list[Clause] = []
        cid = 0
        for sentence in segment_sentences(narrative):
            kind = self.classify_sentence(sentence, narrative)
            if kind is ClauseKind.BACKGROUND:
                clauses.append(
                    Clause(
                        id=cid,
                        text=sentence.text,
                        sentence_id=sentence.id,
                        kind=ClauseKind.BACKGROUND,
                        clarity=Clarity.UNKNOWN,
                        paragraph_id=sentence.paragraph_id,
                    )
                )
                cid += 1
                continue
            for text in self.segment_clauses(sentence):
                clause = Clause(
                    id=cid,
                    text=text,
                    sentence_id=sentence.id,
                    kind=ClauseKind.FACTUAL,
                    paragraph_id=sentence.paragraph_id,
                )
                try:
                    candidates = self.extract_fact_candidates(clause, narrative)
                    clarity, qualified = self.validate_candidates(
                        clause, candidates, narrative
                    )
                except ExtractionError:
                    # No usable facts; treated like background downstream.
                    clarity, qualified = Clarity.VAGUE, []
                clause = clause.replace(clarity=clarity, candidates=tuple(qualified))
                clauses.append(clause)
                cid += 1
        return clauses
