"""Single boundary for text generation and embeddings.

Every call is keyed by a SHA-256 digest of its canonical payload, which
is what makes the fixture backend byte-reproducible: a live run recorded
with ``RecordingBackend`` can be replayed offline from the same digests.
"""
from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import requests

from .errors import FixtureMissError, GatewayAuthError, GatewayError, InputError

DEFAULT_TEMPERATURE = 0.3


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    session_id: int = 0
    max_tokens: int = 1024

    def __post_init__(self):
        if not (0.0 <= self.temperature <= 2.0):
            raise InputError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens <= 0:
            raise InputError("max_tokens must be positive")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str

    def __post_init__(self):
        if not self.values:
            raise InputError("embedding vector is empty")
        if any(not math.isfinite(v) for v in self.values):
            raise InputError("embedding vector contains non-finite values")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if len(a.values) != len(b.values):
        raise InputError(
            f"embedding length mismatch: {len(a.values)} vs {len(b.values)}"
        )
    dot = sum(x * y for x, y in zip(a.values, b.values))
    na = math.sqrt(sum(x * x for x in a.values))
    nb = math.sqrt(sum(y * y for y in b.values))
    if na == 0.0 or nb == 0.0:
        raise InputError("cosine similarity undefined for a zero vector")
    return dot / (na * nb)


def generation_digest(req: GenerationRequest, model: str) -> str:
    payload = {
        "kind": "generation",
        "model": model,
        "prompt": req.prompt,
        "session_id": req.session_id,
        "temperature": req.temperature,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def embedding_digest(text: str, model: str) -> str:
    payload = {"kind": "embedding", "model": model, "text": text}
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class Backend(Protocol):
    generation_model: str
    embedding_model: str

    def complete(self, req: GenerationRequest) -> str: ...

    def embed_text(self, text: str) -> EmbeddingVector: ...


class FixtureBackend:
    """Replays recorded responses from a directory of per-digest JSON files."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        meta_path = self.directory / "meta.json"
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            self.generation_model = meta.get("generation_model", "fixture")
            self.embedding_model = meta.get("embedding_model", "fixture")
        else:
            self.generation_model = "fixture"
            self.embedding_model = "fixture"

    def _load(self, digest: str, kind: str) -> dict:
        path = self.directory / f"{digest}.json"
        if not path.exists():
            raise FixtureMissError(digest, kind)
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("kind") != kind:
            raise FixtureMissError(digest, kind)
        return data

    def complete(self, req: GenerationRequest) -> str:
        digest = generation_digest(req, self.generation_model)
        return self._load(digest, "generation")["response"]

    def embed_text(self, text: str) -> EmbeddingVector:
        digest = embedding_digest(text, self.embedding_model)
        data = self._load(digest, "embedding")
        return EmbeddingVector(
            values=tuple(float(v) for v in data["values"]),
            model_id=data.get("model_id", self.embedding_model),
        )


class HttpBackend:
    """OpenAI-compatible chat-completions and embeddings endpoints.

    Retries transport failures (connection errors, 5xx) with exponential
    backoff; auth failures and other 4xx are raised immediately.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str,
        generation_model: str = "gpt-4-turbo",
        embedding_model: str = "text-embedding-3-small",
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_start: float = 1.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.generation_model = generation_model
        self.embedding_model = embedding_model
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_start = backoff_start
        self._session = requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        headers = {"Authorization": f"Bearer {self.api_key}"}
        delay = self.backoff_start
        last_error: Optional[Exception] = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.post(
                    url, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code in (401, 403):
                    raise GatewayAuthError(f"{url}: HTTP {resp.status_code}")
                if resp.status_code < 500:
                    if resp.status_code >= 400:
                        raise GatewayError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise GatewayError(f"{url}: non-JSON response") from exc
                last_error = GatewayError(f"{url}: HTTP {resp.status_code}")
            if attempt + 1 < self.max_attempts:
                time.sleep(delay)
                delay *= 2
        raise GatewayError(f"{url}: failed after {self.max_attempts} attempts: {last_error}")

    def complete(self, req: GenerationRequest) -> str:
        payload = {
            "model": self.generation_model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat-completions response: {data}") from exc

    def embed_text(self, text: str) -> EmbeddingVector:
        data = self._post("/embeddings", {"model": self.embedding_model, "input": text})
        try:
            values = tuple(float(v) for v in data["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise GatewayError(f"malformed embeddings response: {data}") from exc
        return EmbeddingVector(values=values, model_id=self.embedding_model)


class RecordingBackend:
    """Delegates to a live backend and records fixtures for every digest."""

    def __init__(self, live: Backend, directory: str | Path):
        self.live = live
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.generation_model = live.generation_model
        self.embedding_model = live.embedding_model
        self._lock = threading.Lock()
        (self.directory / "meta.json").write_text(
            json.dumps(
                {
                    "generation_model": self.generation_model,
                    "embedding_model": self.embedding_model,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )

    def _write(self, digest: str, record: dict, preview: str) -> None:
        with self._lock:
            path = self.directory / f"{digest}.json"
            path.write_text(
                json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )
            index_path = self.directory / "index.json"
            index = {}
            if index_path.exists():
                index = json.loads(index_path.read_text(encoding="utf-8"))
            index[digest] = preview
            index_path.write_text(
                json.dumps(index, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )

    def complete(self, req: GenerationRequest) -> str:
        response = self.live.complete(req)
        digest = generation_digest(req, self.generation_model)
        self._write(
            digest,
            {"kind": "generation", "response": response},
            req.prompt[:120],
        )
        return response

    def embed_text(self, text: str) -> EmbeddingVector:
        vector = self.live.embed_text(text)
        digest = embedding_digest(text, self.embedding_model)
        self._write(
            digest,
            {
                "kind": "embedding",
                "values": list(vector.values),
                "model_id": vector.model_id,
            },
            text[:120],
        )
        return vector


class LlmGateway:
    """Thin façade the rest of the pipeline talks to.

    Never mutates prompts; responses depend only on the request payload
    and the configured backend.
    """

    def __init__(self, backend: Backend):
        self.backend = backend

    def generate(self, req: GenerationRequest) -> str:
        return self.backend.complete(req)

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise InputError("cannot embed empty text")
        return self.backend.embed_text(text)
