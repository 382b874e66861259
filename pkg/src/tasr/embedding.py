"""Text encoding and exact inner-product search over unit vectors.

All vectors are L2-normalized, so inner product equals cosine similarity.
Search is exact brute force: pools here are at most a few thousand vectors,
and exactness is what makes the scoring oracle tests meaningful.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
import requests

from tasr.config import PipelineConfig
from tasr.errors import DimensionMismatch, EmptyIndex, EncoderUnavailable
from tasr.model import Document, Triple

NORM_TOL = 1e-6

HEAD_PREFIX = "S: "
RELATION_PREFIX = "P: "
TAIL_PREFIX = "O: "


class EncoderClient(Protocol):
    def encode(self, texts: Sequence[str]) -> list[np.ndarray]:
        """Return one unit-normalized float64 vector per input text, in order."""
        ...


def normalize(vector: np.ndarray) -> np.ndarray:
    """L2-normalize; zero vectors are rejected."""
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


class HashEncoderClient:
    """Deterministic offline encoder: stable hash -> RNG seed -> Gaussian -> normalize.

    Identical texts map to identical vectors; distinct texts are near-orthogonal.
    """

    def __init__(self, dim: int = 384) -> None:
        self.dim = dim

    def encode(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "big")
            rng = np.random.default_rng(seed)
            out.append(normalize(rng.standard_normal(self.dim)))
        return out


class HttpEncoderClient:
    """Encoder behind ``POST /embed`` with ``{"texts": [...]}`` JSON bodies."""

    def __init__(self, url: str, timeout: float = 30.0) -> None:
        self.url = url.rstrip("/")
        self.timeout = timeout

    def encode(self, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            resp = requests.post(
                f"{self.url}/embed", json={"texts": list(texts)}, timeout=self.timeout
            )
            resp.raise_for_status()
            embeddings = resp.json()["embeddings"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise EncoderUnavailable(f"encoder at {self.url}: {exc}") from exc
        if len(embeddings) != len(texts):
            raise EncoderUnavailable(
                f"encoder returned {len(embeddings)} vectors for {len(texts)} texts"
            )
        vectors = [normalize(np.asarray(e, dtype=np.float64)) for e in embeddings]
        dims = {v.shape[0] for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"batch returned inconsistent dimensions: {sorted(dims)}")
        return vectors


class CachingEncoder:
    """Per-run memo over an encoder client, with an optional JSONL disk cache.

    Distinct calls for the same text always return the same vector, which is
    what makes reranking scores reproducible within a run.
    """

    def __init__(self, client: EncoderClient, cache_path: Optional[str | Path] = None) -> None:
        self.client = client
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._cache_path = Path(cache_path) if cache_path else None
        if self._cache_path and self._cache_path.exists():
            with self._cache_path.open(encoding="utf-8") as fh:
                for line in fh:
                    record = json.loads(line)
                    self._cache[record["text"]] = np.asarray(record["vector"], dtype=np.float64)

    def encode(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in dict.fromkeys(texts) if t not in self._cache]
        if missing:
            fresh = self.client.encode(missing)
            dims = {v.shape[0] for v in fresh}
            if len(dims) > 1:
                raise DimensionMismatch(f"batch returned inconsistent dimensions: {sorted(dims)}")
            with self._lock:
                for text, vec in zip(missing, fresh):
                    self._cache[text] = vec
            if self._cache_path:
                with self._cache_path.open("a", encoding="utf-8") as fh:
                    for text, vec in zip(missing, fresh):
                        fh.write(json.dumps({"text": text, "vector": vec.tolist()}) + "\n")
        return [self._cache[t] for t in texts]

    def encode_one(self, text: str) -> np.ndarray:
        return self.encode([text])[0]


def encoder_from_url(url: str, dim: int = 384) -> EncoderClient:
    """``mock:`` selects the deterministic hash encoder; anything else is HTTP."""
    if url.startswith("mock:"):
        return HashEncoderClient(dim=dim)
    return HttpEncoderClient(url)


def encode(texts: Sequence[str], client: EncoderClient) -> list[np.ndarray]:
    """Encode a batch, enforcing the unit-norm and consistent-dimension contract."""
    if not texts:
        raise ValueError("encode() requires at least one text")
    vectors = client.encode(texts)
    dims = {v.shape[0] for v in vectors}
    if len(dims) > 1:
        raise DimensionMismatch(f"batch returned inconsistent dimensions: {sorted(dims)}")
    for v in vectors:
        if abs(float(np.linalg.norm(v)) - 1.0) > NORM_TOL:
            raise ValueError("encoder returned a non-unit vector")
    return vectors


def encode_triple_components(
    triple: Triple, client: EncoderClient
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode head/relation/tail with their role prefixes ("S: ", "P: ", "O: ")."""
    texts = [
        HEAD_PREFIX + triple.head.surface,
        RELATION_PREFIX + triple.relation,
        TAIL_PREFIX + triple.tail.surface,
    ]
    v_h, v_r, v_t = client.encode(texts)
    return v_h, v_r, v_t


class VectorIndex:
    """Exact top-k search over unit vectors, keyed by string."""

    def __init__(self, entries: Sequence[tuple[str, np.ndarray]]) -> None:
        self.keys = [key for key, _ in entries]
        if entries:
            self._matrix = np.stack([np.asarray(v, dtype=np.float64) for _, v in entries])
        else:
            self._matrix = np.zeros((0, 0))

    def __len__(self) -> int:
        return len(self.keys)

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Top-k by inner product, descending; ties broken by key ascending."""
        if not self.keys:
            raise EmptyIndex("search against an empty index")
        if k < 1:
            raise ValueError("k must be positive")
        scores = self._matrix @ np.asarray(query, dtype=np.float64)
        order = sorted(range(len(self.keys)), key=lambda i: (-scores[i], self.keys[i]))
        return [(self.keys[i], float(scores[i])) for i in order[: min(k, len(self.keys))]]


def search(index: VectorIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    return index.search(query, k)


class CorpusIndex:
    """Dense document index built over ``title\\n\\ntext``."""

    def __init__(self, documents: Sequence[Document], encoder: CachingEncoder) -> None:
        self.documents = {d.id: d for d in documents}
        self.encoder = encoder
        if not documents:
            self.index = VectorIndex([])
        else:
            vectors = encoder.encode([d.embedding_text() for d in documents])
            self.index = VectorIndex(list(zip([d.id for d in documents], vectors)))


def dense_retrieve(query: str, corpus: CorpusIndex, cfg: PipelineConfig) -> list[Document]:
    """Top-k0 documents by cosine with the query, best first."""
    hits = corpus.index.search(corpus.encoder.encode_one(query), cfg.k0)
    return [corpus.documents[key] for key, _ in hits]
