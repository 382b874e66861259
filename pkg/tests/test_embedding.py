import numpy as np
import pytest

from tasr.config import PipelineConfig
from tasr.embedding import (
    CachingEncoder,
    CorpusIndex,
    HashEncoderClient,
    VectorIndex,
    dense_retrieve,
    encode,
    encode_triple_components,
    encoder_from_url,
    normalize,
    search,
)
from tasr.errors import DimensionMismatch, EmptyIndex
from tasr.model import Document, Entity, Triple

from conftest import RecordingEncoderClient


class TestNormalize:
    def test_unit_norm(self):
        v = normalize(np.array([3.0, 4.0]))
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            normalize(np.zeros(4))


class TestEncode:
    def test_single_text_unit_norm(self):
        vectors = encode(["a"], HashEncoderClient())
        assert len(vectors) == 1
        assert np.linalg.norm(vectors[0]) == pytest.approx(1.0, abs=1e-6)

    def test_deterministic(self):
        client = HashEncoderClient()
        a1, a2 = encode(["same text", "same text"], client)
        assert np.array_equal(a1, a2)
        b = encode(["same text"], HashEncoderClient())[0]
        assert np.array_equal(a1, b)

    def test_distinct_texts_near_orthogonal(self):
        # identical text gives cosine 1; distinct random pairs stay far below it
        client = HashEncoderClient()
        rng = np.random.default_rng(7)
        for _ in range(100):
            x = f"text {rng.integers(1_000_000)}"
            y = f"text {rng.integers(1_000_000)}"
            if x == y:
                continue
            vx, vy = encode([x, y], client)
            assert float(vx @ vx) == pytest.approx(1.0, abs=1e-9)
            assert abs(float(vx @ vy)) < 0.5

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            encode([], HashEncoderClient())

    def test_dimension_mismatch_detected(self):
        class BrokenClient:
            def encode(self, texts):
                return [np.ones(3) / np.sqrt(3), np.ones(4) / 2.0]

        with pytest.raises(DimensionMismatch):
            encode(["x", "y"], BrokenClient())


class TestCachingEncoder:
    def test_second_call_hits_cache(self):
        recording = RecordingEncoderClient()
        encoder = CachingEncoder(recording)
        encoder.encode_one("x")
        encoder.encode_one("x")
        assert recording.seen == ["x"]

    def test_disk_cache_roundtrip(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        first = CachingEncoder(HashEncoderClient(), cache_path=path)
        v1 = first.encode_one("persisted")
        recording = RecordingEncoderClient()
        second = CachingEncoder(recording, cache_path=path)
        v2 = second.encode_one("persisted")
        assert np.allclose(v1, v2)
        assert recording.seen == []


class TestEncodeTripleComponents:
    def test_role_prefixes_are_bit_exact(self):
        recording = RecordingEncoderClient()
        triple = Triple(Entity("A"), "r", Entity("A"))
        encode_triple_components(triple, recording)
        assert recording.seen == ["S: A", "P: r", "O: A"]

    def test_same_surface_differs_across_roles(self):
        client = HashEncoderClient()
        v_h, _, v_t = encode_triple_components(Triple(Entity("A"), "r", Entity("A")), client)
        assert not np.allclose(v_h, v_t)

    def test_identical_triples_identical_vectors(self):
        client = HashEncoderClient()
        t = Triple(Entity("x"), "rel", Entity("y"))
        first = encode_triple_components(t, client)
        second = encode_triple_components(t, client)
        for a, b in zip(first, second):
            assert np.array_equal(a, b)


class TestVectorIndexSearch:
    def test_singleton(self):
        index = VectorIndex([("only", normalize(np.array([1.0, 0.0])))])
        assert search(index, normalize(np.array([0.0, 1.0])), 3) == [("only", 0.0)]

    def test_k_larger_than_index_truncates(self):
        vecs = HashEncoderClient(dim=8).encode(["a", "b", "c"])
        index = VectorIndex(list(zip(["a", "b", "c"], vecs)))
        assert len(search(index, vecs[0], 10)) == 3

    def test_empty_index_rejected(self):
        with pytest.raises(EmptyIndex):
            VectorIndex([]).search(np.ones(3), 1)

    def test_equal_scores_tie_break_by_key(self):
        v = normalize(np.ones(4))
        index = VectorIndex([("zeta", v), ("alpha", v)])
        hits = search(index, v, 2)
        assert [key for key, _ in hits] == ["alpha", "zeta"]

    def test_matches_exhaustive_argsort_oracle(self):
        rng = np.random.default_rng(123)
        for trial in range(20):
            n = int(rng.integers(2, 60))
            dim = int(rng.integers(3, 16))
            keys = [f"k{i:03d}" for i in range(n)]
            vectors = [normalize(rng.standard_normal(dim)) for _ in range(n)]
            index = VectorIndex(list(zip(keys, vectors)))
            query = normalize(rng.standard_normal(dim))
            k = int(rng.integers(1, n + 1))
            got = search(index, query, k)
            scores = [float(v @ query) for v in vectors]
            expected = sorted(zip(keys, scores), key=lambda p: (-p[1], p[0]))[:k]
            assert [key for key, _ in got] == [key for key, _ in expected]
            for (_, a), (_, b) in zip(got, expected):
                assert a == pytest.approx(b, abs=1e-12)


class TestDenseRetrieve:
    def _corpus(self, docs):
        return CorpusIndex(docs, CachingEncoder(HashEncoderClient()))

    def test_pool_smaller_than_k0_returns_all(self, toy_corpus, default_cfg):
        corpus = self._corpus(toy_corpus)
        pool = dense_retrieve("any question at all", corpus, default_cfg)
        assert sorted(d.id for d in pool) == [f"doc{i}" for i in range(1, 7)]

    def test_running_example_pool_contains_key_documents(self, toy_corpus, default_cfg):
        corpus = self._corpus(toy_corpus)
        question = "Which company originally developed the database that the Science Activity Planner uses?"
        pool_ids = {d.id for d in dense_retrieve(question, corpus, default_cfg)}
        assert {"doc1", "doc3", "doc6"} <= pool_ids

    def test_duplicate_documents_tie_break_id_ascending(self, default_cfg):
        docs = [
            Document(id="dup2", title="same", text="same body"),
            Document(id="dup1", title="same", text="same body"),
        ]
        pool = dense_retrieve("same body", self._corpus(docs), default_cfg)
        assert [d.id for d in pool] == ["dup1", "dup2"]

    def test_k0_limits_pool(self, toy_corpus):
        cfg = PipelineConfig(k0=2)
        pool = dense_retrieve("question", self._corpus(toy_corpus), cfg)
        assert len(pool) == 2


class TestEncoderFromUrl:
    def test_mock_scheme(self):
        assert isinstance(encoder_from_url("mock:"), HashEncoderClient)

    def test_http_scheme(self):
        client = encoder_from_url("http://example.test:8080")
        assert client.url == "http://example.test:8080"
