"""Hybrid triple matching and document reranking.

The scoring stack, bottom up:

* type-pair score: weighted L1/L2 label equality;
* structural score: head/tail type-pair scores, weighted; relations play no role;
* semantic score: weighted cosines between role-prefixed component embeddings;
* triple score: alpha-mix of structural and semantic;
* per-document best score per sub-query (max over the document's triples);
* document score: gamma-mix of the max and the mean over the top-t sub-queries;
* threshold filter and rank, with a top-1 fallback when the filter empties.

All functions are pure; determinism is guaranteed by explicit tie rules
(doc id ascending, sub-query position ascending).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from tasr.config import PipelineConfig
from tasr.embedding import (
    CachingEncoder,
    HEAD_PREFIX,
    RELATION_PREFIX,
    TAIL_PREFIX,
)
from tasr.errors import EmptyPool
from tasr.model import Document, SubQuery, TaxonomyLabel, Triple, TypedTriple


@dataclass(frozen=True)
class TripleMatch:
    """Score breakdown for one (sub-query, document triple) pair."""

    query_index: int
    doc_id: str
    doc_triple_index: Optional[int]  # None for the tripleless-document sentinel
    s_struct: float
    s_sem: float
    s_triple: float


@dataclass(frozen=True)
class ScoredDocument:
    doc_id: str
    score: float
    best_matches: tuple[TripleMatch, ...]  # one per sub-query, in chain order


@dataclass(frozen=True)
class RankedPool:
    documents: tuple[ScoredDocument, ...]  # retained after thresholding, best first
    all_scored: tuple[ScoredDocument, ...]  # every pool document, ranked
    fallback: bool  # True when the threshold emptied the pool and top-1 was retained


def score_type_pair(tq: TaxonomyLabel, td: TaxonomyLabel, cfg: PipelineConfig) -> float:
    """Weighted exact-equality of the two label levels."""
    return cfg.w1 * float(tq.l1 == td.l1) + cfg.w2 * float(tq.l2 == td.l2)


def score_structural(qs: SubQuery, dt: TypedTriple, cfg: PipelineConfig) -> float:
    """Type compatibility of the head and tail slots; the relation is ignored."""
    if qs.head_type is None or qs.tail_type is None:
        raise ValueError(f"sub-query {qs.index} is untyped")
    return cfg.wh * score_type_pair(qs.head_type, dt.head_type, cfg) + cfg.wt * score_type_pair(
        qs.tail_type, dt.tail_type, cfg
    )


def _subquery_component_vectors(qs: SubQuery, encoder: CachingEncoder):
    """Role-prefixed vectors for a sub-query; latent slots embed as their ?Name text."""
    return (
        encoder.encode_one(HEAD_PREFIX + qs.head.text),
        encoder.encode_one(RELATION_PREFIX + qs.relation),
        encoder.encode_one(TAIL_PREFIX + qs.tail.text),
    )


def _triple_component_vectors(dt: Triple, encoder: CachingEncoder):
    return (
        encoder.encode_one(HEAD_PREFIX + dt.head.surface),
        encoder.encode_one(RELATION_PREFIX + dt.relation),
        encoder.encode_one(TAIL_PREFIX + dt.tail.surface),
    )


def component_cosines(
    qs: SubQuery, dt: Triple, encoder: CachingEncoder
) -> tuple[float, float, float]:
    q_h, q_r, q_t = _subquery_component_vectors(qs, encoder)
    d_h, d_r, d_t = _triple_component_vectors(dt, encoder)
    return (float(np.dot(q_h, d_h)), float(np.dot(q_r, d_r)), float(np.dot(q_t, d_t)))


def score_semantic(
    qs: SubQuery, dt: Triple, encoder: CachingEncoder, cfg: PipelineConfig
) -> float:
    """Weighted cosine similarity over head, relation and tail components."""
    cos_h, cos_r, cos_t = component_cosines(qs, dt, encoder)
    return cfg.lh * cos_h + cfg.lr * cos_r + cfg.lt * cos_t


def score_triple(
    qs: SubQuery,
    dt_raw: Triple,
    dt_typed: TypedTriple,
    cfg: PipelineConfig,
    encoder: CachingEncoder,
    doc_triple_index: Optional[int] = None,
) -> TripleMatch:
    """Alpha-mix of the structural and semantic scores for one triple pair."""
    s_struct = score_structural(qs, dt_typed, cfg)
    s_sem = score_semantic(qs, dt_raw, encoder, cfg)
    return TripleMatch(
        query_index=qs.index,
        doc_id=dt_raw.source_doc or "",
        doc_triple_index=doc_triple_index,
        s_struct=s_struct,
        s_sem=s_sem,
        s_triple=cfg.alpha * s_struct + (1.0 - cfg.alpha) * s_sem,
    )


def best_triple_score(
    qs: SubQuery, doc: Document, cfg: PipelineConfig, encoder: CachingEncoder
) -> TripleMatch:
    """Best-scoring triple of the document for this sub-query.

    A document with no triples carries no matchable structure and scores 0.
    """
    doc.check_aligned()
    best: Optional[TripleMatch] = None
    for i, (raw, typed) in enumerate(zip(doc.triples, doc.typed_triples)):
        match = score_triple(qs, raw, typed, cfg, encoder, doc_triple_index=i)
        if best is None or match.s_triple > best.s_triple:
            best = match
    if best is None:
        return TripleMatch(
            query_index=qs.index,
            doc_id=doc.id,
            doc_triple_index=None,
            s_struct=0.0,
            s_sem=0.0,
            s_triple=0.0,
        )
    return best


def aggregate_document_score(
    best_scores: Sequence[float], cfg: PipelineConfig, force_index: Optional[int] = None
) -> float:
    """Gamma-mix of the max score and the mean over the top-t sub-queries.

    ``force_index`` guarantees one sub-query (the current hop) a seat in the
    mean's top-t set, replacing the weakest member if needed.
    """
    if not best_scores:
        raise ValueError("aggregate_document_score requires at least one sub-query score")
    t = min(cfg.top_t, len(best_scores))
    order = sorted(range(len(best_scores)), key=lambda i: (-best_scores[i], i))
    chosen = order[:t]
    if force_index is not None and force_index not in chosen:
        chosen[-1] = force_index
    mean_part = sum(best_scores[i] for i in chosen) / len(chosen)
    return cfg.gamma * max(best_scores) + (1.0 - cfg.gamma) * mean_part


def score_document(
    sub_queries: Sequence[SubQuery],
    doc: Document,
    cfg: PipelineConfig,
    encoder: CachingEncoder,
    force_index: Optional[int] = None,
) -> ScoredDocument:
    """Score one document against the sub-query chain."""
    matches = tuple(best_triple_score(sq, doc, cfg, encoder) for sq in sub_queries)
    score = aggregate_document_score(
        [m.s_triple for m in matches], cfg, force_index=force_index
    )
    return ScoredDocument(doc_id=doc.id, score=score, best_matches=matches)


def filter_and_rank(
    pool: Sequence[Document],
    sub_queries: Sequence[SubQuery],
    cfg: PipelineConfig,
    encoder: CachingEncoder,
    force_index: Optional[int] = None,
) -> RankedPool:
    """Threshold-filter and rank the candidate pool.

    Documents scoring below theta are dropped; if that empties the list, the
    single best document is retained so the answering step always has context,
    and the fallback is flagged for the trace.
    """
    if not pool:
        raise EmptyPool("cannot rerank an empty candidate pool")
    scored = [score_document(sub_queries, d, cfg, encoder, force_index=force_index) for d in pool]
    scored.sort(key=lambda s: (-s.score, s.doc_id))
    kept = [s for s in scored if s.score >= cfg.theta]
    if kept:
        return RankedPool(documents=tuple(kept), all_scored=tuple(scored), fallback=False)
    return RankedPool(documents=(scored[0],), all_scored=tuple(scored), fallback=True)


def explain_triple(
    qs: SubQuery,
    dt_raw: Triple,
    dt_typed: TypedTriple,
    cfg: PipelineConfig,
    encoder: CachingEncoder,
) -> dict:
    """Full score decomposition for one triple pair (CLI debug output)."""
    cos_h, cos_r, cos_t = component_cosines(qs, dt_raw, encoder)
    assert qs.head_type is not None and qs.tail_type is not None
    s_type_head = score_type_pair(qs.head_type, dt_typed.head_type, cfg)
    s_type_tail = score_type_pair(qs.tail_type, dt_typed.tail_type, cfg)
    s_struct = cfg.wh * s_type_head + cfg.wt * s_type_tail
    s_sem = cfg.lh * cos_h + cfg.lr * cos_r + cfg.lt * cos_t
    return {
        "doc_triple": f"({dt_raw.head.surface}, {dt_raw.relation}, {dt_raw.tail.surface})",
        "cos_head": cos_h,
        "cos_relation": cos_r,
        "cos_tail": cos_t,
        "s_type_head": s_type_head,
        "s_type_tail": s_type_tail,
        "s_struct": s_struct,
        "s_sem": s_sem,
        "s_triple": cfg.alpha * s_struct + (1.0 - cfg.alpha) * s_sem,
    }
