"""Sequential multi-hop reasoning with an explicit entity binding table.

One query runs as: dense retrieval, document structuring (triples + types),
query decomposition (typed sub-queries), then a strictly sequential loop over
sub-queries: resolve bound variables, rerank the fixed candidate pool, answer
the hop, bind its latent variable. The final answer is the last hop's answer.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

from tasr.config import PipelineConfig
from tasr.embedding import CachingEncoder, CorpusIndex, dense_retrieve
from tasr.errors import AmbiguousBinding, LlmProtocolError, TasrError, QueryFailure
from tasr.llm import Gateway, load_prompt
from tasr.matching import RankedPool, filter_and_rank
from tasr.model import (
    BindingTable,
    Document,
    HopRecord,
    ReasoningTrace,
    Slot,
    SubQuery,
)
from tasr.structurer import (
    Decomposition,
    decompose_query,
    extract_triples,
    type_document_triples,
    type_subqueries,
)
from tasr.taxonomy import EntityTyper, Taxonomy, TypeEmbeddingIndex

ANSWER_SYSTEM = "You answer relational sub-queries from the given documents."


def resolve(sq: SubQuery, bindings: BindingTable) -> SubQuery:
    """Substitute every latent slot that has a binding; leave the rest untouched.

    Taxonomy labels are unchanged: a resolved slot keeps the type inferred for
    its variable at decomposition time.
    """

    def substitute(slot: Slot) -> Slot:
        if slot.latent and slot.text in bindings:
            return Slot.bound(bindings.get(slot.text))
        return slot

    return dataclasses.replace(sq, head=substitute(sq.head), tail=substitute(sq.tail))


def bind(sq: SubQuery, answer: str, bindings: BindingTable) -> BindingTable:
    """Bind the hop's unresolved latent variable (if any) to the answer."""
    pending = [name for name in dict.fromkeys(sq.latent_names()) if name not in bindings]
    if len(pending) > 1:
        raise AmbiguousBinding(
            f"sub-query {sq.index} still has {len(pending)} latent variables: {pending}"
        )
    if pending:
        value = answer.strip()
        if not value:
            raise TasrError(f"sub-query {sq.index} answer is empty but {pending[0]} needs a value")
        bindings.insert(pending[0], value)
    return bindings


def answer_subquery(resolved: SubQuery, docs: Sequence[Document], gateway: Gateway) -> str:
    """Ask the LLM to answer one resolved sub-query over the ranked documents."""
    if not docs:
        raise ValueError("answer_subquery requires at least one document")
    pending = [name for name in dict.fromkeys(resolved.latent_names())]
    if pending:
        question_line = f'Give the value of "{pending[0]}".'
    else:
        question_line = "State the answer to the sub-query."
    documents_block = "\n\n".join(f"[{d.id}] {d.title}\n{d.text}" for d in docs)
    prompt = load_prompt("answer").format(
        subquery=resolved.render(),
        question_line=question_line,
        documents=documents_block,
    )
    parsed = gateway.call("answer", ANSWER_SYSTEM, prompt).parsed
    if not isinstance(parsed, dict) or not isinstance(parsed.get("answer"), str):
        raise LlmProtocolError("answer", f"expected {{'answer': str}}, got {parsed!r}")
    return parsed["answer"].strip()


class Pipeline:
    """Everything a query run needs: corpus index, taxonomy indexes, gateway, config."""

    def __init__(
        self,
        documents: Sequence[Document],
        taxonomy: Taxonomy,
        encoder: CachingEncoder,
        gateway: Gateway,
        cfg: PipelineConfig,
        pre_extract: bool = False,
    ) -> None:
        self.cfg = cfg
        self.encoder = encoder
        self.gateway = gateway
        self.taxonomy = taxonomy
        self.corpus = CorpusIndex(documents, encoder)
        self.type_index = TypeEmbeddingIndex(taxonomy, encoder)
        self.pre_extract = pre_extract
        self.startup_events: list[str] = []
        if pre_extract:
            typer = EntityTyper(taxonomy, self.type_index, gateway, cfg)
            for doc in documents:
                doc.triples = extract_triples(doc, None, gateway)
                doc.typed_triples = type_document_triples(doc.triples, typer, context=doc.title)
            self.startup_events.extend(typer.events)

    def run_query(self, question: str) -> tuple[str, ReasoningTrace]:
        """Run the full loop; returns the final answer and the complete trace."""
        trace = ReasoningTrace(question=question)
        try:
            return self._run(question, trace)
        except TasrError as exc:
            raise QueryFailure(str(exc), trace=trace) from exc

    def _run(self, question: str, trace: ReasoningTrace) -> tuple[str, ReasoningTrace]:
        pool = dense_retrieve(question, self.corpus, self.cfg)
        trace.pool_ids = [d.id for d in pool]
        typer = EntityTyper(self.taxonomy, self.type_index, self.gateway, self.cfg)

        if not self.pre_extract:
            # fresh per-query copies: extraction is query-conditioned
            pool = [dataclasses.replace(d, triples=[], typed_triples=[]) for d in pool]
            for doc in pool:
                doc.triples = extract_triples(doc, question, self.gateway)
                doc.typed_triples = type_document_triples(doc.triples, typer, context=doc.title)
        pool_by_id = {d.id: d for d in pool}

        decomposition = type_subqueries(decompose_query(question, self.gateway), typer)

        bindings = BindingTable()
        answer = ""
        for position, sub_query in enumerate(decomposition.sub_queries):
            resolved = resolve(sub_query, bindings)
            ranked = self._rerank(pool, decomposition, bindings, resolved, position)
            selected = [pool_by_id[s.doc_id] for s in ranked.documents]
            answer = answer_subquery(resolved, selected, self.gateway)
            bind(resolved, answer, bindings)
            if ranked.fallback:
                trace.events.append(f"rerank fallback at hop {sub_query.index}")
            trace.hops.append(
                HopRecord(
                    index=sub_query.index,
                    sub_query=sub_query,
                    resolved=resolved,
                    document_scores=_score_records(ranked),
                    selected=[s.doc_id for s in ranked.documents],
                    fallback=ranked.fallback,
                    answer=answer,
                )
            )

        trace.final_bindings = bindings.as_dict()
        trace.final_answer = answer
        trace.events.extend(typer.events)
        return answer, trace

    def _rerank(
        self,
        pool: Sequence[Document],
        decomposition: Decomposition,
        bindings: BindingTable,
        resolved: SubQuery,
        position: int,
    ) -> RankedPool:
        if self.cfg.hop_scope == "chain":
            chain = [resolve(sq, bindings) for sq in decomposition.sub_queries]
            return filter_and_rank(pool, chain, self.cfg, self.encoder, force_index=position)
        return filter_and_rank(pool, [resolved], self.cfg, self.encoder)


def run_query(
    question: str, pipeline: Pipeline, cfg: Optional[PipelineConfig] = None
) -> tuple[str, ReasoningTrace]:
    """Convenience wrapper matching the one-call-per-question usage."""
    if cfg is not None and cfg != pipeline.cfg:
        raise ValueError("pipeline was built with a different config")
    return pipeline.run_query(question)


def _score_records(ranked: RankedPool) -> list[dict]:
    records = []
    for scored in ranked.all_scored:
        records.append(
            {
                "doc_id": scored.doc_id,
                "score": scored.score,
                "best_matches": [
                    {
                        "query_index": m.query_index,
                        "doc_triple_index": m.doc_triple_index,
                        "s_struct": m.s_struct,
                        "s_sem": m.s_sem,
                        "s_triple": m.s_triple,
                    }
                    for m in scored.best_matches
                ],
            }
        )
    return records
