"""Turn documents into (typed) triples and queries into typed sub-query chains."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Optional

from tasr.errors import InvalidDecomposition, LlmProtocolError
from tasr.llm import Gateway, load_prompt
from tasr.model import (
    Document,
    Entity,
    Slot,
    SubQuery,
    Triple,
    TypedTriple,
    normalize_variable_name,
)
from tasr.taxonomy import EntityTyper

EXTRACT_SYSTEM = "You extract relational triples from documents."
DECOMPOSE_SYSTEM = "You decompose questions into ordered relational sub-queries."

MAX_SUBQUERIES = 8


@dataclass
class Decomposition:
    """Ordered sub-queries plus a short type description per latent variable."""

    sub_queries: list[SubQuery]
    type_hints: dict[str, str] = field(default_factory=dict)


def extract_triples(doc: Document, query: Optional[str], gateway: Gateway) -> list[Triple]:
    """Extract deduplicated triples from one document.

    When ``query`` is given the prompt includes it (query-time extraction);
    passing None gives the query-agnostic pre-extraction variant.
    """
    if not doc.text.strip():
        return []
    question_block = ""
    if query:
        question_block = f"\nFocus on facts relevant to this question:\nQuestion: {query}\n"
    prompt = load_prompt("extract").format(
        question_block=question_block,
        doc_id=doc.id,
        title=doc.title,
        text=doc.text,
    )
    parsed = gateway.call("extract", EXTRACT_SYSTEM, prompt).parsed
    if not isinstance(parsed, dict) or not isinstance(parsed.get("triples"), list):
        raise LlmProtocolError("extract", f"expected {{'triples': [...]}}, got {parsed!r}")
    triples: list[Triple] = []
    seen: set[tuple[str, str, str]] = set()
    for item in parsed["triples"]:
        triple = Triple(
            head=Entity(str(item["head"])),
            relation=str(item["relation"]),
            tail=Entity(str(item["tail"])),
            source_doc=doc.id,
        )
        if triple.key() not in seen:
            seen.add(triple.key())
            triples.append(triple)
    return triples


def type_document_triples(
    triples: list[Triple], typer: EntityTyper, context: Optional[str] = None
) -> list[TypedTriple]:
    """Type every entity of every triple; relations keep their surface form."""
    typed = []
    for triple in triples:
        typed.append(
            TypedTriple(
                head_type=typer.type_entity(triple.head, context=context),
                relation=triple.relation,
                tail_type=typer.type_entity(triple.tail, context=context),
                base=triple,
            )
        )
    return typed


def decompose_query(query: str, gateway: Gateway) -> Decomposition:
    """Decompose a question into an ordered chain of sub-queries with latent slots."""
    if not query.strip():
        raise ValueError("query is empty")
    prompt = load_prompt("decompose").format(question=query)
    parsed = gateway.call("decompose", DECOMPOSE_SYSTEM, prompt).parsed
    if not isinstance(parsed, dict) or not isinstance(parsed.get("sub_queries"), list):
        raise LlmProtocolError("decompose", f"expected {{'sub_queries': [...]}}, got {parsed!r}")

    sub_queries: list[SubQuery] = []
    for position, item in enumerate(parsed["sub_queries"], start=1):
        sub_queries.append(
            SubQuery(
                index=position,
                head=Slot.parse(str(item["head"])),
                relation=str(item["relation"]).strip(),
                tail=Slot.parse(str(item["tail"])),
            )
        )
    validate_chain(sub_queries)

    hints: dict[str, str] = {}
    raw_hints = parsed.get("type_hints", {})
    if isinstance(raw_hints, dict):
        for name, description in raw_hints.items():
            hints[normalize_variable_name(str(name))] = str(description)
    for sq in sub_queries:
        for name in sq.latent_names():
            hints.setdefault(name, _humanize_variable(name))
    return Decomposition(sub_queries=sub_queries, type_hints=hints)


def validate_chain(sub_queries: list[SubQuery]) -> None:
    """Reject chains that cannot be executed left to right.

    Each sub-query may introduce at most one new latent variable: that
    variable is the hop's answer target. A sub-query introducing two new
    variables has no producer ordering that resolves it.
    """
    if not sub_queries:
        raise InvalidDecomposition("decomposition has no sub-queries")
    if len(sub_queries) > MAX_SUBQUERIES:
        raise InvalidDecomposition(
            f"decomposition has {len(sub_queries)} sub-queries (max {MAX_SUBQUERIES})"
        )
    produced: set[str] = set()
    for sq in sub_queries:
        new = [name for name in dict.fromkeys(sq.latent_names()) if name not in produced]
        if len(new) > 1:
            raise InvalidDecomposition(
                f"sub-query {sq.index} introduces {len(new)} unresolved variables: {new}"
            )
        produced.update(new)


def type_subqueries(dec: Decomposition, typer: EntityTyper) -> Decomposition:
    """Assign taxonomy labels to every slot of every sub-query.

    Bound slots are typed from their surface text; latent slots from the
    variable name plus its type hint.
    """
    typed = []
    for sq in dec.sub_queries:
        typed.append(
            dataclasses.replace(
                sq,
                head_type=_slot_label(sq.head, dec.type_hints, typer),
                tail_type=_slot_label(sq.tail, dec.type_hints, typer),
            )
        )
    return Decomposition(sub_queries=typed, type_hints=dict(dec.type_hints))


def variable_description(name: str, hint: Optional[str]) -> str:
    """The text a latent variable is typed from, e.g. ``Database (database product)``."""
    base = name.lstrip("?")
    if hint and hint.strip() and hint.strip().lower() != base.lower():
        return f"{base} ({hint.strip()})"
    return _humanize_variable(name)


def _slot_label(slot: Slot, hints: dict[str, str], typer: EntityTyper):
    if slot.latent:
        return typer.type_text(variable_description(slot.text, hints.get(slot.text)))
    return typer.type_text(slot.text)


def _humanize_variable(name: str) -> str:
    body = name.lstrip("?")
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", body)
    return spaced.lower()
