"""Two-level entity taxonomy and the coarse-to-fine typing pipeline.

Typing an entity takes the cheapest path that fires:

1. rule-based patterns for structured strings (years, dates, percentages,
   money, bare counts);
2. embedding retrieval of candidate labels followed by LLM selection of the
   first-level class and then the (first, second) pair.

Results are memoized per surface string, so an entity recurring across
document triples and sub-queries is typed once.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from tasr.config import PipelineConfig
from tasr.embedding import CachingEncoder, VectorIndex
from tasr.errors import (
    EmptyBranch,
    IndexUnavailable,
    LlmProtocolError,
    TaxonomyParseError,
)
from tasr.llm import Gateway, load_prompt
from tasr.model import Entity, TaxonomyLabel

TYPE_SELECT_SYSTEM = "You assign entity types from a fixed two-level taxonomy."


@dataclass(frozen=True)
class Taxonomy:
    """Ordered first-level classes, each with at least one second-level child."""

    l1_classes: tuple[str, ...]
    children: dict[str, tuple[str, ...]]

    def has_l1(self, l1: str) -> bool:
        return l1 in self.children

    def has_label(self, l1: str, l2: str) -> bool:
        return l2 in self.children.get(l1, ())

    def validate_label(self, label: TaxonomyLabel) -> TaxonomyLabel:
        if not self.has_label(label.l1, label.l2):
            raise TaxonomyParseError(f"label {label} is not in the taxonomy")
        return label

    def all_pairs(self) -> list[TaxonomyLabel]:
        return [
            TaxonomyLabel(l1, l2) for l1 in self.l1_classes for l2 in self.children[l1]
        ]


def load_taxonomy(source: str | Path) -> Taxonomy:
    """Load a taxonomy file: ``{"l1": [{"name": ..., "l2": [...]}, ...]}``."""
    try:
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TaxonomyParseError(f"cannot read taxonomy {source}: {exc}") from exc
    return taxonomy_from_dict(data)


def taxonomy_from_dict(data: dict) -> Taxonomy:
    if not isinstance(data, dict) or "l1" not in data or not isinstance(data["l1"], list):
        raise TaxonomyParseError('taxonomy must be an object with an "l1" list')
    l1_classes: list[str] = []
    children: dict[str, tuple[str, ...]] = {}
    for branch in data["l1"]:
        try:
            name = branch["name"]
            l2 = list(branch["l2"])
        except (TypeError, KeyError) as exc:
            raise TaxonomyParseError(f"malformed branch: {branch!r}") from exc
        if name in children:
            raise TaxonomyParseError(f"duplicate first-level class {name!r}")
        if not l2:
            raise EmptyBranch(f"first-level class {name!r} has no children")
        l1_classes.append(name)
        children[name] = tuple(l2)
    if not l1_classes:
        raise TaxonomyParseError("taxonomy has no first-level classes")
    return Taxonomy(l1_classes=tuple(l1_classes), children=children)


def load_default_taxonomy() -> Taxonomy:
    """Load the taxonomy bundled with the package (same table as taxonomy/default.json)."""
    text = (resources.files("tasr") / "data" / "default_taxonomy.json").read_text(
        encoding="utf-8"
    )
    return taxonomy_from_dict(json.loads(text))


# --- rule-based typing -------------------------------------------------------

_MONTHS = (
    "January|February|March|April|May|June|July|August|September|October|"
    "November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec"
)

_YEAR_RE = re.compile(r"^[12][0-9]{3}$")
_ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_MDY_DATE_RE = re.compile(rf"^(?:{_MONTHS})\.? \d{{1,2}},? \d{{4}}$")
_PERCENT_RE = re.compile(r"^[+-]?\d[\d,]*(?:\.\d+)?\s?%$")
_MONEY_RE = re.compile(r"^[$€£¥]\s?\d[\d,]*(?:\.\d+)?(?:\s?(?:thousand|million|billion))?$")
_COUNT_RE = re.compile(r"^\d[\d,]*$")


def rule_type_entity(entity: Entity) -> Optional[TaxonomyLabel]:
    """Type structured strings without any model call; None when nothing fires."""
    text = entity.surface
    if _YEAR_RE.match(text):
        return TaxonomyLabel("TIME", "Year")
    if _ISO_DATE_RE.match(text) or _MDY_DATE_RE.match(text):
        return TaxonomyLabel("TIME", "Date")
    if _PERCENT_RE.match(text):
        return TaxonomyLabel("QUANTITY", "Percentage")
    if _MONEY_RE.match(text):
        return TaxonomyLabel("QUANTITY", "Money")
    if _COUNT_RE.match(text):
        return TaxonomyLabel("QUANTITY", "Count")
    return None


# --- retrieval-first candidate generation ------------------------------------

@dataclass
class TypeCandidates:
    """Ranked label candidates for one entity; L2 filled per selected branch."""

    l1_candidates: list[tuple[str, float]]
    l2_candidates: list[tuple[str, str, float]] = field(default_factory=list)


class TypeEmbeddingIndex:
    """Global L1 label index plus one L2 index per first-level branch."""

    def __init__(self, taxonomy: Taxonomy, encoder: CachingEncoder) -> None:
        self.taxonomy = taxonomy
        self.encoder = encoder
        l1_vectors = encoder.encode(list(taxonomy.l1_classes))
        self.l1_index = VectorIndex(list(zip(taxonomy.l1_classes, l1_vectors)))
        self.l2_indexes: dict[str, VectorIndex] = {}
        for l1 in taxonomy.l1_classes:
            keys = [f"{l1}/{l2}" for l2 in taxonomy.children[l1]]
            vectors = encoder.encode(keys)
            self.l2_indexes[l1] = VectorIndex(list(zip(keys, vectors)))

    def top_l1(self, entity_text: str, n: int) -> list[tuple[str, float]]:
        query = self.encoder.encode_one(entity_text)
        return self.l1_index.search(query, n)

    def top_l2(self, l1: str, entity_text: str, m: int) -> list[tuple[str, str, float]]:
        query = self.encoder.encode_one(entity_text)
        hits = self.l2_indexes[l1].search(query, m)
        return [(l1, key.split("/", 1)[1], score) for key, score in hits]


def retrieve_type_candidates(
    entity: Entity,
    taxonomy: Taxonomy,
    index: Optional[TypeEmbeddingIndex],
    cfg: PipelineConfig,
) -> TypeCandidates:
    """Top first-level labels for the entity by embedding similarity."""
    if index is None:
        raise IndexUnavailable("type-label embedding index was not built")
    return TypeCandidates(l1_candidates=index.top_l1(entity.surface, cfg.n_l1_candidates))


# --- LLM selection ------------------------------------------------------------

class EntityTyper:
    """Coarse-to-fine entity typing with memoization and fallback accounting.

    ``events`` records every fallback taken (LLM protocol failure or
    out-of-vocabulary label), so traces can expose them.
    """

    def __init__(
        self,
        taxonomy: Taxonomy,
        index: Optional[TypeEmbeddingIndex],
        gateway: Gateway,
        cfg: PipelineConfig,
    ) -> None:
        self.taxonomy = taxonomy
        self.index = index
        self.gateway = gateway
        self.cfg = cfg
        self.events: list[str] = []
        self._memo: dict[str, TaxonomyLabel] = {}
        self._lock = threading.Lock()
        self._l1_template = load_prompt("type_select_l1")
        self._l2_template = load_prompt("type_select_l2")

    def type_entity(self, entity: Entity, context: Optional[str] = None) -> TaxonomyLabel:
        cached = self._memo.get(entity.surface)
        if cached is not None:
            return cached
        label = rule_type_entity(entity)
        if label is None:
            if self.cfg.typing_mode == "pure":
                candidates = TypeCandidates(
                    l1_candidates=[(l1, 0.0) for l1 in self.taxonomy.l1_classes]
                )
            else:
                candidates = retrieve_type_candidates(
                    entity, self.taxonomy, self.index, self.cfg
                )
            label = self.select_type(entity, candidates, context=context)
        with self._lock:
            self._memo[entity.surface] = label
        return label

    def type_text(self, text: str, context: Optional[str] = None) -> TaxonomyLabel:
        return self.type_entity(Entity(text), context=context)

    def select_type(
        self,
        entity: Entity,
        candidates: TypeCandidates,
        context: Optional[str] = None,
    ) -> TaxonomyLabel:
        """Two-stage selection: keep first-level labels, then pick the final pair."""
        if not candidates.l1_candidates:
            raise ValueError("select_type requires non-empty candidates")
        kept = self._stage1(entity, candidates, context)
        label = self._stage2(entity, candidates, kept, context)
        return self.taxonomy.validate_label(label)

    # stage 1: keep up to l1_keep first-level labels

    def _stage1(
        self, entity: Entity, candidates: TypeCandidates, context: Optional[str]
    ) -> list[str]:
        if self.cfg.typing_mode == "pure":
            shown = list(self.taxonomy.l1_classes)
            keep = 1
        else:
            shown = [l1 for l1, _ in candidates.l1_candidates]
            keep = self.cfg.l1_keep
        prompt = self._l1_template.format(
            keep=keep,
            candidates=", ".join(shown),
            entity=entity.surface,
            context_block=_context_block(context),
        )
        fallback = shown[:keep]
        for attempt in range(2):
            try:
                parsed = self.gateway.call("type_select", TYPE_SELECT_SYSTEM, prompt).parsed
            except LlmProtocolError:
                break
            labels = parsed.get("labels") if isinstance(parsed, dict) else None
            valid = _dedupe(
                [l for l in labels if self.taxonomy.has_l1(l)] if isinstance(labels, list) else []
            )
            if valid:
                return valid[:keep]
            if attempt == 0:
                prompt += "\n\nOnly use labels from the candidate list."
        self.events.append(f"type_select fallback (stage 1) for entity {entity.surface!r}")
        return fallback

    # stage 2: retrieve second-level candidates under each kept branch, pick one pair

    def _stage2(
        self,
        entity: Entity,
        candidates: TypeCandidates,
        kept: list[str],
        context: Optional[str],
    ) -> TaxonomyLabel:
        if self.cfg.typing_mode == "pure":
            union = [(l1, l2, 0.0) for l1 in kept for l2 in self.taxonomy.children[l1]]
        else:
            if self.index is None:
                raise IndexUnavailable("type-label embedding index was not built")
            union = []
            for l1 in kept:
                union.extend(self.index.top_l2(l1, entity.surface, self.cfg.m_l2_candidates))
        candidates.l2_candidates = list(union)
        offered = {(l1, l2) for l1, l2, _ in union}
        prompt = self._l2_template.format(
            candidates=", ".join(f"{l1}/{l2}" for l1, l2, _ in union),
            entity=entity.surface,
            context_block=_context_block(context),
        )
        fallback = max(union, key=lambda item: item[2], default=None)
        for attempt in range(2):
            try:
                parsed = self.gateway.call("type_select", TYPE_SELECT_SYSTEM, prompt).parsed
            except LlmProtocolError:
                break
            if isinstance(parsed, dict):
                pair = (parsed.get("l1"), parsed.get("l2"))
                if pair in offered:
                    return TaxonomyLabel(*pair)
            if attempt == 0:
                prompt += "\n\nOnly use a candidate pair from the list."
        self.events.append(f"type_select fallback (stage 2) for entity {entity.surface!r}")
        if fallback is None:
            raise ValueError("no second-level candidates to fall back to")
        return TaxonomyLabel(fallback[0], fallback[1])


def _context_block(context: Optional[str]) -> str:
    if not context:
        return ""
    return f"\nContext: {context}"


def _dedupe(items: list[str]) -> list[str]:
    return list(dict.fromkeys(items))
