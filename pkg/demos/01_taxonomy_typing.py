"""
Typing entities against the two-level taxonomy
==============================================

Every entity that enters the system gets a (first-level, second-level) type.
Structured strings are typed by rules alone; everything else goes through
embedding retrieval of candidate labels and an LLM pick. This demo uses the
deterministic mock backends, so it runs offline.
"""

from pathlib import Path

from tasr import (
    CachingEncoder,
    Entity,
    EntityTyper,
    Gateway,
    HashEncoderClient,
    PipelineConfig,
    TypeEmbeddingIndex,
    load_default_taxonomy,
    load_script,
    retrieve_type_candidates,
    rule_type_entity,
    validate_config,
)

ROOT = Path(__file__).resolve().parent.parent

# the bundled taxonomy: 12 coarse classes, each with fine-grained children
taxonomy = load_default_taxonomy()
print("first-level classes:", ", ".join(taxonomy.l1_classes))
print("PRODUCT children:   ", ", ".join(taxonomy.children["PRODUCT"]))
print()

# structured strings never need a model call
for text in ["1998", "2023-07-04", "37.5%", "$4.2 million", "12,576"]:
    print(f"rule-typed {text!r:>14} -> {rule_type_entity(Entity(text))}")
print()

# everything else: retrieve candidate labels by embedding similarity,
# then let the (here: scripted) LLM pick
cfg = validate_config(PipelineConfig())
encoder = CachingEncoder(HashEncoderClient())
index = TypeEmbeddingIndex(taxonomy, encoder)
gateway = Gateway(backend=load_script(ROOT / "fixtures" / "toy" / "llm_script.json"))
typer = EntityTyper(taxonomy, index, gateway, cfg)

entity = Entity("MySQL database")
candidates = retrieve_type_candidates(entity, taxonomy, index, cfg)
print(f"top first-level candidates for {entity.surface!r}:")
for l1, sim in candidates.l1_candidates[:5]:
    print(f"  {l1:<14} similarity {sim:+.4f}")

label = typer.type_entity(entity)
print(f"\nselected type: {label}")

# results are memoized: asking again is free and identical
assert typer.type_entity(Entity("MySQL database")) == label
print("second call hits the memo and returns the same label")
