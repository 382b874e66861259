import pytest

from tasr.errors import InvalidDecomposition
from tasr.llm import Gateway, RecordingBackend, scripted_mock
from tasr.model import Document, Entity, Slot, SubQuery, TaxonomyLabel, Triple
from tasr.structurer import (
    decompose_query,
    extract_triples,
    type_document_triples,
    type_subqueries,
    validate_chain,
    variable_description,
)
from tasr.taxonomy import EntityTyper, TypeEmbeddingIndex

from conftest import EchoSelectBackend

RUNNING_QUESTION = (
    "Which company originally developed the database that the Science Activity Planner uses?"
)


@pytest.fixture()
def toy_gateway(toy_backend):
    return Gateway(backend=toy_backend)


class TestExtractTriples:
    def test_doc1_contains_uses_triple(self, toy_corpus, toy_gateway):
        doc1 = next(d for d in toy_corpus if d.id == "doc1")
        triples = extract_triples(doc1, RUNNING_QUESTION, toy_gateway)
        assert (
            Triple(Entity("Science Activity Planner"), "uses", Entity("MySQL database"), "doc1")
            in triples
        )
        assert all(t.source_doc == "doc1" for t in triples)

    def test_doc6_contains_developer_triple(self, toy_corpus, toy_gateway):
        doc6 = next(d for d in toy_corpus if d.id == "doc6")
        triples = extract_triples(doc6, RUNNING_QUESTION, toy_gateway)
        assert (
            Triple(Entity("MySQL AB"), "developed", Entity("MySQL database"), "doc6") in triples
        )

    def test_empty_body_returns_empty_without_llm_call(self):
        backend = RecordingBackend(scripted_mock([]))
        doc = Document(id="empty", title="t", text="   ")
        assert extract_triples(doc, "q", Gateway(backend=backend)) == []
        assert backend.requests == []

    def test_duplicates_within_document_collapse(self):
        backend = scripted_mock(
            [
                (
                    "extract",
                    "Document id: dup",
                    {
                        "triples": [
                            {"head": "a", "relation": "r", "tail": "b"},
                            {"head": "a", "relation": "r", "tail": "b"},
                            {"head": "a", "relation": "r", "tail": "c"},
                        ]
                    },
                )
            ]
        )
        doc = Document(id="dup", title="t", text="body")
        triples = extract_triples(doc, "q", Gateway(backend=backend))
        assert len(triples) == 2

    def test_duplicates_across_documents_are_kept(self):
        response = {"triples": [{"head": "a", "relation": "r", "tail": "b"}]}
        backend = scripted_mock([("extract", "Document id:", response)])
        gateway = Gateway(backend=backend)
        t1 = extract_triples(Document(id="d1", title="t", text="x"), "q", gateway)
        t2 = extract_triples(Document(id="d2", title="t", text="x"), "q", gateway)
        assert t1[0].key() == t2[0].key()
        assert (t1[0].source_doc, t2[0].source_doc) == ("d1", "d2")

    def test_query_conditioning_controls_prompt(self):
        backend = RecordingBackend(scripted_mock([("extract", "Document id:", {"triples": []})]))
        gateway = Gateway(backend=backend)
        doc = Document(id="d", title="t", text="body")
        extract_triples(doc, "where is it?", gateway)
        extract_triples(doc, None, gateway)
        assert "where is it?" in backend.requests[0].user_prompt
        assert "Question:" not in backend.requests[1].user_prompt


class TestTypeDocumentTriples:
    def _typer(self, taxonomy, hash_encoder, backend):
        from tasr.config import PipelineConfig, validate_config

        return EntityTyper(
            taxonomy,
            TypeEmbeddingIndex(taxonomy, hash_encoder),
            Gateway(backend=backend),
            validate_config(PipelineConfig()),
        )

    def test_relation_preserved_and_aligned(self, taxonomy, hash_encoder):
        typer = self._typer(taxonomy, hash_encoder, EchoSelectBackend())
        triples = [Triple(Entity("alpha"), "uses", Entity("beta"), "d")]
        typed = type_document_triples(triples, typer)
        assert len(typed) == 1
        assert typed[0].relation == "uses"
        assert typed[0].base is triples[0]

    def test_empty_list(self, taxonomy, hash_encoder):
        typer = self._typer(taxonomy, hash_encoder, EchoSelectBackend())
        assert type_document_triples([], typer) == []

    def test_shared_entity_typed_once(self, taxonomy, hash_encoder):
        backend = EchoSelectBackend()
        typer = self._typer(taxonomy, hash_encoder, backend)
        shared = "shared entity"
        triples = [
            Triple(Entity(shared), "r1", Entity("other one"), "d"),
            Triple(Entity(shared), "r2", Entity("other two"), "d"),
            Triple(Entity("other three"), "r3", Entity(shared), "d"),
        ]
        typed = type_document_triples(triples, typer)
        assert len(typed) == len(triples)
        assert [t.relation for t in typed] == ["r1", "r2", "r3"]
        stage1_for_shared = [
            c for c in backend.calls if f'First-level types for entity "{shared}"' in c.user_prompt
        ]
        assert len(stage1_for_shared) == 1


class TestDecomposeQuery:
    def test_running_example(self, toy_gateway):
        dec = decompose_query(RUNNING_QUESTION, toy_gateway)
        assert len(dec.sub_queries) == 2
        s1, s2 = dec.sub_queries
        assert (s1.head.text, s1.relation, s1.tail.text) == (
            "Science Activity Planner",
            "uses",
            "?Database",
        )
        assert not s1.head.latent and s1.tail.latent
        assert (s2.head.text, s2.relation, s2.tail.text) == ("?Database", "developed_by", "?Company")
        assert dec.type_hints["?Database"] == "database product"

    def test_single_hop(self, toy_gateway):
        dec = decompose_query("Who developed the MySQL database?", toy_gateway)
        assert len(dec.sub_queries) == 1
        assert dec.sub_queries[0].tail.latent

    def test_consumer_before_producer_rejected(self):
        backend = scripted_mock(
            [
                (
                    "decompose",
                    "bad order",
                    {
                        "sub_queries": [
                            {"head": "?Database", "relation": "developed_by", "tail": "?Company"},
                            {"head": "Planner", "relation": "uses", "tail": "?Database"},
                        ],
                        "type_hints": {},
                    },
                )
            ]
        )
        with pytest.raises(InvalidDecomposition):
            decompose_query("bad order question", Gateway(backend=backend))

    def test_empty_decomposition_rejected(self):
        backend = scripted_mock([("decompose", "none", {"sub_queries": [], "type_hints": {}})])
        with pytest.raises(InvalidDecomposition):
            decompose_query("none at all", Gateway(backend=backend))

    def test_overlong_chain_rejected(self):
        subs = [{"head": f"e{i}", "relation": "r", "tail": f"?V{i}"} for i in range(9)]
        backend = scripted_mock([("decompose", "long", {"sub_queries": subs})])
        with pytest.raises(InvalidDecomposition):
            decompose_query("long question", Gateway(backend=backend))

    def test_missing_hints_are_filled(self):
        backend = scripted_mock(
            [
                (
                    "decompose",
                    "fill",
                    {"sub_queries": [{"head": "x", "relation": "r", "tail": "?BigThing"}]},
                )
            ]
        )
        dec = decompose_query("fill hints", Gateway(backend=backend))
        assert dec.type_hints["?BigThing"] == "big thing"

    def test_latent_names_normalized(self):
        backend = scripted_mock(
            [
                (
                    "decompose",
                    "normalize",
                    {
                        "sub_queries": [
                            {"head": "x", "relation": "r", "tail": "?database system"},
                            {"head": "?database_system", "relation": "r2", "tail": "y"},
                        ],
                        "type_hints": {"? database system": "storage software"},
                    },
                )
            ]
        )
        dec = decompose_query("normalize this", Gateway(backend=backend))
        assert dec.sub_queries[0].tail.text == "?DatabaseSystem"
        assert dec.sub_queries[1].head.text == "?DatabaseSystem"
        assert dec.type_hints["?DatabaseSystem"] == "storage software"


class TestValidateChain:
    def test_second_occurrence_is_consumption(self):
        chain = [
            SubQuery(1, Slot.bound("a"), "r", Slot.variable("?X")),
            SubQuery(2, Slot.variable("?X"), "r", Slot.variable("?Y")),
            SubQuery(3, Slot.variable("?Y"), "r", Slot.bound("b")),
        ]
        validate_chain(chain)  # no error

    def test_two_new_variables_rejected(self):
        chain = [SubQuery(1, Slot.variable("?A"), "r", Slot.variable("?B"))]
        with pytest.raises(InvalidDecomposition):
            validate_chain(chain)


class TestTypeSubqueries:
    def _typer(self, taxonomy, hash_encoder, backend):
        from tasr.config import PipelineConfig, validate_config

        return EntityTyper(
            taxonomy,
            TypeEmbeddingIndex(taxonomy, hash_encoder),
            Gateway(backend=backend),
            validate_config(PipelineConfig()),
        )

    def test_running_example_typed_from_taxonomy(
        self, toy_gateway, toy_backend, taxonomy, hash_encoder
    ):
        dec = decompose_query(RUNNING_QUESTION, toy_gateway)
        typer = EntityTyper(
            taxonomy, TypeEmbeddingIndex(taxonomy, hash_encoder), toy_gateway, toy_pipeline_cfg()
        )
        typed = type_subqueries(dec, typer)
        s1, s2 = typed.sub_queries
        assert s1.head_type == TaxonomyLabel("WORK", "SoftwareProject")
        assert s1.tail_type == TaxonomyLabel("PRODUCT", "Database")
        assert s2.head_type == TaxonomyLabel("PRODUCT", "Database")
        assert s2.tail_type == TaxonomyLabel("ORGANIZATION", "Company")

    def test_rule_typable_bound_slot_skips_llm(self, taxonomy, hash_encoder):
        backend = EchoSelectBackend()
        typer = self._typer(taxonomy, hash_encoder, backend)
        from tasr.structurer import Decomposition

        dec = Decomposition(
            sub_queries=[SubQuery(1, Slot.bound("1998"), "occurred_in", Slot.bound("somewhere"))]
        )
        typed = type_subqueries(dec, typer)
        assert typed.sub_queries[0].head_type == TaxonomyLabel("TIME", "Year")
        assert not any('"1998"' in c.user_prompt for c in backend.calls)

    def test_idempotent(self, taxonomy, hash_encoder):
        backend = EchoSelectBackend()
        typer = self._typer(taxonomy, hash_encoder, backend)
        from tasr.structurer import Decomposition

        dec = Decomposition(
            sub_queries=[SubQuery(1, Slot.bound("alpha"), "r", Slot.variable("?Thing"))],
            type_hints={"?Thing": "gadget"},
        )
        once = type_subqueries(dec, typer)
        twice = type_subqueries(once, typer)
        assert once.sub_queries == twice.sub_queries

    def test_latent_slot_typed_from_hint_description(self, taxonomy, hash_encoder):
        backend = EchoSelectBackend()
        typer = self._typer(taxonomy, hash_encoder, backend)
        from tasr.structurer import Decomposition

        dec = Decomposition(
            sub_queries=[SubQuery(1, Slot.bound("alpha"), "r", Slot.variable("?Thing"))],
            type_hints={"?Thing": "gadget"},
        )
        type_subqueries(dec, typer)
        assert any('entity "Thing (gadget)"' in c.user_prompt for c in backend.calls)


class TestVariableDescription:
    def test_name_plus_hint(self):
        assert variable_description("?Database", "database product") == "Database (database product)"

    def test_hint_equal_to_name_collapses(self):
        assert variable_description("?Database", "database") == "database"

    def test_missing_hint_humanizes_name(self):
        assert variable_description("?BigCompany", None) == "big company"


def toy_pipeline_cfg():
    from tasr.config import PipelineConfig, validate_config

    return validate_config(PipelineConfig())
