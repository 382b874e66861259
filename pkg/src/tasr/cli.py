"""Command-line surface: batch runs, scoring, entity typing, match debugging.

Subcommands:

* ``tasr run``         run a QA dataset against a corpus; writes predictions.jsonl + report.json
* ``tasr eval``        score an existing predictions file against gold answers
* ``tasr type-entity`` type one entity string
* ``tasr match``       print the full score decomposition for one sub-query vs document triples

Endpoints come from flags or the ``TASR_LLM_URL`` / ``TASR_LLM_MODEL`` /
``TASR_LLM_API_KEY`` / ``TASR_EMBED_URL`` environment variables; the mock
backends are selected with ``mock:<script-file>`` (LLM) and ``mock:`` (encoder).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from tasr.config import PipelineConfig, load_config, validate_config
from tasr.embedding import CachingEncoder, encoder_from_url
from tasr.errors import TasrError
from tasr.evaluation import load_corpus, load_dataset, run_benchmark, score_predictions
from tasr.llm import Gateway, backend_from_spec
from tasr.matching import aggregate_document_score, explain_triple
from tasr.model import Entity, Slot, SubQuery, TaxonomyLabel, Triple, TypedTriple
from tasr.reasoner import Pipeline
from tasr.taxonomy import (
    EntityTyper,
    TypeEmbeddingIndex,
    load_default_taxonomy,
    load_taxonomy,
    rule_type_entity,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tasr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a QA dataset against a corpus")
    run.add_argument("--corpus", required=True, help="corpus JSONL ({id,title,text} per line)")
    run.add_argument("--dataset", required=True, help="QA JSONL ({id,question,answers} per line)")
    run.add_argument("--taxonomy", default=None, help="taxonomy JSON (default: bundled table)")
    run.add_argument("--config", default=None, help="config file (JSON or key=value)")
    run.add_argument("--k0", type=int, default=None)
    run.add_argument("--theta", type=float, default=None)
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--gamma", type=float, default=None)
    run.add_argument("--top-t", type=int, default=None, dest="top_t")
    run.add_argument("--hop-scope", choices=("current", "chain"), default=None, dest="hop_scope")
    run.add_argument("--llm", default=None, help="chat endpoint URL or mock:<script-file>")
    run.add_argument("--embed", default=None, help="encoder endpoint URL or mock:")
    run.add_argument("--trace-dir", default=None, help="write one trace JSON per question")
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--out-dir", default=".", help="where predictions.jsonl and report.json go")
    run.add_argument("--pre-extract", action="store_true",
                     help="extract corpus triples once up front, without query context")

    ev = sub.add_parser("eval", help="score a predictions file against gold answers")
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--out", default="report.json")

    te = sub.add_parser("type-entity", help="type one entity string")
    te.add_argument("--text", required=True)
    te.add_argument("--taxonomy", default=None)
    te.add_argument("--llm", default=None)
    te.add_argument("--embed", default=None)

    mt = sub.add_parser("match", help="score decomposition for a sub-query vs document triples")
    mt.add_argument("--subquery", required=True, help="sub-query JSON file")
    mt.add_argument("--doc-triples", required=True, dest="doc_triples",
                    help="document triples JSON file")
    mt.add_argument("--config", default=None)
    mt.add_argument("--embed", default=None)
    return parser


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else validate_config(PipelineConfig())
    return cfg.with_overrides(
        k0=args.k0,
        theta=args.theta,
        alpha=args.alpha,
        gamma=args.gamma,
        top_t=args.top_t,
        hop_scope=args.hop_scope,
    )


def _llm_spec(flag: str | None) -> str:
    spec = flag or os.environ.get("TASR_LLM_URL", "")
    if not spec:
        raise TasrError("no LLM endpoint: pass --llm or set TASR_LLM_URL")
    return spec


def _gateway(flag: str | None) -> Gateway:
    backend = backend_from_spec(
        _llm_spec(flag),
        model=os.environ.get("TASR_LLM_MODEL", "default"),
        api_key=os.environ.get("TASR_LLM_API_KEY", ""),
    )
    return Gateway(backend=backend)


def _encoder(flag: str | None) -> CachingEncoder:
    spec = flag or os.environ.get("TASR_EMBED_URL", "mock:")
    return CachingEncoder(encoder_from_url(spec))


def _taxonomy(flag: str | None):
    return load_taxonomy(flag) if flag else load_default_taxonomy()


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    pipeline = Pipeline(
        documents=load_corpus(args.corpus),
        taxonomy=_taxonomy(args.taxonomy),
        encoder=_encoder(args.embed),
        gateway=_gateway(args.llm),
        cfg=cfg,
        pre_extract=args.pre_extract,
    )
    dataset = load_dataset(args.dataset)
    run = run_benchmark(dataset, pipeline, trace_dir=args.trace_dir, parallel=args.parallel)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictions_path = out_dir / "predictions.jsonl"
    with predictions_path.open("w", encoding="utf-8") as fh:
        for record in run.predictions:
            fh.write(json.dumps(record) + "\n")
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(run.report.to_dict(), indent=2) + "\n", encoding="utf-8")

    print(f"wrote {predictions_path} and {report_path}")
    print(f"em_avg={run.report.em_avg:.4f} f1_avg={run.report.f1_avg:.4f} "
          f"fallbacks={run.report.fallback_count} errors={run.report.error_count}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    predictions = []
    for line in Path(args.predictions).read_text(encoding="utf-8").splitlines():
        if line.strip():
            predictions.append(json.loads(line))
    report = score_predictions(predictions, load_dataset(args.dataset))
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_type_entity(args: argparse.Namespace) -> int:
    taxonomy = _taxonomy(args.taxonomy)
    entity = Entity(args.text)
    label = rule_type_entity(entity)
    if label is None:
        encoder = _encoder(args.embed)
        typer = EntityTyper(
            taxonomy, TypeEmbeddingIndex(taxonomy, encoder), _gateway(args.llm),
            validate_config(PipelineConfig()),
        )
        label = typer.type_entity(entity)
    print(json.dumps({"entity": entity.surface, "l1": label.l1, "l2": label.l2}))
    return 0


def _parse_label(raw) -> TaxonomyLabel:
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return TaxonomyLabel(str(raw[0]), str(raw[1]))
    if isinstance(raw, dict):
        return TaxonomyLabel(str(raw["l1"]), str(raw["l2"]))
    raise TasrError(f"expected [l1, l2] or {{'l1','l2'}}, got {raw!r}")


def cmd_match(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else validate_config(PipelineConfig())
    encoder = _encoder(args.embed)

    sq_data = json.loads(Path(args.subquery).read_text(encoding="utf-8"))
    sub_query = SubQuery(
        index=int(sq_data.get("index", 1)),
        head=Slot.parse(str(sq_data["head"])),
        relation=str(sq_data["relation"]),
        tail=Slot.parse(str(sq_data["tail"])),
        head_type=_parse_label(sq_data["head_type"]),
        tail_type=_parse_label(sq_data["tail_type"]),
    )

    dt_data = json.loads(Path(args.doc_triples).read_text(encoding="utf-8"))
    doc_id = str(dt_data.get("doc_id", "doc"))
    rows = []
    for item in dt_data["triples"]:
        raw = Triple(
            head=Entity(str(item["head"])),
            relation=str(item["relation"]),
            tail=Entity(str(item["tail"])),
            source_doc=doc_id,
        )
        typed = TypedTriple(
            head_type=_parse_label(item["head_type"]),
            relation=raw.relation,
            tail_type=_parse_label(item["tail_type"]),
            base=raw,
        )
        rows.append(explain_triple(sub_query, raw, typed, cfg, encoder))

    print(f"sub-query: {sub_query.render()}   "
          f"types: {sub_query.head_type}, {sub_query.tail_type}")
    header = (f"{'doc triple':<60} {'cos_h':>8} {'cos_r':>8} {'cos_t':>8} "
              f"{'St(h)':>6} {'St(t)':>6} {'S_str':>6} {'S_sem':>8} {'S_tri':>8}")
    print(header)
    print("-" * len(header))
    for row in rows:
        print(f"{row['doc_triple']:<60} {row['cos_head']:>8.4f} {row['cos_relation']:>8.4f} "
              f"{row['cos_tail']:>8.4f} {row['s_type_head']:>6.2f} {row['s_type_tail']:>6.2f} "
              f"{row['s_struct']:>6.2f} {row['s_sem']:>8.4f} {row['s_triple']:>8.4f}")
    if rows:
        best = max(r["s_triple"] for r in rows)
        doc_score = aggregate_document_score([best], cfg)
        print(f"\nbest triple score: {best:.6f}   document score: {doc_score:.6f} "
              f"(threshold {cfg.theta})")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "eval": cmd_eval,
        "type-entity": cmd_type_entity,
        "match": cmd_match,
    }
    try:
        return handlers[args.command](args)
    except TasrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
