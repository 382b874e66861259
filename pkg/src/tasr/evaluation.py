"""Dataset loading, batch execution, and EM/F1 report assembly."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from tasr.errors import DatasetParseError, QueryFailure
from tasr.metrics import exact_match, token_f1
from tasr.model import Document, ReasoningTrace
from tasr.reasoner import Pipeline


@dataclass(frozen=True)
class QaExample:
    id: str
    question: str
    answers: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.answers:
            raise DatasetParseError(f"example {self.id}: no gold answers")


@dataclass
class ExampleResult:
    id: str
    answer: str
    em: int
    f1: float
    error: Optional[str] = None


@dataclass
class EvalReport:
    per_example: list[ExampleResult]
    em_avg: float
    f1_avg: float
    fallback_count: int
    error_count: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "em_avg": self.em_avg,
            "f1_avg": self.f1_avg,
            "fallback_count": self.fallback_count,
            "error_count": self.error_count,
            "per_example": [
                {"id": r.id, "answer": r.answer, "em": r.em, "f1": r.f1, "error": r.error}
                for r in self.per_example
            ],
        }


def load_corpus(path: str | Path) -> list[Document]:
    """Corpus JSONL: one ``{"id", "title", "text"}`` object per line."""
    documents = []
    for record in _read_jsonl(path, "corpus"):
        try:
            documents.append(
                Document(id=str(record["id"]), title=str(record["title"]), text=str(record["text"]))
            )
        except KeyError as exc:
            raise DatasetParseError(f"corpus record missing field {exc}: {record!r}") from exc
    if not documents:
        raise DatasetParseError(f"corpus {path} is empty")
    return documents


def load_dataset(path: str | Path) -> list[QaExample]:
    """Dataset JSONL: one ``{"id", "question", "answers"}`` object per line."""
    examples = []
    for record in _read_jsonl(path, "dataset"):
        try:
            examples.append(
                QaExample(
                    id=str(record["id"]),
                    question=str(record["question"]),
                    answers=tuple(str(a) for a in record["answers"]),
                )
            )
        except KeyError as exc:
            raise DatasetParseError(f"dataset record missing field {exc}: {record!r}") from exc
    if not examples:
        raise DatasetParseError(f"dataset {path} is empty")
    return examples


def _read_jsonl(path: str | Path, what: str) -> list[dict]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetParseError(f"cannot read {what} {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetParseError(f"{what} {path} line {lineno}: {exc}") from exc
        if not isinstance(record, dict):
            raise DatasetParseError(f"{what} {path} line {lineno}: expected an object")
        records.append(record)
    return records


def write_trace(trace: ReasoningTrace, trace_dir: str | Path, question_id: str) -> Path:
    """Write one trace as ``<trace-dir>/<question-id>.json``."""
    directory = Path(trace_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{question_id}.json"
    path.write_text(json.dumps(trace.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


@dataclass
class BenchmarkRun:
    report: EvalReport
    predictions: list[dict[str, str]] = field(default_factory=list)  # {"id", "answer"}


def run_benchmark(
    dataset: Sequence[QaExample],
    pipeline: Pipeline,
    trace_dir: Optional[str | Path] = None,
    parallel: int = 1,
) -> BenchmarkRun:
    """Run every example through the pipeline and score the answers.

    Errored queries score 0/0 and are counted, never dropped: denominators
    stay fixed. Results are assembled in dataset order regardless of the
    worker schedule, so reports are reproducible under any ``parallel``.
    """
    if not dataset:
        raise DatasetParseError("dataset has no examples")

    def run_one(example: QaExample) -> tuple[ExampleResult, int]:
        fallbacks = 0
        try:
            answer, trace = pipeline.run_query(example.question)
        except QueryFailure as exc:
            if trace_dir is not None and exc.trace is not None:
                write_trace(exc.trace, trace_dir, example.id)
            return ExampleResult(example.id, "", em=0, f1=0.0, error=str(exc)), fallbacks
        if trace_dir is not None:
            write_trace(trace, trace_dir, example.id)
        fallbacks = sum(1 for hop in trace.hops if hop.fallback)
        return (
            ExampleResult(
                example.id,
                answer,
                em=exact_match(answer, example.answers),
                f1=token_f1(answer, example.answers),
            ),
            fallbacks,
        )

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(run_one, dataset))
    else:
        outcomes = [run_one(example) for example in dataset]

    results = [result for result, _ in outcomes]
    fallback_count = sum(count for _, count in outcomes)
    error_count = sum(1 for r in results if r.error is not None)
    report = EvalReport(
        per_example=results,
        em_avg=sum(r.em for r in results) / len(results),
        f1_avg=sum(r.f1 for r in results) / len(results),
        fallback_count=fallback_count,
        error_count=error_count,
    )
    predictions = [{"id": r.id, "answer": r.answer} for r in results]
    return BenchmarkRun(report=report, predictions=predictions)


def score_predictions(
    predictions: Sequence[dict[str, str]], dataset: Sequence[QaExample]
) -> EvalReport:
    """Score an existing predictions list against the dataset golds."""
    by_id = {p["id"]: p.get("answer", "") for p in predictions}
    results = []
    for example in dataset:
        answer = by_id.get(example.id)
        if answer is None:
            results.append(ExampleResult(example.id, "", em=0, f1=0.0, error="missing prediction"))
        else:
            results.append(
                ExampleResult(
                    example.id,
                    answer,
                    em=exact_match(answer, example.answers),
                    f1=token_f1(answer, example.answers),
                )
            )
    return EvalReport(
        per_example=results,
        em_avg=sum(r.em for r in results) / len(results),
        f1_avg=sum(r.f1 for r in results) / len(results),
        fallback_count=0,
        error_count=sum(1 for r in results if r.error is not None),
    )
