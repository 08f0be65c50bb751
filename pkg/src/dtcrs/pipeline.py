"""Question answering end to end: classify, then either build a dynamic tree or fall back to dense top-k."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .chunker import chunk
from .config import PipelineConfig
from .embedding import Embedder, EmbeddingError
from .evaluation.metrics import choice_scores, freeform_scores
from .evaluation.reports import MetricReport, build_metric_report
from .llm.gateway import LlmGateway
from .llm.providers import TransportError
from .model import Chunk, Document, QuestionRecord, SummaryNode, SummaryTree, TableOfContents
from .retrieval import RetrievalResult, collapsed_retrieve, dpr_topk
from .tree import TreeBuildError, build_dynamic_tree

log = logging.getLogger(__name__)

VARIANTS = ("full", "no_global", "no_classify", "no_toc")
ROUTES = ("tree", "dpr")


def question_seed(base_seed: int, question_id: str) -> np.random.SeedSequence:
    """Seed that depends only on the run seed and the question id, never on scheduling."""
    key = int.from_bytes(hashlib.blake2b(question_id.encode("utf-8"), digest_size=8).digest(), "little")
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(key,))


def variant_config(variant: str, config: PipelineConfig) -> PipelineConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "no_global":
        return config.with_overrides(hierarchical_clustering=True)
    if variant == "no_classify":
        return config.with_overrides(no_classify=True)
    if variant == "no_toc":
        return config.with_overrides(no_toc=True)
    return config


@dataclass
class AnswerRecord:
    question_id: str
    route: str | None
    retrieval: RetrievalResult | None
    answer: str | int | None
    timings: dict[str, float] = field(default_factory=dict)
    tree_ref: str | None = None
    label: int | None = None
    sub_questions: tuple[str, ...] = ()
    tree: SummaryTree | None = field(default=None, repr=False)
    error: str | None = None
    phase: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self, include_timings: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {
            "question_id": self.question_id,
            "route": self.route,
            "label": self.label,
            "answer": self.answer,
            "tree_ref": self.tree_ref,
            "sub_questions": list(self.sub_questions),
            "retrieval": None if self.retrieval is None else self.retrieval.to_dict(),
        }
        if self.tree is not None:
            d["tree_nodes_per_layer"] = {str(k): v for k, v in sorted(self.tree.stats.nodes_per_layer.items())}
            d["tree_layers"] = [r.to_dict() for r in self.tree.stats.layer_records]
        if self.error is not None:
            d["error"] = self.error
            d["phase"] = self.phase
        if include_timings:
            d["timings"] = dict(self.timings)
        return d


@dataclass
class PreparedDocument:
    """Chunks and leaf embeddings; shared by every question on the document."""

    document: Document
    chunks: tuple[Chunk, ...]
    vectors: np.ndarray
    seconds: float = 0.0

    @property
    def leaves(self) -> list[SummaryNode]:
        return [SummaryNode(c.id, 0, c.text, c.token_count, v) for c, v in zip(self.chunks, self.vectors)]


class Pipeline:
    def __init__(self, embedder: Embedder, gateway: LlmGateway, config: PipelineConfig = PipelineConfig()):
        self.embedder = embedder
        self.gateway = gateway
        self.config = config

    def prepare(self, document: Document) -> PreparedDocument:
        t0 = time.perf_counter()
        chunks = tuple(chunk(document, self.config.chunk_size_limit))
        if not chunks:
            raise ValueError(f"document {document.id} has no text to chunk")
        vectors = self.embedder.embed([c.text for c in chunks]).vectors
        return PreparedDocument(document, chunks, vectors, time.perf_counter() - t0)

    def answer_question(self, question: QuestionRecord, document: Document | PreparedDocument) -> AnswerRecord:
        cfg = self.config
        prepared = document if isinstance(document, PreparedDocument) else self.prepare(document)
        doc = prepared.document
        rec = AnswerRecord(question.id, None, None, None, timings={"preprocess": prepared.seconds})
        phase = "embed"

        def timed(name: str, t0: float) -> None:
            rec.timings[name] = rec.timings.get(name, 0.0) + time.perf_counter() - t0

        try:
            t0 = time.perf_counter()
            query = self.embedder.embed([question.text]).vectors[0]
            timed("embed_query", t0)

            toc = TableOfContents.empty()
            if not (cfg.no_classify and cfg.no_toc):
                phase = "toc"
                t0 = time.perf_counter()
                toc = self.gateway.generate_toc(doc)
                timed("toc", t0)

            if cfg.no_classify:
                rec.label = 1
            else:
                phase = "classify"
                t0 = time.perf_counter()
                rec.label = self.gateway.classify_question(question.text, toc)
                timed("classify", t0)
            rec.route = "tree" if rec.label == 1 else "dpr"

            if rec.route == "tree":
                phase = "decompose"
                t0 = time.perf_counter()
                subqs = self.gateway.decompose_question(question.text, toc, question.id, include_toc=not cfg.no_toc)
                rec.sub_questions = subqs.sub_questions
                timed("decompose", t0)
                phase = "build"
                t0 = time.perf_counter()
                tree = build_dynamic_tree(prepared.chunks, subqs, self.embedder, self.gateway, cfg,
                                          seed=question_seed(cfg.rng_seed, question.id),
                                          chunk_vectors=prepared.vectors)
                timed("build", t0)
                rec.tree = tree
                rec.tree_ref = f"{doc.id}/{question.id}"
                phase = "retrieve"
                t0 = time.perf_counter()
                rec.retrieval = collapsed_retrieve(query, tree, cfg.collapsed_budget_tokens,
                                                   skip_overflow=cfg.collapsed_skip_overflow, query_id=question.id)
                timed("retrieve", t0)
            else:
                phase = "retrieve"
                t0 = time.perf_counter()
                rec.retrieval = dpr_topk(query, prepared.leaves, cfg.dpr_top_k, query_id=question.id)
                timed("retrieve", t0)

            phase = "answer"
            t0 = time.perf_counter()
            rec.answer = self.gateway.answer(question.text, rec.retrieval.texts, question.options)
            timed("answer", t0)
        except TreeBuildError as exc:
            rec.error, rec.phase, rec.tree = str(exc), phase, exc.partial
        except (TransportError, EmbeddingError) as exc:
            rec.error, rec.phase = str(exc), phase
        if rec.error:
            log.error("question %s failed during %s: %s", question.id, rec.phase, rec.error)
        return rec

    def answer_all(self, questions: Sequence[QuestionRecord], documents: Mapping[str, Document],
                   jobs: int = 1) -> list[AnswerRecord]:
        """Answer every question; output is sorted by question id whatever ``jobs`` is."""
        needed = sorted({q.doc_id for q in questions})
        missing = [d for d in needed if d not in documents]
        if missing:
            raise KeyError(f"questions refer to unknown documents: {missing}")
        prepared = {d: self.prepare(documents[d]) for d in needed}

        def run(q: QuestionRecord) -> AnswerRecord:
            return self.answer_question(q, prepared[q.doc_id])

        ordered = sorted(questions, key=lambda q: q.id)
        if jobs <= 1:
            records = [run(q) for q in ordered]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                records = list(pool.map(run, ordered))
        return records


def score_record(question: QuestionRecord, record: AnswerRecord) -> dict[str, float]:
    if question.options is not None:
        pred = record.answer if isinstance(record.answer, int) else -1
        acc, sat = choice_scores([pred], [question.gold_option], len(question.options))
        return {"accuracy": acc, "sat_style": sat}
    if not question.gold_answers:
        return {}
    answer = record.answer if isinstance(record.answer, str) else ""
    return freeform_scores(answer, list(question.gold_answers))


@dataclass
class AblationRun:
    variant: str
    records: list[AnswerRecord]
    report: MetricReport

    def to_dict(self, include_timings: bool = True) -> dict[str, Any]:
        routes = {r: sum(1 for x in self.records if x.route == r) for r in ROUTES}
        return {
            "variant": self.variant,
            "routes": routes,
            "errors": sum(1 for x in self.records if not x.ok),
            "report": self.report.to_dict(),
            "records": [r.to_dict(include_timings) for r in self.records],
        }


def run_ablation(variant: str, questions: Sequence[QuestionRecord], documents: Mapping[str, Document],
                 embedder: Embedder, gateway: LlmGateway, config: PipelineConfig = PipelineConfig(),
                 jobs: int = 1) -> AblationRun:
    cfg = variant_config(variant, config)
    records = Pipeline(embedder, gateway, cfg).answer_all(questions, documents, jobs)
    by_id = {q.id: q for q in questions}
    scores = {r.question_id: score_record(by_id[r.question_id], r) for r in records}
    report = build_metric_report(scores, {q.id: q.qtype for q in questions})
    return AblationRun(variant, records, report)
