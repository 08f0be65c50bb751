"""Recursive reduce, cluster and summarize: dynamic (question-seeded) and static summary trees."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import clustering
from .config import PipelineConfig
from .embedding import Embedder
from .llm.gateway import LlmGateway
from .llm.providers import TransportError
from .model import BuildStats, Chunk, LayerBuildRecord, SubQuestionSet, SummaryNode, SummaryTree, make_tree
from .reduction import ReductionParams, reduce, reduce_joint
from .tokenize import DEFAULT_TOKENIZER, Tokenizer, truncate

log = logging.getLogger(__name__)


class TreeBuildError(RuntimeError):
    """A provider failed mid-build; ``partial`` holds the layers completed so far."""

    def __init__(self, message: str, partial: SummaryTree | None, phase: str = "summarize"):
        super().__init__(message)
        self.partial = partial
        self.phase = phase


def workload_static(n_docs):
    """Closed form of N + N/2 + N/4 + ... for a halving tree.

    Accepts an int or an integer array.
    """
    if np.min(n_docs) < 1:
        raise ValueError("N_d must be >= 1")
    return 2 * n_docs


def workload_dynamic(n_docs, n_subq):
    """N leaves plus a halving series that starts from the sub-question count."""
    if np.min(n_docs) < 1 or np.min(n_subq) < 1:
        raise ValueError("N_d and N_Q' must be >= 1")
    return n_docs + 2 * n_subq


def summary_node_id(doc_id: str, layer: int, index: int) -> str:
    return f"{doc_id}:L{layer}:{index:04d}"


@dataclass
class _BuildState:
    doc_id: str
    question_id: str | None
    nodes: list[SummaryNode] = field(default_factory=list)
    counts: dict[int, int] = field(default_factory=dict)
    records: list[LayerBuildRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    summary_calls: int = 0
    clustering_seconds: float = 0.0
    summarization_seconds: float = 0.0
    started: float = field(default_factory=time.perf_counter)

    def add_layer(self, layer: int, nodes: Sequence[SummaryNode]) -> None:
        self.nodes.extend(nodes)
        self.counts[layer] = len(nodes)

    def tree(self) -> SummaryTree:
        stats = BuildStats(
            nodes_per_layer=dict(self.counts),
            llm_summary_calls=self.summary_calls,
            clustering_seconds=self.clustering_seconds,
            summarization_seconds=self.summarization_seconds,
            total_seconds=time.perf_counter() - self.started,
            layer_records=tuple(self.records),
            warnings=tuple(self.warnings),
        )
        return make_tree(self.doc_id, self.question_id, self.nodes, stats)


class TreeBuilder:
    """Single-use builder shared by the dynamic and static entry points."""

    def __init__(self, embedder: Embedder, gateway: LlmGateway, config: PipelineConfig,
                 tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        self.embedder = embedder
        self.gateway = gateway
        self.config = config
        self.tokenizer = tokenizer
        self.reduction = ReductionParams(n_neighbors=config.umap_n_neighbors, target_dim_cap=config.umap_dim,
                                         metric=config.umap_metric, backend=config.reduction_backend)
        self._em = dict(reg_floor=config.reg_floor, tol=config.em_tol, max_iter=config.em_max_iter)

    # -- clustering -------------------------------------------------------------

    def _cluster(self, X: np.ndarray, seeds: np.ndarray | None, seq: np.random.SeedSequence,
                 leaf_layer: bool) -> tuple[list[list[int]], str]:
        """Member lists (ascending indices) for one layer.

        Leaves are always summarized at least once, so their sweep stops at
        ``n - 1``; above that ``M = n`` is a candidate and winning with it
        ends the recursion.
        """
        cfg = self.config
        n = len(X)
        top = max(1, min(cfg.max_clusters, n - 1 if leaf_layer else n))
        if cfg.hierarchical_clustering:
            memberships = clustering.hierarchical_cluster(
                X, seq, cap=cfg.hierarchical_cap, max_clusters=top, threshold=cfg.gmm_threshold,
                seeds=seeds, **self._em)
            return clustering.clusters_from_memberships(memberships), "hierarchical"
        if seeds is not None:
            model = clustering.em_fit(X, len(seeds), init=seeds, **self._em)
            method = "seeded-gmm"
        else:
            _, model = clustering.select_clusters_bic(X, range(1, top + 1), seq, **self._em)
            method = "gmm"
        assignment = clustering.responsibilities(model, X)
        groups = clustering.clusters_from_memberships(clustering.soft_assign(assignment, cfg.gmm_threshold))
        return groups, method

    # -- summarization ----------------------------------------------------------

    def _summarize(self, groups: list[list[int]], layer_nodes: Sequence[SummaryNode]) -> list[str]:
        limit = self.config.summary_max_tokens

        def one(group: list[int]) -> str:
            texts = [layer_nodes[i].text for i in group]
            text = self.gateway.summarize_cluster(texts, limit).text.strip()
            if not text:
                text = truncate(texts[0], limit, self.tokenizer)[0].strip() or "(empty)"
            return text

        workers = min(self.config.max_concurrency, len(groups))
        if workers <= 1:
            return [one(g) for g in groups]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, groups))

    # -- main loop --------------------------------------------------------------

    def build(self, chunks: Sequence[Chunk], subqs: SubQuestionSet | None, *, doc_id: str | None = None,
              question_id: str | None = None, seed=None, chunk_vectors: np.ndarray | None = None) -> SummaryTree:
        if not chunks:
            raise ValueError("need at least one chunk")
        cfg = self.config
        chunks = sorted(chunks, key=lambda c: c.index)
        doc_id = doc_id or chunks[0].doc_id
        state = _BuildState(doc_id, question_id)

        if chunk_vectors is None:
            chunk_vectors = self.embedder.embed([c.text for c in chunks]).vectors
        chunk_vectors = np.asarray(chunk_vectors, dtype=np.float64)
        if len(chunk_vectors) != len(chunks):
            raise ValueError("one embedding per chunk required")
        current = [SummaryNode(c.id, 0, c.text, c.token_count, v) for c, v in zip(chunks, chunk_vectors)]
        state.add_layer(0, current)

        seed_vectors = None
        if subqs is not None:
            if subqs.embeddings is None:
                subqs = subqs.with_embeddings(self.embedder.embed(list(subqs.sub_questions)).vectors)
            seed_vectors = np.asarray(subqs.embeddings, dtype=np.float64)

        layer_seeds = clustering.seed_sequence(cfg.rng_seed if seed is None else seed).spawn(cfg.max_layers)
        for layer in range(1, cfg.max_layers + 1):
            n = len(current)
            if n < 2 or (layer > 1 and n <= 2):
                break
            t0 = time.perf_counter()
            X = np.stack([node.embedding for node in current])
            seeded = layer == 1 and seed_vectors is not None and len(seed_vectors) < n
            if seeded:
                batch = reduce_joint(X, seed_vectors, self.reduction)
                groups, method = self._cluster(batch.head, batch.tail, layer_seeds[layer - 1], True)
            else:
                if layer == 1 and seed_vectors is not None:
                    state.warnings.append(f"layer 1: {len(seed_vectors)} sub-questions >= {n} nodes; using BIC")
                batch = reduce(X, self.reduction)
                groups, method = self._cluster(batch.vectors, None, layer_seeds[layer - 1], layer == 1)
            state.clustering_seconds += time.perf_counter() - t0
            if len(groups) >= n:
                state.warnings.append(f"layer {layer}: no compression ({len(groups)} clusters for {n} nodes)")
                break
            if seeded and len(groups) < len(seed_vectors):
                state.warnings.append(
                    f"layer 1: {len(seed_vectors) - len(groups)} empty seeded cluster(s) dropped")

            t0 = time.perf_counter()
            try:
                texts = self._summarize(groups, current)
            except TransportError as exc:
                raise TreeBuildError(f"layer {layer}: {exc}", state.tree()) from exc
            state.summary_calls += len(groups)
            vectors = self.embedder.embed(texts).vectors
            state.summarization_seconds += time.perf_counter() - t0

            nxt = [
                SummaryNode(summary_node_id(doc_id, layer, i), layer, text, self.tokenizer.count(text), vec,
                            tuple(current[j].id for j in group))
                for i, (group, text, vec) in enumerate(zip(groups, texts, vectors))
            ]
            state.records.append(LayerBuildRecord(layer, n, len(groups), seeded, batch.skipped, method))
            state.add_layer(layer, nxt)
            current = nxt

        for w in state.warnings:
            log.info("%s: %s", doc_id, w)
        return state.tree()


def build_dynamic_tree(chunks: Sequence[Chunk], subqs: SubQuestionSet, embedder: Embedder, gateway: LlmGateway,
                       config: PipelineConfig = PipelineConfig(), *, seed=None,
                       chunk_vectors: np.ndarray | None = None) -> SummaryTree:
    """Question-conditioned tree: layer 1 is seeded with the sub-question embeddings."""
    if subqs.count < 1:
        raise ValueError("need at least one sub-question")
    return TreeBuilder(embedder, gateway, config).build(
        chunks, subqs, question_id=subqs.question_id, seed=seed, chunk_vectors=chunk_vectors)


def build_static_tree(chunks: Sequence[Chunk], embedder: Embedder, gateway: LlmGateway,
                      config: PipelineConfig = PipelineConfig(), *, seed=None,
                      chunk_vectors: np.ndarray | None = None) -> SummaryTree:
    """Question-independent tree with unseeded clustering on every layer."""
    return TreeBuilder(embedder, gateway, config).build(chunks, None, seed=seed, chunk_vectors=chunk_vectors)
