"""Exact dense retrieval over chunks and summary trees.

Ranking is a full scan by cosine similarity; ties go to the lexicographically
smaller node id so every ranking is total and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import SummaryNode, SummaryTree

METHODS = ("dpr", "collapsed", "traversal")


@dataclass(frozen=True)
class RetrievedItem:
    node_id: str
    score: float
    layer: int
    token_count: int
    text: str

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "score": self.score, "layer": self.layer, "token_count": self.token_count}


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    items: tuple[RetrievedItem, ...]
    total_tokens: int
    method: str

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown retrieval method {self.method!r}")

    @property
    def node_ids(self) -> list[str]:
        return [i.node_id for i in self.items]

    @property
    def texts(self) -> list[str]:
        return [i.text for i in self.items]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "method": self.method,
            "total_tokens": self.total_tokens,
            "items": [i.to_dict() for i in self.items],
        }


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"cosine needs two vectors of equal length, got {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine of a zero vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _scores(query, nodes: Sequence[SummaryNode]) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    qn = np.linalg.norm(q)
    if q.ndim != 1 or qn == 0:
        raise ValueError("query must be a non-zero vector")
    if not nodes:
        return np.zeros(0)
    E = np.stack([n.embedding for n in nodes])
    if E.shape[1] != q.shape[0]:
        raise ValueError(f"query dim {q.shape[0]} != node dim {E.shape[1]}")
    norms = np.linalg.norm(E, axis=1)
    if np.any(norms == 0):
        raise ValueError("node embeddings must be non-zero")
    return np.clip(E @ q / (norms * qn), -1.0, 1.0)


def rank(query, nodes: Sequence[SummaryNode]) -> list[tuple[SummaryNode, float]]:
    """All nodes by descending cosine, ties by ascending id."""
    scores = _scores(query, nodes)
    order = sorted(range(len(nodes)), key=lambda i: (-scores[i], nodes[i].id))
    return [(nodes[i], float(scores[i])) for i in order]


def _item(node: SummaryNode, score: float) -> RetrievedItem:
    return RetrievedItem(node.id, score, node.layer, node.token_count, node.text)


def _result(query_id: str, picked: Iterable[tuple[SummaryNode, float]], method: str) -> RetrievalResult:
    items = tuple(_item(n, s) for n, s in picked)
    return RetrievalResult(query_id, items, sum(i.token_count for i in items), method)


def dpr_topk(query, chunks: Sequence[SummaryNode], k: int = 5, query_id: str = "") -> RetrievalResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    return _result(query_id, rank(query, list(chunks))[:k], "dpr")


def collapsed_retrieve(query, tree: SummaryTree, budget_tokens: int = 3500, *, skip_overflow: bool = True,
                       query_id: str = "") -> RetrievalResult:
    """Every node in one pool, admitted in rank order while the budget allows.

    A node that would overflow the budget is skipped and the scan continues;
    with ``skip_overflow=False`` the scan stops at the first such node.
    """
    if budget_tokens < 0:
        raise ValueError("budget must be >= 0")
    picked, used = [], 0
    for node, score in rank(query, list(tree.nodes.values())):
        if used + node.token_count > budget_tokens:
            if skip_overflow:
                continue
            break
        picked.append((node, score))
        used += node.token_count
    return _result(query_id, picked, "collapsed")


def traverse_retrieve(query, tree: SummaryTree, k_per_layer: int = 5, query_id: str = "") -> RetrievalResult:
    """Top-k at the top layer, then top-k among the children of each selection, down to the leaves."""
    if k_per_layer < 1:
        raise ValueError("k must be >= 1")
    if not tree.nodes:
        return _result(query_id, [], "traversal")
    candidates = tree.layer_nodes(tree.top_layer)
    picked: list[tuple[SummaryNode, float]] = []
    seen: set[str] = set()
    while candidates:
        chosen = rank(query, candidates)[:k_per_layer]
        picked.extend((n, s) for n, s in chosen if n.id not in seen)
        seen.update(n.id for n, _ in chosen)
        child_ids = sorted({c for n, _ in chosen for c in n.children})
        candidates = [tree.nodes[c] for c in child_ids]
    return _result(query_id, picked, "traversal")
