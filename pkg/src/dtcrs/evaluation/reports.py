"""Metric and tree-statistics reports with JSON and CSV writers."""

from __future__ import annotations

import csv
import json
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..model import SummaryTree
from ..retrieval import RetrievalResult

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _aggregate(rows: Sequence[Mapping[str, float]]) -> dict[str, float]:
    keys = sorted({k for r in rows for k in r})
    return {k: _mean([r[k] for r in rows if k in r]) for k in keys}


@dataclass
class MetricReport:
    per_question: dict[str, dict[str, float]]
    aggregates: dict[str, float]
    per_type: dict[str, dict[str, float]]
    counts_per_type: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "aggregates": self.aggregates,
            "per_type": self.per_type,
            "counts_per_type": self.counts_per_type,
            "per_question": self.per_question,
        }


def build_metric_report(per_question: Mapping[str, Mapping[str, float]],
                        qtypes: Mapping[str, str | None] | None = None) -> MetricReport:
    """Aggregate per-question scores into overall and per-type means (rows sorted by id)."""
    ids = sorted(per_question)
    rows = {qid: dict(per_question[qid]) for qid in ids}
    aggregates = _aggregate(list(rows.values())) if rows else {}
    groups: dict[str, list[dict[str, float]]] = {}
    for qid in ids:
        qtype = (qtypes or {}).get(qid) or "untyped"
        groups.setdefault(qtype, []).append(rows[qid])
    per_type = {t: _aggregate(g) for t, g in sorted(groups.items())}
    return MetricReport(rows, aggregates, per_type, {t: len(g) for t, g in sorted(groups.items())})


@dataclass
class TreeStatsReport:
    avg_nodes_per_layer: dict[int, float]
    evidence_coverage_per_layer: dict[int, float] | None
    build_seconds: float
    tree_count: int = 0

    def to_dict(self) -> dict:
        cov = self.evidence_coverage_per_layer
        return {
            "tree_count": self.tree_count,
            "avg_nodes_per_layer": {str(k): v for k, v in sorted(self.avg_nodes_per_layer.items())},
            "evidence_coverage_per_layer": None if cov is None else {str(k): v for k, v in sorted(cov.items())},
            "build_seconds": self.build_seconds,
        }


def normalize_evidence(text: str) -> str:
    return re.sub(r"\s+", " ", text.lower().translate(_PUNCT_TABLE)).strip()


def tree_stats(trees: Sequence[SummaryTree], retrievals: Sequence[RetrievalResult] | None = None,
               gold_evidence: Sequence[Sequence[str]] | None = None) -> TreeStatsReport:
    """Average layer sizes over ``trees`` and per-layer share of retrieved evidence nodes.

    Layers absent from a tree count as zero nodes. A retrieved node is an
    evidence node when its normalized text contains any normalized gold
    evidence string for that tree's question.
    """
    if not trees:
        return TreeStatsReport({}, None, 0.0, 0)
    top = max(t.top_layer for t in trees)
    avg = {layer: _mean([len(t.layers.get(layer, ())) for t in trees]) for layer in range(top + 1)}
    seconds = _mean([t.stats.total_seconds for t in trees])

    coverage = None
    if retrievals is not None and gold_evidence is not None:
        if not len(trees) == len(retrievals) == len(gold_evidence):
            raise ValueError("trees, retrievals and gold_evidence must be aligned")
        hits: dict[int, int] = {}
        for tree, result, evidence in zip(trees, retrievals, gold_evidence):
            needles = [normalize_evidence(e) for e in evidence if normalize_evidence(e)]
            if not needles:
                continue
            for item in result.items:
                if item.node_id not in tree.nodes:
                    raise ValueError(f"retrieved node {item.node_id!r} is not in tree {tree.doc_id}")
                hay = normalize_evidence(tree.nodes[item.node_id].text)
                if any(n in hay for n in needles):
                    hits[item.layer] = hits.get(item.layer, 0) + 1
        total = sum(hits.values())
        if total:
            coverage = {layer: hits.get(layer, 0) / total for layer in range(top + 1)}
    return TreeStatsReport(avg, coverage, seconds, len(trees))


def write_json(report, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(report: MetricReport, path: str | Path) -> None:
    """One row per question, columns sorted, aligned to the union of metric names."""
    columns = sorted({k for row in report.per_question.values() for k in row})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["question_id", *columns])
        for qid in sorted(report.per_question):
            row = report.per_question[qid]
            writer.writerow([qid, *("" if c not in row else f"{row[c]:.6f}" for c in columns)])
