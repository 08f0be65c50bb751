"""Dataset loading, answer metrics and reports."""

from .datasets import KINDS, Dataset, DatasetError, load_dataset
from .metrics import (
    MeteorParams,
    RougeParams,
    bleu,
    choice_scores,
    freeform_scores,
    meteor,
    normalize_answer,
    rouge_l,
    token_f1,
)
from .reports import (MetricReport, TreeStatsReport, build_metric_report, normalize_evidence,
                      tree_stats, write_csv, write_json)

__all__ = [
    "KINDS",
    "Dataset",
    "DatasetError",
    "MeteorParams",
    "MetricReport",
    "RougeParams",
    "TreeStatsReport",
    "bleu",
    "build_metric_report",
    "choice_scores",
    "freeform_scores",
    "load_dataset",
    "meteor",
    "normalize_answer",
    "normalize_evidence",
    "rouge_l",
    "token_f1",
    "tree_stats",
    "write_csv",
    "write_json",
]
