"""Question-conditioned recursive summary trees for long-document question answering."""

from .config import ConfigError, PipelineConfig
from .model import (
    BuildStats,
    Chunk,
    Document,
    QuestionRecord,
    SubQuestionSet,
    SummaryNode,
    SummaryTree,
    TableOfContents,
    deserialize_tree,
    serialize_tree,
)
from .pipeline import AnswerRecord, Pipeline, run_ablation
from .retrieval import RetrievalResult, collapsed_retrieve, cosine, dpr_topk, traverse_retrieve
from .tree import TreeBuildError, build_dynamic_tree, build_static_tree, workload_dynamic, workload_static

__version__ = "0.1.0"

__all__ = [
    "AnswerRecord",
    "BuildStats",
    "Chunk",
    "ConfigError",
    "Document",
    "Pipeline",
    "PipelineConfig",
    "QuestionRecord",
    "RetrievalResult",
    "SubQuestionSet",
    "SummaryNode",
    "SummaryTree",
    "TableOfContents",
    "TreeBuildError",
    "build_dynamic_tree",
    "build_static_tree",
    "collapsed_retrieve",
    "cosine",
    "deserialize_tree",
    "dpr_topk",
    "run_ablation",
    "serialize_tree",
    "traverse_retrieve",
    "workload_dynamic",
    "workload_static",
]
