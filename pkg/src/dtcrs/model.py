"""Domain types shared across the package, plus summary-tree JSON persistence."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

TIMING_FIELDS = ("clustering_seconds", "summarization_seconds", "total_seconds")


class TreeSchemaError(ValueError):
    """A tree violates the schema or one of its structural invariants."""


class TreeParseError(ValueError):
    """Serialized tree bytes are not well-formed JSON."""


def as_embedding(values: Iterable[float] | np.ndarray) -> np.ndarray:
    """Return a read-only float64 vector, rejecting non-finite components."""
    vec = np.array(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"embedding must be one-dimensional, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding has non-finite components")
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    text: str

    @property
    def char_count(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    index: int
    text: str
    token_count: int


@dataclass(frozen=True)
class TableOfContents:
    entries: tuple[tuple[int, str], ...]
    raw_text: str
    truncated: bool = False
    degraded: bool = False

    @classmethod
    def empty(cls) -> TableOfContents:
        return cls(entries=(), raw_text="")

    def render(self) -> str:
        return "\n".join("  " * (level - 1) + heading for level, heading in self.entries)


@dataclass(frozen=True, eq=False)
class SubQuestionSet:
    question_id: str
    sub_questions: tuple[str, ...]
    embeddings: np.ndarray | None = None
    fallback: bool = False

    def __post_init__(self) -> None:
        if not self.sub_questions:
            raise ValueError("a sub-question set needs at least one sub-question")
        if any(not q.strip() for q in self.sub_questions):
            raise ValueError("sub-questions must be non-empty")
        if self.embeddings is not None and len(self.embeddings) != len(self.sub_questions):
            raise ValueError("one embedding per sub-question required")

    @property
    def count(self) -> int:
        return len(self.sub_questions)

    def with_embeddings(self, vectors: np.ndarray) -> SubQuestionSet:
        return SubQuestionSet(self.question_id, self.sub_questions, np.asarray(vectors, dtype=np.float64),
                              self.fallback)


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    doc_id: str
    text: str
    gold_answers: tuple[str, ...] = ()
    options: tuple[str, ...] | None = None
    gold_option: int | None = None
    gold_evidence: tuple[str, ...] | None = None
    qtype: str | None = None
    predicted_label: int | None = None

    def __post_init__(self) -> None:
        if (self.options is None) != (self.gold_option is None):
            raise ValueError(f"question {self.id}: options and gold_option must be given together")


@dataclass(frozen=True)
class LayerBuildRecord:
    layer: int
    input_nodes: int
    cluster_count: int
    seeded: bool
    skipped_reduction: bool
    method: str = "gmm"

    def to_dict(self) -> dict[str, Any]:
        return {
            "layer": self.layer,
            "input_nodes": self.input_nodes,
            "cluster_count": self.cluster_count,
            "seeded": self.seeded,
            "skipped_reduction": self.skipped_reduction,
            "method": self.method,
        }


@dataclass(frozen=True)
class BuildStats:
    nodes_per_layer: Mapping[int, int] = field(default_factory=dict)
    llm_summary_calls: int = 0
    clustering_seconds: float = 0.0
    summarization_seconds: float = 0.0
    total_seconds: float = 0.0
    layer_records: tuple[LayerBuildRecord, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def summary_nodes(self) -> int:
        return sum(c for layer, c in self.nodes_per_layer.items() if layer > 0)

    def to_dict(self, include_timings: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {
            "nodes_per_layer": {str(k): v for k, v in sorted(self.nodes_per_layer.items())},
            "llm_summary_calls": self.llm_summary_calls,
        }
        if include_timings:
            d.update(clustering_seconds=self.clustering_seconds,
                     summarization_seconds=self.summarization_seconds,
                     total_seconds=self.total_seconds)
        d["layers"] = [r.to_dict() for r in self.layer_records]
        d["warnings"] = list(self.warnings)
        return d


@dataclass(frozen=True, eq=False)
class SummaryNode:
    id: str
    layer: int
    text: str
    token_count: int
    embedding: np.ndarray
    children: tuple[str, ...] = ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SummaryNode):
            return NotImplemented
        return (
            self.id == other.id
            and self.layer == other.layer
            and self.text == other.text
            and self.token_count == other.token_count
            and self.children == other.children
            and self.embedding.shape == other.embedding.shape
            and bool(np.array_equal(self.embedding, other.embedding))
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SummaryTree:
    doc_id: str
    question_id: str | None
    nodes: Mapping[str, SummaryNode]
    stats: BuildStats = field(default_factory=BuildStats)

    def __post_init__(self) -> None:
        validate_tree(self)

    @property
    def layers(self) -> dict[int, tuple[str, ...]]:
        out: dict[int, list[str]] = {}
        for node in self.nodes.values():
            out.setdefault(node.layer, []).append(node.id)
        return {k: tuple(out[k]) for k in sorted(out)}

    @property
    def top_layer(self) -> int:
        return max((n.layer for n in self.nodes.values()), default=-1)

    def layer_nodes(self, layer: int) -> list[SummaryNode]:
        return [n for n in self.nodes.values() if n.layer == layer]

    @property
    def leaves(self) -> list[SummaryNode]:
        return self.layer_nodes(0)

    @property
    def summary_node_count(self) -> int:
        return sum(1 for n in self.nodes.values() if n.layer > 0)


def validate_tree(tree: SummaryTree) -> None:
    dims = set()
    for key, node in tree.nodes.items():
        if key != node.id:
            raise TreeSchemaError(f"node {node.id!r} stored under key {key!r}")
        if node.layer < 0:
            raise TreeSchemaError(f"node {node.id!r} has negative layer")
        if node.token_count < 0:
            raise TreeSchemaError(f"node {node.id!r} has negative token_count")
        if node.layer == 0 and node.children:
            raise TreeSchemaError(f"leaf node {node.id!r} has children")
        if node.layer > 0 and not node.children:
            raise TreeSchemaError(f"summary node {node.id!r} has no children")
        child_layers = []
        for cid in node.children:
            child = tree.nodes.get(cid)
            if child is None:
                raise TreeSchemaError(f"node {node.id!r} references missing child {cid!r}")
            child_layers.append(child.layer)
        if node.layer > 0:
            if max(child_layers) >= node.layer:
                raise TreeSchemaError(f"node {node.id!r} on layer {node.layer} has a child on the same or a higher layer")
            if node.layer - 1 not in child_layers:
                raise TreeSchemaError(f"node {node.id!r} has no child on layer {node.layer - 1}")
        if not np.all(np.isfinite(node.embedding)):
            raise TreeSchemaError(f"node {node.id!r} has a non-finite embedding")
        dims.add(node.embedding.shape)
    if len(dims) > 1:
        raise TreeSchemaError(f"mixed embedding shapes {sorted(dims)}")

    counts = {layer: len(ids) for layer, ids in tree.layers.items()}
    if counts and sorted(counts) != list(range(max(counts) + 1)):
        raise TreeSchemaError(f"layers are not contiguous: {sorted(counts)}")
    for layer in range(1, len(counts) - 1):
        if counts[layer + 1] >= counts[layer]:
            raise TreeSchemaError(f"layer {layer + 1} is not smaller than layer {layer}")
    if tree.stats.nodes_per_layer and dict(tree.stats.nodes_per_layer) != counts:
        raise TreeSchemaError(f"stats.nodes_per_layer {dict(tree.stats.nodes_per_layer)} != actual {counts}")


# -- persistence ---------------------------------------------------------------

def _digest(payload: Mapping[str, Any]) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def tree_to_dict(tree: SummaryTree, include_timings: bool = True) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "doc_id": tree.doc_id,
        "question_id": tree.question_id,
        "nodes": [
            {
                "id": n.id,
                "layer": n.layer,
                "text": n.text,
                "token_count": n.token_count,
                "embedding": [float(x) for x in n.embedding],
                "children": list(n.children),
            }
            for n in tree.nodes.values()
        ],
        "stats": tree.stats.to_dict(include_timings=include_timings),
    }
    payload["digest"] = _digest(payload)
    return payload


def serialize_tree(tree: SummaryTree, include_timings: bool = True) -> bytes:
    """Encode a tree as self-contained JSON.

    ``include_timings=False`` drops wall-clock fields so that repeated builds
    of the same tree produce identical bytes.
    """
    return json.dumps(tree_to_dict(tree, include_timings), allow_nan=False, ensure_ascii=False).encode("utf-8")


def _require(obj: Mapping[str, Any], key: str, kinds: type | tuple[type, ...], where: str) -> Any:
    if key not in obj:
        raise TreeSchemaError(f"{where}: missing field {key!r}")
    value = obj[key]
    # bool is an int subclass; never accept it where a number is expected
    if isinstance(value, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise TreeSchemaError(f"{where}: field {key!r} has type bool")
    if not isinstance(value, kinds):
        raise TreeSchemaError(f"{where}: field {key!r} has type {type(value).__name__}")
    return value


def _stats_from_dict(d: Any) -> BuildStats:
    if not isinstance(d, dict):
        raise TreeSchemaError("stats: expected an object")
    npl_raw = _require(d, "nodes_per_layer", dict, "stats")
    npl: dict[int, int] = {}
    for k, v in npl_raw.items():
        if not (isinstance(k, str) and k.isdigit()) or isinstance(v, bool) or not isinstance(v, int):
            raise TreeSchemaError(f"stats: bad nodes_per_layer entry {k!r}: {v!r}")
        npl[int(k)] = v
    timings = {}
    for name in TIMING_FIELDS:
        value = d.get(name, 0.0)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise TreeSchemaError(f"stats: bad {name} {value!r}")
        timings[name] = float(value)
    records = []
    for i, r in enumerate(_require(d, "layers", list, "stats")):
        where = f"stats.layers[{i}]"
        if not isinstance(r, dict):
            raise TreeSchemaError(f"{where}: expected an object")
        records.append(LayerBuildRecord(
            layer=_require(r, "layer", int, where),
            input_nodes=_require(r, "input_nodes", int, where),
            cluster_count=_require(r, "cluster_count", int, where),
            seeded=_require(r, "seeded", bool, where),
            skipped_reduction=_require(r, "skipped_reduction", bool, where),
            method=_require(r, "method", str, where),
        ))
    warnings = _require(d, "warnings", list, "stats")
    if not all(isinstance(w, str) for w in warnings):
        raise TreeSchemaError("stats: warnings must be strings")
    return BuildStats(
        nodes_per_layer=npl,
        llm_summary_calls=_require(d, "llm_summary_calls", int, "stats"),
        layer_records=tuple(records),
        warnings=tuple(warnings),
        **timings,
    )


def tree_from_dict(data: Any) -> SummaryTree:
    if not isinstance(data, dict):
        raise TreeSchemaError("top level must be an object")
    digest = _require(data, "digest", str, "tree")
    body = {k: v for k, v in data.items() if k != "digest"}
    try:
        actual = _digest(body)
    except ValueError as exc:
        raise TreeSchemaError(f"tree: {exc}") from exc
    if actual != digest:
        raise TreeSchemaError("tree: content digest mismatch (file was modified or corrupted)")

    doc_id = _require(data, "doc_id", str, "tree")
    if "question_id" not in data:
        raise TreeSchemaError("tree: missing field 'question_id'")
    question_id = data["question_id"]
    if question_id is not None and not isinstance(question_id, str):
        raise TreeSchemaError("tree: question_id must be a string or null")

    nodes: dict[str, SummaryNode] = {}
    for i, raw in enumerate(_require(data, "nodes", list, "tree")):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise TreeSchemaError(f"{where}: expected an object")
        node_id = _require(raw, "id", str, where)
        where = f"node {node_id!r}"
        if node_id in nodes:
            raise TreeSchemaError(f"{where}: duplicate id")
        emb = _require(raw, "embedding", list, where)
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in emb):
            raise TreeSchemaError(f"{where}: embedding must be numeric")
        children = _require(raw, "children", list, where)
        if not all(isinstance(c, str) for c in children):
            raise TreeSchemaError(f"{where}: children must be ids")
        try:
            vec = as_embedding(emb)
        except ValueError as exc:
            raise TreeSchemaError(f"{where}: {exc}") from exc
        nodes[node_id] = SummaryNode(
            id=node_id,
            layer=_require(raw, "layer", int, where),
            text=_require(raw, "text", str, where),
            token_count=_require(raw, "token_count", int, where),
            embedding=vec,
            children=tuple(children),
        )
    stats = _stats_from_dict(data.get("stats"))
    return SummaryTree(doc_id=doc_id, question_id=question_id, nodes=nodes, stats=stats)


def deserialize_tree(raw: bytes | str) -> SummaryTree:
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TreeParseError(f"malformed tree JSON: {exc}") from exc
    return tree_from_dict(data)


def make_tree(doc_id: str, question_id: str | None, nodes: Sequence[SummaryNode],
              stats: BuildStats | None = None) -> SummaryTree:
    return SummaryTree(doc_id, question_id, {n.id: n for n in nodes}, stats or BuildStats())
