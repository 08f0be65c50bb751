"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 provider or
transport failure, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from .config import ConfigError, PipelineConfig
from .embedding import EmbeddingError, HashEmbedder, HttpEmbedder
from .evaluation.datasets import KINDS, DatasetError, load_dataset
from .evaluation.reports import tree_stats, write_csv, write_json
from .llm.gateway import LlmGateway
from .llm.providers import HttpChatProvider, LlmProviderConfig, MockProvider, TransportError
from .model import (Document, QuestionRecord, TreeParseError, TreeSchemaError, deserialize_tree, serialize_tree)
from .pipeline import VARIANTS, AnswerRecord, Pipeline, run_ablation
from .retrieval import collapsed_retrieve, dpr_topk, traverse_retrieve
from .tree import TreeBuildError, build_dynamic_tree, build_static_tree

EXIT_OK, EXIT_USAGE, EXIT_PROVIDER, EXIT_DATA = 0, 1, 2, 3
MOCK_EMBED_DIM = 16

log = logging.getLogger("dtcrs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- setup helpers --------------------------------------------------------------------

def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if getattr(args, "jobs", None):
        changes["max_concurrency"] = args.jobs
    for flag, name in (("no_classify", "no_classify"), ("no_toc", "no_toc"), ("no_global", "hierarchical_clustering")):
        if getattr(args, flag, False):
            changes[name] = True
    for opt, name in (("budget", "collapsed_budget_tokens"), ("k", "dpr_top_k")):
        if getattr(args, opt, None) is not None:
            changes[name] = getattr(args, opt)
    return cfg.with_overrides(**changes) if changes else cfg


def _providers(args, config: PipelineConfig):
    if args.mock:
        script = {}
        if args.mock_script:
            try:
                raw = json.loads(Path(args.mock_script).read_text(encoding="utf-8"))
            except (OSError, ValueError) as exc:
                raise UsageError(f"cannot read mock script: {exc}") from exc
            for key, reply in raw.items():
                step, _, digest = key.partition(":")
                script[(step, digest) if digest else step] = reply
        chat, embedder = MockProvider(script), HashEmbedder(MOCK_EMBED_DIM)
    else:
        url = os.environ.get("DTCRS_EMBED_URL")
        if not url:
            raise UsageError("set DTCRS_EMBED_URL (and DTCRS_API_KEY / DTCRS_BASE_URL) or pass --mock")
        chat = HttpChatProvider(LlmProviderConfig.from_env())
        embedder = HttpEmbedder(url, api_key=os.environ.get("DTCRS_EMBED_API_KEY"))
    gateway = LlmGateway(chat, temperatures=config.temperatures, max_concurrency=config.max_concurrency)
    return gateway, embedder


def _read_document(path: str) -> Document:
    p = Path(path)
    try:
        raw = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read document {path}: {exc}") from exc
    if p.suffix == ".json":
        try:
            d = json.loads(raw)
            return Document(str(d.get("id", p.stem)), str(d.get("title", "")), d["text"])
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise DatasetError(f"{path}: expected an object with a 'text' field ({exc})") from exc
    return Document(p.stem, p.stem, raw)


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _print_stats(stats) -> None:
    print("layer  nodes")
    for layer, count in sorted(stats.nodes_per_layer.items()):
        print(f"{layer:>5}  {count:>5}")
    print(f"summary calls: {stats.llm_summary_calls}")
    print(f"clustering {stats.clustering_seconds:.3f}s  summarization {stats.summarization_seconds:.3f}s  "
          f"total {stats.total_seconds:.3f}s")


# -- commands -------------------------------------------------------------------------

def cmd_build_tree(args) -> int:
    config = _load_config(args)
    doc = _read_document(args.document)
    gateway, embedder = _providers(args, config)
    pipe = Pipeline(embedder, gateway, config)
    prepared = pipe.prepare(doc)
    if args.static:
        tree = build_static_tree(prepared.chunks, embedder, gateway, config, chunk_vectors=prepared.vectors)
    else:
        if not args.question:
            raise UsageError("build-tree needs --question unless --static is given")
        toc = gateway.generate_toc(doc)
        subqs = gateway.decompose_question(args.question, toc, args.question_id, include_toc=not config.no_toc)
        tree = build_dynamic_tree(prepared.chunks, subqs, embedder, gateway, config,
                                  chunk_vectors=prepared.vectors)
    out = Path(args.out or f"{doc.id}.tree.json")
    out.write_bytes(serialize_tree(tree, include_timings=False))
    if args.stats_out:
        _dump(tree.stats.to_dict(include_timings=True), args.stats_out)
    print(f"tree written to {out}")
    _print_stats(tree.stats)
    return EXIT_OK


def cmd_query(args) -> int:
    config = _load_config(args)
    gateway, embedder = _providers(args, config)
    options = tuple(args.option) if args.option else None
    if args.tree:
        try:
            tree = deserialize_tree(Path(args.tree).read_bytes())
        except OSError as exc:
            raise UsageError(f"cannot read tree {args.tree}: {exc}") from exc
        query = embedder.embed([args.question]).vectors[0]
        method = "collapsed" if args.method == "auto" else args.method
        t0 = time.perf_counter()
        if method == "dpr":
            retrieval = dpr_topk(query, tree.leaves, config.dpr_top_k, query_id=args.question_id)
        elif method == "traversal":
            retrieval = traverse_retrieve(query, tree, config.traversal_top_k, query_id=args.question_id)
        else:
            retrieval = collapsed_retrieve(query, tree, config.collapsed_budget_tokens,
                                           skip_overflow=config.collapsed_skip_overflow, query_id=args.question_id)
        answer = gateway.answer(args.question, retrieval.texts, options)
        record = AnswerRecord(args.question_id, "dpr" if method == "dpr" else "tree", retrieval, answer,
                              timings={"query": time.perf_counter() - t0},
                              tree_ref=None if method == "dpr" else str(args.tree))
    else:
        if not args.document:
            raise UsageError("query needs --tree or --doc")
        if args.method not in ("auto", "collapsed", "dpr"):
            raise UsageError("with --doc, --method must be auto, collapsed or dpr")
        if args.method == "collapsed":
            config = config.with_overrides(no_classify=True)
        doc = _read_document(args.document)
        # the gold option is unknown here; 0 only satisfies the record's pairing rule
        q = QuestionRecord(args.question_id, doc.id, args.question, options=options,
                           gold_option=0 if options else None)
        pipe = Pipeline(embedder, gateway, config)
        if args.method == "dpr":
            prepared = pipe.prepare(doc)
            query = embedder.embed([args.question]).vectors[0]
            retrieval = dpr_topk(query, prepared.leaves, config.dpr_top_k, query_id=q.id)
            record = AnswerRecord(q.id, "dpr", retrieval, gateway.answer(q.text, retrieval.texts, options))
        else:
            record = pipe.answer_question(q, doc)
            if record.error:
                print(f"error during {record.phase}: {record.error}", file=sys.stderr)
                return EXIT_PROVIDER
    _dump(record.to_dict(include_timings=not args.no_timings), args.out)
    return EXIT_OK


def _variant(args) -> str:
    flags = [name for name in ("no_global", "no_classify", "no_toc") if getattr(args, name)]
    if len(flags) > 1:
        raise UsageError(f"conflicting ablation flags: {', '.join('--' + f.replace('_', '-') for f in flags)}")
    if flags and args.variant not in (None, "full", flags[0]):
        raise UsageError(f"--variant {args.variant} conflicts with --{flags[0].replace('_', '-')}")
    return flags[0] if flags else (args.variant or "full")


def cmd_evaluate(args) -> int:
    variant = _variant(args)
    if variant not in VARIANTS:
        raise UsageError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    for flag in ("no_global", "no_classify", "no_toc"):
        setattr(args, flag, False)
    config = _load_config(args)
    gateway, embedder = _providers(args, config)
    ds = load_dataset(args.kind, args.dataset)
    questions = ds.questions[: args.limit] if args.limit else ds.questions
    run = run_ablation(variant, questions, ds.documents, embedder, gateway, config, jobs=args.jobs or 1)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(run.report, out / "report.json")
    write_csv(run.report, out / "report.csv")
    _dump(run.to_dict(include_timings=not args.no_timings), str(out / "records.json"))
    built = [(r, next(q for q in questions if q.id == r.question_id)) for r in run.records if r.tree is not None]
    stats = tree_stats([r.tree for r, _ in built], [r.retrieval for r, _ in built],
                       [q.gold_evidence or () for _, q in built])
    write_json(stats, out / "tree_stats.json")

    print(f"variant {variant}: {len(run.records)} questions, {ds.skipped} skipped records, "
          f"{sum(1 for r in run.records if not r.ok)} errors")
    metrics = sorted(run.report.aggregates)
    print("type".ljust(14) + "n".rjust(5) + "".join(m.rjust(11) for m in metrics))
    rows = [*run.report.per_type.items(), ("all", run.report.aggregates)]
    for t, scores in rows:
        n = run.report.counts_per_type.get(t, len(run.records))
        print(t.ljust(14) + str(n).rjust(5) + "".join(
            (f"{100 * scores[m]:.2f}" if m in scores else "-").rjust(11) for m in metrics))
    print(f"reports written to {out}")
    if args.strict and any(not r.ok for r in run.records):
        return EXIT_PROVIDER
    return EXIT_OK


def cmd_stats(args) -> int:
    trees = []
    for path in args.trees:
        try:
            trees.append(deserialize_tree(Path(path).read_bytes()))
        except OSError as exc:
            raise UsageError(f"cannot read tree {path}: {exc}") from exc
    report = tree_stats(trees)
    if args.out:
        write_json(report, args.out)
    print("layer  avg_nodes")
    for layer, avg in sorted(report.avg_nodes_per_layer.items()):
        print(f"{layer:>5}  {avg:>9.2f}")
    return EXIT_OK


def cmd_toc(args) -> int:
    config = _load_config(args)
    gateway, _ = _providers(args, config)
    toc = gateway.generate_toc(_read_document(args.document))
    print(toc.render())
    if toc.truncated:
        print("(document truncated to fit the provider context)", file=sys.stderr)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with PipelineConfig fields")
    common.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    common.add_argument("--mock", action="store_true", help="offline mock LLM and hash embedder")
    common.add_argument("--mock-script", help="JSON mapping step (or step:digest) to a canned reply")
    common.add_argument("--jobs", type=int, help="concurrency bound")
    common.add_argument("-v", "--verbose", action="store_true")

    ablations = argparse.ArgumentParser(add_help=False)
    ablations.add_argument("--no-classify", action="store_true", help="route every question to the tree")
    ablations.add_argument("--no-toc", action="store_true", help="decompose without the table of contents")
    ablations.add_argument("--no-global", action="store_true", help="hierarchical instead of global clustering")

    parser = _Parser(prog="dtcrs", description="Question-conditioned summary trees for long-document QA.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-tree", parents=[common, ablations], help="build a summary tree for a document")
    p.add_argument("document")
    p.add_argument("--question", "-q")
    p.add_argument("--question-id", default="q0")
    p.add_argument("--static", action="store_true", help="question-independent tree")
    p.add_argument("--out", "-o")
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_build_tree)

    p = sub.add_parser("query", parents=[common, ablations], help="answer one question")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tree")
    src.add_argument("--doc", dest="document")
    p.add_argument("--question", "-q", required=True)
    p.add_argument("--question-id", default="q0")
    p.add_argument("--option", action="append", help="answer option (repeat for multiple choice)")
    p.add_argument("--method", choices=("auto", "collapsed", "traversal", "dpr"), default="auto")
    p.add_argument("--k", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--out", "-o")
    p.add_argument("--no-timings", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", parents=[common, ablations], help="run a dataset through one variant")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", help=f"one of {', '.join(VARIANTS)}")
    p.add_argument("--limit", type=int)
    p.add_argument("--out-dir", default="eval-out")
    p.add_argument("--no-timings", action="store_true")
    p.add_argument("--strict", action="store_true", help="exit 2 if any question failed")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="layer statistics over tree files")
    p.add_argument("trees", nargs="+")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("toc", parents=[common], help="print a generated table of contents")
    p.add_argument("document")
    p.set_defaults(func=cmd_toc)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TreeBuildError as exc:
        print(f"provider failure during {exc.phase}: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (TransportError, EmbeddingError) as exc:
        print(f"provider failure: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (DatasetError, TreeParseError, TreeSchemaError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
