import json
import subprocess
import sys
from pathlib import Path

import pytest

from dtcrs.cli import main
from dtcrs.model import deserialize_tree
from dtcrs.synthetic import make_long_document

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def doc_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("docs") / "story.txt"
    path.write_text(make_long_document(6000, n_topics=4, seed=2).document.text)
    return path


def _build(doc_path, out, *extra):
    return main(["build-tree", str(doc_path), "--mock", "--seed", "5", "-q", "What happens overall?",
                 "-o", str(out), *extra])


def test_build_tree_is_byte_identical_across_runs_and_jobs(doc_path, tmp_path, capsys):
    outs = [tmp_path / f"t{i}.json" for i in range(3)]
    assert _build(doc_path, outs[0]) == 0
    assert _build(doc_path, outs[1]) == 0
    assert _build(doc_path, outs[2], "--jobs", "4") == 0
    first = outs[0].read_bytes()
    assert first == outs[1].read_bytes() == outs[2].read_bytes()
    tree = deserialize_tree(first)
    assert tree.question_id == "q0" and tree.top_layer >= 1
    assert "layer  nodes" in capsys.readouterr().out


def test_stats_out_file(doc_path, tmp_path):
    stats = tmp_path / "stats.json"
    assert _build(doc_path, tmp_path / "t.json", "--static", "--stats-out", str(stats)) == 0
    data = json.loads(stats.read_text())
    assert data["nodes_per_layer"]["0"] > 1 and "total_seconds" in data


def test_build_needs_question_unless_static(doc_path, tmp_path):
    assert main(["build-tree", str(doc_path), "--mock", "-o", str(tmp_path / "t.json")]) == 1


def test_missing_document_is_usage_error(tmp_path, capsys):
    assert main(["build-tree", str(tmp_path / "nope.txt"), "--mock", "--static"]) == 1
    assert "cannot read document" in capsys.readouterr().err


def test_bad_arguments_exit_one():
    with pytest.raises(SystemExit) as info:
        main(["query", "--mock"])
    assert info.value.code == 1


def test_query_tree_with_zero_budget(doc_path, tmp_path, capsys):
    tree = tmp_path / "t.json"
    _build(doc_path, tree, "--static")
    capsys.readouterr()
    out = tmp_path / "a.json"
    assert main(["query", "--tree", str(tree), "--mock", "-q", "Anything?", "--budget", "0",
                 "--no-timings", "-o", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["retrieval"]["items"] == [] and rec["retrieval"]["total_tokens"] == 0
    assert "timings" not in rec


@pytest.mark.parametrize("method, expected", [("traversal", "traversal"), ("dpr", "dpr"), ("auto", "collapsed")])
def test_query_tree_methods(doc_path, tmp_path, method, expected):
    tree = tmp_path / "t.json"
    _build(doc_path, tree, "--static")
    out = tmp_path / "a.json"
    assert main(["query", "--tree", str(tree), "--mock", "-q", "Anything?", "--method", method,
                 "-o", str(out)]) == 0
    assert json.loads(out.read_text())["retrieval"]["method"] == expected


def test_query_document_multiple_choice(doc_path, tmp_path):
    out = tmp_path / "a.json"
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"classify": "1", "answer_choice": "B"}))
    code = main(["query", "--doc", str(doc_path), "--mock", "--mock-script", str(script), "-q", "Which?",
                 "--option", "x", "--option", "y", "-o", str(out)])
    assert code == 0
    rec = json.loads(out.read_text())
    assert rec["answer"] == 1 and rec["route"] == "tree"


def test_corrupt_tree_is_data_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{]")
    assert main(["query", "--tree", str(bad), "--mock", "-q", "x"]) == 3
    assert main(["stats", str(bad)]) == 3


def test_evaluate_writes_reports(tmp_path, capsys):
    out = tmp_path / "eval"
    code = main(["evaluate", "--kind", "qasper", "--dataset", str(FIXTURES / "qasper_mini.json"), "--mock",
                 "--limit", "3", "--out-dir", str(out), "--no-timings"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["per_question"]) == 3
    assert (out / "report.csv").read_text().startswith("question_id,")
    records = json.loads((out / "records.json").read_text())
    assert records["variant"] == "full" and len(records["records"]) == 3
    assert (out / "tree_stats.json").exists()
    assert "variant full: 3 questions" in capsys.readouterr().out


def test_evaluate_no_global_uses_hierarchical(tmp_path):
    script = tmp_path / "s.json"
    script.write_text(json.dumps({"classify": "1"}))
    out = tmp_path / "eval"
    assert main(["evaluate", "--kind", "qasper", "--dataset", str(FIXTURES / "qasper_mini.json"), "--mock",
                 "--mock-script", str(script), "--variant", "no_global", "--config",
                 str(_small_chunks(tmp_path)), "--out-dir", str(out)]) == 0
    records = json.loads((out / "records.json").read_text())["records"]
    methods = {layer["method"] for r in records for layer in r.get("tree_layers", [])}
    assert methods == {"hierarchical"}


def _small_chunks(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"chunk_size_limit": 20}))
    return cfg


def test_evaluate_rejects_unknown_variant_and_conflicts(tmp_path):
    ds = str(FIXTURES / "qasper_mini.json")
    assert main(["evaluate", "--kind", "qasper", "--dataset", ds, "--mock", "--variant", "bogus"]) == 1
    assert main(["evaluate", "--kind", "qasper", "--dataset", ds, "--mock", "--no-toc", "--no-global"]) == 1


def test_evaluate_bad_dataset_is_data_error(tmp_path):
    bad = tmp_path / "d.json"
    bad.write_text("{oops")
    assert main(["evaluate", "--kind", "qasper", "--dataset", str(bad), "--mock",
                 "--out-dir", str(tmp_path / "o")]) == 3


def test_invalid_config_is_usage_error(doc_path, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gmm_threshold": 2}))
    assert main(["build-tree", str(doc_path), "--mock", "--static", "--config", str(cfg)]) == 1


def test_toc_needs_endpoints_or_mock(doc_path, tmp_path, monkeypatch):
    monkeypatch.delenv("DTCRS_EMBED_URL", raising=False)
    script = tmp_path / "s.json"
    script.write_text(json.dumps({"toc": "1. A"}))
    assert main(["toc", str(doc_path)]) == 1
    assert main(["toc", str(doc_path), "--mock", "--mock-script", str(script)]) == 0


def test_provider_failure_exits_two(doc_path, tmp_path, monkeypatch):
    # a mock script file cannot carry an exception, so patch the default rule
    from dtcrs.llm import providers
    monkeypatch.setitem(providers.DEFAULT_RULES, "summarize", ConnectionError("down"))
    assert main(["build-tree", str(doc_path), "--mock", "--static", "-o", str(tmp_path / "t.json")]) == 2


def test_stats_over_several_trees(doc_path, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    _build(doc_path, a, "--static")
    _build(doc_path, b)
    out = tmp_path / "s.json"
    capsys.readouterr()
    assert main(["stats", str(a), str(b), "-o", str(out)]) == 0
    assert json.loads(out.read_text())["tree_count"] == 2
    assert "avg_nodes" in capsys.readouterr().out


def test_module_entry_point(doc_path, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dtcrs", "toc", str(doc_path), "--mock"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0 and proc.stdout.strip()
