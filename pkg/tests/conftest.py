from __future__ import annotations

import numpy as np
import pytest

from dtcrs.config import PipelineConfig
from dtcrs.embedding import HashEmbedder
from dtcrs.llm import LlmGateway, MockProvider
from dtcrs.model import BuildStats, SummaryNode, make_tree

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda line: int(line.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def embedder():
    return HashEmbedder(16)


@pytest.fixture
def mock():
    return MockProvider()


@pytest.fixture
def gateway(mock):
    return LlmGateway(mock)


@pytest.fixture
def config():
    return PipelineConfig()


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def fixture_tree(doc_id: str = "doc", question_id: str | None = "q") -> object:
    """Seven nodes: four leaves, two layer-1 summaries, one root."""
    rng = np.random.default_rng(11)
    vec = lambda: unit(rng.standard_normal(4))  # noqa: E731
    nodes = [SummaryNode(f"{doc_id}#{i:05d}", 0, f"leaf {i} text", 3, vec()) for i in range(4)]
    nodes += [
        SummaryNode(f"{doc_id}:L1:0000", 1, "summary a", 2, vec(), (nodes[0].id, nodes[1].id)),
        SummaryNode(f"{doc_id}:L1:0001", 1, "summary b", 2, vec(), (nodes[2].id, nodes[3].id, nodes[1].id)),
    ]
    nodes.append(SummaryNode(f"{doc_id}:L2:0000", 2, "root", 1, vec(), (nodes[4].id, nodes[5].id)))
    stats = BuildStats(nodes_per_layer={0: 4, 1: 2, 2: 1}, llm_summary_calls=3)
    return make_tree(doc_id, question_id, nodes, stats)
