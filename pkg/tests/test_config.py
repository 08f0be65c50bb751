import json

import pytest

from dtcrs.config import DEFAULT_TEMPERATURES, ConfigError, PipelineConfig


def test_defaults_follow_the_reference_settings():
    cfg = PipelineConfig()
    assert (cfg.chunk_size_limit, cfg.summary_max_tokens, cfg.dpr_top_k) == (500, 100, 5)
    assert cfg.collapsed_budget_tokens == 3500
    assert cfg.gmm_threshold == 0.5
    assert (cfg.umap_n_neighbors, cfg.umap_dim, cfg.umap_metric) == (10, 10, "cosine")


def test_temperatures_default_per_step():
    cfg = PipelineConfig(temperatures={"summarize": 0.7})
    assert cfg.temperatures["summarize"] == 0.7
    assert cfg.temperatures["classify"] == DEFAULT_TEMPERATURES["classify"]


@pytest.mark.parametrize("field, value", [
    ("chunk_size_limit", 0), ("summary_max_tokens", -1), ("gmm_threshold", 0.0), ("gmm_threshold", 1.5),
    ("umap_metric", "euclidean"), ("reduction_backend", "tsne"), ("collapsed_budget_tokens", -1),
])
def test_invalid_values_rejected(field, value):
    with pytest.raises(ConfigError):
        PipelineConfig(**{field: value})


def test_file_round_trip(tmp_path):
    cfg = PipelineConfig(rng_seed=9, no_toc=True)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert PipelineConfig.load(path) == cfg


def test_unknown_keys_and_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"chunk_size": 3})
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        PipelineConfig.load(bad)
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "missing.json")
