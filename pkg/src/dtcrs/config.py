"""Pipeline configuration and its JSON file format."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

# Sampling temperature per LLM step.
DEFAULT_TEMPERATURES: dict[str, float] = {
    "toc": 0.0,
    "classify": 0.0,
    "decompose": 0.0,
    "summarize": 0.3,
    "answer_freeform": 0.0,
    "answer_choice": 0.0,
}

REDUCTION_BACKENDS = ("linear", "manifold")


class ConfigError(ValueError):
    """Raised for invalid configuration values or files."""


@dataclass(frozen=True)
class PipelineConfig:
    chunk_size_limit: int = 500
    summary_max_tokens: int = 100
    dpr_top_k: int = 5
    collapsed_budget_tokens: int = 3500
    collapsed_skip_overflow: bool = True
    traversal_top_k: int = 5
    gmm_threshold: float = 0.5
    umap_n_neighbors: int = 10
    umap_dim: int = 10
    umap_metric: str = "cosine"
    reduction_backend: str = "linear"
    max_layers: int = 5
    max_clusters: int = 50
    hierarchical_cap: int = 10
    reg_floor: float = 1e-6
    em_tol: float = 1e-6
    em_max_iter: int = 200
    rng_seed: int = 0
    no_classify: bool = False
    no_toc: bool = False
    hierarchical_clustering: bool = False
    max_concurrency: int = 4
    temperatures: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_TEMPERATURES))

    def __post_init__(self) -> None:
        for name in ("chunk_size_limit", "summary_max_tokens", "dpr_top_k", "traversal_top_k",
                     "max_layers", "max_clusters", "hierarchical_cap", "em_max_iter", "max_concurrency"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.collapsed_budget_tokens < 0:
            raise ConfigError("collapsed_budget_tokens must be >= 0")
        if not 0.0 < self.gmm_threshold <= 1.0:
            raise ConfigError(f"gmm_threshold must be in (0, 1], got {self.gmm_threshold}")
        if self.umap_n_neighbors < 2:
            raise ConfigError("umap_n_neighbors must be >= 2")
        if self.umap_dim < 1:
            raise ConfigError("umap_dim must be >= 1")
        if self.umap_metric != "cosine":
            raise ConfigError(f"unsupported umap_metric {self.umap_metric!r}")
        if self.reduction_backend not in REDUCTION_BACKENDS:
            raise ConfigError(f"reduction_backend must be one of {REDUCTION_BACKENDS}")
        if self.reg_floor <= 0 or self.em_tol <= 0:
            raise ConfigError("reg_floor and em_tol must be positive")
        temps = dict(DEFAULT_TEMPERATURES)
        unknown = set(self.temperatures) - set(temps)
        if unknown:
            raise ConfigError(f"unknown temperature steps: {sorted(unknown)}")
        temps.update(self.temperatures)
        object.__setattr__(self, "temperatures", temps)

    def with_overrides(self, **changes: Any) -> PipelineConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["temperatures"] = dict(self.temperatures)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)
