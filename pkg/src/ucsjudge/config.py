"""Pipeline configuration (YAML) with strict key checking and defaults."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .data import TaskSpec, load_task_spec
from .errors import ConfigError
from .gateway import DEFAULT_MAX_TOKENS, Gateway, MockBackend, RemoteBackend, ReplayBackend
from .scoring import ScoringVariant
from .transfer import VARIANTS

BACKENDS = ("mock", "remote", "replay")


@dataclass
class GatewaySettings:
    backend: str = "mock"
    endpoint: str | None = None
    model_id: str = "mock"
    cache_dir: str | None = None
    concurrency: int = 8
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = DEFAULT_MAX_TOKENS
    fixture_dir: str | None = None
    # PlantedWorld keyword arguments for the mock backend
    planted: dict | None = None


@dataclass
class SplitSettings:
    test_fraction: float = 0.3
    train_fraction_used: float = 1.0
    stratified: bool = True


@dataclass
class PipelineConfig:
    task: str
    datasets: dict[str, str]
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    variant: str = "per-concept/per-concept"
    split: SplitSettings = field(default_factory=SplitSettings)
    model_variant: str = "mlp"
    train_language: str = "en"
    languages: list[str] | None = None
    seeds: list[int] = field(default_factory=lambda: [42])
    output_dir: str = "runs"
    # directory relative paths are resolved against (the config file's)
    base_dir: str = "."

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def load_task(self) -> TaskSpec:
        return load_task_spec(self.path(self.task))

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


def _check_keys(raw: Mapping, cls, where: str) -> None:
    allowed = {f.name for f in fields(cls)} - {"base_dir"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed: {sorted(allowed)}")


def config_from_dict(raw: Mapping[str, Any], base_dir: str | Path = ".", check_paths: bool = True) -> PipelineConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a mapping")
    _check_keys(raw, PipelineConfig, "config")
    for key in ("task", "datasets"):
        if key not in raw:
            raise ConfigError(f"config: missing required key {key!r}")
    gw_raw = raw.get("gateway") or {}
    _check_keys(gw_raw, GatewaySettings, "config.gateway")
    split_raw = raw.get("split") or {}
    _check_keys(split_raw, SplitSettings, "config.split")
    rest = {k: v for k, v in raw.items() if k not in ("gateway", "split")}
    try:
        cfg = PipelineConfig(**rest, gateway=GatewaySettings(**gw_raw), split=SplitSettings(**split_raw),
                             base_dir=str(base_dir))
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from exc
    validate(cfg, check_paths)
    return cfg


def validate(cfg: PipelineConfig, check_paths: bool = True) -> None:
    if not isinstance(cfg.datasets, Mapping) or not cfg.datasets:
        raise ConfigError("datasets must map language -> path")
    if not isinstance(cfg.seeds, list) or not cfg.seeds:
        raise ConfigError("seeds must be a non-empty list")
    if not all(isinstance(s, int) and not isinstance(s, bool) for s in cfg.seeds):
        raise ConfigError(f"seeds must be integers, got {cfg.seeds}")
    if cfg.gateway.backend not in BACKENDS:
        raise ConfigError(f"gateway.backend must be one of {BACKENDS}, got {cfg.gateway.backend!r}")
    if cfg.gateway.concurrency < 1:
        raise ConfigError("gateway.concurrency must be >= 1")
    if cfg.gateway.backend == "remote" and not cfg.gateway.endpoint:
        raise ConfigError("remote backend needs gateway.endpoint")
    if cfg.gateway.backend == "replay" and not cfg.gateway.fixture_dir:
        raise ConfigError("replay backend needs gateway.fixture_dir")
    if cfg.model_variant not in VARIANTS:
        raise ConfigError(f"model_variant must be one of {VARIANTS}, got {cfg.model_variant!r}")
    try:
        ScoringVariant.parse(cfg.variant)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not 0.0 < cfg.split.test_fraction < 1.0:
        raise ConfigError("split.test_fraction must be in (0,1)")
    if not 0.0 < cfg.split.train_fraction_used <= 1.0:
        raise ConfigError("split.train_fraction_used must be in (0,1]")
    if cfg.train_language not in cfg.datasets:
        raise ConfigError(f"no dataset for the training language {cfg.train_language!r}")
    declared = set(cfg.languages or [])
    if check_paths:
        task_path = cfg.path(cfg.task)
        if not task_path.is_file():
            raise ConfigError(f"task file not found: {task_path}")
        task = cfg.load_task()
        declared |= set(task.languages or [])
        for lang, p in cfg.datasets.items():
            if not cfg.path(p).is_file():
                raise ConfigError(f"dataset for {lang!r} not found: {cfg.path(p)}")
    missing = sorted(declared - set(cfg.datasets))
    if missing:
        raise ConfigError(f"declared languages without a dataset: {missing}")


def validate_config(path) -> PipelineConfig:
    """Load, check and default-fill a YAML config file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw or {}, base_dir=path.parent)


def build_gateway(cfg: PipelineConfig, task: TaskSpec | None = None, backend: str | None = None,
                  cache_dir: str | Path | None = None) -> Gateway:
    g = cfg.gateway
    kind = backend or g.backend
    if kind == "mock":
        from .planted import PlantedWorld

        if g.planted is None:
            raise ConfigError("mock backend needs a gateway.planted section")
        params = dict(g.planted)
        if task is not None:
            params.setdefault("family", task.prompt_family)
        if "languages" in params:
            from .planted import LanguageProfile

            params["languages"] = {
                lang: LanguageProfile(**{k: tuple(v) if k == "signal" else v for k, v in prof.items()})
                for lang, prof in params["languages"].items()
            }
        if "signal" in params:
            params["signal"] = tuple(params["signal"])
        try:
            world = PlantedWorld(**params)
        except TypeError as exc:
            raise ConfigError(f"gateway.planted: {exc}") from exc
        be = MockBackend(world)
    elif kind == "remote":
        if not g.endpoint:
            raise ConfigError("remote backend needs gateway.endpoint")
        be = RemoteBackend(g.endpoint)
    elif kind == "replay":
        if not g.fixture_dir:
            raise ConfigError("replay backend needs gateway.fixture_dir")
        be = ReplayBackend(cfg.path(g.fixture_dir))
    else:
        raise ConfigError(f"unknown backend {kind!r}")
    cache = cache_dir if cache_dir is not None else cfg.path(g.cache_dir)
    return Gateway(be, cache_dir=cache, model_id=g.model_id, concurrency=g.concurrency,
                   max_tokens=g.max_tokens, temperature=g.temperature, top_p=g.top_p)


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.snapshot(), sort_keys=True)
