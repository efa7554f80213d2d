"""Pipeline configuration: dataclasses, JSON-schema validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .spectral import DEFAULT_PEAK_BANDS


class ConfigError(ValueError):
    """Configuration rejected by the schema or by a cross-field check."""


@dataclass(frozen=True)
class EmbeddingConfig:
    tau: Union[int, str] = "auto"
    dim: Union[int, str] = "auto"
    max_tau: int = 50
    max_dim: int = 6
    fnn_threshold: float = 0.02
    # heuristics run on this many leading samples of the reference chunk
    heuristic_samples: int = 25600


@dataclass(frozen=True)
class SubsampleConfig:
    target_points: int = 400
    strategy: str = "maxmin"


@dataclass(frozen=True)
class PersistenceConfig:
    max_dim: int = 1
    max_filtration: Union[float, str] = "auto"
    simplex_budget: int = 5_000_000


@dataclass(frozen=True)
class IndicatorConfig:
    essential: str = "cap"
    entropy_normalization: str = "printed"
    f_family_form: str = "printed"
    betti_grid_size: int = 100


@dataclass(frozen=True)
class SpectralConfig:
    enabled: bool = True
    normalization: str = "amplitude"
    peak_bands: tuple = DEFAULT_PEAK_BANDS
    distance_band: tuple = (1000.0, 3000.0)
    band_rms: bool = True
    demod_band: tuple = (500.0, 2000.0)
    rms_band: tuple = (1.0, 150.0)


@dataclass(frozen=True)
class WindowConfig:
    enabled: bool = True
    window_s: float = 0.005
    stride_s: Optional[float] = None  # None means half a window
    max_windows: Optional[int] = None
    topology: bool = True

    @property
    def stride(self) -> float:
        return self.stride_s if self.stride_s is not None else self.window_s / 2


@dataclass(frozen=True)
class BaselineConfig:
    k_early: int = 3
    warning: float = 3.0
    anomaly: float = 6.0
    std_floor: float = 1e-9


@dataclass(frozen=True)
class PipelineConfig:
    manifest: Union[str, dict, None] = None
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    subsample: SubsampleConfig = field(default_factory=SubsampleConfig)
    persistence: PersistenceConfig = field(default_factory=PersistenceConfig)
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    # directory that relative manifest paths are resolved against
    base_dir: str = field(default=".", compare=False)

    def with_overrides(self, **sections) -> "PipelineConfig":
        """Copy with top-level values or ``section={"key": value}`` updates applied."""
        data = self.to_dict()
        for key, value in sections.items():
            if value is None:
                continue
            if isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return from_dict(data, base_dir=self.base_dir)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("base_dir")
        return _jsonable(data)

    def hash(self) -> str:
        """sha256 of the settings that influence results (not paths or worker count)."""
        data = self.to_dict()
        for key in ("out_dir", "workers"):
            data.pop(key)
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


_SECTIONS = {
    "embedding": EmbeddingConfig,
    "subsample": SubsampleConfig,
    "persistence": PersistenceConfig,
    "indicators": IndicatorConfig,
    "spectral": SpectralConfig,
    "windows": WindowConfig,
    "baseline": BaselineConfig,
}


def _jsonable(obj):
    if is_dataclass(obj):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def schema() -> dict:
    text = resources.files("vibtda").joinpath("config.schema.json").read_text()
    return json.loads(text)


def validate(data: dict) -> None:
    """Raise :class:`ConfigError` naming the offending field path."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {err.message}")


def from_dict(data: dict, base_dir: str | Path = ".") -> PipelineConfig:
    data = copy.deepcopy(data)
    validate(data)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = data.pop(name, {})
        known = {f.name for f in fields(cls)}
        kwargs[name] = cls(**{k: _tuplify(v) for k, v in section.items() if k in known})
    kwargs.update(data)
    cfg = PipelineConfig(**kwargs, base_dir=str(base_dir))
    if cfg.baseline.warning > cfg.baseline.anomaly:
        raise ConfigError("config field 'baseline/warning': must not exceed baseline/anomaly")
    for band in (cfg.spectral.distance_band, cfg.spectral.demod_band, cfg.spectral.rms_band,
                 *cfg.spectral.peak_bands):
        if not band[0] < band[1]:
            raise ConfigError(f"config field 'spectral': band {list(band)} must have lo < hi")
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return from_dict(data, base_dir=path.parent)
