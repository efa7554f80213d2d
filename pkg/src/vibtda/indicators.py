"""Scalar health indicators from persistence diagrams and raw signals.

Every diagram indicator works on the intervals returned by
:meth:`PersistenceDiagram.finite_intervals`, so essential classes are handled
uniformly: by default their death is replaced with the filtration cap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import embedding, persistence, spectral
from .config import IndicatorConfig, PipelineConfig
from .embedding import EmbeddingParams
from .signal_io import TimeSeriesChunk, format_timestamp


class StageError(RuntimeError):
    """An indicator stage failed; the message starts with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def run_stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001  re-raised with the stage label
        raise StageError(name, exc) from exc


# --------------------------------------------------------------------------
# diagram indicators


def _intervals(diagram, k: int, essential: str = "cap") -> np.ndarray:
    if isinstance(diagram, persistence.PersistenceDiagram):
        return diagram.finite_intervals(k, essential)
    # plain (n, 2) arrays of finite pairs are accepted for convenience
    arr = np.asarray(diagram, dtype=float).reshape(-1, 2)
    return arr[arr[:, 1] > arr[:, 0]]


def max_persistence(diagram, k: int = 1, essential: str = "cap") -> float:
    """Longest bar in dimension ``k``; 0 for an empty dimension."""
    iv = _intervals(diagram, k, essential)
    return float(np.max(iv[:, 1] - iv[:, 0])) if len(iv) else 0.0


def amplitude(diagram, k: int = 1, essential: str = "cap") -> float:
    """Total bar length ``S`` in dimension ``k``; 0 for an empty dimension."""
    iv = _intervals(diagram, k, essential)
    return float(np.sum(iv[:, 1] - iv[:, 0]))


@dataclass(frozen=True)
class EntropyResult:
    value: float
    degenerate: bool = False
    reason: str = ""

    def __float__(self) -> float:
        return self.value


def persistence_entropy_result(diagram, k: int = 1, normalization: str = "printed",
                               essential: str = "cap") -> EntropyResult:
    """Normalized Shannon entropy of bar lengths, with a degeneracy flag.

    ``printed`` divides the raw entropy (bits) by ``log2 S`` where ``S`` is the
    total bar length; ``count`` divides by ``log2 n`` for ``n`` bars. Empty
    dimensions and zero normalizers are defined as 0 and flagged.
    """
    iv = _intervals(diagram, k, essential)
    lengths = iv[:, 1] - iv[:, 0]
    total = float(lengths.sum())
    if len(lengths) == 0 or total <= 0:
        return EntropyResult(0.0, True, "empty dimension")
    p = lengths / total
    raw = float(-np.sum(p * np.log2(p)))
    if len(lengths) == 1:
        return EntropyResult(0.0)
    if normalization == "printed":
        norm = math.log2(total)
    elif normalization == "count":
        norm = math.log2(len(lengths))
    else:
        raise ValueError(f"unknown entropy normalization {normalization!r}")
    if abs(norm) < 1e-12:
        return EntropyResult(0.0, True, "zero normalizer")
    return EntropyResult(raw / norm)


def persistence_entropy(diagram, k: int = 1, normalization: str = "printed",
                        essential: str = "cap") -> float:
    res = persistence_entropy_result(diagram, k, normalization, essential)
    if res.degenerate:
        warnings.warn(f"persistence entropy of H{k} defined as 0: {res.reason}", RuntimeWarning,
                      stacklevel=2)
    return res.value


def f_family(diagram, k: int = 1, form: str = "printed", essential: str = "cap",
             d_max: Optional[float] = None) -> tuple[float, float, float, float]:
    """The four polynomial summaries of dimension ``k``.

    ``printed`` form::

        f1 = sum b (d - b)
        f2 = sum (d_max - d) - (d - b)
        f3 = sum b^2 (d - b)^4
        f4 = sum (d_max - d)^2 - (d - b)^4

    ``product`` replaces the subtractions in ``f2``/``f4`` with products.
    ``d_max`` defaults to the largest finite death in dimension ``k``.
    """
    iv = _intervals(diagram, k, essential)
    if len(iv) == 0:
        return (0.0, 0.0, 0.0, 0.0)
    if d_max is None:
        if isinstance(diagram, persistence.PersistenceDiagram) and np.isfinite(
                diagram.dimension(k)[:, 1]).any():
            d_max = diagram.d_max(k)
        else:
            d_max = float(iv[:, 1].max())
    b, d = iv[:, 0], iv[:, 1]
    pers = d - b
    lead = d_max - d
    f1 = np.sum(b * pers)
    f3 = np.sum(b ** 2 * pers ** 4)
    if form == "printed":
        f2 = np.sum(lead - pers)
        f4 = np.sum(lead ** 2 - pers ** 4)
    elif form == "product":
        f2 = np.sum(lead * pers)
        f4 = np.sum(lead ** 2 * pers ** 4)
    else:
        raise ValueError(f"unknown f-family form {form!r}")
    return (float(f1), float(f2), float(f3), float(f4))


def betti_summary(curve: persistence.BettiCurve) -> float:
    """Trapezoidal area under a Betti curve divided by the grid span."""
    span = float(curve.grid[-1] - curve.grid[0])
    if span <= 0:
        return 0.0
    return float(np.trapezoid(curve.counts.astype(float), curve.grid) / span)


# --------------------------------------------------------------------------
# signal statistics


def _values(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "samples", x), dtype=np.float64).reshape(-1)
    if arr.size < 4:
        raise ValueError("need at least 4 samples for moment statistics")
    if np.ptp(arr) == 0:
        raise ValueError("zero-variance signal: moments undefined")
    return arr


def skewness(x) -> float:
    """Population (biased) standardized third moment."""
    return float(stats.skew(_values(x), bias=True))


def kurtosis(x) -> float:
    """Population excess kurtosis: 0 for a Gaussian, -2 for a symmetric two-point law."""
    return float(stats.kurtosis(_values(x), fisher=True, bias=True))


# --------------------------------------------------------------------------
# indicator registry and vectors


def topological_names(max_dim: int) -> list[str]:
    names = []
    for k in range(max_dim + 1):
        names += [f"max_persistence_H{k}", f"amplitude_H{k}", f"entropy_H{k}"]
        names += [f"f{i}_H{k}" for i in range(1, 5)]
    names += [f"betti_auc_H{k}" for k in range(1, max_dim + 1)]
    return names


GEOMETRY_NAMES = ["gyration_radius", "skewness", "excess_kurtosis"]


def spectral_names(n_bands: int, band_rms: bool = True) -> list[str]:
    names = []
    for i in range(1, n_bands + 1):
        names += [f"peak{i}_freq_hz", f"peak{i}_height", f"peak{i}_width_hz"]
    if band_rms:
        names.append("band_rms_demod")
    return names


def registry(config: PipelineConfig, spectral_part: bool = True) -> list[str]:
    """Ordered indicator names produced by :func:`indicator_vector` under ``config``."""
    names = topological_names(config.persistence.max_dim) + GEOMETRY_NAMES
    if spectral_part and config.spectral.enabled:
        names += spectral_names(len(config.spectral.peak_bands), config.spectral.band_rms)
    return names


@dataclass(frozen=True)
class IndicatorVector:
    """Named indicator values for one chunk or window.

    ``provenance`` records the chunk timestamp, the window offset (seconds
    from the chunk start, or ``"full"``) and the embedding used.
    """

    values: dict
    provenance: dict = field(default_factory=dict)
    flags: tuple = ()

    def __post_init__(self):
        bad = [k for k, v in self.values.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite indicator values: {bad}")

    def names(self) -> list[str]:
        return list(self.values)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def with_values(self, **extra) -> "IndicatorVector":
        return IndicatorVector({**self.values, **{k: float(v) for k, v in extra.items()}},
                               self.provenance, self.flags)

    def to_json(self) -> dict:
        return {"values": dict(self.values), "provenance": dict(self.provenance),
                "flags": list(self.flags)}


def diagram_indicators(diagram: persistence.PersistenceDiagram,
                       cfg: IndicatorConfig = IndicatorConfig()) -> tuple[dict, list[str]]:
    """All topological indicators of one diagram plus degeneracy flags."""
    values, flags = {}, []
    for k in range(diagram.max_dim + 1):
        values[f"max_persistence_H{k}"] = max_persistence(diagram, k, cfg.essential)
        values[f"amplitude_H{k}"] = amplitude(diagram, k, cfg.essential)
        ent = persistence_entropy_result(diagram, k, cfg.entropy_normalization, cfg.essential)
        values[f"entropy_H{k}"] = ent.value
        if ent.degenerate:
            flags.append(f"entropy_H{k}:{ent.reason}")
        for i, f in enumerate(f_family(diagram, k, cfg.f_family_form, cfg.essential), start=1):
            values[f"f{i}_H{k}"] = f
    for k in range(1, diagram.max_dim + 1):
        curve = persistence.betti_curve(diagram, k, cfg.betti_grid_size)
        values[f"betti_auc_H{k}"] = betti_summary(curve)
    return values, flags


@dataclass(frozen=True)
class ChunkAnalysis:
    """Intermediate products kept alongside an indicator vector."""

    vector: IndicatorVector
    params: EmbeddingParams
    cloud: embedding.PointCloud
    diagram: persistence.PersistenceDiagram
    spectrum: Optional[spectral.Spectrum] = None


def select_params(chunk: TimeSeriesChunk, config: PipelineConfig) -> tuple[EmbeddingParams, list[str]]:
    """Embedding parameters from the config, running the heuristics for ``"auto"`` entries."""
    ec = config.embedding
    flags = []
    x = chunk.samples[:ec.heuristic_samples]
    tau = ec.tau
    if tau == "auto":
        max_tau = min(ec.max_tau, max(1, (x.size - 1) // 4))
        tau = embedding.select_delay_mi(x, max_tau)
    dim = ec.dim
    if dim == "auto":
        res = embedding.select_dim_fnn(x, tau, ec.max_dim, ec.fnn_threshold)
        dim = res.dim
        if not res.converged:
            flags.append("fnn_not_converged")
    return EmbeddingParams(int(tau), int(dim)), flags


def analyze_chunk(chunk: TimeSeriesChunk, config: PipelineConfig = PipelineConfig(),
                  params: Optional[EmbeddingParams] = None, seed: Optional[int] = None,
                  include_spectral: bool = True, window="full") -> ChunkAnalysis:
    """Embed, subsample, compute persistence and every indicator for one chunk."""
    seed = config.seed if seed is None else seed
    flags: list[str] = []
    if params is None:
        params, flags = run_stage("embedding", select_params, chunk, config)
    full = run_stage("embedding", embedding.takens_embed, chunk.samples, params)
    cloud = run_stage("subsample", embedding.subsample, full, config.subsample.target_points,
                   config.subsample.strategy, seed)
    pc = config.persistence
    diagram = run_stage("persistence", persistence.rips_persistence, cloud, pc.max_dim,
                     pc.max_filtration, pc.simplex_budget)
    values, dflags = run_stage("indicators", diagram_indicators, diagram, config.indicators)
    flags += dflags
    values["gyration_radius"] = embedding.gyration_radius(full)
    values["skewness"] = run_stage("statistics", skewness, chunk)
    values["excess_kurtosis"] = run_stage("statistics", kurtosis, chunk)
    spectrum = None
    sc = config.spectral
    if include_spectral and sc.enabled:
        spectrum = run_stage("spectral", spectral.fft_magnitude, chunk, sc.normalization)
        for i, band in enumerate(sc.peak_bands, start=1):
            peak = run_stage("spectral", spectral.dominant_peak, spectrum, band)
            values[f"peak{i}_freq_hz"] = peak.freq_hz
            values[f"peak{i}_height"] = peak.height
            values[f"peak{i}_width_hz"] = peak.width_hz
        if sc.band_rms:
            values["band_rms_demod"] = run_stage("spectral", spectral.band_rms_demodulated, chunk,
                                              sc.demod_band, sc.rms_band)
    provenance = {
        "timestamp": format_timestamp(chunk.timestamp),
        "sensor_id": chunk.sensor_id,
        "window": window,
        "tau": params.tau,
        "dim": params.dim,
        "n_points": cloud.n,
    }
    vector = IndicatorVector(values, provenance, tuple(flags))
    return ChunkAnalysis(vector, params, cloud, diagram, spectrum)


def indicator_vector(chunk: TimeSeriesChunk, config: PipelineConfig = PipelineConfig(),
                     seed: Optional[int] = None, params: Optional[EmbeddingParams] = None,
                     include_spectral: bool = True) -> IndicatorVector:
    """Indicator vector of one chunk; deterministic given ``(chunk, config, seed)``.

    Raises:
        StageError: labelled with the failing stage (embedding, subsample,
            persistence, indicators, statistics or spectral).
    """
    return analyze_chunk(chunk, config, params, seed, include_spectral).vector
