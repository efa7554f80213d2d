"""Batch pipeline: per-chunk and sliding-window indicators, baseline fit, scoring, reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import embedding, indicators, spectral
from .config import BaselineConfig, PipelineConfig, load_config
from .embedding import EmbeddingParams
from .indicators import IndicatorVector, StageError
from .signal_io import Dataset, TimeSeriesChunk, format_timestamp, load_manifest, segment_samples

FLAGS = ("normal", "warning", "anomaly")


class PipelineError(RuntimeError):
    """Pipeline failure; the message names the stage."""


# --------------------------------------------------------------------------
# baseline and scoring


@dataclass(frozen=True)
class IndicatorStats:
    mean: float
    std: float
    n_chunks_used: int


@dataclass(frozen=True)
class BaselineModel:
    stats: dict  # name -> IndicatorStats
    fitted_on: tuple = ()

    def to_json(self) -> dict:
        return {
            "fitted_on": list(self.fitted_on),
            "indicators": {k: {"mean": s.mean, "std": s.std, "n_chunks_used": s.n_chunks_used}
                           for k, s in self.stats.items()},
        }


def _values_of(v) -> Mapping[str, float]:
    return v.values if isinstance(v, IndicatorVector) else v


def fit_baseline(vectors: Sequence, k_early: int = 3) -> BaselineModel:
    """Mean and population std of every indicator over the first ``k_early`` vectors.

    ``vectors`` are :class:`IndicatorVector` objects (or plain name -> value
    mappings) in chronological order.
    """
    if k_early < 2:
        raise ValueError("k_early must be at least 2")
    if len(vectors) < k_early:
        raise ValueError(f"baseline needs {k_early} chunks, dataset has {len(vectors)}")
    early = [_values_of(v) for v in vectors[:k_early]]
    names = list(early[0])
    out = {}
    for name in names:
        vals = np.array([e[name] for e in early], dtype=float)
        out[name] = IndicatorStats(float(vals.mean()), float(vals.std()), k_early)
    stamps = tuple(v.provenance.get("timestamp", "") if isinstance(v, IndicatorVector) else ""
                   for v in vectors[:k_early])
    return BaselineModel(out, stamps)


@dataclass(frozen=True)
class ScoredEntry:
    value: float
    z: float
    flag: str


@dataclass(frozen=True)
class ScoredRow:
    timestamp: str
    entries: dict  # name -> ScoredEntry

    def flagged(self, level: str = "warning") -> list[str]:
        rank = FLAGS.index(level)
        return [k for k, e in self.entries.items() if FLAGS.index(e.flag) >= rank]

    def max_abs_z(self) -> float:
        return max((abs(e.z) for e in self.entries.values()), default=0.0)


def classify(z: float, warning: float = 3.0, anomaly: float = 6.0) -> str:
    if abs(z) >= anomaly:
        return "anomaly"
    if abs(z) >= warning:
        return "warning"
    return "normal"


def score(vector, baseline: BaselineModel, warning: float = 3.0, anomaly: float = 6.0,
          std_floor: float = 1e-9, timestamp: str | None = None) -> ScoredRow:
    """z-score every indicator against the baseline; ``std`` is floored at ``std_floor``."""
    if warning > anomaly:
        raise ValueError("warning threshold must not exceed the anomaly threshold")
    values = _values_of(vector)
    unknown = [k for k in values if k not in baseline.stats]
    if unknown:
        raise KeyError(f"indicators not in the baseline: {unknown}")
    entries = {}
    for name, value in values.items():
        s = baseline.stats[name]
        z = (value - s.mean) / max(s.std, std_floor)
        entries[name] = ScoredEntry(float(value), float(z), classify(z, warning, anomaly))
    if timestamp is None and isinstance(vector, IndicatorVector):
        timestamp = vector.provenance.get("timestamp", "")
    return ScoredRow(timestamp or "", entries)


@dataclass(frozen=True)
class HealthReport:
    rows: tuple
    baseline: BaselineModel
    config_hash: str
    seed: int
    thresholds: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "thresholds": self.thresholds,
            "baseline": self.baseline.to_json(),
            "chunks": [
                {
                    "timestamp": r.timestamp,
                    "max_abs_z": r.max_abs_z(),
                    "flagged": r.flagged(),
                    "indicators": {k: {"value": e.value, "z": e.z, "flag": e.flag}
                                   for k, e in r.entries.items()},
                }
                for r in self.rows
            ],
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(_finite_json(self.to_json()), indent=2) + "\n")


def _finite_json(obj):
    # JSON has no infinities; they only appear if a z-score overflows
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_json(v) for v in obj]
    return obj


def build_report(rows: Sequence[Mapping[str, float]], timestamps: Sequence[str],
                 cfg: BaselineConfig, config_hash: str, seed: int) -> HealthReport:
    baseline = fit_baseline(list(rows), cfg.k_early)
    baseline = BaselineModel(baseline.stats, tuple(timestamps[:cfg.k_early]))
    scored = tuple(score(r, baseline, cfg.warning, cfg.anomaly, cfg.std_floor, timestamp=t)
                   for r, t in zip(rows, timestamps))
    thresholds = {"warning": cfg.warning, "anomaly": cfg.anomaly, "std_floor": cfg.std_floor,
                  "k_early": cfg.k_early}
    return HealthReport(scored, baseline, config_hash, seed, thresholds)


# --------------------------------------------------------------------------
# sliding windows


@dataclass(frozen=True)
class WindowSummary:
    """Per-window indicator vectors with their across-window mean and std."""

    offsets_s: np.ndarray
    vectors: tuple
    mean: dict
    std: dict

    def summary_values(self) -> dict:
        out = {f"win_mean_{k}": v for k, v in self.mean.items()}
        out.update({f"win_std_{k}": v for k, v in self.std.items()})
        return out


def window_names(config: PipelineConfig) -> list[str]:
    names = indicators.GEOMETRY_NAMES
    if config.windows.topology:
        names = indicators.topological_names(config.persistence.max_dim) + names
    return list(names)


def _window_vector(win: TimeSeriesChunk, config: PipelineConfig, params: EmbeddingParams,
                   offset_s: float) -> IndicatorVector:
    if config.windows.topology:
        return indicators.analyze_chunk(win, config, params, include_spectral=False,
                                        window=offset_s).vector
    full = indicators.run_stage("embedding", embedding.takens_embed, win.samples, params)
    values = {
        "gyration_radius": embedding.gyration_radius(full),
        "skewness": indicators.run_stage("statistics", indicators.skewness, win),
        "excess_kurtosis": indicators.run_stage("statistics", indicators.kurtosis, win),
    }
    prov = {"timestamp": format_timestamp(win.timestamp), "sensor_id": win.sensor_id,
            "window": offset_s, "tau": params.tau, "dim": params.dim, "n_points": full.n}
    return IndicatorVector(values, prov)


def sliding_window_indicators(chunk: TimeSeriesChunk, config: PipelineConfig = PipelineConfig(),
                              params: Optional[EmbeddingParams] = None,
                              window_s: Optional[float] = None,
                              stride_s: Optional[float] = None) -> WindowSummary:
    """Indicators on overlapping windows, averaged, with their window-to-window std.

    The embedding parameters are shared by all windows (chosen on the whole
    chunk when not given). Spectral indicators are skipped because a 5 ms
    window cannot resolve them. ``windows.max_windows`` keeps an evenly spaced
    subset of the windows.
    """
    wc = config.windows
    window_s = wc.window_s if window_s is None else window_s
    if stride_s is None:
        stride_s = wc.stride_s if wc.stride_s is not None else window_s / 2
    if params is None:
        params, _ = indicators.run_stage("embedding", indicators.select_params, chunk, config)
    window_n = int(round(window_s * chunk.sample_rate_hz))
    stride_n = int(round(stride_s * chunk.sample_rate_hz))
    if window_n > chunk.n_samples:
        raise StageError("windows", ValueError(
            f"window of {window_n} samples is longer than the chunk ({chunk.n_samples} samples)"))
    if window_n < params.span + 2:
        raise StageError("windows", ValueError(
            f"window of {window_n} samples too short for tau={params.tau}, dim={params.dim}"))
    windows = segment_samples(chunk, window_n, stride_n)
    offsets = np.arange(len(windows)) * stride_n / chunk.sample_rate_hz
    if wc.max_windows is not None and len(windows) > wc.max_windows:
        keep = np.unique(np.linspace(0, len(windows) - 1, wc.max_windows).round().astype(int))
        windows = [windows[i] for i in keep]
        offsets = offsets[keep]
    vectors = tuple(_window_vector(w, config, params, float(o)) for w, o in zip(windows, offsets))
    names = vectors[0].names()
    table = np.array([[v[n] for n in names] for v in vectors])
    mean = dict(zip(names, map(float, table.mean(axis=0))))
    std = dict(zip(names, map(float, table.std(axis=0))))
    return WindowSummary(offsets, vectors, mean, std)


# --------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class ChunkResult:
    index: int
    vector: IndicatorVector
    windows: Optional[WindowSummary]
    diagram_csv: str
    spectrum: Optional[spectral.Spectrum]


def _diagram_text(diagram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", "birth", "death"])
    for p in diagram.pairs:
        w.writerow([p.dim, repr(p.birth), "inf" if p.essential else repr(p.death)])
    return buf.getvalue()


def _process_chunk(args) -> ChunkResult:
    index, chunk, config, params = args
    try:
        analysis = indicators.analyze_chunk(chunk, config, params)
        wins = None
        if config.windows.enabled:
            wins = sliding_window_indicators(chunk, config, params)
    except StageError as exc:
        raise PipelineError(f"chunk {index} ({format_timestamp(chunk.timestamp)}): {exc}") from exc
    return ChunkResult(index, analysis.vector, wins, _diagram_text(analysis.diagram), analysis.spectrum)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


META_COLUMNS = ["timestamp", "sensor_id", "window", "tau", "dim"]


@dataclass(frozen=True)
class PipelineResult:
    out_dir: Path
    report: HealthReport
    vectors: tuple
    params: EmbeddingParams


def run_pipeline(config: PipelineConfig | str | Path, seed: Optional[int] = None,
                 out_dir: str | Path | None = None,
                 dataset: Optional[Dataset] = None) -> PipelineResult:
    """Analyze every chunk of the manifest and write the report files.

    Writes ``indicators.csv`` (one row per chunk), ``windows.csv`` (one row per
    window), ``report.json`` (baseline, z-scores and flags) and
    ``diagrams/<index>.csv`` into ``out_dir``.

    The embedding parameters are selected once, on the first chunk, and reused
    for every chunk and window so indicators stay comparable over time.
    """
    if not isinstance(config, PipelineConfig):
        config = load_config(config)
    if seed is not None:
        config = config.with_overrides(seed=seed)
    out = Path(out_dir if out_dir is not None else Path(config.base_dir) / config.out_dir)

    if dataset is None:
        if config.manifest is None:
            raise PipelineError("[manifest] config has no manifest")
        try:
            dataset = load_manifest(config.manifest, config.base_dir)
        except (OSError, ValueError) as exc:
            raise PipelineError(f"[manifest] {exc}") from exc
    if len(dataset) == 0:
        raise PipelineError("[manifest] no chunks")
    if len(dataset) < config.baseline.k_early:
        raise PipelineError(f"[baseline] {len(dataset)} chunks, baseline needs "
                            f"k_early={config.baseline.k_early}")

    try:
        params, _ = indicators.select_params(dataset.chunks[0], config)
    except Exception as exc:  # noqa: BLE001
        raise PipelineError(f"[embedding] parameter selection on chunk 0: {exc}") from exc

    jobs = [(i, c, config, params) for i, c in enumerate(dataset.chunks)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_process_chunk, jobs))
    else:
        results = [_process_chunk(j) for j in jobs]
    results.sort(key=lambda r: r.index)

    rows = [dict(r.vector.values) for r in results]
    sc = config.spectral
    if sc.enabled:
        try:
            ref = spectral.mean_spectrum([r.spectrum for r in results[:config.baseline.k_early]])
            for r, row in zip(results, rows):
                row["fft_distance"] = spectral.spectral_distance(r.spectrum, ref, sc.distance_band)
        except ValueError as exc:
            raise PipelineError(f"[spectral] fft_distance: {exc}") from exc
    for r, row in zip(results, rows):
        if r.windows is not None:
            row.update(r.windows.summary_values())

    out.mkdir(parents=True, exist_ok=True)
    (out / "diagrams").mkdir(exist_ok=True)
    names = list(rows[0])
    header = META_COLUMNS + names
    table = []
    for r, row in zip(results, rows):
        p = r.vector.provenance
        table.append([p["timestamp"], p["sensor_id"], "full", p["tau"], p["dim"]]
                     + [row[n] for n in names])
        (out / "diagrams" / f"{r.index:04d}.csv").write_text(r.diagram_csv)
    _write_rows(out / "indicators.csv", header, table)

    if config.windows.enabled:
        wnames = window_names(config)
        wrows = []
        for r in results:
            for v in r.windows.vectors:
                wrows.append([r.vector.provenance["timestamp"], v.provenance["window"]]
                             + [v[n] for n in wnames])
        _write_rows(out / "windows.csv", ["timestamp", "offset_s"] + wnames, wrows)

    stamps = [r.vector.provenance["timestamp"] for r in results]
    try:
        report = build_report(rows, stamps, config.baseline, config.hash(), config.seed)
    except ValueError as exc:
        raise PipelineError(f"[baseline] {exc}") from exc
    report.write(out / "report.json")
    return PipelineResult(out, report, tuple(r.vector for r in results), params)


def read_indicators_csv(path: str | Path) -> tuple[list[str], list[dict]]:
    """Timestamps and indicator rows from an ``indicators.csv``."""
    stamps, rows = [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            stamps.append(rec["timestamp"])
            rows.append({k: float(v) for k, v in rec.items() if k not in META_COLUMNS})
    if not rows:
        raise PipelineError(f"[report] {path} holds no chunks")
    return stamps, rows


def rescore(indicators_csv: str | Path, cfg: BaselineConfig, config_hash: str = "",
            seed: int = 0) -> HealthReport:
    stamps, rows = read_indicators_csv(indicators_csv)
    try:
        return build_report(rows, stamps, cfg, config_hash, seed)
    except ValueError as exc:
        raise PipelineError(f"[baseline] {exc}") from exc
