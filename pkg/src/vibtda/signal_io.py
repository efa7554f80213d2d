"""Vibration chunks: loading, writing, segmentation and synthetic test signals.

Synthetic signals use numpy's ``PCG64`` bit generator (``np.random.default_rng``),
so a ``(SignalSpec, seed)`` pair always produces the same samples.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FORMATS = ("csv", "raw_f32")


class ChunkFormatError(ValueError):
    """Malformed or invalid chunk file."""


def parse_timestamp(value) -> datetime:
    """Parse an ISO-8601 string (or pass a datetime through) as an aware UTC instant."""
    if isinstance(value, datetime):
        ts = value
    else:
        text = str(value).strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class TimeSeriesChunk:
    """One timestamped recording from one sensor."""

    samples: np.ndarray
    sample_rate_hz: float
    timestamp: datetime = EPOCH
    sensor_id: str = ""

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).reshape(-1)
        if x.size == 0:
            raise ValueError("chunk has no samples")
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise ValueError(f"non-finite sample at index {int(bad[0])}")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError("sample_rate_hz must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "timestamp", parse_timestamp(self.timestamp))

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate_hz

    def metadata(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "timestamp": format_timestamp(self.timestamp),
            "sensor_id": self.sensor_id,
        }


@dataclass(frozen=True)
class FailureLabel:
    kind: str
    failure_time: datetime

    def __post_init__(self):
        if self.kind not in ("BBF", "GTF"):
            raise ValueError(f"failure kind must be BBF or GTF, got {self.kind!r}")
        object.__setattr__(self, "failure_time", parse_timestamp(self.failure_time))


@dataclass(frozen=True)
class Dataset:
    chunks: tuple[TimeSeriesChunk, ...]
    failure_label: Optional[FailureLabel] = None

    def __post_init__(self):
        chunks = tuple(self.chunks)
        object.__setattr__(self, "chunks", chunks)
        for a, b in zip(chunks, chunks[1:]):
            if not b.timestamp > a.timestamp:
                raise ValueError(
                    f"chunk timestamps must be strictly increasing: {a.timestamp} then {b.timestamp}")

    def __len__(self) -> int:
        return len(self.chunks)

    def __iter__(self):
        return iter(self.chunks)


# --------------------------------------------------------------------------
# synthetic signals


@dataclass(frozen=True)
class ToneComponent:
    freq_hz: float
    amplitude: float = 1.0
    phase: float = 0.0


@dataclass(frozen=True)
class AmplitudeModulation:
    mod_freq_hz: float
    depth: float


@dataclass(frozen=True)
class FrequencyModulation:
    mod_freq_hz: float
    deviation_hz: float


@dataclass(frozen=True)
class SignalSpec:
    """Sum of tones with optional AM/FM and additive Gaussian noise."""

    components: tuple[ToneComponent, ...] = ()
    noise_std: float = 0.0
    am: Optional[AmplitudeModulation] = None
    fm: Optional[FrequencyModulation] = None
    duration_s: float = 10.0
    sample_rate_hz: float = 25600.0

    def __post_init__(self):
        comps = tuple(c if isinstance(c, ToneComponent) else ToneComponent(**c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if isinstance(self.am, dict):
            object.__setattr__(self, "am", AmplitudeModulation(**self.am))
        if isinstance(self.fm, dict):
            object.__setattr__(self, "fm", FrequencyModulation(**self.fm))
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise ValueError("duration_s and sample_rate_hz must be positive")
        nyquist = self.sample_rate_hz / 2
        dev = abs(self.fm.deviation_hz) if self.fm else 0.0
        for c in comps:
            if abs(c.freq_hz) + dev >= nyquist:
                raise ValueError(f"component at {c.freq_hz} Hz (+{dev} Hz deviation) violates "
                                 f"the Nyquist limit {nyquist} Hz")
        if self.am and self.am.mod_freq_hz >= nyquist:
            raise ValueError("AM frequency violates the Nyquist limit")
        if self.fm and self.fm.mod_freq_hz >= nyquist:
            raise ValueError("FM frequency violates the Nyquist limit")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    @classmethod
    def from_dict(cls, d: dict) -> "SignalSpec":
        d = dict(d)
        d["components"] = tuple(ToneComponent(**c) for c in d.get("components", ()))
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def synthesize(spec: SignalSpec, seed: int = 0, timestamp=EPOCH, sensor_id: str = "synthetic") -> TimeSeriesChunk:
    """Render ``spec`` into a chunk; bit-identical for identical ``(spec, seed)``."""
    n = spec.n_samples
    t = np.arange(n) / spec.sample_rate_hz
    x = np.zeros(n)
    fm_phase = 0.0
    if spec.fm is not None:
        # integral of 2*pi*deviation*sin(2*pi*fm*t)
        fm_phase = (spec.fm.deviation_hz / spec.fm.mod_freq_hz) * (
            1.0 - np.cos(2 * np.pi * spec.fm.mod_freq_hz * t))
    for c in spec.components:
        x += c.amplitude * np.sin(2 * np.pi * c.freq_hz * t + c.phase + fm_phase)
    if spec.am is not None:
        x *= 1.0 + spec.am.depth * np.sin(2 * np.pi * spec.am.mod_freq_hz * t)
    if spec.noise_std > 0:
        rng = np.random.default_rng(seed)
        x += rng.normal(0.0, spec.noise_std, n)
    return TimeSeriesChunk(x, spec.sample_rate_hz, timestamp, sensor_id)


# --------------------------------------------------------------------------
# file I/O


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _read_csv_samples(path: Path) -> np.ndarray:
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != 1:
                raise ChunkFormatError(f"{path}: row {lineno}: expected one value per row, got {len(row)}")
            text = row[0].strip()
            try:
                v = float(text)
            except ValueError:
                if lineno == 1 and not values:
                    continue  # header
                raise ChunkFormatError(f"{path}: row {lineno}: non-numeric value {text!r}") from None
            if not math.isfinite(v):
                raise ChunkFormatError(f"{path}: row {lineno}: non-finite value {text!r}")
            values.append(v)
    return np.array(values, dtype=np.float64)


def load_chunk(path: str | Path, format: str = "csv", sample_rate_hz: float | None = None,
               timestamp=None, sensor_id: str | None = None) -> TimeSeriesChunk:
    """Load samples from ``path``; metadata comes from arguments or the JSON sidecar.

    The sidecar lives next to the data file as ``<name>.json`` and holds
    ``sample_rate_hz``, ``timestamp`` and ``sensor_id``. Explicit arguments win.
    """
    path = Path(path)
    if format not in FORMATS:
        raise ChunkFormatError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise FileNotFoundError(f"chunk file not found: {path}")
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    if format == "csv":
        samples = _read_csv_samples(path)
    else:
        raw = path.read_bytes()
        if len(raw) % 4:
            raise ChunkFormatError(f"{path}: size {len(raw)} is not a multiple of 4 bytes")
        samples = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise ChunkFormatError(f"{path}: non-finite value at sample {int(bad[0])}")
    if samples.size == 0:
        raise ChunkFormatError(f"{path}: no samples")
    rate = sample_rate_hz if sample_rate_hz is not None else meta.get("sample_rate_hz")
    if rate is None:
        raise ChunkFormatError(f"{path}: sample rate not given and no sidecar provides it")
    ts = timestamp if timestamp is not None else meta.get("timestamp", EPOCH)
    sid = sensor_id if sensor_id is not None else meta.get("sensor_id", "")
    return TimeSeriesChunk(samples, float(rate), ts, sid)


def write_chunk(chunk: TimeSeriesChunk, path: str | Path, format: str = "raw_f32",
                sidecar: bool = True) -> Path:
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            for v in chunk.samples:
                fh.write(repr(float(v)) + "\n")
    elif format == "raw_f32":
        path.write_bytes(chunk.samples.astype("<f4").tobytes())
    else:
        raise ChunkFormatError(f"unknown format {format!r}")
    if sidecar:
        sidecar_path(path).write_text(json.dumps(chunk.metadata(), indent=2) + "\n")
    return path


def load_manifest(manifest, base_dir: str | Path = ".") -> Dataset:
    """Build a :class:`Dataset` from a manifest file path or an already-parsed dict.

    Each entry has a ``path`` (relative to the manifest's directory) and may
    carry ``format``, ``sample_rate_hz``, ``timestamp`` and ``sensor_id``;
    missing metadata falls back to the chunk's sidecar. Chunks are sorted by
    timestamp.
    """
    base = Path(base_dir)
    if not isinstance(manifest, dict):
        path = base / manifest
        if not path.exists():
            raise FileNotFoundError(f"manifest not found: {path}")
        base = path.parent
        manifest = json.loads(path.read_text())
    entries = manifest.get("chunks", [])
    if not entries:
        raise ValueError("no chunks")
    chunks = []
    for entry in entries:
        chunks.append(load_chunk(base / entry["path"], entry.get("format", "raw_f32"),
                                 entry.get("sample_rate_hz"), entry.get("timestamp"),
                                 entry.get("sensor_id")))
    chunks.sort(key=lambda c: c.timestamp)
    label = manifest.get("failure_label")
    return Dataset(tuple(chunks), FailureLabel(**label) if label else None)


# --------------------------------------------------------------------------
# segmentation


def segment_samples(chunk: TimeSeriesChunk, window_n: int, stride_n: int) -> list[TimeSeriesChunk]:
    """Complete windows of ``window_n`` samples every ``stride_n`` samples."""
    n = chunk.n_samples
    if window_n < 1 or stride_n < 1:
        raise ValueError("window and stride must cover at least one sample")
    if window_n > n:
        raise ValueError(f"window of {window_n} samples is longer than the chunk ({n} samples)")
    out = []
    for start in range(0, n - window_n + 1, stride_n):
        ts = chunk.timestamp + timedelta(seconds=start / chunk.sample_rate_hz)
        out.append(replace(chunk, samples=chunk.samples[start:start + window_n], timestamp=ts))
    return out


def segment(chunk: TimeSeriesChunk, window_s: float, stride_s: float) -> list[TimeSeriesChunk]:
    """Split ``chunk`` into overlapping windows; incomplete trailing windows are dropped."""
    if not window_s > 0 or not stride_s > 0:
        raise ValueError("window_s and stride_s must be positive")
    window_n = int(round(window_s * chunk.sample_rate_hz))
    stride_n = int(round(stride_s * chunk.sample_rate_hz))
    return segment_samples(chunk, window_n, stride_n)


def window_offsets(n_samples: int, window_n: int, stride_n: int) -> np.ndarray:
    return np.arange(0, n_samples - window_n + 1, stride_n)


def concatenate(chunks: Sequence[TimeSeriesChunk]) -> np.ndarray:
    return np.concatenate([c.samples for c in chunks])
