"""Frequency-domain indicators: spectra, band peaks, spectral distance, envelope RMS."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal

from .signal_io import TimeSeriesChunk

NORMALIZATIONS = ("amplitude", "counts")

# frequency ranges tracked for dominant peaks
DEFAULT_PEAK_BANDS = ((1000.0, 1800.0), (1800.0, 2300.0), (2300.0, 3000.0))


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum.

    ``amplitude`` magnitudes are sinusoid amplitudes (a unit sine gives a peak
    of 1); ``counts`` magnitudes are the raw DFT moduli.
    """

    freqs_hz: np.ndarray
    magnitudes: np.ndarray
    normalization: str
    n_samples: int
    sample_rate_hz: float

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.freqs_hz.shape != self.magnitudes.shape:
            raise ValueError("freqs and magnitudes must have equal length")

    @property
    def resolution_hz(self) -> float:
        return self.sample_rate_hz / self.n_samples

    def energy(self) -> float:
        """Sum of squared time samples recovered from the magnitudes (Parseval)."""
        n = self.n_samples
        w = np.full(self.magnitudes.size, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        if self.normalization == "counts":
            return float(np.sum(w * self.magnitudes ** 2) / n)
        # amplitude: interior bins were doubled
        w = np.where(w == 2.0, 0.5, 1.0)
        return float(n * np.sum(w * self.magnitudes ** 2))

    def band_mask(self, band: "Band") -> np.ndarray:
        return (self.freqs_hz >= band.lo_hz) & (self.freqs_hz <= band.hi_hz)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "magnitude"])
            for f, m in zip(self.freqs_hz, self.magnitudes):
                w.writerow([repr(float(f)), repr(float(m))])


@dataclass(frozen=True)
class Band:
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not 0 <= self.lo_hz < self.hi_hz:
            raise ValueError(f"invalid band [{self.lo_hz}, {self.hi_hz}]")

    @classmethod
    def of(cls, band) -> "Band":
        return band if isinstance(band, Band) else cls(float(band[0]), float(band[1]))


@dataclass(frozen=True)
class PeakFeature:
    freq_hz: float
    height: float
    width_hz: float


@dataclass(frozen=True)
class Spectrogram:
    times_s: np.ndarray
    freqs_hz: np.ndarray
    magnitudes: np.ndarray  # (n_bins, n_windows)

    def write_csv(self, path: str | Path) -> None:
        """Rows are windows (time), columns are frequency bins."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s"] + [repr(float(f)) for f in self.freqs_hz])
            for t, col in zip(self.times_s, self.magnitudes.T):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in col])


def _magnitudes(x: np.ndarray, normalization: str) -> np.ndarray:
    n = x.size
    mag = np.abs(np.fft.rfft(x))
    if normalization == "counts":
        return mag
    if normalization != "amplitude":
        raise ValueError(f"unknown normalization {normalization!r}")
    mag = mag / n
    stop = mag.size - 1 if n % 2 == 0 else mag.size
    mag[1:stop] *= 2.0
    return mag


def fft_magnitude(chunk: TimeSeriesChunk, normalization: str = "amplitude") -> Spectrum:
    """One-sided magnitude spectrum with bin spacing ``rate / N``."""
    x = chunk.samples
    freqs = np.fft.rfftfreq(x.size, d=1.0 / chunk.sample_rate_hz)
    return Spectrum(freqs, _magnitudes(x, normalization), normalization, x.size, chunk.sample_rate_hz)


def _crossing(mag: np.ndarray, freqs: np.ndarray, peak: int, level: float, step: int, edge: int) -> float:
    """Frequency where ``mag`` first drops below ``level`` walking from ``peak``."""
    i = peak
    while i != edge:
        nxt = i + step
        if mag[nxt] < level:
            # linear interpolation between i and nxt
            frac = (mag[i] - level) / (mag[i] - mag[nxt])
            return float(freqs[i] + frac * (freqs[nxt] - freqs[i]))
        i = nxt
    return float(freqs[edge])


def dominant_peak(spectrum: Spectrum, band) -> PeakFeature:
    """Largest in-band bin, with its full width at half prominence.

    Ties go to the lowest frequency. Prominence is measured inside the band,
    and the width is clipped to the first/last in-band bins.
    """
    band = Band.of(band)
    nyquist = spectrum.sample_rate_hz / 2
    if band.hi_hz > nyquist + 1e-9:
        raise ValueError(f"band upper edge {band.hi_hz} Hz exceeds Nyquist {nyquist} Hz")
    idx = np.flatnonzero(spectrum.band_mask(band))
    if idx.size < 3:
        raise ValueError(f"band [{band.lo_hz}, {band.hi_hz}] Hz holds {idx.size} bins; need at least 3")
    mag = spectrum.magnitudes[idx]
    freqs = spectrum.freqs_hz[idx]
    p = int(np.argmax(mag))
    height = float(mag[p])
    prominence = height - max(mag[:p + 1].min(), mag[p:].min())
    level = height - prominence / 2
    left = _crossing(mag, freqs, p, level, -1, 0)
    right = _crossing(mag, freqs, p, level, +1, mag.size - 1)
    return PeakFeature(float(freqs[p]), height, right - left)


def spectral_distance(s: Spectrum, baseline: Spectrum, band) -> float:
    """Euclidean distance between magnitude vectors over the bins in ``band``."""
    if s.normalization != baseline.normalization:
        raise ValueError("spectra use different normalizations")
    if s.freqs_hz.shape != baseline.freqs_hz.shape or not np.array_equal(s.freqs_hz, baseline.freqs_hz):
        raise ValueError("spectra are on different frequency grids")
    mask = s.band_mask(Band.of(band))
    return float(np.linalg.norm(s.magnitudes[mask] - baseline.magnitudes[mask]))


def mean_spectrum(spectra: Sequence[Spectrum]) -> Spectrum:
    """Bin-wise mean of spectra sharing a grid (used as the early-life reference)."""
    first = spectra[0]
    for s in spectra[1:]:
        if not np.array_equal(s.freqs_hz, first.freqs_hz) or s.normalization != first.normalization:
            raise ValueError("spectra are on different frequency grids")
    mags = np.mean([s.magnitudes for s in spectra], axis=0)
    return Spectrum(first.freqs_hz, mags, first.normalization, first.n_samples, first.sample_rate_hz)


def envelope_spectrum(chunk: TimeSeriesChunk, band=(500.0, 2000.0), order: int = 4) -> Spectrum:
    """Amplitude spectrum of the analytic-signal envelope of the band-passed chunk."""
    band = Band.of(band)
    sos = signal.butter(order, [band.lo_hz, band.hi_hz], btype="bandpass",
                        fs=chunk.sample_rate_hz, output="sos")
    filtered = signal.sosfiltfilt(sos, chunk.samples)
    env = np.abs(signal.hilbert(filtered))
    freqs = np.fft.rfftfreq(env.size, d=1.0 / chunk.sample_rate_hz)
    return Spectrum(freqs, _magnitudes(env, "amplitude"), "amplitude", env.size, chunk.sample_rate_hz)


def band_rms_demodulated(chunk: TimeSeriesChunk, demod_band=(500.0, 2000.0),
                         rms_band=(1.0, 150.0), order: int = 4) -> float:
    """RMS of the envelope content between 1 and 150 Hz after 500-2000 Hz demodulation.

    The band-pass is a zero-phase (forward-backward) Butterworth filter.
    """
    if chunk.sample_rate_hz <= 4000:
        raise ValueError("band_rms_demodulated needs a sample rate above 4 kHz")
    if chunk.duration_s < 1.0:
        raise ValueError("band_rms_demodulated needs at least 1 s of signal for 1 Hz resolution")
    spec = envelope_spectrum(chunk, demod_band, order)
    mask = spec.band_mask(Band.of(rms_band))
    # a sinusoid of amplitude a has RMS a / sqrt(2)
    return float(np.sqrt(np.sum(spec.magnitudes[mask] ** 2) / 2.0))


def spectrogram(chunk: TimeSeriesChunk, window_s: float = 0.25, overlap_fraction: float = 0.5,
                normalization: str = "amplitude") -> Spectrogram:
    """Short-time magnitude spectra of Hann-windowed segments.

    Column ``t`` equals :func:`fft_magnitude` of segment ``t`` times the window.
    ``times_s`` are segment centres relative to the chunk start.
    """
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must be in [0, 1)")
    n_win = int(round(window_s * chunk.sample_rate_hz))
    if n_win < 1:
        raise ValueError("window too short")
    if n_win > chunk.n_samples:
        raise ValueError("spectrogram window longer than the chunk")
    hop = max(1, int(round(n_win * (1 - overlap_fraction))))
    starts = np.arange(0, chunk.n_samples - n_win + 1, hop)
    window = signal.windows.hann(n_win, sym=False)
    segs = np.lib.stride_tricks.sliding_window_view(chunk.samples, n_win)[starts] * window
    cols = np.stack([_magnitudes(s, normalization) for s in segs], axis=1)
    freqs = np.fft.rfftfreq(n_win, d=1.0 / chunk.sample_rate_hz)
    times = (starts + n_win / 2) / chunk.sample_rate_hz
    return Spectrogram(times, freqs, cols)
