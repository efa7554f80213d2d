import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vibtda.signal_io import (
    ChunkFormatError,
    Dataset,
    FailureLabel,
    FrequencyModulation,
    SignalSpec,
    TimeSeriesChunk,
    ToneComponent,
    concatenate,
    load_chunk,
    load_manifest,
    segment,
    segment_samples,
    synthesize,
    write_chunk,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, width=32)


class TestChunk:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="index 1"):
            TimeSeriesChunk([0.0, np.nan], 10.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="no samples"):
            TimeSeriesChunk([], 10.0)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            TimeSeriesChunk([1.0], 0.0)

    def test_samples_read_only(self):
        c = TimeSeriesChunk([1.0, 2.0], 10.0)
        with pytest.raises(ValueError):
            c.samples[0] = 3.0

    def test_dataset_requires_increasing_timestamps(self):
        a = TimeSeriesChunk([1.0], 1.0, "2023-01-01T00:00:00Z")
        b = TimeSeriesChunk([1.0], 1.0, "2023-01-01T00:00:00Z")
        with pytest.raises(ValueError, match="strictly increasing"):
            Dataset((a, b))

    def test_failure_label_may_precede_last_chunk(self):
        a = TimeSeriesChunk([1.0], 1.0, "2023-01-01T00:00:00Z")
        label = FailureLabel("GTF", "2022-12-31T00:00:00Z")
        assert Dataset((a,), label).failure_label.kind == "GTF"
        with pytest.raises(ValueError):
            FailureLabel("XYZ", "2022-12-31T00:00:00Z")


class TestLoad:
    def test_csv_three_rows(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("0.0\n1.0\n0.0\n")
        c = load_chunk(p, "csv", sample_rate_hz=100.0)
        assert c.n_samples == 3
        np.testing.assert_array_equal(c.samples, [0.0, 1.0, 0.0])

    def test_csv_header_allowed(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("accel\n0.5\n-0.5\n")
        np.testing.assert_array_equal(load_chunk(p, "csv", 10.0).samples, [0.5, -0.5])

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("")
        with pytest.raises(ChunkFormatError, match="no samples"):
            load_chunk(p, "csv", 100.0)

    def test_nan_row_named(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("0.0\nNaN\n1.0\n")
        with pytest.raises(ChunkFormatError, match="row 2"):
            load_chunk(p, "csv", 100.0)

    def test_non_numeric_row_named(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("0.0\n1.0\nabc\n")
        with pytest.raises(ChunkFormatError, match="row 3"):
            load_chunk(p, "csv", 100.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_chunk(tmp_path / "nope.csv", "csv", 100.0)

    def test_rate_required(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("1.0\n")
        with pytest.raises(ChunkFormatError, match="sample rate"):
            load_chunk(p, "csv")

    def test_sidecar_metadata(self, tmp_path):
        c = TimeSeriesChunk([1.0, 2.0, 3.0], 512.0, "2023-10-08T12:00:00Z", "gbx1")
        path = write_chunk(c, tmp_path / "x.f32")
        back = load_chunk(path, "raw_f32")
        assert back.sample_rate_hz == 512.0
        assert back.sensor_id == "gbx1"
        assert back.timestamp == c.timestamp

    @given(hnp.arrays(np.float32, st.integers(1, 200), elements=finite))
    def test_raw_f32_round_trip(self, tmp_path_factory, values):
        d = tmp_path_factory.mktemp("rt")
        c = TimeSeriesChunk(values.astype(np.float64), 1000.0)
        back = load_chunk(write_chunk(c, d / "c.f32"), "raw_f32")
        assert back.samples.tobytes() == c.samples.tobytes()

    def test_csv_round_trip(self, tmp_path, rng):
        c = TimeSeriesChunk(rng.normal(size=50), 100.0)
        back = load_chunk(write_chunk(c, tmp_path / "c.csv", "csv"), "csv")
        np.testing.assert_array_equal(back.samples, c.samples)

    def test_manifest_sorted_and_labelled(self, tmp_path):
        for i, ts in enumerate(["2023-01-02T00:00:00Z", "2023-01-01T00:00:00Z"]):
            write_chunk(TimeSeriesChunk([float(i), 1.0], 10.0, ts), tmp_path / f"c{i}.f32")
        manifest = {"chunks": [{"path": "c0.f32"}, {"path": "c1.f32"}],
                    "failure_label": {"kind": "BBF", "failure_time": "2023-01-05T00:00:00Z"}}
        (tmp_path / "m.json").write_text(json.dumps(manifest))
        ds = load_manifest("m.json", tmp_path)
        assert [c.samples[0] for c in ds] == [1.0, 0.0]
        assert ds.failure_label.kind == "BBF"

    def test_manifest_empty(self):
        with pytest.raises(ValueError, match="no chunks"):
            load_manifest({"chunks": []})


class TestSynthesize:
    def test_unit_tone_bound(self):
        c = synthesize(SignalSpec((ToneComponent(1400.0),)))
        assert c.n_samples == 256000
        assert np.max(np.abs(c.samples)) <= 1 + 1e-12

    def test_empty_spec_is_zero(self):
        c = synthesize(SignalSpec((), 0.0, duration_s=0.1))
        assert not np.any(c.samples)

    def test_deterministic(self):
        spec = SignalSpec((ToneComponent(1400.0, 1.0, 0.3),), noise_std=0.2, duration_s=0.5)
        assert synthesize(spec, 7).samples.tobytes() == synthesize(spec, 7).samples.tobytes()
        assert synthesize(spec, 7).samples.tobytes() != synthesize(spec, 8).samples.tobytes()

    def test_tone_formula(self):
        spec = SignalSpec((ToneComponent(50.0, 2.0, 0.5),), duration_s=0.1, sample_rate_hz=1000.0)
        t = np.arange(100) / 1000.0
        np.testing.assert_allclose(synthesize(spec).samples, 2.0 * np.sin(2 * np.pi * 50 * t + 0.5))

    def test_fm_instantaneous_frequency(self):
        spec = SignalSpec((ToneComponent(1000.0),), fm=FrequencyModulation(3.0, 100.0),
                          duration_s=1.0, sample_rate_hz=25600.0)
        x = synthesize(spec).samples
        # phase derivative of the analytic signal recovers freq + deviation * sin(2 pi fm t)
        from scipy.signal import hilbert
        inst = np.diff(np.unwrap(np.angle(hilbert(x)))) * 25600.0 / (2 * np.pi)
        t = (np.arange(x.size - 1) + 0.5) / 25600.0
        expected = 1000.0 + 100.0 * np.sin(2 * np.pi * 3.0 * t)
        mid = slice(2000, -2000)
        assert np.max(np.abs(inst[mid] - expected[mid])) < 1.0

    def test_nyquist(self):
        with pytest.raises(ValueError, match="Nyquist"):
            SignalSpec((ToneComponent(600.0),), sample_rate_hz=1000.0)
        with pytest.raises(ValueError, match="Nyquist"):
            SignalSpec((ToneComponent(450.0),), fm=FrequencyModulation(1.0, 60.0), sample_rate_hz=1000.0)

    def test_spec_dict_round_trip(self):
        spec = SignalSpec((ToneComponent(10.0, 1.0, 0.0),), noise_std=0.1,
                          fm=FrequencyModulation(3.0, 5.0), duration_s=1.0, sample_rate_hz=100.0)
        assert SignalSpec.from_dict(spec.to_dict()) == spec


class TestSegment:
    def test_index_arithmetic(self):
        c = TimeSeriesChunk(np.arange(10.0), 1.0)
        wins = segment_samples(c, 4, 2)
        assert [w.samples[0] for w in wins] == [0, 2, 4, 6]
        assert all(w.n_samples == 4 for w in wins)

    def test_full_window(self):
        c = TimeSeriesChunk(np.arange(10.0), 1.0)
        (w,) = segment(c, 10.0, 1.0)
        np.testing.assert_array_equal(w.samples, c.samples)

    def test_5ms_window(self):
        c = TimeSeriesChunk(np.zeros(2560), 25600.0)
        assert {w.n_samples for w in segment(c, 0.005, 0.0025)} == {128}

    def test_timestamps_offset(self):
        c = TimeSeriesChunk(np.arange(10.0), 2.0, "2023-01-01T00:00:00Z")
        wins = segment(c, 2.0, 1.0)
        assert (wins[1].timestamp - wins[0].timestamp).total_seconds() == 1.0

    def test_window_too_long(self):
        with pytest.raises(ValueError, match="longer"):
            segment(TimeSeriesChunk(np.zeros(5), 1.0), 6.0, 1.0)

    @given(st.integers(1, 300), st.integers(1, 50))
    def test_reconstructs_prefix(self, n, w):
        c = TimeSeriesChunk(np.arange(n, dtype=float), 1.0)
        if w > n:
            return
        joined = concatenate(segment_samples(c, w, w))
        np.testing.assert_array_equal(joined, c.samples[:joined.size])
        assert joined.size == (n // w) * w
