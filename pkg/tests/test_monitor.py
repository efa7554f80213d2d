import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vibtda.config import from_dict
from vibtda.embedding import EmbeddingParams
from vibtda.monitor import (
    PipelineError,
    build_report,
    fit_baseline,
    run_pipeline,
    score,
    sliding_window_indicators,
)
from vibtda.signal_io import Dataset, FrequencyModulation, SignalSpec, ToneComponent, synthesize

GEOMETRY_ONLY = from_dict({"windows": {"topology": False}})


def tone(fm=None, noise=0.0, seed=0, duration=1.0, ts="1970-01-01T00:00:00Z"):
    spec = SignalSpec((ToneComponent(1400.0),), noise_std=noise, fm=fm, duration_s=duration)
    return synthesize(spec, seed, timestamp=ts)


class TestBaseline:
    def test_identical_chunks(self):
        b = fit_baseline([{"a": 1.5}] * 3)
        assert b.stats["a"].std == 0
        row = score({"a": 1.6}, b, std_floor=1e-9)
        assert row.entries["a"].flag == "anomaly"

    def test_hand_values(self):
        b = fit_baseline([{"a": 1.0}, {"a": 2.0}, {"a": 3.0}])
        assert b.stats["a"].mean == 2.0
        assert b.stats["a"].std == pytest.approx(math.sqrt(2 / 3))
        assert b.stats["a"].n_chunks_used == 3

    def test_too_few(self):
        with pytest.raises(ValueError, match="needs 3"):
            fit_baseline([{"a": 1.0}, {"a": 2.0}], 3)
        with pytest.raises(ValueError):
            fit_baseline([{"a": 1.0}] * 3, 1)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8))
    def test_self_scores_bounded(self, values):
        k = len(values)
        rows = [{"a": v} for v in values]
        b = fit_baseline(rows, k)
        # the default floor only shrinks |z|; a tiny floor would expose underflow of subnormal spreads
        for r in rows:
            assert abs(score(r, b).entries["a"].z) <= math.sqrt(k - 1) + 1e-9

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=8), st.floats(0.01, 100), st.floats(-100, 100))
    def test_flags_affine_invariant(self, values, c, shift):
        rows = [{"a": v} for v in values]
        moved = [{"a": c * v + shift} for v in values]
        floor = 1e-300
        b1, b2 = fit_baseline(rows, 3), fit_baseline(moved, 3)
        if b1.stats["a"].std < 1e-6:
            return  # a vanishing spread makes z numerically meaningless
        for r, m in zip(rows, moved):
            assert score(r, b1, std_floor=floor).entries["a"].flag == \
                score(m, b2, std_floor=floor).entries["a"].flag


class TestScore:
    def setup_method(self):
        self.b = fit_baseline([{"a": 1.0}, {"a": 3.0}], 2)  # mean 2, std 1

    def test_mean_is_normal(self):
        e = score({"a": 2.0}, self.b).entries["a"]
        assert (e.z, e.flag) == (0.0, "normal")

    def test_warning(self):
        assert score({"a": 5.5}, self.b).entries["a"].flag == "warning"

    def test_anomaly(self):
        assert score({"a": -4.5}, self.b).entries["a"].flag == "anomaly"

    def test_unknown(self):
        with pytest.raises(KeyError, match="b"):
            score({"b": 1.0}, self.b)

    def test_thresholds_ordered(self):
        with pytest.raises(ValueError):
            score({"a": 1.0}, self.b, warning=7, anomaly=6)

    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_flags_monotone_in_abs_z(self, v1, v2):
        order = ["normal", "warning", "anomaly"]
        e1, e2 = score({"a": v1}, self.b).entries["a"], score({"a": v2}, self.b).entries["a"]
        if abs(e1.z) <= abs(e2.z):
            assert order.index(e1.flag) <= order.index(e2.flag)


class TestWindows:
    def test_stationary_dispersion_small(self):
        w = sliding_window_indicators(tone(), GEOMETRY_ONLY, EmbeddingParams(4, 2))
        assert w.std["gyration_radius"] < 0.02 * w.mean["gyration_radius"]
        assert len(w.vectors) == 399

    def test_fm_dispersion_large(self):
        p = EmbeddingParams(4, 2)
        st_ = sliding_window_indicators(tone(), GEOMETRY_ONLY, p)
        fm = sliding_window_indicators(tone(FrequencyModulation(3.0, 100.0)), GEOMETRY_ONLY, p)
        assert fm.std["gyration_radius"] >= 5 * st_.std["gyration_radius"]

    def test_two_windows_average(self):
        c = tone(noise=0.1, duration=0.01)
        cfg = from_dict({})
        w = sliding_window_indicators(c, cfg, EmbeddingParams(4, 2), window_s=0.005, stride_s=0.005)
        assert len(w.vectors) == 2
        for name in w.mean:
            assert w.mean[name] == pytest.approx((w.vectors[0][name] + w.vectors[1][name]) / 2)

    def test_default_stride_is_half_window(self):
        w = sliding_window_indicators(tone(duration=0.02), GEOMETRY_ONLY, EmbeddingParams(4, 2))
        np.testing.assert_allclose(np.diff(w.offsets_s), 0.0025)

    def test_max_windows(self):
        cfg = from_dict({"windows": {"topology": False, "max_windows": 10}})
        w = sliding_window_indicators(tone(), cfg, EmbeddingParams(4, 2))
        assert len(w.vectors) == 10 and w.offsets_s[0] == 0.0

    def test_window_longer_than_chunk(self):
        with pytest.raises(Exception, match="longer"):
            sliding_window_indicators(tone(duration=0.002), GEOMETRY_ONLY, EmbeddingParams(4, 2))


def scenario(noise=0.01):
    chunks = []
    for i in range(4):
        fm = FrequencyModulation(3.0, 100.0) if i == 3 else None
        chunks.append(tone(fm, noise, seed=i, ts=f"2023-10-0{i + 1}T00:00:00Z"))
    return Dataset(tuple(chunks))


FAST = {"windows": {"max_windows": 60}, "subsample": {"target_points": 200}}


@pytest.fixture(scope="module")
def result(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipe")
    return run_pipeline(from_dict(FAST), out_dir=out, dataset=scenario())


class TestPipeline:
    def test_outputs(self, result):
        out = result.out_dir
        assert {p.name for p in out.iterdir()} == {"indicators.csv", "windows.csv", "report.json", "diagrams"}
        assert len(list((out / "diagrams").iterdir())) == 4
        lines = (out / "indicators.csv").read_text().splitlines()
        assert len(lines) == 5 and "excess_kurtosis" in lines[0] and "win_std_gyration_radius" in lines[0]
        assert len((out / "windows.csv").read_text().splitlines()) == 1 + 4 * 60

    def test_last_chunk_flagged(self, result):
        last = result.report.rows[-1]
        assert abs(last.entries["max_persistence_H1"].z) >= 3
        assert abs(last.entries["win_std_gyration_radius"].z) >= 3
        for row in result.report.rows[:3]:
            assert row.max_abs_z() <= math.sqrt(2) + 1e-9

    def test_report_json(self, result):
        data = json.loads((result.out_dir / "report.json").read_text())
        assert data["config_hash"] == from_dict(FAST).hash()
        assert data["seed"] == 0
        assert data["chunks"][-1]["flagged"]

    def test_empty_manifest(self, tmp_path):
        with pytest.raises(PipelineError, match="no chunks"):
            run_pipeline(from_dict({"manifest": {"chunks": []}}), out_dir=tmp_path)

    def test_parallel_matches_serial(self, tmp_path):
        ds = Dataset(scenario().chunks)
        cfg = from_dict({"windows": {"max_windows": 5}, "subsample": {"target_points": 100}})
        run_pipeline(cfg, out_dir=tmp_path / "a", dataset=ds)
        run_pipeline(cfg.with_overrides(workers=2), out_dir=tmp_path / "b", dataset=ds)
        for name in ("indicators.csv", "windows.csv", "report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.xfail(strict=True, reason="at noise 0.05 the heuristic picks dim 5 and noise "
                                           "dominates the window-to-window gyration spread")
    def test_gyration_dispersion_flag_noisier(self, tmp_path):
        res = run_pipeline(from_dict(FAST), out_dir=tmp_path, dataset=scenario(noise=0.05))
        assert abs(res.report.rows[-1].entries["win_std_gyration_radius"].z) >= 3


def test_build_report_rescore_consistent():
    rows = [{"a": 1.0}, {"a": 3.0}, {"a": 10.0}]
    rep = build_report(rows, ["t0", "t1", "t2"], from_dict({"baseline": {"k_early": 2}}).baseline, "h", 1)
    assert [r.entries["a"].flag for r in rep.rows] == ["normal", "normal", "anomaly"]
    assert rep.baseline.fitted_on == ("t0", "t1")
