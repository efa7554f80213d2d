import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vibtda.persistence import (
    PersistenceDiagram,
    PersistencePair,
    SimplexBudgetError,
    betti_curve,
    brute_force_persistence,
    distance_matrix,
    rips_persistence,
)

SQRT2 = math.sqrt(2)

small_clouds = st.integers(1, 8).flatmap(
    lambda n: st.integers(1, 4).flatmap(
        lambda d: hnp.arrays(np.float64, (n, d), elements=st.floats(-5, 5, width=16))))


def as_sorted(diagram):
    return sorted((p.dim, p.birth, p.death) for p in diagram.pairs)


class TestHandFiltrations:
    def test_unit_square(self, unit_square):
        dg = rips_persistence(unit_square, max_dim=2)
        h0 = dg.dimension(0)
        assert sorted(h0[:, 1].tolist()) == [1.0, 1.0, 1.0, math.inf]
        np.testing.assert_allclose(dg.dimension(1), [[1.0, SQRT2]], atol=1e-12)
        assert len(dg.dimension(2)) == 0

    def test_collinear(self):
        dg = rips_persistence(np.array([[0.0], [1.0], [3.0]]))
        assert sorted(dg.dimension(0)[:, 1].tolist()) == [1.0, 2.0, math.inf]
        assert len(dg.dimension(1)) == 0

    def test_single_point(self):
        dg = rips_persistence(np.zeros((1, 3)), max_dim=2)
        assert as_sorted(dg) == [(0, 0.0, math.inf)]

    def test_equilateral(self):
        pts = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
        assert len(rips_persistence(pts).dimension(1)) == 0

    def test_two_points(self):
        dg = brute_force_persistence(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert as_sorted(dg) == [(0, 0.0, 5.0), (0, 0.0, math.inf)]

    def test_brute_force_square(self, unit_square):
        assert as_sorted(brute_force_persistence(unit_square, 2)) == as_sorted(
            rips_persistence(unit_square, 2))

    def test_duplicate_points_dropped(self):
        dg = rips_persistence(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]))
        assert as_sorted(dg) == [(0, 0.0, 1.0), (0, 0.0, math.inf)]

    def test_octahedron_void(self):
        pts = np.vstack([np.eye(3), -np.eye(3)])
        dg = rips_persistence(pts, max_dim=2)
        np.testing.assert_allclose(dg.dimension(2), [[SQRT2, 2.0]])
        assert as_sorted(dg) == as_sorted(brute_force_persistence(pts, 2))


class TestOracle:
    @given(small_clouds, st.integers(0, 2))
    def test_equals_brute_force(self, pts, max_dim):
        assert as_sorted(rips_persistence(pts, max_dim)) == as_sorted(brute_force_persistence(pts, max_dim))

    @given(small_clouds, st.floats(0.0, 6.0))
    def test_equals_brute_force_capped(self, pts, cap):
        assert as_sorted(rips_persistence(pts, 2, cap)) == as_sorted(brute_force_persistence(pts, 2, cap))

    def test_brute_force_limit(self):
        with pytest.raises(ValueError, match="10"):
            brute_force_persistence(np.zeros((11, 2)))


class TestProperties:
    @given(hnp.arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 3)),
                      elements=st.floats(-10, 10, width=32)))
    def test_h0_counts(self, pts):
        dg = rips_persistence(pts, 0)
        h0 = dg.dimension(0)
        n_essential = int(np.isinf(h0[:, 1]).sum())
        n_distinct = len(np.unique(pts, axis=0))
        assert n_essential == 1
        assert len(h0) == n_distinct  # zero-length merges of duplicates are dropped

    @given(hnp.arrays(np.float64, (12, 2), elements=st.floats(-10, 10, width=32)),
           st.floats(0.1, 20.0))
    def test_scale_equivariance(self, pts, c):
        a = rips_persistence(pts, 1)
        b = rips_persistence(c * pts, 1)
        fa, fb = np.array(as_sorted(a), dtype=float), np.array(as_sorted(b), dtype=float)
        assert fa.shape == fb.shape
        np.testing.assert_allclose(fb[:, 1:], fa[:, 1:] * c, rtol=1e-9, atol=1e-9)

    @given(st.integers(0, 10 ** 6), st.floats(0.2, 1.5), st.floats(0.0, 1.5))
    def test_cap_monotonicity(self, seed, cap, extra):
        pts = np.random.default_rng(seed).uniform(size=(25, 2))
        low = rips_persistence(pts, 1, cap)
        high = rips_persistence(pts, 1, cap + extra)
        for k in (0, 1):
            old = {tuple(r) for r in low.dimension(k) if np.isfinite(r[1]) and r[1] < cap}
            new = {tuple(r) for r in high.dimension(k)}
            assert old <= new

    def test_budget(self, rng):
        with pytest.raises(SimplexBudgetError, match="subsample"):
            rips_persistence(rng.normal(size=(60, 2)), 2, simplex_budget=1000)
        with pytest.raises(SimplexBudgetError):
            rips_persistence(rng.normal(size=(60, 2)), 1, simplex_budget=100)

    def test_cap_respected(self, rng):
        dg = rips_persistence(rng.normal(size=(40, 2)), 1, 0.5)
        finite = [p for p in dg.pairs if not p.essential]
        assert all(p.death <= 0.5 for p in finite)
        assert dg.max_filtration == 0.5

    def test_auto_cap_is_diameter(self, rng):
        pts = rng.normal(size=(30, 3))
        assert rips_persistence(pts).max_filtration == distance_matrix(pts).max()


class TestDiagram:
    def test_pair_invariant(self):
        with pytest.raises(ValueError):
            PersistencePair(1, 1.0, 1.0)

    def test_finite_intervals(self):
        dg = PersistenceDiagram((PersistencePair(0, 0.0, math.inf), PersistencePair(0, 0.0, 1.0)), 1, 2.0)
        np.testing.assert_array_equal(dg.finite_intervals(0, "cap"), [[0, 1], [0, 2]])
        np.testing.assert_array_equal(dg.finite_intervals(0, "drop"), [[0, 1]])
        assert dg.d_max(0) == 1.0 and dg.d_max(1) == 0.0

    def test_csv_round_trip(self, tmp_path, unit_square):
        dg = rips_persistence(unit_square, 1)
        dg.write_csv(tmp_path / "d.csv")
        assert "inf" in (tmp_path / "d.csv").read_text()
        back = PersistenceDiagram.read_csv(tmp_path / "d.csv", 1, dg.max_filtration)
        assert back == dg


class TestBetti:
    def test_square_at_1_2(self, unit_square):
        dg = rips_persistence(unit_square, 1)
        assert (dg.betti(0, 1.2), dg.betti(1, 1.2)) == (1, 1)

    def test_curve_at_zero(self, rng):
        dg = rips_persistence(rng.normal(size=(15, 2)), 1)
        assert betti_curve(dg, 0).counts[0] == 15
        assert betti_curve(dg, 1).counts[0] == 0

    def test_half_open_and_essential(self):
        dg = PersistenceDiagram((PersistencePair(0, 0.0, math.inf), PersistencePair(1, 1.0, 2.0)), 1, 4.0)
        c1 = betti_curve(dg, 1, 5)
        np.testing.assert_array_equal(c1.grid, [0, 1, 2, 3, 4])
        np.testing.assert_array_equal(c1.counts, [0, 1, 0, 0, 0])
        np.testing.assert_array_equal(betti_curve(dg, 0, 5).counts, [1, 1, 1, 1, 1])

    def test_grid_size(self, unit_square):
        with pytest.raises(ValueError):
            betti_curve(rips_persistence(unit_square), 1, 1)
