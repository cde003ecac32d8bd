import itertools
import math

import numpy as np
import pytest

from exactquad.errors import (
    InfeasibleCombinationError,
    RankDeficiencyError,
    SchemaError,
)
from exactquad.hull import (
    ConvexCombination,
    CurveSystem,
    build_frame,
    caratheodory_finite,
    coords,
    first_zero_crossing,
    polish_combination,
    reduce_on_curve,
)
from exactquad.measure import IntervalSpec


def reconstruction_gap(comb, points_of):
    pts = points_of(comb.params)
    return comb.weights @ pts, comb.total


class TestConvexCombination:
    def test_validates_monotone_params(self):
        with pytest.raises(SchemaError):
            ConvexCombination(params=np.array([0.5, 0.5]),
                              weights=np.array([0.5, 0.5]), total=1.0)

    def test_validates_weight_sum(self):
        with pytest.raises(SchemaError):
            ConvexCombination(params=np.array([0.0, 1.0]),
                              weights=np.array([0.5, 0.6]), total=1.0)

    def test_clips_roundoff_negatives(self):
        comb = ConvexCombination(params=np.array([0.0, 1.0]),
                                 weights=np.array([1.0, -1e-13]), total=1.0)
        assert comb.weights[1] == 0.0


class TestCaratheodoryFinite:
    def test_square_center(self):
        pts = np.array([[0., 0.], [1., 0.], [0., 1.], [1., 1.]])
        target = np.array([0.5, 0.5])
        comb = caratheodory_finite(pts, np.full(4, 0.25), target)
        assert len(comb) <= 3
        kept = comb.params.astype(int)
        recon = comb.weights @ pts[kept] / comb.total
        assert np.max(np.abs(recon - target)) <= 1e-9 * 1.5
        # oracle: brute force over 3-subsets confirms a feasible triple exists
        feasible = False
        for subset in itertools.combinations(range(4), 3):
            a = np.vstack([pts[list(subset)].T, np.ones(3)])
            try:
                w = np.linalg.solve(a, np.array([0.5, 0.5, 1.0]))
            except np.linalg.LinAlgError:
                continue
            if np.all(w >= -1e-12):
                feasible = True
        assert feasible

    def test_identity_single_point(self):
        pts = np.array([[0.3, 0.7]])
        comb = caratheodory_finite(pts, np.array([1.0]), pts[0])
        assert len(comb) == 1 and comb.weights[0] == pytest.approx(1.0)

    def test_collinear_reduces_to_pair(self):
        pts = np.array([[i, 2.0 * i] for i in range(5)], dtype=float)
        w = np.array([0.1, 0.2, 0.3, 0.2, 0.2])
        target = w @ pts / w.sum()
        comb = caratheodory_finite(pts, w, target)
        assert len(comb) <= 2
        kept = comb.params.astype(int)
        recon = comb.weights @ pts[kept] / comb.total
        assert np.max(np.abs(recon - target)) <= 1e-9 * (1 + np.max(np.abs(target)))
        # oracle: the 1-d affine hull admits a reproducing pair
        best = math.inf
        for i, j in itertools.combinations(range(5), 2):
            a = np.vstack([pts[[i, j]].T, np.ones(2)])
            wij, res, *_ = np.linalg.lstsq(a, np.array([*target, 1.0]), rcond=None)
            if np.all(wij >= -1e-12):
                best = min(best, np.max(np.abs(a @ wij - np.array([*target, 1.0]))))
        assert best <= 1e-9

    def test_large_input_prunes(self):
        rng = np.random.default_rng(3)
        ts = np.linspace(0, 1, 500)
        pts = np.column_stack([ts, ts**2, np.sin(ts)])
        w = rng.uniform(0.1, 1.0, 500)
        target = w @ pts / w.sum()
        comb = caratheodory_finite(pts, w, target, params=ts)
        assert len(comb) <= 4
        assert np.all(np.diff(comb.params) > 0)

    def test_infeasible_input_rejected(self):
        pts = np.array([[0.0], [1.0]])
        with pytest.raises(InfeasibleCombinationError):
            caratheodory_finite(pts, np.array([0.5, 0.5]), np.array([2.0]))

    def test_weight_total_conserved(self):
        pts = np.array([[0., 0.], [1., 0.], [0., 1.], [1., 1.]])
        w = np.array([1.0, 2.0, 3.0, 4.0])
        comb = caratheodory_finite(pts, w, w @ pts / w.sum())
        assert math.fsum(comb.weights) == pytest.approx(10.0, rel=1e-12)


class TestFrame:
    def test_identity_frame(self):
        frame = build_frame(np.zeros(2), np.eye(2))
        x = np.array([0.3, 0.7])
        assert coords(frame, x) == pytest.approx([0.3, 0.7], abs=1e-14)

    def test_shifted_frame(self):
        frame = build_frame(np.array([1.0, 1.0]),
                            np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert coords(frame, np.zeros(2)) == pytest.approx([-1.0, -1.0])

    def test_rank_deficiency(self):
        with pytest.raises(RankDeficiencyError):
            build_frame(np.zeros(2), np.array([[1.0, 0.0], [2.0, 0.0]]))

    def test_basis_point_coordinates(self):
        # x(t_j) maps to the j-th unit coordinate, the origin to zero
        points = np.array([[1.0, 2.0], [3.0, -1.0]])
        v = np.array([0.5, 0.25])
        frame = build_frame(v, points)
        assert coords(frame, v) == pytest.approx([0.0, 0.0], abs=1e-14)
        assert coords(frame, points[0]) == pytest.approx([1.0, 0.0], abs=1e-12)
        assert coords(frame, points[1]) == pytest.approx([0.0, 1.0], abs=1e-12)

    def test_first_support_point_coords_are_negative_weight_ratios(self):
        # with v = sum(nu_j x(t_j)), the coordinates of x(t_0) - v in the
        # frame of x(t_1)..x(t_n) equal -nu_j / nu_0
        curve = CurveSystem.from_texts(["t", "t^2"], IntervalSpec(0, 1))
        ts = np.array([0.1, 0.4, 0.9])
        nu = np.array([0.25, 0.35, 0.40])
        x = curve.evaluate(ts)
        v = nu @ x
        frame = build_frame(v, x[1:])
        p0 = coords(frame, x[0])
        assert p0 == pytest.approx(-nu[1:] / nu[0], rel=1e-9)
        assert np.all(p0 < 0)

    def test_batched_coords(self):
        frame = build_frame(np.zeros(2), np.eye(2))
        batch = np.array([[0.1, 0.2], [0.3, 0.4]])
        assert coords(frame, batch) == pytest.approx(batch)


class TestFirstZeroCrossing:
    def test_affine_crossing(self):
        curve = CurveSystem.from_texts(["t-0.3", "t-1.5"], IntervalSpec(0, 1))
        frame = build_frame(np.zeros(2), np.eye(2))
        t_bar, k = first_zero_crossing(frame, curve, 0.0, 1.0)
        assert t_bar == pytest.approx(0.3, abs=1e-12)
        assert k == 0

    def test_crossing_at_t_stop(self):
        curve = CurveSystem.from_texts(["t-1"], IntervalSpec(0, 1))
        frame = build_frame(np.zeros(1), np.array([[1.0]]))
        t_bar, k = first_zero_crossing(frame, curve, 0.0, 1.0)
        assert t_bar == pytest.approx(1.0, abs=1e-12)
        assert k == 0

    def test_moment_curve_against_dense_grid(self):
        curve = CurveSystem.from_texts(["t", "t^2"], IntervalSpec(0, 1))
        ts = np.array([0.05, 0.5, 0.95])
        nu = np.array([0.3, 0.4, 0.3])
        x = curve.evaluate(ts)
        v = nu @ x
        frame = build_frame(v, x[1:])
        t_bar, _ = first_zero_crossing(frame, curve, ts[0], ts[1])
        # oracle: brute-force scan of the coordinate maximum at 1e6 points
        grid = np.linspace(ts[0], ts[1], 10**6 + 1)
        g = coords(frame, curve.evaluate(grid)).max(axis=1)
        first = int(np.flatnonzero(g >= 0.0)[0])
        assert abs(t_bar - grid[first]) <= 2e-6


class TestReduceOnCurve:
    def test_scalar_mean_value(self):
        curve = CurveSystem.from_texts(["t^2"], IntervalSpec(0, 1))
        comb = ConvexCombination(params=np.array([0.2, 0.8]),
                                 weights=np.array([0.5, 0.5]), total=1.0)
        v = np.array([0.5 * 0.04 + 0.5 * 0.64])
        out = reduce_on_curve(curve, comb, v)
        assert len(out) == 1
        # the single node is the intermediate-value point of x1
        assert float(out.params[0]) == pytest.approx(math.sqrt(v[0]), abs=1e-9)
        assert out.weights[0] == pytest.approx(1.0)

    def test_zero_weight_dropped(self):
        curve = CurveSystem.from_texts(["t", "t^2"], IntervalSpec(0, 1))
        x = curve.evaluate(np.array([0.1, 0.9]))
        v = 0.5 * x[0] + 0.5 * x[1]
        comb = ConvexCombination(params=np.array([0.1, 0.5, 0.9]),
                                 weights=np.array([0.5, 0.0, 0.5]), total=1.0)
        out = reduce_on_curve(curve, comb, v)
        assert list(out.params) == [0.1, 0.9]
        assert out.weights == pytest.approx([0.5, 0.5])

    def test_moment_curve_three_to_two(self):
        curve = CurveSystem.from_texts(["t", "t^2"], IntervalSpec(0, 1))
        v = np.array([0.5, 1.0 / 3.0])
        ts = np.array([0.1, 0.5, 0.9])
        a = np.vstack([curve.evaluate(ts).T, np.ones(3)])
        w = np.linalg.solve(a, np.array([*v, 1.0]))
        assert np.all(w > 0)
        comb = ConvexCombination(params=ts, weights=w, total=1.0)
        out = reduce_on_curve(curve, comb, v)
        assert len(out) <= 2
        recon = out.weights @ curve.evaluate(out.params)
        assert np.max(np.abs(recon - v)) <= 1e-9 * (1 + np.max(np.abs(v)))
        # oracle: a coarse grid search over node pairs also finds a
        # reproducing pair, confirming representability with two points
        grid = np.linspace(0, 1, 1001)
        xg = curve.evaluate(grid)
        best = math.inf
        for i in range(0, 1001, 25):
            for j in range(i + 25, 1001, 25):
                m = np.vstack([xg[[i, j]].T, np.ones(2)])
                wij, *_ = np.linalg.lstsq(m, np.array([*v, 1.0]), rcond=None)
                if np.all(wij >= 0):
                    best = min(best, np.max(np.abs(m @ wij - np.array([*v, 1.0]))))
        assert best <= 1e-2

    def test_infeasible_rejected(self):
        curve = CurveSystem.from_texts(["t"], IntervalSpec(0, 1))
        comb = ConvexCombination(params=np.array([0.2, 0.8]),
                                 weights=np.array([0.5, 0.5]), total=1.0)
        with pytest.raises(InfeasibleCombinationError):
            reduce_on_curve(curve, comb, np.array([0.9]))

    def test_degenerate_support_eliminates(self):
        # three support points of a line in R^2: frame is rank deficient,
        # the null-vector elimination must still reach <= 2 points
        curve = CurveSystem.from_texts(["t", "2*t+1"], IntervalSpec(0, 1))
        ts = np.array([0.2, 0.5, 0.8])
        nu = np.array([0.25, 0.5, 0.25])
        v = nu @ curve.evaluate(ts)
        comb = ConvexCombination(params=ts, weights=nu, total=1.0)
        out = reduce_on_curve(curve, comb, v)
        assert len(out) <= 2
        recon = out.weights @ curve.evaluate(out.params)
        assert np.max(np.abs(recon - v)) <= 1e-9 * (1 + np.max(np.abs(v)))

    def test_total_rescaled(self):
        curve = CurveSystem.from_texts(["t", "t^2"], IntervalSpec(0, 1))
        ts = np.array([0.1, 0.5, 0.9])
        w = np.array([1.0, 2.0, 1.0])
        total = 4.0
        v = (w @ curve.evaluate(ts)) / total
        comb = ConvexCombination(params=ts, weights=w, total=total)
        out = reduce_on_curve(curve, comb, v)
        assert math.fsum(out.weights) == pytest.approx(total, rel=1e-12)


def _random_curve(rng, n):
    texts = []
    for i in range(n):
        c = [float(x) for x in rng.uniform(-1, 1, 4)]
        texts.append(
            f"{c[0]!r}+{c[1]!r}*t+{c[2]!r}*t^2+{c[3]!r}*sin({(i % 3) + 1}*t)"
        )
    return CurveSystem.from_texts(texts, IntervalSpec(0, 1))


def test_randomized_reduction_invariants():
    rng = np.random.default_rng(7)
    for _ in range(150):
        n = int(rng.integers(1, 6))
        curve = _random_curve(rng, n)
        while True:
            ts = np.sort(rng.uniform(0, 1, n + 1))
            if n == 0 or np.all(np.diff(ts) > 1e-3):
                break
        w = rng.uniform(0.05, 1.0, n + 1)
        w /= w.sum()
        v = w @ curve.evaluate(ts)
        comb = ConvexCombination(params=ts, weights=w, total=1.0)
        out = reduce_on_curve(curve, comb, v)
        assert len(out) <= n
        assert np.all(out.weights >= 0)
        assert abs(math.fsum(out.weights) - 1.0) <= 1e-12
        recon = out.weights @ curve.evaluate(out.params)
        assert np.max(np.abs(recon - v)) <= 1e-9 * (1 + np.max(np.abs(v)))


def test_polish_combination_tightens():
    curve = CurveSystem.from_texts(["t", "t^2"], IntervalSpec(0, 1))
    target = np.array([0.5, 1.0 / 3.0])
    params = np.array([0.2113, 0.7887])
    weights = np.array([0.5, 0.5])
    p2, w2, ok = polish_combination(curve, params, weights, target, 1.0)
    assert ok
    recon = w2 @ curve.evaluate(p2)
    assert np.max(np.abs(recon - target)) <= 1e-12
