"""Spatial and temporal intensity tests.

Oracles: direct double-loop kernel summation for the FFT smoothing path,
per-point weighted-least-squares solves (lstsq on a centered design) for the
local regression smoother, and hand arithmetic for the scaling rules.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxmap import errors
from coxmap.geometry import PolygonWindow, build_grid, build_pattern
from coxmap.intensity import (
    SpatialIntensity,
    TemporalIntensity,
    constant_in_time,
    interval_counts,
    kernel_lambda,
    mu_estimate,
    scale_temporal,
)


def rect_window(w=10.0, h=10.0):
    return PolygonWindow([[(0, 0), (w, 0), (w, h), (0, h)]])


def pattern_from_xy(x, y, window, tlim=(0.0, 1.0)):
    t = np.full(len(x), tlim[1])
    return build_pattern(np.column_stack([x, y, t]), window, tlim)


# ---------------------------------------------------------------------------
# spatial


def direct_kernel_oracle(pattern, grid, h):
    """Brute-force edge-corrected kernel estimate on cell centroids."""
    cx, cy = grid.centroids()
    gx = np.broadcast_to(cx[:, None], (grid.M, grid.N))
    gy = np.broadcast_to(cy[None, :], (grid.M, grid.N))
    ix, iy = grid.cell_of(pattern.x, pattern.y)
    px, py = cx[ix], cy[iy]  # events binned to their cell centroid
    raw = np.zeros((grid.M, grid.N))
    for a, b in zip(px, py):
        raw += np.exp(-((gx - a) ** 2 + (gy - b) ** 2) / (2 * h * h))
    inx = gx[grid.inside_mask]
    iny = gy[grid.inside_mask]
    mass = np.zeros((grid.M, grid.N))
    for i in range(grid.M):
        for j in range(grid.N):
            mass[i, j] = np.exp(
                -((cx[i] - inx) ** 2 + (cy[j] - iny) ** 2) / (2 * h * h)
            ).sum()
    vals = np.zeros_like(raw)
    ok = grid.inside_mask & (mass > 0)
    vals[ok] = raw[ok] / mass[ok]
    vals /= vals.sum() * grid.cell_area
    return vals


class TestKernelLambda:
    def test_matches_direct_summation_oracle(self):
        window = rect_window(4.0, 3.0)
        grid = build_grid(window, cellwidth=0.5)
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 4, 30)
        y = rng.uniform(0, 3, 30)
        pat = pattern_from_xy(x, y, window)
        est = kernel_lambda(pat, grid, bandwidth=0.8)
        want = direct_kernel_oracle(pat, grid, 0.8)
        np.testing.assert_allclose(est.values, want, atol=1e-10)

    def test_normalization_and_mask(self):
        window = PolygonWindow([[(0, 0), (6, 0), (6, 6), (0, 6)],
                                [(2, 2), (2, 4), (4, 4), (4, 2)]])
        grid = build_grid(window, cellwidth=0.75)
        rng = np.random.default_rng(1)
        pts = []
        while len(pts) < 40:
            p = rng.uniform(0, 6, 2)
            if window.contains(p[0], p[1]):
                pts.append(p)
        pts = np.array(pts)
        est = kernel_lambda(pattern_from_xy(pts[:, 0], pts[:, 1], window), grid, 1.0)
        assert est.values.sum() * grid.cell_area == pytest.approx(1.0, abs=1e-9)
        assert np.all(est.values[~grid.inside_mask] == 0.0)
        assert np.all(est.values >= 0)

    def test_single_point_peaks_at_its_cell(self):
        window = rect_window(16, 16)
        grid = build_grid(window, cellwidth=1.0)
        pat = pattern_from_xy([8.2], [8.7], window)
        est = kernel_lambda(pat, grid, bandwidth=0.5)
        peak = np.unravel_index(np.argmax(est.values), est.values.shape)
        assert peak == tuple(np.array(grid.cell_of(8.2, 8.7)).ravel())

    def test_uniform_pattern_is_roughly_flat(self):
        window = rect_window(10, 10)
        grid = build_grid(window, cellwidth=0.625)
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 10, 10000)
        y = rng.uniform(0, 10, 10000)
        est = kernel_lambda(pattern_from_xy(x, y, window), grid, bandwidth=2.0)
        inside = est.values[grid.inside_mask]
        assert inside.max() / inside.min() < 1.25

    def test_adjust_multiplies_bandwidth(self):
        window = rect_window(8, 8)
        grid = build_grid(window, cellwidth=0.5)
        rng = np.random.default_rng(3)
        x, y = rng.uniform(1, 7, (2, 25))
        pat = pattern_from_xy(x, y, window)
        a = kernel_lambda(pat, grid, bandwidth=0.6, adjust=2.0)
        b = kernel_lambda(pat, grid, bandwidth=1.2)
        np.testing.assert_array_equal(a.values, b.values)

    def test_errors(self):
        window = rect_window(4, 4)
        grid = build_grid(window, cellwidth=1.0)
        empty = build_pattern(np.empty((0, 3)), window, (0, 1))
        with pytest.raises(errors.EmptyPatternError):
            kernel_lambda(empty, grid, 1.0)
        pat = pattern_from_xy([2.0], [2.0], window)
        with pytest.raises(errors.InvalidBandwidthError):
            kernel_lambda(pat, grid, 0.0)
        with pytest.raises(errors.InvalidBandwidthError):
            kernel_lambda(pat, grid, 1.0, adjust=-1.0)

    @given(st.integers(min_value=1, max_value=60), st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=25, deadline=None)
    def test_normalization_property(self, npts, seed):
        window = rect_window(5, 4)
        grid = build_grid(window, cellwidth=1.0)
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 5, npts)
        y = rng.uniform(0, 4, npts)
        est = kernel_lambda(pattern_from_xy(x, y, window), grid, bandwidth=0.9)
        assert est.values.sum() * grid.cell_area == pytest.approx(1.0, abs=1e-9)


class TestSpatialIntensityType:
    def test_strict_constructor_rejects_unnormalized(self):
        grid = build_grid(rect_window(2, 2), cellwidth=1.0)
        with pytest.raises(ValueError):
            SpatialIntensity(grid, np.ones((2, 2)))

    def test_from_values_renormalizes(self):
        grid = build_grid(rect_window(2, 2), cellwidth=1.0)
        si = SpatialIntensity.from_values(grid, np.ones((2, 2)))
        np.testing.assert_allclose(si.values, 0.25)

    def test_from_values_rejects_all_zero(self):
        grid = build_grid(rect_window(2, 2), cellwidth=1.0)
        with pytest.raises(errors.ZeroIntensityError):
            SpatialIntensity.from_values(grid, np.zeros((2, 2)))


# ---------------------------------------------------------------------------
# temporal


def lowess_oracle(x, y, frac, iterations=3):
    """Per-point WLS on a centered design, tricube and bisquare weights."""
    n = len(x)
    r = min(n, max(1, math.ceil(frac * n)))
    delta = np.ones(n)
    fit = np.empty(n)
    for it in range(iterations + 1):
        for i in range(n):
            d = np.abs(x - x[i])
            span = np.sort(d)[r - 1]
            u = np.clip(d / span, 0, 1)
            w = (1 - u**3) ** 3 * delta
            design = np.column_stack([np.ones(n), x - x[i]]) * np.sqrt(w)[:, None]
            coef, *_ = np.linalg.lstsq(design, y * np.sqrt(w), rcond=None)
            fit[i] = coef[0]
        if it == iterations:
            break
        resid = y - fit
        scale = np.median(np.abs(resid))
        if scale <= 0:
            break
        u = np.clip(resid / (6 * scale), -1, 1)
        delta = (1 - u * u) ** 2
    return fit


def pattern_with_counts(counts, window=None):
    """One pattern whose per-interval counts equal the given sequence."""
    window = window or rect_window(1, 1)
    pts = []
    for k, c in enumerate(counts, start=1):
        for j in range(int(c)):
            pts.append((0.5, 0.5, k - 0.5 + j * 1e-6))
    tlim = (0.0, float(len(counts)))
    return build_pattern(np.array(pts).reshape(-1, 3), window, tlim)


class TestMuEstimate:
    def test_constant_counts_reproduced_exactly(self):
        pat = pattern_with_counts([7] * 12)
        mu = mu_estimate(pat, f=0.5)
        np.testing.assert_allclose(mu.values, 7.0, atol=1e-10)

    def test_matches_wls_oracle(self):
        rng = np.random.default_rng(11)
        counts = rng.poisson(40, 30)
        pat = pattern_with_counts(counts)
        for f in (0.2, 0.5, 1.0):
            mu = mu_estimate(pat, f=f)
            x = np.arange(1, 31, dtype=float)
            want = lowess_oracle(x, np.sqrt(counts.astype(float)), f) ** 2
            np.testing.assert_allclose(mu.values, want, atol=1e-10)

    def test_full_span_linear_counts_near_lsq_line(self):
        # sqrt of a linear ramp is smooth; full-span local fits should track
        # the global least squares line away from the boundary
        counts = np.arange(10, 50, dtype=float)
        pat = pattern_with_counts(counts)
        mu = mu_estimate(pat, f=1.0)
        x = np.arange(1, len(counts) + 1, dtype=float)
        slope, intercept = np.polyfit(x, np.sqrt(counts), 1)
        line = intercept + slope * x
        interior = slice(len(x) // 4, -len(x) // 4)
        rel = np.abs(np.sqrt(mu.values[interior]) - line[interior]) / line[interior]
        assert rel.max() < 0.05

    def test_zero_counts_give_nonnegative_rates(self):
        rng = np.random.default_rng(13)
        counts = rng.poisson(0.7, 25)
        mu = mu_estimate(pattern_with_counts(counts), f=0.3)
        assert np.all(mu.values >= 0)

    def test_too_few_intervals(self):
        pat = pattern_from_xy([0.5], [0.5], rect_window(1, 1), tlim=(0.0, 1.0))
        with pytest.raises(errors.DegenerateTimeWindowError):
            mu_estimate(pat)

    def test_bad_fraction(self):
        pat = pattern_with_counts([3, 4, 5])
        with pytest.raises(ValueError):
            mu_estimate(pat, f=0.0)


class TestConstantInTime:
    def test_headline_rate(self):
        rng = np.random.default_rng(5)
        window = rect_window(128, 128)
        pts = np.column_stack(
            [rng.uniform(0, 128, 10069), rng.uniform(0, 128, 10069), rng.uniform(0, 100, 10069)]
        )
        pat = build_pattern(pts, window, (0, 100))
        assert constant_in_time(pat).constant == pytest.approx(100.69)

    def test_small_cases(self):
        window = rect_window(1, 1)
        rng = np.random.default_rng(6)
        pts = np.column_stack([rng.uniform(0, 1, 100), rng.uniform(0, 1, 100), rng.uniform(0, 50, 100)])
        assert constant_in_time(build_pattern(pts, window, (0, 50))).constant == 2.0
        empty = build_pattern(np.empty((0, 3)), window, (0, 10))
        assert constant_in_time(empty).constant == 0.0


class TestScaleTemporal:
    def test_flat_shape(self):
        window = rect_window(1, 1)
        rng = np.random.default_rng(8)
        pts = np.column_stack([rng.uniform(0, 1, 100), rng.uniform(0, 1, 100), rng.uniform(0, 50, 100)])
        pat = build_pattern(pts, window, (0, 50))
        mu = scale_temporal(np.ones(50), pat)
        np.testing.assert_allclose(mu.values, 2.0)

    def test_linear_table(self):
        pat = pattern_with_counts([11] * 10)  # n = 110 on 10 intervals
        mu = scale_temporal(np.arange(1.0, 11.0), pat)
        np.testing.assert_allclose(mu.values, np.arange(2.0, 22.0, 2.0))

    def test_linear_callable(self):
        pat = pattern_with_counts([11] * 10)
        mu = scale_temporal(lambda t: t, pat)
        np.testing.assert_allclose(mu.values, np.arange(2.0, 22.0, 2.0))

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        counts = rng.poisson(20, 15)
        pat = pattern_with_counts(counts)
        once = scale_temporal(rng.uniform(0.5, 3.0, 15), pat)
        twice = scale_temporal(once.values, pat)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
        assert once.values.sum() == pytest.approx(pat.n, rel=1e-12)

    def test_zero_shape_rejected(self):
        pat = pattern_with_counts([1, 2, 3])
        with pytest.raises(errors.ZeroIntensityError):
            scale_temporal(np.zeros(3), pat)


class TestTemporalIntensityType:
    def test_exactly_one_of_constant_or_table(self):
        with pytest.raises(ValueError):
            TemporalIntensity((0, 5), constant=1.0, values=np.ones(5))
        with pytest.raises(ValueError):
            TemporalIntensity((0, 5))

    def test_table_length_must_match_window(self):
        with pytest.raises(ValueError):
            TemporalIntensity((0, 5), values=np.ones(4))

    def test_rates_and_lookup(self):
        ti = TemporalIntensity((0, 3), values=np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(ti.rates(), [1.0, 2.0, 3.0])
        assert ti.rate(2) == 2.0
        with pytest.raises(IndexError):
            ti.rate(4)
        const = TemporalIntensity((0, 4), constant=2.5)
        np.testing.assert_array_equal(const.rates(), [2.5] * 4)

    def test_interval_counts_helper(self):
        pat = pattern_with_counts([3, 0, 5])
        np.testing.assert_array_equal(interval_counts(pat), [3, 0, 5])
