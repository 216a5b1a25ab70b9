"""Covariance model, circulant embedding and whitening tests.

Oracles:
* mpmath Bessel evaluation for the matern/whittle equivalence,
* a dense block-circulant matrix (built entrywise from wrapped distances,
  eigendecomposed with numpy.linalg) for the embedding,
* plain Monte Carlo with analytic standard errors for the sampler.
"""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxmap import errors
from coxmap.covariance import (
    CovarianceModel,
    apply_sqrt_cov,
    build_embedding,
    sample_field,
    spatial_correlation,
    spatial_covariance,
    temporal_correlation,
    unwhiten,
    whiten,
)
from coxmap.geometry import PolygonWindow, build_grid


def rect_window(w=1.0, h=1.0):
    return PolygonWindow([[(0, 0), (w, 0), (w, h), (0, h)]])


def grid_for(m, n, cellwidth=1.0):
    return build_grid(rect_window(m * cellwidth, n * cellwidth), cellwidth=cellwidth)


def model(family="exponential", sigma=1.0, phi=1.0, theta=1.0, nu=1.0):
    return CovarianceModel(family=family, sigma=sigma, phi=phi, theta=theta, nu=nu)


# ---------------------------------------------------------------------------
# covariance function


class TestSpatialCovariance:
    def test_distance_zero_gives_sigma_squared(self):
        for fam in ("exponential", "whittle", "matern"):
            m = model(family=fam, sigma=1.7, nu=1.5)
            assert spatial_covariance(m, 0.0) == pytest.approx(1.7**2)

    def test_exponential_closed_form(self):
        m = model(sigma=1.0, phi=2.0)
        assert spatial_covariance(m, 2.0) == pytest.approx(0.36787944117144233, abs=1e-12)

    def test_matern_nu_1_equals_whittle_against_bessel_oracle(self):
        rng = np.random.default_rng(0)
        phi = 1.9
        ds = rng.uniform(0.01, 8.0, 20)
        mat = model(family="matern", phi=phi, nu=1.0)
        whi = model(family="whittle", phi=phi)
        for d in ds:
            x = mpmath.mpf(float(d)) / phi
            want = float(2 ** (1 - 1) / mpmath.gamma(1) * x**1 * mpmath.besselk(1, x))
            assert spatial_correlation(mat, d) == pytest.approx(want, rel=1e-10)
            assert spatial_correlation(whi, d) == pytest.approx(want, rel=1e-10)

    def test_matern_general_nu_against_bessel_oracle(self):
        rng = np.random.default_rng(1)
        phi, nu = 2.3, 1.7
        m = model(family="matern", phi=phi, nu=nu)
        for d in rng.uniform(0.05, 10.0, 10):
            x = mpmath.mpf(float(d)) / phi
            want = float(
                2 ** (1 - nu) / mpmath.gamma(nu) * x**nu * mpmath.besselk(nu, x)
            )
            assert spatial_correlation(m, d) == pytest.approx(want, rel=1e-10)

    def test_monotone_non_increasing(self):
        d = np.linspace(0, 20, 200)
        for fam, nu in [("exponential", 1.0), ("whittle", 1.0), ("matern", 0.7)]:
            r = spatial_correlation(model(family=fam, phi=1.3, nu=nu), d)
            assert np.all(np.diff(r) <= 1e-15)
            assert r[0] == pytest.approx(1.0)

    def test_negative_distance_rejected(self):
        with pytest.raises(errors.NegativeDistanceError):
            spatial_covariance(model(), -0.5)

    def test_bad_parameters_rejected(self):
        with pytest.raises(errors.InvalidParameterError):
            model(sigma=0.0)
        with pytest.raises(errors.InvalidParameterError):
            model(phi=-1.0)
        with pytest.raises(errors.InvalidParameterError):
            CovarianceModel(family="gaussian", sigma=1, phi=1, theta=1)


class TestTemporalCorrelation:
    def test_lag_zero(self):
        assert temporal_correlation(model(theta=2.2), 0.0) == pytest.approx(1.0)

    def test_fitted_theta_value(self):
        # decay after one unit at the reported fitted theta
        assert temporal_correlation(model(theta=1.4), 1.0) == pytest.approx(
            0.24659696394160652, abs=1e-12
        )

    @given(
        st.floats(min_value=0.0, max_value=5.0),
        st.floats(min_value=0.0, max_value=5.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_semigroup(self, a, b):
        m = model(theta=0.8)
        left = temporal_correlation(m, a + b)
        right = temporal_correlation(m, a) * temporal_correlation(m, b)
        assert left == pytest.approx(right, rel=1e-12)

    def test_negative_lag_rejected(self):
        with pytest.raises(errors.NegativeLagError):
            temporal_correlation(model(), -0.1)


# ---------------------------------------------------------------------------
# embedding


def wrapped_covariance_oracle(m, ext_m, ext_n, cellwidth):
    """Direct evaluation of the wrapped covariance at every offset."""
    out = np.empty((ext_m, ext_n))
    for i in range(ext_m):
        for j in range(ext_n):
            dx = min(i, ext_m - i) * cellwidth
            dy = min(j, ext_n - j) * cellwidth
            out[i, j] = spatial_covariance(m, math.hypot(dx, dy))
    return out


def dense_circulant_oracle(base):
    """Full dense block-circulant matrix from the base row."""
    ext_m, ext_n = base.shape
    n = ext_m * ext_n
    C = np.empty((n, n))
    for a in range(n):
        ia, ja = divmod(a, ext_n)
        for b in range(n):
            ib, jb = divmod(b, ext_n)
            C[a, b] = base[(ia - ib) % ext_m, (ja - jb) % ext_n]
    return C


class TestBuildEmbedding:
    @pytest.mark.parametrize("mn", [(2, 2), (4, 4), (4, 8)])
    def test_eigenvalues_match_dense_oracle(self, mn):
        m = model(sigma=1.3, phi=1.5)
        grid = grid_for(*mn)
        emb = build_embedding(m, grid)
        base = wrapped_covariance_oracle(m, emb.ext_m, emb.ext_n, grid.cellwidth)
        # inverse DFT of the eigenvalues reproduces the base row
        back = np.fft.ifft2(emb.eigenvalues)
        assert np.abs(back.imag).max() < 1e-10
        np.testing.assert_allclose(back.real, base, atol=1e-10)
        # dense eigendecomposition agrees with the DFT eigenvalues
        C = dense_circulant_oracle(base)
        dense_eigs = np.sort(np.linalg.eigvalsh(C))
        fft_eigs = np.sort(emb.eigenvalues.ravel())
        np.testing.assert_allclose(dense_eigs, fft_eigs, atol=1e-10 * fft_eigs.max())

    def test_vanishing_field_limit(self):
        sigma = 1e-12
        emb = build_embedding(model(sigma=sigma), grid_for(4, 4))
        mx = emb.eigenvalues.max()
        assert emb.eigenvalues.min() >= 0.0
        assert sigma**2 <= mx < 10 * sigma**2

    def test_parseval_mean_eigenvalue_is_sigma_squared(self):
        m = model(sigma=2.1, phi=0.4)
        emb = build_embedding(m, grid_for(8, 4, cellwidth=0.5))
        mean_eig = emb.eigenvalues.sum() / (emb.ext_m * emb.ext_n)
        assert mean_eig == pytest.approx(m.sigma**2, abs=1e-9)

    def test_long_range_correlation_rejected(self):
        # correlation length comparable to the torus circumference: the
        # wrapped base row is not positive definite
        with pytest.raises(errors.EmbeddingNotPSDError):
            build_embedding(model(sigma=2.1, phi=2.0), grid_for(8, 4, cellwidth=0.5))

    def test_axis_swap_transposes_eigenvalues(self):
        m = model(phi=0.8)
        a = build_embedding(m, grid_for(4, 8, cellwidth=0.5))
        b = build_embedding(m, grid_for(8, 4, cellwidth=0.5))
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues.T, atol=1e-12)

    def test_eigenvalues_continuous_in_phi(self):
        g = grid_for(8, 8, cellwidth=0.7)
        e1 = build_embedding(model(phi=1.7), g)
        e2 = build_embedding(model(phi=1.7 + 1e-8), g)
        rel = abs(e1.eigenvalues.max() - e2.eigenvalues.max()) / e1.eigenvalues.max()
        assert rel < 1e-4

    def test_field_mean_is_minus_half_sigma_squared(self):
        emb = build_embedding(model(sigma=2.0), grid_for(2, 2))
        assert emb.field_mean == -2.0


# ---------------------------------------------------------------------------
# sampling and whitening


class TestSampleField:
    def test_zero_noise_gives_constant_mean(self):
        m = model(sigma=1.4)
        emb = build_embedding(m, grid_for(4, 4))
        out = sample_field(emb, np.zeros(emb.shape))
        np.testing.assert_allclose(out, m.field_mean, atol=1e-14)

    def test_linearity(self):
        m = model(sigma=0.9, phi=1.2)
        emb = build_embedding(m, grid_for(4, 4))
        rng = np.random.default_rng(2)
        z = rng.standard_normal(emb.shape)
        lhs = sample_field(emb, 3.0 * z) - emb.field_mean
        rhs = 3.0 * (sample_field(emb, z) - emb.field_mean)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_dim_mismatch_rejected(self):
        emb = build_embedding(model(), grid_for(4, 4))
        with pytest.raises(errors.DimensionMismatchError):
            sample_field(emb, np.zeros((3, 3)))

    def test_monte_carlo_variance_and_covariance(self):
        sigma, phi = 1.1, 2.0
        m = model(sigma=sigma, phi=phi)
        grid = grid_for(8, 8)
        emb = build_embedding(m, grid)
        rng = np.random.default_rng(42)
        ndraw = 5000
        cells = [(1, 1), (3, 2), (6, 5)]
        vals = np.empty((ndraw, len(cells)))
        for k in range(ndraw):
            y = sample_field(emb, rng.standard_normal(emb.shape))
            vals[k] = [y[c] for c in cells]
        # variance at a fixed cell
        v = vals[:, 0].var(ddof=1)
        se_v = sigma**2 * math.sqrt(2.0 / (ndraw - 1))
        assert abs(v - sigma**2) < 4 * se_v
        # covariance between two fixed cells at known separation
        for (a, b) in [(0, 1), (1, 2), (0, 2)]:
            dist = math.hypot(
                cells[a][0] - cells[b][0], cells[a][1] - cells[b][1]
            )  # cellwidth 1
            want = spatial_covariance(m, dist)
            got = np.cov(vals[:, a], vals[:, b], ddof=1)[0, 1]
            se = math.sqrt((sigma**2 * sigma**2 + want**2) / (ndraw - 1))
            assert abs(got - want) < 4 * se, (a, b, got, want, se)
        # mean is -sigma^2/2
        se_mean = sigma / math.sqrt(ndraw)
        assert abs(vals[:, 0].mean() - m.field_mean) < 4 * se_mean


class TestWhiten:
    def test_zero_gamma_gives_mean_field(self):
        m = model(sigma=2.0)
        emb = build_embedding(m, grid_for(4, 4))
        np.testing.assert_allclose(unwhiten(emb, np.zeros(emb.shape)), m.field_mean)

    def test_round_trip_on_sampled_fields(self):
        emb = build_embedding(model(sigma=1.3, phi=0.6), grid_for(8, 4, 0.5))
        rng = np.random.default_rng(3)
        for _ in range(5):
            y = sample_field(emb, rng.standard_normal(emb.shape))
            back = unwhiten(emb, whiten(emb, y))
            assert np.abs(back - y).max() < 1e-9

    def test_whiten_then_unwhiten_gamma(self):
        emb = build_embedding(model(phi=0.9), grid_for(4, 4))
        rng = np.random.default_rng(4)
        gam = rng.standard_normal(emb.shape)
        # all eigenvalues positive for this model: exact round trip
        assert emb.eigenvalues.min() > 0
        back = whiten(emb, unwhiten(emb, gam))
        np.testing.assert_allclose(back, gam, atol=1e-9)

    def test_sample_field_is_unwhiten(self):
        emb = build_embedding(model(sigma=0.8, phi=1.1), grid_for(4, 8))
        rng = np.random.default_rng(5)
        z = rng.standard_normal(emb.shape)
        np.testing.assert_allclose(sample_field(emb, z), unwhiten(emb, z), atol=0)

    def test_unwhitened_iid_gamma_covariance_matches_model(self):
        sigma, phi = 1.0, 1.5
        m = model(sigma=sigma, phi=phi)
        emb = build_embedding(m, grid_for(8, 8))
        rng = np.random.default_rng(6)
        ndraw = 5000
        a, b = (2, 2), (2, 5)
        vals = np.empty((ndraw, 2))
        for k in range(ndraw):
            y = unwhiten(emb, rng.standard_normal(emb.shape))
            vals[k] = y[a], y[b]
        want = spatial_covariance(m, 3.0)
        got = np.cov(vals[:, 0], vals[:, 1], ddof=1)[0, 1]
        se = math.sqrt((sigma**4 + want**2) / (ndraw - 1))
        assert abs(got - want) < 4 * se

    def test_apply_sqrt_cov_is_self_adjoint(self):
        emb = build_embedding(model(sigma=1.2, phi=0.8), grid_for(4, 4))
        rng = np.random.default_rng(7)
        u = rng.standard_normal(emb.shape)
        v = rng.standard_normal(emb.shape)
        lhs = float(np.sum(apply_sqrt_cov(emb, u) * v))
        rhs = float(np.sum(u * apply_sqrt_cov(emb, v)))
        assert lhs == pytest.approx(rhs, rel=1e-10)
