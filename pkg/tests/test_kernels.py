"""Kernel parity: the compiled extension against the reference module.

``_ref`` is the contract, so its pair sums are first pinned down by
brute-force oracles built from scipy distance matrices; the compiled build
is then required to reproduce the reference to roundoff on random inputs.
Parity tests skip when the package was installed with COXMAP_NO_EXT=1.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxmap._kernels import _ref

try:
    from coxmap._kernels import _fast
except ImportError:
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None, reason="compiled kernels not built")

SQUARE = [np.array([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)])]


def random_inputs(seed, n=80):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 10, n)
    y = rng.uniform(0, 10, n)
    lam = rng.uniform(0.5, 2.0, n)
    rgrid = np.linspace(0.05, 2.5, 40)
    # smooth positive surface standing in for a set covariance
    gu, gv = np.meshgrid(np.linspace(0, 1, 21), np.linspace(0, 1, 25),
                         indexing="ij")
    setcov = 40.0 + 10.0 * np.cos(3 * gu) * np.sin(2 * gv)
    return x, y, lam, rgrid, setcov


# ---------------------------------------------------------------------------
# reference semantics against brute force


def test_pcf_pairs_matches_brute_force():
    x, y, lam, rgrid, _ = random_inputs(0, n=30)
    flat = np.full((3, 3), 25.0)  # constant surface: gamma = 25 everywhere
    bw = 0.4
    got = _ref.pcf_pairs(x, y, lam, rgrid, bw, flat, 1.0, 1.0, 1.0)

    ii, jj = np.triu_indices(len(x), k=1)
    d = np.hypot(x[jj] - x[ii], y[jj] - y[ii])
    wpair = 2.0 / (25.0 * lam[ii] * lam[jj])
    u = (rgrid[None, :] - d[:, None]) / bw
    kern = np.where(np.abs(u) < 1, 0.75 * (1 - u * u) / bw, 0.0)
    np.testing.assert_allclose(got, kern.T @ wpair, rtol=1e-12, atol=1e-12)


def test_kfun_pairs_cumsum_counts_pairs():
    x, y, _, rgrid, _ = random_inputs(1, n=40)
    lam = np.ones_like(x)
    flat = np.full((2, 2), 1.0)
    incs = _ref.kfun_pairs(x, y, lam, rgrid, flat, 0.5, 0.5, 1.0)
    ii, jj = np.triu_indices(len(x), k=1)
    d = np.hypot(x[jj] - x[ii], y[jj] - y[ii])
    want = np.array([2.0 * np.sum(d <= r) for r in rgrid])
    np.testing.assert_allclose(np.cumsum(incs), want, rtol=1e-12)


def test_poisson_ll_grad_closed_form():
    y = np.array([0.0, 1.0, -2.0])
    counts = np.array([3.0, 0.0, 1.0])
    expo = np.array([2.0, 1.0, 0.5])
    ll, grad = _ref.poisson_ll_grad(y, counts, expo)
    mu = expo * np.exp(y)
    assert ll == pytest.approx(float(np.sum(counts * y - mu)), rel=1e-15)
    np.testing.assert_allclose(grad, counts - mu, rtol=1e-15)


def test_points_in_polygon_hole_parity():
    rings = [
        np.array([(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]),
        np.array([(1.0, 1.0), (1.0, 3.0), (3.0, 3.0), (3.0, 1.0)]),
    ]
    x = np.array([0.5, 2.0, 3.5, 5.0])
    y = np.array([0.5, 2.0, 3.5, 2.0])
    got = _ref.points_in_polygon(x, y, rings)
    np.testing.assert_array_equal(got, [True, False, True, False])


def test_points_in_polygon_boundary_eps():
    x = np.array([10.0 + 1e-12, 10.5])
    y = np.array([5.0, 5.0])
    assert not _ref.points_in_polygon(x, y, SQUARE)[0]
    got = _ref.points_in_polygon(x, y, SQUARE, boundary_eps=1e-9)
    np.testing.assert_array_equal(got, [True, False])


# ---------------------------------------------------------------------------
# compiled build against the reference


@needs_fast
def test_containment_parity_exact():
    rng = np.random.default_rng(7)
    rings = [
        np.array([(0.0, 0.0), (8.0, 1.0), (9.0, 7.0), (2.0, 9.0), (-1.0, 4.0)]),
        np.array([(3.0, 3.0), (3.0, 5.0), (5.0, 5.0), (5.0, 3.0)]),
    ]
    x = rng.uniform(-2, 10, 4000)
    y = rng.uniform(-2, 10, 4000)
    for eps in (0.0, 1e-9, 0.3):
        ref = _ref.points_in_polygon(x, y, rings, boundary_eps=eps)
        fast = _fast.points_in_polygon(x, y, rings, boundary_eps=eps)
        np.testing.assert_array_equal(fast, ref)
    # vertices and shape handling
    grid = np.meshgrid(np.linspace(-1, 9, 30), np.linspace(-1, 9, 30))
    ref = _ref.points_in_polygon(grid[0], grid[1], rings)
    fast = _fast.points_in_polygon(grid[0], grid[1], rings)
    assert fast.shape == ref.shape == (30, 30)
    np.testing.assert_array_equal(fast, ref)


@needs_fast
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_pcf_pairs_parity(seed):
    x, y, lam, rgrid, setcov = random_inputs(seed)
    args = (x, y, lam, rgrid, 0.3, setcov, 10.0, 12.0, 0.5)
    np.testing.assert_allclose(
        _fast.pcf_pairs(*args), _ref.pcf_pairs(*args), rtol=1e-12, atol=1e-12
    )


@needs_fast
@pytest.mark.parametrize("seed", [3, 4, 5])
def test_kfun_pairs_parity(seed):
    x, y, lam, rgrid, setcov = random_inputs(seed)
    args = (x, y, lam, rgrid, setcov, 10.0, 12.0, 0.5)
    np.testing.assert_allclose(
        _fast.kfun_pairs(*args), _ref.kfun_pairs(*args), rtol=1e-12, atol=1e-12
    )


@needs_fast
def test_pair_kernels_parity_degenerate():
    rgrid = np.linspace(0.1, 1.0, 5)
    setcov = np.ones((2, 2))
    empty = np.array([])
    one = np.array([1.0])
    for mod in (_ref, _fast):
        assert not mod.pcf_pairs(empty, empty, empty, rgrid, 0.2, setcov,
                                 0.5, 0.5, 1.0).any()
        assert not mod.kfun_pairs(one, one, one, rgrid, setcov,
                                  0.5, 0.5, 1.0).any()


@needs_fast
def test_poisson_ll_grad_parity():
    rng = np.random.default_rng(11)
    y = rng.normal(0, 2, 4096)
    counts = rng.poisson(1.5, 4096).astype(float)
    expo = rng.uniform(0.1, 3.0, 4096)
    ll_r, g_r = _ref.poisson_ll_grad(y, counts, expo)
    ll_f, g_f = _fast.poisson_ll_grad(y, counts, expo)
    assert ll_f == pytest.approx(ll_r, rel=1e-12)
    np.testing.assert_allclose(g_f, g_r, rtol=1e-13)


@needs_fast
def test_poisson_ll_grad_parity_overflow():
    y = np.array([800.0, 0.0])
    counts = np.array([1.0, 2.0])
    expo = np.array([1.0, 1.0])
    ll_r, g_r = _ref.poisson_ll_grad(y, counts, expo)
    ll_f, g_f = _fast.poisson_ll_grad(y, counts, expo)
    assert np.isneginf(ll_r) and np.isneginf(ll_f)
    np.testing.assert_array_equal(g_f, g_r)


@needs_fast
@given(
    st.integers(min_value=3, max_value=9),
    st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=40, deadline=None)
def test_containment_parity_random_convex(k, seed):
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    ring = np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(1, 5)
    x = rng.uniform(-6, 6, 200)
    y = rng.uniform(-6, 6, 200)
    np.testing.assert_array_equal(
        _fast.points_in_polygon(x, y, [ring]),
        _ref.points_in_polygon(x, y, [ring]),
    )
