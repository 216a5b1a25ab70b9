"""Reference (pure numpy) implementations of the hot kernels.

These are the semantics of record: the compiled module in ``_fast.pyx``
reimplements exactly what is written here.  Everything is vectorised over
points where possible; the pair loops iterate over rows and vectorise over
the remaining points, which keeps memory bounded at O(n) per row.
"""

import numpy as np


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def points_in_polygon(x, y, rings, boundary_eps=0.0):
    """Even-odd ray-casting containment test, boundary inclusive.

    Parameters
    ----------
    x, y : arrays of point coordinates.
    rings : sequence of (k, 2) vertex arrays, *open* (no repeated last
        vertex).  Holes are handled by parity; no orientation is assumed.
    boundary_eps : points within this distance of any edge count as inside.
    """
    x = _as_f64(x)
    y = _as_f64(y)
    inside = np.zeros(x.shape, dtype=bool)
    on_edge = np.zeros(x.shape, dtype=bool)
    eps2 = float(boundary_eps) ** 2
    for ring in rings:
        ring = _as_f64(ring).reshape(-1, 2)
        k = ring.shape[0]
        for i in range(k):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % k]
            if y1 != y2:
                crosses = (y1 > y) != (y2 > y)
                xcut = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                inside ^= crosses & (x < xcut)
            if eps2 > 0.0:
                ex, ey = x2 - x1, y2 - y1
                den = ex * ex + ey * ey
                if den == 0.0:
                    d2 = (x - x1) ** 2 + (y - y1) ** 2
                else:
                    t = ((x - x1) * ex + (y - y1) * ey) / den
                    t = np.clip(t, 0.0, 1.0)
                    d2 = (x - x1 - t * ex) ** 2 + (y - y1 - t * ey) ** 2
                on_edge |= d2 <= eps2
    return inside | on_edge


def _bilinear(arr, u, v):
    """Bilinear lookup of ``arr`` at fractional indices (u, v), clipped."""
    m, n = arr.shape
    u = np.clip(u, 0.0, m - 1.0)
    v = np.clip(v, 0.0, n - 1.0)
    i0 = np.minimum(u.astype(np.int64), m - 2)
    j0 = np.minimum(v.astype(np.int64), n - 2)
    fu = u - i0
    fv = v - j0
    return (
        arr[i0, j0] * (1 - fu) * (1 - fv)
        + arr[i0 + 1, j0] * fu * (1 - fv)
        + arr[i0, j0 + 1] * (1 - fu) * fv
        + arr[i0 + 1, j0 + 1] * fu * fv
    )


def pcf_pairs(x, y, lam, rgrid, bw, setcov, u0, v0, step):
    """Kernel-smoothed, translation-corrected pair sums for the pcf.

    Returns ``out`` with ``out[j] = Σ_{i≠i'} k_bw(rgrid[j] − d_ii') /
    (lam[i]·lam[i']·γ(v_ii'))`` where k_bw is the Epanechnikov kernel with
    half-width ``bw`` and γ is the set covariance of the window looked up by
    bilinear interpolation: γ(dx, dy) = setcov[u0 + dx/step, v0 + dy/step].
    The sum runs over ordered pairs.  The caller applies the 1/(2πr) factor.
    """
    x = _as_f64(x)
    y = _as_f64(y)
    lam = _as_f64(lam)
    rgrid = _as_f64(rgrid)
    setcov = _as_f64(setcov)
    n = x.shape[0]
    out = np.zeros(rgrid.shape[0])
    if n < 2:
        return out
    dmax = rgrid[-1] + bw
    for i in range(n - 1):
        dx = x[i + 1 :] - x[i]
        dy = y[i + 1 :] - y[i]
        d = np.hypot(dx, dy)
        keep = d <= dmax
        if not np.any(keep):
            continue
        d = d[keep]
        gam = _bilinear(setcov, u0 + dx[keep] / step, v0 + dy[keep] / step)
        w = 2.0 / (lam[i] * lam[i + 1 :][keep] * gam)
        u = (rgrid[None, :] - d[:, None]) / bw
        kern = 0.75 * (1.0 - u * u) / bw
        kern[np.abs(u) >= 1.0] = 0.0
        out += kern.T @ w
    return out


def kfun_pairs(x, y, lam, rgrid, setcov, u0, v0, step):
    """Translation-corrected pair weights binned for the K-function.

    Returns per-bin increments: ``out[j]`` collects Σ 1/(lam_i·lam_i'·γ)
    over ordered pairs whose distance d satisfies rgrid[j-1] < d ≤ rgrid[j]
    (with rgrid[-1] read as 0).  K̂ is the running cumulative sum.
    """
    x = _as_f64(x)
    y = _as_f64(y)
    lam = _as_f64(lam)
    rgrid = _as_f64(rgrid)
    setcov = _as_f64(setcov)
    n = x.shape[0]
    out = np.zeros(rgrid.shape[0])
    if n < 2:
        return out
    dmax = rgrid[-1]
    for i in range(n - 1):
        dx = x[i + 1 :] - x[i]
        dy = y[i + 1 :] - y[i]
        d = np.hypot(dx, dy)
        keep = d <= dmax
        if not np.any(keep):
            continue
        gam = _bilinear(setcov, u0 + dx[keep] / step, v0 + dy[keep] / step)
        w = 2.0 / (lam[i] * lam[i + 1 :][keep] * gam)
        idx = np.searchsorted(rgrid, d[keep], side="left")
        np.add.at(out, idx, w)
    return out


def poisson_ll_grad(yvals, counts, exposure):
    """Poisson log-likelihood terms and their derivative in Y.

    ll = Σ counts·Y − exposure·exp(Y)  (additive constants dropped),
    grad = counts − exposure·exp(Y), over flat per-cell arrays.
    """
    yvals = _as_f64(yvals)
    counts = _as_f64(counts)
    exposure = _as_f64(exposure)
    with np.errstate(over="ignore", invalid="ignore"):
        mu = exposure * np.exp(yvals)
        ll = float(np.sum(counts * yvals - mu))
        grad = counts - mu
    return ll, grad
