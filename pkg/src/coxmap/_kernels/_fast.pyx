# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels.

The semantics of record live in ``_ref.py``; this module restates them with
typed loops, keeping every arithmetic expression in the same order so the
two paths agree to roundoff (the build turns fp contraction off for the same
reason).  Only summation order differs: pair contributions are accumulated
sequentially here, where the reference path reduces whole rows at once.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, exp, hypot

cnp.import_array()


def points_in_polygon(x, y, rings, double boundary_eps=0.0):
    """Even-odd ray-casting containment test, boundary inclusive."""
    x_in = np.ascontiguousarray(x, dtype=np.float64)
    y_in = np.ascontiguousarray(y, dtype=np.float64)
    inside = np.zeros(x_in.size, dtype=np.uint8)
    onedge = np.zeros(x_in.size, dtype=np.uint8)

    cdef double[::1] xs = x_in.reshape(-1)
    cdef double[::1] ys = y_in.reshape(-1)
    cdef cnp.uint8_t[::1] iv = inside
    cdef cnp.uint8_t[::1] ev = onedge
    cdef double eps2 = boundary_eps * boundary_eps
    cdef Py_ssize_t n = xs.shape[0]
    cdef double[:, ::1] ring
    cdef Py_ssize_t k, i, i2, p
    cdef double x1, y1, x2, y2, px, py, ex, ey, den, t, d2

    for r in rings:
        ring = np.ascontiguousarray(r, dtype=np.float64).reshape(-1, 2)
        k = ring.shape[0]
        for i in range(k):
            i2 = i + 1 if i + 1 < k else 0
            x1 = ring[i, 0]
            y1 = ring[i, 1]
            x2 = ring[i2, 0]
            y2 = ring[i2, 1]
            ex = x2 - x1
            ey = y2 - y1
            den = ex * ex + ey * ey
            for p in range(n):
                px = xs[p]
                py = ys[p]
                if y1 != y2:
                    if (y1 > py) != (y2 > py):
                        if px < x1 + (py - y1) * (x2 - x1) / (y2 - y1):
                            iv[p] ^= 1
                if eps2 > 0.0:
                    if den == 0.0:
                        d2 = (px - x1) ** 2 + (py - y1) ** 2
                    else:
                        t = ((px - x1) * ex + (py - y1) * ey) / den
                        if t < 0.0:
                            t = 0.0
                        elif t > 1.0:
                            t = 1.0
                        d2 = (px - x1 - t * ex) ** 2 + (py - y1 - t * ey) ** 2
                    if d2 <= eps2:
                        ev[p] = 1
    return (inside | onedge).astype(bool).reshape(x_in.shape)


cdef inline double _bilinear(double[:, ::1] arr, double u, double v) noexcept nogil:
    cdef Py_ssize_t m = arr.shape[0]
    cdef Py_ssize_t n = arr.shape[1]
    cdef Py_ssize_t i0, j0
    cdef double fu, fv
    if u < 0.0:
        u = 0.0
    elif u > m - 1.0:
        u = m - 1.0
    if v < 0.0:
        v = 0.0
    elif v > n - 1.0:
        v = n - 1.0
    i0 = <Py_ssize_t>u
    if i0 > m - 2:
        i0 = m - 2
    j0 = <Py_ssize_t>v
    if j0 > n - 2:
        j0 = n - 2
    fu = u - i0
    fv = v - j0
    return (
        arr[i0, j0] * (1 - fu) * (1 - fv)
        + arr[i0 + 1, j0] * fu * (1 - fv)
        + arr[i0, j0 + 1] * (1 - fu) * fv
        + arr[i0 + 1, j0 + 1] * fu * fv
    )


cdef inline Py_ssize_t _first_above(double[::1] a, double v) noexcept nogil:
    # first index with a[idx] > v (bisect_right)
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = a.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _first_at_least(double[::1] a, double v) noexcept nogil:
    # first index with a[idx] >= v (searchsorted side="left")
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = a.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def pcf_pairs(x, y, lam, rgrid, double bw, setcov, double u0, double v0,
              double step):
    """Kernel-smoothed, translation-corrected pair sums for the pcf."""
    cdef double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] rg = np.ascontiguousarray(rgrid, dtype=np.float64)
    cdef double[:, ::1] sc = np.ascontiguousarray(setcov, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t nr = rg.shape[0]
    out_arr = np.zeros(nr)
    cdef double[::1] out = out_arr
    if n < 2:
        return out_arr
    cdef double dmax = rg[nr - 1] + bw
    cdef Py_ssize_t i, j, idx
    cdef double dx, dy, d, gam, w, u
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx = xs[j] - xs[i]
                dy = ys[j] - ys[i]
                d = hypot(dx, dy)
                if d > dmax:
                    continue
                gam = _bilinear(sc, u0 + dx / step, v0 + dy / step)
                w = 2.0 / (lv[i] * lv[j] * gam)
                idx = _first_above(rg, d - bw)
                while idx < nr:
                    u = (rg[idx] - d) / bw
                    if u >= 1.0:
                        break
                    if fabs(u) < 1.0:
                        out[idx] += 0.75 * (1.0 - u * u) / bw * w
                    idx += 1
    return out_arr


def kfun_pairs(x, y, lam, rgrid, setcov, double u0, double v0, double step):
    """Translation-corrected pair weights binned for the K-function."""
    cdef double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] rg = np.ascontiguousarray(rgrid, dtype=np.float64)
    cdef double[:, ::1] sc = np.ascontiguousarray(setcov, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t nr = rg.shape[0]
    out_arr = np.zeros(nr)
    cdef double[::1] out = out_arr
    if n < 2:
        return out_arr
    cdef double dmax = rg[nr - 1]
    cdef Py_ssize_t i, j
    cdef double dx, dy, d, gam
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx = xs[j] - xs[i]
                dy = ys[j] - ys[i]
                d = hypot(dx, dy)
                if d > dmax:
                    continue
                gam = _bilinear(sc, u0 + dx / step, v0 + dy / step)
                out[_first_at_least(rg, d)] += 2.0 / (lv[i] * lv[j] * gam)
    return out_arr


def poisson_ll_grad(yvals, counts, exposure):
    """Poisson log-likelihood terms and their derivative in Y."""
    y_b, c_b, e_b = np.broadcast_arrays(
        np.asarray(yvals, dtype=np.float64),
        np.asarray(counts, dtype=np.float64),
        np.asarray(exposure, dtype=np.float64),
    )
    grad = np.empty(y_b.shape)
    cdef double[::1] yv = np.ascontiguousarray(y_b).reshape(-1)
    cdef double[::1] cv = np.ascontiguousarray(c_b).reshape(-1)
    cdef double[::1] ev = np.ascontiguousarray(e_b).reshape(-1)
    cdef double[::1] gv = grad.reshape(-1)
    cdef Py_ssize_t n = yv.shape[0]
    cdef Py_ssize_t k
    cdef double mu, ll = 0.0
    with nogil:
        for k in range(n):
            mu = ev[k] * exp(yv[k])
            ll += cv[k] * yv[k] - mu
            gv[k] = cv[k] - mu
    return ll, grad
