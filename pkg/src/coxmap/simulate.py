"""Forward simulation of the space-time log-Gaussian Cox process.

The field is simulated on the same grid the fitting pipeline uses.  Time is
advanced in fine steps with the exact stationary OU update

    Y_{t+d} = m + a_d (Y_t - m) + sqrt(1 - a_d^2) * (stationary deviate),

a_d = exp(-theta d), m = -sigma^2/2, so every intermediate field is an exact
draw from the stationary law and E[exp Y] = 1 at all times.  Each fine step
contributes per-cell Poisson counts with mean mu(t) * lambda_cell * area *
step * exp(Y_cell); events are scattered uniformly inside their cell and
step.  Finer grids and the automatic time step make the approximation to the
continuous process as close as wanted.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .covariance import apply_sqrt_cov, build_embedding
from .errors import CellwidthWarning, DimensionMismatchError
from .geometry import build_grid, build_pattern, num_intervals
from .intensity import SpatialIntensity, TemporalIntensity

MAX_CELL_RESAMPLES = 64


def choose_time_step(model) -> float:
    """Fine time step: at most 0.1 mean-reversion times, capped at 1."""
    return min(1.0, 0.1 / model.theta)


def _stationary_deviate(embedding, rng):
    # zero-mean stationary draw; the mean is handled by the OU recursion
    return apply_sqrt_cov(embedding, rng.standard_normal(embedding.shape))


def _scatter_in_window(window, grid, ix, iy, rng):
    """Uniform positions inside the given cells, kept inside the window.

    Cells straddling the boundary are resampled; after too many misses the
    point falls back to the cell centroid, which is inside by construction
    (only inside-mask cells carry intensity).
    """
    w = grid.cellwidth
    x = grid.x0 + (ix + rng.uniform(size=len(ix))) * w
    y = grid.y0 + (iy + rng.uniform(size=len(iy))) * w
    bad = ~window.contains(x, y)
    tries = 0
    while np.any(bad):
        tries += 1
        if tries > MAX_CELL_RESAMPLES:
            cx, cy = grid.centroids()
            x[bad] = cx[ix[bad]]
            y[bad] = cy[iy[bad]]
            break
        k = int(bad.sum())
        x[bad] = grid.x0 + (ix[bad] + rng.uniform(size=k)) * w
        y[bad] = grid.y0 + (iy[bad] + rng.uniform(size=k)) * w
        bad[bad] = ~window.contains(x[bad], y[bad])
    return x, y


def lgcp_sim(window, tlim, lam, mu, cellwidth, model, seed=None):
    """Draw one realisation of the process as a SpaceTimePointPattern.

    ``lam`` may be None for a uniform spatial intensity over the window;
    when given it must live on the grid this cell width induces.
    """
    if cellwidth > model.phi / 2:
        warnings.warn(
            f"cellwidth {cellwidth} is coarse against the correlation scale "
            f"phi = {model.phi}; the simulation may be too smooth inside cells",
            CellwidthWarning,
        )
    grid = build_grid(window, cellwidth=cellwidth)
    if lam is None:
        lam = SpatialIntensity.from_values(
            grid, grid.inside_mask.astype(float)
        )
    else:
        g = lam.grid
        if (g.M, g.N, g.cellwidth, g.origin) != (
            grid.M, grid.N, grid.cellwidth, grid.origin
        ):
            raise DimensionMismatchError(
                "lambda lives on a different grid than this window/cellwidth"
            )
    mu = (
        mu
        if isinstance(mu, TemporalIntensity)
        else TemporalIntensity(tlim, constant=float(mu))
    )
    if tuple(mu.tlim) != (float(tlim[0]), float(tlim[1])):
        raise ValueError("mu covers a different time window than tlim")

    embedding = build_embedding(model, grid)
    rng = np.random.default_rng(seed)
    mean = model.field_mean
    delta = choose_time_step(model)

    m, n = grid.M, grid.N
    base_rate = lam.values * grid.cell_area  # per unit time at exp(Y) = 1
    y = mean + _stationary_deviate(embedding, rng)

    t0, t1 = float(tlim[0]), float(tlim[1])
    xs, ys, ts = [], [], []
    for k in range(1, num_intervals((t0, t1)) + 1):
        start = t0 + (k - 1)
        span = min(t0 + k, t1) - start
        nsteps = max(1, math.ceil(span / delta - 1e-12))
        widths = np.full(nsteps, span / nsteps)
        rate_k = mu.rate(k) * base_rate
        offset = 0.0
        for w_step in widths:
            expy = np.exp(y[:m, :n])
            counts = rng.poisson(rate_k * expy * w_step)
            total = int(counts.sum())
            if total:
                ix, iy = np.nonzero(counts)
                reps = counts[ix, iy]
                ix = np.repeat(ix, reps)
                iy = np.repeat(iy, reps)
                px, py = _scatter_in_window(window, grid, ix, iy, rng)
                pt = start + offset + rng.uniform(0.0, w_step, size=total)
                xs.append(px)
                ys.append(py)
                ts.append(pt)
            offset += w_step
            a = math.exp(-model.theta * w_step)
            y = mean + a * (y - mean) + math.sqrt(1.0 - a * a) * _stationary_deviate(
                embedding, rng
            )

    if xs:
        pts = np.column_stack(
            [np.concatenate(xs), np.concatenate(ys), np.concatenate(ts)]
        )
    else:
        pts = np.empty((0, 3))
    return build_pattern(pts, window, (t0, t1))
