"""Fixed spatial and temporal intensity components.

The spatial component lambda(s) integrates to one over the window and is
held cell-averaged on the analysis grid.  The temporal component mu(t) is a
rate per unit time interval, either constant or tabulated, and its sum over
unit intervals equals the observed event count.

Kernel estimation bins event locations to grid cells and smooths with an
isotropic Gaussian via FFT convolution.  Each cell is edge-corrected by the
kernel mass falling inside the window, computed on the same grid, before the
normalization is re-imposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    DegenerateTimeWindowError,
    EmptyPatternError,
    InvalidBandwidthError,
    ZeroIntensityError,
)
from .geometry import GridSpec, SpaceTimePointPattern, num_intervals

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpatialIntensity:
    """Cell-averaged lambda(s) on a grid, normalized to unit integral."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.M, self.grid.N):
            raise ValueError(
                f"values shape {v.shape} does not match grid "
                f"({self.grid.M}, {self.grid.N})"
            )
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("intensity values must be finite and non-negative")
        if np.any(v[~self.grid.inside_mask] != 0.0):
            raise ValueError("cells outside the window must carry zero intensity")
        total = float(v.sum() * self.grid.cell_area)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"intensity integrates to {total!r}, expected 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, grid: GridSpec, values) -> "SpatialIntensity":
        """Mask and renormalize raw non-negative values, then construct."""
        v = np.asarray(values, dtype=float).copy()
        if v.shape != (grid.M, grid.N):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({grid.M}, {grid.N})"
            )
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("intensity values must be finite and non-negative")
        v[~grid.inside_mask] = 0.0
        total = float(v.sum() * grid.cell_area)
        if total <= 0:
            raise ZeroIntensityError("intensity is identically zero inside the window")
        return cls(grid, v / total)


@dataclass(frozen=True, eq=False)
class TemporalIntensity:
    """Per-unit-interval rate mu(t) over a time window.

    Exactly one of ``constant`` and ``values`` is set.  Tabulated values are
    indexed by the 1-based unit interval; interval k covers (t_a+k-1, t_a+k].
    """

    tlim: tuple[float, float]
    constant: float | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        a, b = float(self.tlim[0]), float(self.tlim[1])
        if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
            raise DegenerateTimeWindowError(f"invalid time window ({a}, {b})")
        object.__setattr__(self, "tlim", (a, b))
        if (self.constant is None) == (self.values is None):
            raise ValueError("exactly one of constant and values must be given")
        if self.constant is not None:
            c = float(self.constant)
            if not math.isfinite(c) or c < 0:
                raise ValueError("constant rate must be finite and non-negative")
            object.__setattr__(self, "constant", c)
        else:
            v = np.asarray(self.values, dtype=float)
            k = num_intervals(self.tlim)
            if v.shape != (k,):
                raise ValueError(
                    f"expected {k} per-interval values for tlim {self.tlim}, "
                    f"got shape {v.shape}"
                )
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("rates must be finite and non-negative")
            object.__setattr__(self, "values", v)

    @property
    def intervals(self) -> int:
        return num_intervals(self.tlim)

    def rates(self) -> np.ndarray:
        """Rate for each unit interval, constant broadcast if needed."""
        if self.constant is not None:
            return np.full(self.intervals, self.constant)
        return self.values.copy()

    def rate(self, k: int) -> float:
        if not 1 <= k <= self.intervals:
            raise IndexError(f"interval {k} outside 1..{self.intervals}")
        if self.constant is not None:
            return self.constant
        return float(self.values[k - 1])


def default_bandwidth(window) -> float:
    """Smoothing default when the user gives none: a tenth of the short side."""
    xmin, xmax, ymin, ymax = window.bbox
    return 0.1 * min(xmax - xmin, ymax - ymin)


def kernel_lambda(
    pattern: SpaceTimePointPattern,
    grid: GridSpec,
    bandwidth: float,
    adjust: float = 1.0,
) -> SpatialIntensity:
    """Edge-corrected Gaussian kernel estimate of lambda(s), times ignored."""
    if pattern.n == 0:
        raise EmptyPatternError("no events to smooth")
    if not (bandwidth > 0) or not math.isfinite(bandwidth):
        raise InvalidBandwidthError(f"bandwidth must be positive, got {bandwidth}")
    if not (adjust > 0) or not math.isfinite(adjust):
        raise InvalidBandwidthError(f"adjust must be positive, got {adjust}")
    h = bandwidth * adjust

    ix, iy = grid.cell_of(pattern.x, pattern.y)
    counts = np.zeros((grid.M, grid.N))
    np.add.at(counts, (ix, iy), 1.0)

    # Gaussian kernel tabulated at every cell offset; the overall constant
    # cancels between the raw sum and the edge-correction mass.
    w = grid.cellwidth
    dx = np.arange(-(grid.M - 1), grid.M) * w
    dy = np.arange(-(grid.N - 1), grid.N) * w
    kern = np.exp(-(dx[:, None] ** 2 + dy[None, :] ** 2) / (2.0 * h * h))

    raw = fftconvolve(counts, kern, mode="same")
    mass = fftconvolve(grid.inside_mask.astype(float), kern, mode="same")
    vals = np.zeros_like(raw)
    ok = grid.inside_mask & (mass > 0)
    vals[ok] = np.maximum(raw[ok], 0.0) / mass[ok]
    return SpatialIntensity.from_values(grid, vals)


def interval_counts(pattern: SpaceTimePointPattern) -> np.ndarray:
    """Event counts per unit time interval, index k-1 for interval k."""
    k = num_intervals(pattern.tlim)
    idx = pattern.time_indices()
    return np.bincount(idx, minlength=k + 1)[1:].astype(float)


def _lowess(x: np.ndarray, y: np.ndarray, frac: float, iterations: int = 3) -> np.ndarray:
    """Locally-weighted linear smoother: tricube distance weights over the
    nearest ceil(frac*n) points, bisquare robustness reweighting."""
    n = len(x)
    r = min(n, max(1, math.ceil(frac * n)))
    delta = np.ones(n)
    fit = np.empty(n)
    for iteration in range(iterations + 1):
        for i in range(n):
            d = np.abs(x - x[i])
            span = np.partition(d, r - 1)[r - 1]
            if span <= 0.0:
                wts = delta * (d == 0.0)
                total = wts.sum()
                fit[i] = float((wts * y).sum() / total) if total > 0 else y[i]
                continue
            u = np.clip(d / span, 0.0, 1.0)
            wts = (1.0 - u**3) ** 3 * delta
            sw = wts.sum()
            swx = (wts * x).sum()
            swy = (wts * y).sum()
            swxx = (wts * x * x).sum()
            swxy = (wts * x * y).sum()
            den = sw * swxx - swx * swx
            if den <= 1e-12 * max(sw * swxx, 1e-300):
                fit[i] = swy / sw if sw > 0 else y[i]
            else:
                slope = (sw * swxy - swx * swy) / den
                fit[i] = (swy - slope * swx) / sw + slope * x[i]
        if iteration == iterations:
            break
        resid = y - fit
        scale = np.median(np.abs(resid))
        if scale <= 0:
            break
        u = np.clip(resid / (6.0 * scale), -1.0, 1.0)
        delta = (1.0 - u * u) ** 2
    return fit


def mu_estimate(pattern: SpaceTimePointPattern, f: float = 2.0 / 3.0) -> TemporalIntensity:
    """Smooth sqrt of the interval counts, square back to a rate table."""
    if not (0 < f <= 1):
        raise ValueError(f"smoothing fraction must be in (0, 1], got {f}")
    counts = interval_counts(pattern)
    k = len(counts)
    if k < 2:
        raise DegenerateTimeWindowError(
            "temporal smoothing needs at least 2 unit intervals"
        )
    x = np.arange(1, k + 1, dtype=float)
    fitted = _lowess(x, np.sqrt(counts), f)
    return TemporalIntensity(pattern.tlim, values=fitted**2)


def constant_in_time(pattern: SpaceTimePointPattern) -> TemporalIntensity:
    """Constant rate: events per unit time over the whole window."""
    a, b = pattern.tlim
    return TemporalIntensity(pattern.tlim, constant=pattern.n / (b - a))


def scale_temporal(
    raw: Callable[[float], float] | Sequence[float] | np.ndarray,
    pattern: SpaceTimePointPattern,
) -> TemporalIntensity:
    """Rescale a raw rate shape so its sum over unit intervals equals n.

    Callables are sampled at the interval labels t_a + k.  Idempotent: an
    already-scaled table passes through unchanged.
    """
    a, _ = pattern.tlim
    k = num_intervals(pattern.tlim)
    if callable(raw):
        vals = np.array([float(raw(a + j)) for j in range(1, k + 1)])
    else:
        vals = np.asarray(raw, dtype=float)
        if vals.shape != (k,):
            raise ValueError(
                f"expected {k} per-interval values for tlim {pattern.tlim}, "
                f"got shape {vals.shape}"
            )
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("raw rates must be finite and non-negative")
    total = vals.sum()
    if total <= 0:
        raise ZeroIntensityError("raw temporal intensity is identically zero")
    return TemporalIntensity(pattern.tlim, values=vals * (pattern.n / total))
