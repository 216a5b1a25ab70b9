"""Observation windows, space-time point patterns and FFT grids.

Conventions used throughout the package:

* Coordinates are planar, in a common length unit (km in the motivating
  application).  No geodesy.
* A polygon window is a list of rings; the first ring is the outer boundary
  and must wind counter-clockwise, any further rings are holes and must wind
  clockwise.  Rings are stored *open* (no repeated final vertex).
* Grids are square-celled.  An M×N grid has M cells along x and N along y,
  both powers of two; arrays defined on the grid are indexed ``[ix, iy]``.
* Time is discretised into unit intervals: an event at time t belongs to
  interval ``ceil(t - t_a)``, with t = t_a assigned to interval 1.  Interval
  k therefore covers (t_a + k - 1, t_a + k].
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DegenerateWindowError,
    InvalidCellwidthError,
    InvalidWindowError,
    PointOutsideWindowError,
    TimeIndexError,
    TimeOutsideRangeError,
)

__all__ = [
    "PolygonWindow",
    "SpaceTimePointPattern",
    "GridSpec",
    "CountStack",
    "RotationResult",
    "build_pattern",
    "build_grid",
    "bin_counts",
    "rotation_gain",
    "apply_rotation",
    "gain_percent",
    "next_pow2",
    "time_index",
    "num_intervals",
]


def next_pow2(n):
    """Smallest power of two that is >= n (n >= 1)."""
    n = int(n)
    if n < 1:
        raise ValueError("need n >= 1")
    return 1 << (n - 1).bit_length()


def _ring_array(vertices):
    ring = np.asarray(vertices, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise InvalidWindowError("ring must be a sequence of (x, y) vertices")
    if not np.all(np.isfinite(ring)):
        raise InvalidWindowError("ring contains non-finite coordinates")
    # accept closed input but store open rings
    if ring.shape[0] >= 2 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    if ring.shape[0] < 3:
        raise InvalidWindowError("ring needs at least 3 distinct vertices")
    return ring


def _signed_area(ring):
    x, y = ring[:, 0], ring[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y2 - x2 * y))


def _segments_properly_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    o1 = orient(p1, p2, p3)
    o2 = orient(p1, p2, p4)
    o3 = orient(p3, p4, p1)
    o4 = orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _check_simple(ring):
    k = ring.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            # skip edges sharing a vertex (adjacent, incl. the wrap-around pair)
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue
            if _segments_properly_intersect(
                ring[i], ring[(i + 1) % k], ring[j], ring[(j + 1) % k]
            ):
                raise InvalidWindowError("ring is self-intersecting")


@dataclass(frozen=True, eq=False)
class PolygonWindow:
    """Polygonal observation window, possibly with holes."""

    rings: tuple

    def __init__(self, rings):
        arrays = tuple(_ring_array(r) for r in rings)
        if not arrays:
            raise InvalidWindowError("window needs at least one ring")
        outer = arrays[0]
        if _signed_area(outer) <= 0:
            raise InvalidWindowError("outer ring must wind counter-clockwise")
        for hole in arrays[1:]:
            if _signed_area(hole) >= 0:
                raise InvalidWindowError("hole rings must wind clockwise")
        for ring in arrays:
            _check_simple(ring)
        eps = 1e-12 * max(1.0, float(np.max(np.abs(outer))))
        for hole in arrays[1:]:
            ok = _kernels.points_in_polygon(
                hole[:, 0], hole[:, 1], [outer], boundary_eps=eps
            )
            if not np.all(ok):
                raise InvalidWindowError("hole extends outside the outer ring")
        object.__setattr__(self, "rings", arrays)
        if self.area <= 0:
            raise DegenerateWindowError("window has non-positive area")

    @property
    def area(self):
        return sum(_signed_area(r) for r in self.rings)

    @property
    def bbox(self):
        outer = self.rings[0]
        return (
            float(outer[:, 0].min()),
            float(outer[:, 0].max()),
            float(outer[:, 1].min()),
            float(outer[:, 1].max()),
        )

    @property
    def centroid(self):
        cx = cy = a = 0.0
        for ring in self.rings:
            x, y = ring[:, 0], ring[:, 1]
            x2, y2 = np.roll(x, -1), np.roll(y, -1)
            cross = x * y2 - x2 * y
            a += 0.5 * float(np.sum(cross))
            cx += float(np.sum((x + x2) * cross)) / 6.0
            cy += float(np.sum((y + y2) * cross)) / 6.0
        return (cx / a, cy / a)

    def _boundary_eps(self):
        xmin, xmax, ymin, ymax = self.bbox
        scale = max(abs(xmin), abs(xmax), abs(ymin), abs(ymax), xmax - xmin, ymax - ymin)
        return 1e-9 * max(scale, 1.0)

    def contains(self, x, y, boundary=True):
        """Vectorised containment test (boundary inclusive when asked)."""
        eps = self._boundary_eps() if boundary else 0.0
        return _kernels.points_in_polygon(
            np.atleast_1d(np.asarray(x, float)),
            np.atleast_1d(np.asarray(y, float)),
            list(self.rings),
            boundary_eps=eps,
        )

    def convex_hull_vertices(self):
        """Outer-ring convex hull (Andrew's monotone chain), CCW."""
        pts = sorted({(float(x), float(y)) for x, y in self.rings[0]})
        if len(pts) < 3:
            raise DegenerateWindowError("window is degenerate")

        def cross(o, a, b):
            return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

        lower, upper = [], []
        for p in pts:
            while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        for p in reversed(pts):
            while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
                upper.pop()
            upper.append(p)
        return np.asarray(lower[:-1] + upper[:-1], dtype=float)


@dataclass(frozen=True, eq=False)
class SpaceTimePointPattern:
    """Events (x, y, t) observed in a window over a time interval."""

    points: np.ndarray  # (n, 3) float array, columns x, y, t
    window: PolygonWindow
    tlim: tuple

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def t(self):
        return self.points[:, 2]

    def time_indices(self):
        return time_index(self.t, self.tlim[0])

    def summary(self):
        xmin, xmax, ymin, ymax = self.window.bbox
        ta, tb = self.tlim
        return (
            "space-time point pattern\n"
            f"  points: {self.n}\n"
            f"  enclosing rectangle: [{xmin:.10g}, {xmax:.10g}] x [{ymin:.10g}, {ymax:.10g}]\n"
            f"  time window: [{ta:.10g}, {tb:.10g}]"
        )

    def __str__(self):
        return self.summary()


def time_index(t, t_a):
    """Unit-interval index of time t: ceil(t - t_a), with t == t_a -> 1."""
    idx = np.ceil(np.asarray(t, dtype=float) - t_a).astype(np.int64)
    return np.maximum(idx, 1)


def num_intervals(tlim):
    return int(math.ceil(tlim[1] - tlim[0]))


def build_pattern(points, window, tlim):
    """Validate events against the window and time interval."""
    ta, tb = float(tlim[0]), float(tlim[1])
    if not (math.isfinite(ta) and math.isfinite(tb)) or not ta < tb:
        raise TimeOutsideRangeError(None, f"invalid time interval ({ta}, {tb})")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        pts = np.empty((0, 3))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be (n, 3): columns x, y, t")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite values")
    bad_t = np.nonzero((pts[:, 2] < ta) | (pts[:, 2] > tb))[0]
    if bad_t.size:
        raise TimeOutsideRangeError(int(bad_t[0]))
    if pts.shape[0]:
        ok = window.contains(pts[:, 0], pts[:, 1])
        bad = np.nonzero(~ok)[0]
        if bad.size:
            raise PointOutsideWindowError(int(bad[0]))
    return SpaceTimePointPattern(points=pts, window=window, tlim=(ta, tb))


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Square-celled output grid covering a window's bounding box.

    M, N are powers of two; the FFT computation grid is the (2M, 2N)
    extension.  ``inside_mask[ix, iy]`` is True when the cell centroid lies
    in the window.
    """

    M: int
    N: int
    cellwidth: float
    origin: tuple
    inside_mask: np.ndarray = field(repr=False)

    @property
    def x0(self):
        return self.origin[0]

    @property
    def y0(self):
        return self.origin[1]

    @property
    def cell_area(self):
        return self.cellwidth * self.cellwidth

    def centroids(self):
        cx = self.x0 + (np.arange(self.M) + 0.5) * self.cellwidth
        cy = self.y0 + (np.arange(self.N) + 0.5) * self.cellwidth
        return cx, cy

    def cell_of(self, x, y):
        """Cell indices of points; half-open cells, outer edge closed."""
        ix = np.floor((np.asarray(x, float) - self.x0) / self.cellwidth).astype(np.int64)
        iy = np.floor((np.asarray(y, float) - self.y0) / self.cellwidth).astype(np.int64)
        ix = np.clip(ix, 0, self.M - 1)
        iy = np.clip(iy, 0, self.N - 1)
        return ix, iy


def _axis_cells(extent, cellwidth):
    ratio = extent / cellwidth
    # guard against float fuzz pushing an exact integer ratio over the edge
    raw = max(1, int(math.ceil(ratio * (1.0 - 1e-12))))
    return next_pow2(raw)


def build_grid(window, cellwidth=None, gridsize=None):
    """Construct the output GridSpec from a cell width or a requested size.

    The cell counts are the smallest powers of two whose span covers the
    bounding-box extents.  Any slack (span minus extent) is split evenly, so
    the grid is centred on the bounding box and boundary points stay off the
    outer grid edge whenever there is slack to spare.
    """
    if (cellwidth is None) == (gridsize is None):
        raise InvalidCellwidthError("provide exactly one of cellwidth / gridsize")
    xmin, xmax, ymin, ymax = window.bbox
    ext_x, ext_y = xmax - xmin, ymax - ymin
    if ext_x <= 0 or ext_y <= 0:
        raise DegenerateWindowError("window bounding box has zero extent")
    if gridsize is not None:
        nx, ny = int(gridsize[0]), int(gridsize[1])
        if nx < 1 or ny < 1:
            raise InvalidCellwidthError("gridsize entries must be >= 1")
        M, N = next_pow2(nx), next_pow2(ny)
        cellwidth = max(ext_x / M, ext_y / N)
    else:
        cellwidth = float(cellwidth)
        if not math.isfinite(cellwidth) or cellwidth <= 0:
            raise InvalidCellwidthError(f"cellwidth must be positive, got {cellwidth}")
        M = _axis_cells(ext_x, cellwidth)
        N = _axis_cells(ext_y, cellwidth)
    x0 = xmin - 0.5 * (M * cellwidth - ext_x)
    y0 = ymin - 0.5 * (N * cellwidth - ext_y)
    cx = x0 + (np.arange(M) + 0.5) * cellwidth
    cy = y0 + (np.arange(N) + 0.5) * cellwidth
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    mask = window.contains(gx.ravel(), gy.ravel()).reshape(M, N)
    return GridSpec(M=M, N=N, cellwidth=cellwidth, origin=(x0, y0), inside_mask=mask)


@dataclass(frozen=True, eq=False)
class CountStack:
    """Per-interval cell counts: counts[k] is the M×N array for times[k]."""

    times: tuple
    counts: np.ndarray  # (T, M, N) int64

    @property
    def totals(self):
        return self.counts.sum(axis=(1, 2))


def bin_counts(pattern, grid, times):
    """Bin events into grid cells for the requested unit-time intervals.

    Events in cells whose centroid falls outside the window are dropped:
    those cells are masked out of the likelihood, so their counts must be
    zero for mass bookkeeping to balance.
    """
    times = [int(t) for t in times]
    kmax = num_intervals(pattern.tlim)
    for t in times:
        if t < 1 or t > kmax:
            raise TimeIndexError(f"time index {t} outside 1..{kmax}")
    out = np.zeros((len(times), grid.M, grid.N), dtype=np.int64)
    if pattern.n:
        tidx = pattern.time_indices()
        ix, iy = grid.cell_of(pattern.x, pattern.y)
        slot = np.full(kmax + 1, -1, dtype=np.int64)
        for k, t in enumerate(times):
            slot[t] = k
        ks = slot[tidx]
        keep = ks >= 0
        np.add.at(out, (ks[keep], ix[keep], iy[keep]), 1)
        out *= grid.inside_mask[None, :, :]
    return CountStack(times=tuple(times), counts=out)


@dataclass(frozen=True, eq=False)
class RotationResult:
    angle: float
    matrix: np.ndarray
    gain_percent: float
    worthwhile: bool

    def inverse(self):
        return RotationResult(
            angle=-self.angle,
            matrix=self.matrix.T.copy(),
            gain_percent=self.gain_percent,
            worthwhile=self.worthwhile,
        )


def _rotation_matrix(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def gain_percent(cells_unrotated, cells_rotated):
    """Percentage increase in FFT cells from not rotating, floored at 0."""
    return max(0.0, 100.0 * (cells_unrotated - cells_rotated) / cells_rotated)


def fft_cells_at_angle(window, angle, cellwidth):
    """Extended FFT grid cell count (2M·2N) after rotating by ``angle``."""
    hull = window.convex_hull_vertices()
    c = np.asarray(window.centroid)
    rot = (hull - c) @ _rotation_matrix(angle).T
    ext_x = float(rot[:, 0].max() - rot[:, 0].min())
    ext_y = float(rot[:, 1].max() - rot[:, 1].min())
    return 4 * _axis_cells(ext_x, cellwidth) * _axis_cells(ext_y, cellwidth)


def _canonical_angle(angle):
    """Map an angle to [-pi/4, pi/4); the cell metric has period pi/2."""
    a = math.fmod(angle, math.pi / 2)
    if a < -math.pi / 4:
        a += math.pi / 2
    elif a >= math.pi / 4:
        a -= math.pi / 2
    return a


def rotation_gain(pattern, cellwidth):
    """Search caliper angles for the rotation minimising FFT grid cells.

    Candidates are the outer-hull edge directions (the minimal-area bounding
    rectangle always has a side collinear with a hull edge) plus zero.  Ties
    are broken towards the smallest |angle|.
    """
    if cellwidth <= 0:
        raise InvalidCellwidthError("cellwidth must be positive")
    window = pattern.window
    hull = window.convex_hull_vertices()
    edges = np.roll(hull, -1, axis=0) - hull
    cand = {0.0}
    for ex, ey in edges:
        cand.add(_canonical_angle(-math.atan2(ey, ex)))
    best = None
    for a in sorted(cand, key=lambda v: (abs(v), v)):
        cells = fft_cells_at_angle(window, a, cellwidth)
        if best is None or cells < best[1]:
            best = (a, cells)
    angle, best_cells = best
    base_cells = fft_cells_at_angle(window, 0.0, cellwidth)
    gain = gain_percent(base_cells, best_cells)
    if gain == 0.0:
        angle = 0.0
    return RotationResult(
        angle=angle,
        matrix=_rotation_matrix(angle),
        gain_percent=gain,
        worthwhile=gain > 0.0,
    )


def apply_rotation(pattern, rotation):
    """Rotate a pattern (points and window) about the window centroid."""
    c = np.asarray(pattern.window.centroid)
    R = rotation.matrix
    rings = [c + (np.asarray(r) - c) @ R.T for r in pattern.window.rings]
    window = PolygonWindow(rings)
    pts = pattern.points.copy()
    if pts.shape[0]:
        pts[:, :2] = c + (pts[:, :2] - c) @ R.T
    return SpaceTimePointPattern(points=pts, window=window, tlim=pattern.tlim)
