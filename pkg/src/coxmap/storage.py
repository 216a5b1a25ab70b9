"""Disk-backed sample store for full MCMC runs.

Format "LGD1": an 8-byte magic string ``LGCPDMP1``, seven little-endian
unsigned 64-bit fields (version, M, N, sliceCount, sampleCapacity,
samplesWritten, lastonly), three little-endian binary64 fields (cellwidth,
x0, y0), then sliceCount little-endian signed 64-bit time labels.  Frames
follow back to back: binary64 little-endian, slice-major then row-major with
the x index fastest.  Freeform run metadata lives in a JSON sidecar next to
the data file.

The sample counter in the header is updated only after a frame write has
been flushed, so a reader never sees a torn frame: after a crash the file
may carry trailing garbage beyond the counted frames, which reopening
ignores and the next append overwrites.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatchError,
    DiskSpaceDeclinedError,
    EmptyIntersectionError,
    InsufficientSamplesError,
    StoreCapacityError,
    StoreCorruptError,
    StoreExistsError,
    StoreIndexError,
)

MAGIC = b"LGCPDMP1"
VERSION = 1
_COUNTER_OFFSET = len(MAGIC) + 5 * 8  # samplesWritten sits after 5 u64 fields

ALL = "all"


def _header_size(slice_count: int) -> int:
    return len(MAGIC) + 7 * 8 + 3 * 8 + slice_count * 8


def projected_bytes(m: int, n: int, slice_count: int, sample_capacity: int) -> int:
    return sample_capacity * slice_count * m * n * 8


class SampleStore:
    """One open LGD1 file; create with create_store, reopen with open_store."""

    def __init__(self, path, header: dict, meta: dict, fh):
        self.path = Path(path)
        self.M = header["M"]
        self.N = header["N"]
        self.slice_count = header["sliceCount"]
        self.sample_capacity = header["sampleCapacity"]
        self.samples_written = header["samplesWritten"]
        self.lastonly = bool(header["lastonly"])
        self.cellwidth = header["cellwidth"]
        self.x0 = header["x0"]
        self.y0 = header["y0"]
        self.time_labels = list(header["timeLabels"])
        self.meta = meta
        self._fh = fh
        self._frame_bytes = self.slice_count * self.M * self.N * 8
        self._header_size = _header_size(self.slice_count)

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- writing -----------------------------------------------------------

    def append(self, frame) -> None:
        """Append one (sliceCount, M, N) frame; counter advances after flush."""
        arr = np.asarray(frame, dtype="<f8")
        want = (self.slice_count, self.M, self.N)
        if arr.shape != want:
            raise DimensionMismatchError(f"frame shape {arr.shape}, store holds {want}")
        if self.samples_written >= self.sample_capacity:
            raise StoreCapacityError(
                f"store already holds its capacity of {self.sample_capacity} samples"
            )
        # [slice][y][x] with x fastest: transpose each M x N slice
        payload = np.ascontiguousarray(arr.transpose(0, 2, 1)).tobytes()
        pos = self._header_size + self.samples_written * self._frame_bytes
        self._fh.seek(pos)
        self._fh.write(payload)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.samples_written += 1
        self._fh.seek(_COUNTER_OFFSET)
        self._fh.write(struct.pack("<Q", self.samples_written))
        self._fh.flush()

    # -- reading -----------------------------------------------------------

    def _read_slice(self, sample: int, t: int) -> np.ndarray:
        """Zero-based sample and slice indices; returns an (M, N) array."""
        pos = (
            self._header_size
            + sample * self._frame_bytes
            + t * self.M * self.N * 8
        )
        self._fh.seek(pos)
        buf = self._fh.read(self.M * self.N * 8)
        if len(buf) != self.M * self.N * 8:
            raise StoreCorruptError(f"short read at sample {sample}, slice {t}")
        return np.frombuffer(buf, dtype="<f8").reshape(self.N, self.M).T

    def _read_rows(self, sample: int, t: int, y_lo: int, y_hi: int) -> np.ndarray:
        """Rows y_lo..y_hi (zero-based, exclusive hi) of one slice, (M, rows)."""
        rows = y_hi - y_lo
        pos = (
            self._header_size
            + sample * self._frame_bytes
            + (t * self.N + y_lo) * self.M * 8
        )
        self._fh.seek(pos)
        buf = self._fh.read(rows * self.M * 8)
        if len(buf) != rows * self.M * 8:
            raise StoreCorruptError(f"short read at sample {sample}, slice {t}")
        return np.frombuffer(buf, dtype="<f8").reshape(rows, self.M).T

    @staticmethod
    def _resolve_range(spec, size: int, name: str) -> tuple[int, int]:
        """1-based inclusive range spec -> zero-based half-open (lo, hi)."""
        if spec is None or (isinstance(spec, str) and spec == ALL) or (
            isinstance(spec, int) and spec == -1
        ):
            return 0, size
        if isinstance(spec, (int, np.integer)):
            lo = hi = int(spec)
        else:
            lo, hi = int(spec[0]), int(spec[1])
        if not (1 <= lo <= hi <= size):
            raise StoreIndexError(
                f"{name} range ({lo}, {hi}) outside 1..{size}"
            )
        return lo - 1, hi

    def extract(self, x=ALL, y=ALL, t=ALL, s=ALL) -> np.ndarray:
        """Hyper-rectangle of samples as an (x, y, t, sample) array.

        Ranges are 1-based inclusive (lo, hi) tuples, single integers, or
        the sentinel "all" (-1 also accepted).
        """
        x_lo, x_hi = self._resolve_range(x, self.M, "x")
        y_lo, y_hi = self._resolve_range(y, self.N, "y")
        t_lo, t_hi = self._resolve_range(t, self.slice_count, "t")
        s_lo, s_hi = self._resolve_range(s, self.samples_written, "sample")
        out = np.empty((x_hi - x_lo, y_hi - y_lo, t_hi - t_lo, s_hi - s_lo))
        for si in range(s_lo, s_hi):
            for ti in range(t_lo, t_hi):
                rows = self._read_rows(si, ti, y_lo, y_hi)
                out[:, :, ti - t_lo, si - s_lo] = rows[x_lo:x_hi, :]
        return out

    def cell_centroids(self) -> tuple[np.ndarray, np.ndarray]:
        cx = self.x0 + (np.arange(self.M) + 0.5) * self.cellwidth
        cy = self.y0 + (np.arange(self.N) + 0.5) * self.cellwidth
        return cx, cy

    def extract_polygon(self, window, t=ALL) -> tuple[np.ndarray, np.ndarray]:
        """Traces for cells whose centroids fall inside the polygon.

        Returns (values, cells): values has shape (ncells, t, sample) and
        cells is the (ncells, 2) array of zero-based (ix, iy) indices.
        """
        cx, cy = self.cell_centroids()
        gx = np.repeat(cx, self.N)
        gy = np.tile(cy, self.M)
        keep = window.contains(gx, gy)
        if not np.any(keep):
            raise EmptyIntersectionError("no cell centroid falls inside the polygon")
        cells = np.argwhere(keep.reshape(self.M, self.N))
        full = self.extract(t=t)
        vals = full[cells[:, 0], cells[:, 1], :, :]
        return vals, cells


def create_store(
    path,
    m: int,
    n: int,
    slice_count: int,
    sample_capacity: int,
    meta: dict | None = None,
    *,
    cellwidth: float = 1.0,
    x0: float = 0.0,
    y0: float = 0.0,
    time_labels=None,
    lastonly: bool = False,
    force: bool = False,
    confirm: Callable[[int], bool] | None = None,
) -> SampleStore:
    """Create a new store, asking for confirmation of the projected size.

    Refuses with DiskSpaceDeclinedError unless ``force`` is set or the
    ``confirm`` callback approves the projected byte count.
    """
    path = Path(path)
    if path.exists():
        raise StoreExistsError(f"{path} already exists")
    if min(m, n, slice_count, sample_capacity) < 1:
        raise ValueError("store dimensions must be positive")
    projected = projected_bytes(m, n, slice_count, sample_capacity)
    if not force:
        if confirm is None or not confirm(projected):
            raise DiskSpaceDeclinedError(projected)
    if time_labels is None:
        time_labels = list(range(1, slice_count + 1))
    time_labels = [int(v) for v in time_labels]
    if len(time_labels) != slice_count:
        raise ValueError("need one time label per slice")
    header = struct.pack(
        f"<8s7Q3d{slice_count}q",
        MAGIC,
        VERSION,
        m,
        n,
        slice_count,
        sample_capacity,
        0,
        int(lastonly),
        float(cellwidth),
        float(x0),
        float(y0),
        *time_labels,
    )
    fh = open(path, "w+b")
    fh.write(header)
    fh.flush()
    os.fsync(fh.fileno())
    meta = dict(meta or {})
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2))
    hdr = dict(
        M=m, N=n, sliceCount=slice_count, sampleCapacity=sample_capacity,
        samplesWritten=0, lastonly=lastonly, cellwidth=cellwidth, x0=x0, y0=y0,
        timeLabels=time_labels,
    )
    return SampleStore(path, hdr, meta, fh)


def open_store(path, mode: str = "r") -> SampleStore:
    """Open an existing store; mode "a" allows appending."""
    path = Path(path)
    fh = open(path, "r+b" if mode == "a" else "rb")
    fixed = fh.read(len(MAGIC) + 7 * 8 + 3 * 8)
    if len(fixed) < len(MAGIC) + 7 * 8 + 3 * 8:
        fh.close()
        raise StoreCorruptError(f"{path} is shorter than a header")
    magic = fixed[: len(MAGIC)]
    if magic != MAGIC:
        fh.close()
        raise StoreCorruptError(f"{path} does not start with the LGD1 magic")
    version, m, n, slices, cap, written, lastonly = struct.unpack_from(
        "<7Q", fixed, len(MAGIC)
    )
    if version != VERSION:
        fh.close()
        raise StoreCorruptError(f"unsupported store version {version}")
    cellwidth, x0, y0 = struct.unpack_from("<3d", fixed, len(MAGIC) + 7 * 8)
    labels_buf = fh.read(slices * 8)
    if len(labels_buf) != slices * 8:
        fh.close()
        raise StoreCorruptError(f"{path} header truncated in the time labels")
    labels = list(struct.unpack(f"<{slices}q", labels_buf))
    need = _header_size(slices) + written * slices * m * n * 8
    actual = path.stat().st_size
    if actual < need:
        fh.close()
        raise StoreCorruptError(
            f"{path} holds {actual} bytes but the header promises {need}"
        )
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    hdr = dict(
        M=m, N=n, sliceCount=slices, sampleCapacity=cap, samplesWritten=written,
        lastonly=lastonly, cellwidth=cellwidth, x0=x0, y0=y0, timeLabels=labels,
    )
    return SampleStore(path, hdr, meta, fh)


def expectation(store: SampleStore, fn) -> list[np.ndarray]:
    """Streaming per-slice mean of fn over all samples, one frame in memory."""
    if store.samples_written == 0:
        raise InsufficientSamplesError("store holds no samples")
    acc: list[np.ndarray | None] = [None] * store.slice_count
    for si in range(store.samples_written):
        for ti in range(store.slice_count):
            val = np.asarray(fn(store._read_slice(si, ti)), dtype=float)
            if val.shape[:2] != (store.M, store.N):
                raise DimensionMismatchError(
                    "fn must keep the leading M x N cell dimensions"
                )
            if acc[ti] is None:
                acc[ti] = val.copy()
            else:
                acc[ti] += val
    return [a / store.samples_written for a in acc]


def quantile(store: SampleStore, probs, fn=None, block_bytes: int = 1 << 24):
    """Cellwise empirical quantiles of fn(Y) across samples, per slice.

    Linear interpolation on order statistics (numpy's default); processed
    in row blocks so memory stays bounded at roughly ``block_bytes``.
    Returns one (M, N, len(probs)) array per slice.
    """
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if probs.ndim != 1 or len(probs) == 0 or np.any((probs <= 0) | (probs >= 1)):
        raise ValueError("probs must lie strictly inside (0, 1)")
    nsamp = store.samples_written
    if nsamp < 2:
        raise InsufficientSamplesError("quantiles need at least 2 samples")
    rows_per_block = max(1, block_bytes // (nsamp * store.M * 8))
    out = []
    for ti in range(store.slice_count):
        res = np.empty((store.M, store.N, len(probs)))
        for y_lo in range(0, store.N, rows_per_block):
            y_hi = min(store.N, y_lo + rows_per_block)
            block = np.empty((nsamp, store.M, y_hi - y_lo))
            for si in range(nsamp):
                block[si] = store._read_rows(si, ti, y_lo, y_hi)
            if fn is not None:
                block = fn(block)
            res[:, y_lo:y_hi, :] = np.moveaxis(
                np.quantile(block, probs, axis=0, method="linear"), 0, -1
            )
        out.append(res)
    return out
