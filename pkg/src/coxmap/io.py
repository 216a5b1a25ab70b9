"""Reading and writing the pipeline's file formats.

Stages exchange plain JSON and CSV so each step can be inspected, edited
and re-run by hand.  Floats are written with repr, which round-trips
exactly through both formats.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import ConfigError, FileFormatError
from .geometry import PolygonWindow, build_pattern
from .intensity import SpatialIntensity, TemporalIntensity

POINT_COLUMNS = ("x", "y", "t")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON ({exc})") from exc


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# points and windows


def read_points_csv(path) -> np.ndarray:
    """Read event locations from a CSV with x, y and t columns.

    Column order and extra columns do not matter; the header row does.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise FileFormatError(f"{path}: empty file") from None
        try:
            cols = [header.index(c) for c in POINT_COLUMNS]
        except ValueError:
            raise FileFormatError(
                f"{path}: header must contain columns x, y, t (got {header})"
            ) from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise FileFormatError(
                    f"{path}: line {lineno}: expected numeric x, y, t, got {row}"
                ) from None
    return np.array(rows, dtype=float).reshape(len(rows), 3)


def _polygon_rings(geometry, path):
    kind = geometry.get("type")
    if kind == "Polygon":
        return list(geometry["coordinates"])
    raise FileFormatError(
        f"{path}: expected a Polygon geometry, got {kind!r}"
    )


def read_window_geojson(path) -> PolygonWindow:
    """Read the observation window from a GeoJSON Polygon.

    Accepts a bare geometry, a Feature, or a FeatureCollection holding a
    single polygon.  Ring order follows GeoJSON: exterior first, then holes.
    """
    obj = _load_json(path)
    kind = obj.get("type")
    if kind == "FeatureCollection":
        features = obj.get("features", [])
        if len(features) != 1:
            raise FileFormatError(
                f"{path}: expected exactly one feature, found {len(features)}"
            )
        obj = features[0]
        kind = obj.get("type")
    if kind == "Feature":
        obj = obj.get("geometry") or {}
    return PolygonWindow(_polygon_rings(obj, path))


def save_pattern(pattern, path):
    """Write a validated pattern with its window and time interval."""
    _dump_json(
        {
            "tlim": list(pattern.tlim),
            "window": [np.asarray(r).tolist() for r in pattern.window.rings],
            "points": pattern.points.tolist(),
        },
        path,
    )


def load_pattern(path):
    obj = _load_json(path)
    try:
        window = PolygonWindow(obj["window"])
        points = np.array(obj["points"], dtype=float).reshape(-1, 3)
        return build_pattern(points, window, tuple(obj["tlim"]))
    except KeyError as exc:
        raise FileFormatError(f"{path}: missing pattern field {exc}") from None


# ---------------------------------------------------------------------------
# intensity components


def save_lambda(lam: SpatialIntensity, path):
    """Write a spatial intensity as grid metadata plus row-major values."""
    g = lam.grid
    _dump_json(
        {
            "M": g.M,
            "N": g.N,
            "cellwidth": g.cellwidth,
            "x0": g.x0,
            "y0": g.y0,
            "values": lam.values.ravel().tolist(),
        },
        path,
    )


def load_lambda(path, grid) -> SpatialIntensity:
    """Read a spatial intensity and bind it to an equivalent grid."""
    obj = _load_json(path)
    try:
        stored = (obj["M"], obj["N"], obj["cellwidth"], obj["x0"], obj["y0"])
        values = np.array(obj["values"], dtype=float).reshape(obj["M"], obj["N"])
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: bad intensity file ({exc})") from None
    current = (grid.M, grid.N, grid.cellwidth, grid.x0, grid.y0)
    if stored != current:
        raise FileFormatError(
            f"{path}: intensity grid {stored} does not match the analysis "
            f"grid {current}; re-estimate lambda"
        )
    return SpatialIntensity(grid, values)


def save_mu(mu: TemporalIntensity, path):
    obj = {"tlim": list(mu.tlim)}
    if mu.constant is not None:
        obj["constant"] = mu.constant
    else:
        obj["values"] = mu.values.tolist()
    _dump_json(obj, path)


def load_mu(path) -> TemporalIntensity:
    obj = _load_json(path)
    try:
        tlim = tuple(obj["tlim"])
    except KeyError:
        raise FileFormatError(f"{path}: missing tlim") from None
    if "constant" in obj:
        return TemporalIntensity(tlim, constant=obj["constant"])
    if "values" in obj:
        return TemporalIntensity(tlim, values=np.array(obj["values"], dtype=float))
    raise FileFormatError(f"{path}: needs either constant or values")


# ---------------------------------------------------------------------------
# summary curves and traces


def write_curve_csv(path, columns: dict):
    """Write named, equal-length numeric columns (insertion order kept)."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(len(arrays[0])):
            writer.writerow([repr(float(a[i])) for a in arrays])


def read_curve_csv(path) -> dict:
    """Read columns written by write_curve_csv, keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(f"{path}: empty file") from None
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError:
            raise FileFormatError(f"{path}: non-numeric value in curve file") from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_points_csv(points, path):
    """Write an (n, 3) array of event locations with an x,y,t header."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(POINT_COLUMNS)
        for row in pts:
            writer.writerow([repr(float(v)) for v in row])


def save_prediction_summary(summ, directory, grid=None):
    """Write the posterior summaries and traces produced by predict.

    Grids and scalars go to summary.json, per-iteration traces to
    traces.csv, and the per-cell diagnostic chains (if any were requested)
    to diag_traces.csv.  Passing the analysis grid records its geometry so
    plots can be drawn in window coordinates.
    """
    directory.mkdir(parents=True, exist_ok=True)
    _dump_json(
        {
            "grid": None if grid is None else {
                "M": grid.M,
                "N": grid.N,
                "cellwidth": grid.cellwidth,
                "x0": grid.x0,
                "y0": grid.y0,
            },
            "time_labels": list(summ.time_labels),
            "n_retained": summ.n_retained,
            "accepted": summ.accepted,
            "nonfinite_rejects": summ.nonfinite_rejects,
            "final_h": summ.final_h,
            "mean_y": summ.mean_y.tolist(),
            "var_y": summ.var_y.tolist(),
            "mean_exp_y": summ.mean_exp_y.tolist(),
            "se_exp_y": summ.se_exp_y.tolist(),
            "mean_intensity": summ.mean_intensity.tolist(),
            "grid_averages": {k: v.tolist() for k, v in summ.grid_averages.items()},
        },
        directory / "summary.json",
    )
    with open(directory / "traces.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "h", "acceptance"])
        for i in range(len(summ.h_trace)):
            writer.writerow(
                [i + 1, repr(float(summ.h_trace[i])), repr(float(summ.acceptance_trace[i]))]
            )
    if summ.diag_cells:
        with open(directory / "diag_traces.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"cell_{t}_{ix}_{iy}" for t, ix, iy in summ.diag_cells])
            for row in summ.diag_traces.T:
                writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# project configuration


def load_project(path) -> dict:
    if not path.exists():
        return {}
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise FileFormatError(f"{path}: project config must be a JSON object")
    return obj


def save_project(project: dict, path):
    _dump_json(project, path)


def require_project_entry(project: dict, key: str, hint: str):
    try:
        return project[key]
    except KeyError:
        raise ConfigError(f"project has no {key!r} yet; run `{hint}` first") from None
