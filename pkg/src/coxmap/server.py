"""HTTP API behind the browser tuning panels.

Serves the recorded empirical summaries and, on demand, theoretical curves
evaluated on the same distance/lag grids, so an interactive client never
recomputes engine numerics.  Everything is read-only except POST
/api/params, which persists the chosen values into the project file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .covariance import CovarianceModel
from .errors import CoxmapError
from .estimation import acf_decay_curve, contrast_curve, contrast_value
from .geometry import build_grid
from .intensity import default_bandwidth, kernel_lambda
from .io import load_pattern, load_project, read_curve_csv, save_project

PREVIEW_MAX_SIDE = 64


class Params(BaseModel):
    sigma: float
    phi: float
    theta: float
    family: str = "exponential"
    nu: float = 1.0
    bandwidth: float | None = None
    adjust: float | None = None


def _bad_request(exc: Exception):
    return HTTPException(
        status_code=400,
        detail={"error": type(exc).__name__, "message": str(exc)},
    )


def create_app(project_path) -> FastAPI:
    project_path = Path(project_path)
    app = FastAPI(title="coxmap tuner API")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )
    # summary curves are immutable for the lifetime of the server; the
    # project file is re-read on demand so parameter saves show up
    cache: dict[str, dict] = {}

    def project() -> dict:
        return load_project(project_path)

    def summary_columns(kind: str) -> dict:
        if kind not in ("g", "k", "acf"):
            raise HTTPException(status_code=400, detail=f"unknown summary kind {kind!r}")
        if kind not in cache:
            path = project().get(f"summary_{kind}")
            if path is None:
                raise HTTPException(
                    status_code=404,
                    detail=f"no {kind} summary recorded; run "
                           f"`coxmap summaries --kind {kind}` first",
                )
            cache[kind] = read_curve_csv(path)
        return cache[kind]

    @app.get("/api/summary")
    def summary(kind: str = "g", format: str = "json"):
        cols = summary_columns(kind)
        x_name = "lag" if kind == "acf" else "r"
        if format == "csv":
            lines = [f"{x_name},empirical"] + [
                f"{float(x)!r},{float(e)!r}"
                for x, e in zip(cols[x_name], cols["empirical"])
            ]
            return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")
        return {
            "kind": kind,
            "x_name": x_name,
            "x": cols[x_name].tolist(),
            "empirical": cols["empirical"].tolist(),
        }

    @app.get("/api/theoretical")
    def theoretical(
        kind: str = "g",
        family: str = "exponential",
        sigma: float = 1.0,
        phi: float = 1.0,
        nu: float = 1.0,
        theta: float = 1.0,
    ):
        cols = summary_columns(kind)
        try:
            if kind == "acf":
                from .estimation import TemporalAcf

                if theta < 0:
                    raise ValueError("theta must be >= 0")
                acf = TemporalAcf(cols["lag"].astype(int), cols["empirical"])
                curve, residual = acf_decay_curve(acf, theta)
                return {
                    "kind": kind,
                    "x": cols["lag"].tolist(),
                    "values": curve.tolist(),
                    "residual": residual,
                }
            from .estimation import SecondOrderSummary

            summary = SecondOrderSummary(
                "pcf" if kind == "g" else "kfun",
                cols["r"],
                cols["empirical"],
                cols.get("weight", np.ones_like(cols["r"])),
            )
            # same curve the contrast measures, so slider displays track
            # the fitter exactly (sigma = 0 included)
            return {
                "kind": kind,
                "x": cols["r"].tolist(),
                "values": contrast_curve(summary, family, sigma, phi, nu).tolist(),
                "contrast": contrast_value(summary, family, sigma, phi, nu),
            }
        except (CoxmapError, ValueError) as exc:
            raise _bad_request(exc) from exc

    @app.get("/api/lambda-preview")
    def lambda_preview(bandwidth: float | None = None, adjust: float = 1.0):
        proj = project()
        if "pattern" not in proj or "cellwidth" not in proj:
            raise HTTPException(
                status_code=404,
                detail="pattern or cellwidth missing; run `coxmap ingest` "
                       "and `coxmap lambda` first",
            )
        try:
            pattern = load_pattern(proj["pattern"])
            if bandwidth is None:
                bandwidth = default_bandwidth(pattern.window)
            grid = build_grid(pattern.window, cellwidth=proj["cellwidth"])
            lam = kernel_lambda(pattern, grid, bandwidth, adjust)
        except (CoxmapError, ValueError) as exc:
            raise _bad_request(exc) from exc
        stride = max(1, -(-max(grid.M, grid.N) // PREVIEW_MAX_SIDE))
        values = lam.values[::stride, ::stride]
        inside = lam.values[grid.inside_mask]
        low, high = float(inside.min()), float(inside.max())
        return {
            "M": values.shape[0],
            "N": values.shape[1],
            "stride": stride,
            "cellwidth": grid.cellwidth * stride,
            "x0": grid.x0,
            "y0": grid.y0,
            "bandwidth": bandwidth,
            "adjust": adjust,
            "values": values.tolist(),
            "min": low,
            "max": high,
            "ratio": high / low if low > 0 else float("inf"),
        }

    @app.get("/api/params")
    def get_params():
        return project().get("params", {})

    @app.post("/api/params")
    def post_params(body: Params):
        try:
            CovarianceModel(family=body.family, sigma=body.sigma, phi=body.phi,
                            theta=body.theta, nu=body.nu)
        except (CoxmapError, ValueError) as exc:
            raise _bad_request(exc) from exc
        proj = project()
        params = dict(proj.get("params", {}))
        params.update(sigma=body.sigma, phi=body.phi, theta=body.theta,
                      family=body.family, nu=body.nu)
        if body.bandwidth is not None:
            params["bandwidth"] = body.bandwidth
        if body.adjust is not None:
            params["adjust"] = body.adjust
        proj["params"] = params
        save_project(proj, project_path)
        return params

    return app
