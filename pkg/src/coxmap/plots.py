"""Static PNG renderings of prediction output and chain diagnostics.

Heatmaps are drawn in window coordinates with the polygon boundary and the
case locations overlaid; traces come straight from the CSV files written
next to summary.json.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError, FileFormatError
from .io import read_curve_csv
from .storage import open_store
from .storage import quantile as store_quantile


def _load_summary(run_dir: Path) -> dict:
    path = run_dir / "summary.json"
    if not path.exists():
        raise ConfigError(f"{path} not found; run `coxmap predict` first")
    return json.loads(path.read_text())


def _extent(meta):
    return (
        meta["x0"],
        meta["x0"] + meta["M"] * meta["cellwidth"],
        meta["y0"],
        meta["y0"] + meta["N"] * meta["cellwidth"],
    )


def _overlay(ax, pattern):
    if pattern is None:
        return
    for ring in pattern.window.rings:
        ring = np.asarray(ring)
        closed = np.vstack([ring, ring[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color="black", linewidth=0.8)
    ax.plot(pattern.x, pattern.y, ".", color="black", markersize=1.5, alpha=0.4)


def _heatmap_row(fields, titles, meta, pattern, out, colorbar_label):
    """One row of heatmap panels; fields are (M, N) arrays, x along axis 0."""
    k = len(fields)
    fig, axes = plt.subplots(1, k, figsize=(4.2 * k, 4.0), squeeze=False)
    extent = _extent(meta)
    for ax, field, title in zip(axes[0], fields, titles):
        im = ax.imshow(
            np.asarray(field).T,
            origin="lower",
            extent=extent,
            aspect="equal",
            cmap="viridis",
        )
        _overlay(ax, pattern)
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8, label=colorbar_label)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _summary_maps(what, summ):
    key = {"rr": "mean_exp_y", "serr": "se_exp_y", "intensity": "mean_intensity"}[what]
    label = {
        "rr": "posterior mean exp(Y)",
        "serr": "standard error of mean exp(Y)",
        "intensity": "events per unit area",
    }[what]
    arr = np.asarray(summ[key])
    titles = [f"t = {t}" for t in summ["time_labels"]]
    return list(arr), titles, label


def render_plot(what, run_dir=None, store_path=None, probs=(0.5,), pattern=None,
                thresholds=None, out=None):
    """Render one named plot, returning the PNG path."""
    if what == "quantile":
        if store_path is None:
            raise ConfigError("quantile maps need a sample store; pass --store")
        store = open_store(store_path)
        try:
            meta = {"M": store.M, "N": store.N, "cellwidth": store.cellwidth,
                    "x0": store.x0, "y0": store.y0}
            res = store_quantile(store, list(probs))[-1]
            label_t = store.time_labels[-1]
        finally:
            store.close()
        out = out or Path(store_path).parent / "quantile.png"
        fields = [res[:, :, i] for i in range(res.shape[2])]
        titles = [f"p = {p:g} (t = {label_t})" for p in probs]
        return _heatmap_row(fields, titles, meta, pattern, out, "field quantile")

    if run_dir is None:
        raise ConfigError(f"{what} plots need a prediction run; pass --run")
    run_dir = Path(run_dir)
    out = out or run_dir / f"{what}.png"

    if what == "htrace":
        cols = read_curve_csv(run_dir / "traces.csv")
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ax.plot(cols["iteration"], cols["h"], linewidth=0.8)
        ax.set_xlabel("iteration")
        ax.set_ylabel("step size h")
        fig.tight_layout()
        fig.savefig(out, dpi=150)
        plt.close(fig)
        return out

    if what == "trace":
        path = run_dir / "diag_traces.csv"
        if not path.exists():
            raise ConfigError(
                f"{path} not found; rerun predict with --mcmc-diag > 0"
            )
        cols = read_curve_csv(path)
        fig, ax = plt.subplots(figsize=(7, 3.2))
        for name, series in cols.items():
            ax.plot(series, linewidth=0.6, label=name)
        ax.set_xlabel("iteration")
        ax.set_ylabel("whitened coordinate")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out, dpi=150)
        plt.close(fig)
        return out

    summ = _load_summary(run_dir)
    meta = summ.get("grid")
    if meta is None:
        raise FileFormatError("summary.json has no grid block; re-run predict")

    if what == "exceed":
        averages = summ.get("grid_averages", {})
        if "exceed" not in averages:
            raise ConfigError("run recorded no exceedance averages; "
                              "rerun predict with --exceed")
        arr = np.asarray(averages["exceed"])[-1]
        names = thresholds or list(range(1, arr.shape[-1] + 1))
        fields = [arr[:, :, i] for i in range(arr.shape[-1])]
        titles = [f"P(exp Y > {k:g})" for k in names]
        return _heatmap_row(fields, titles, meta, pattern, out,
                            "exceedance probability")

    fields, titles, label = _summary_maps(what, summ)
    return _heatmap_row(fields, titles, meta, pattern, out, label)
