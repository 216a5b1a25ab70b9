"""Command-line pipeline: ingest, intensities, summaries, fits, prediction.

Each stage writes an ordinary CSV/JSON artefact and records its path in a
small JSON project file, so a session can be resumed, inspected or edited
at any point.  Values the user did not choose are printed with a
"(default)" marker.  Failures leave a machine-readable JSON object on
stderr and a non-zero exit status.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from .covariance import CovarianceModel
from .errors import (
    ConfigError,
    CoxmapError,
    PointOutsideWindowError,
    TimeOutsideRangeError,
)
from .estimation import (
    SecondOrderSummary,
    TemporalAcf,
    acf_decay_curve,
    count_acf,
    fit_spatial_pars,
    fit_theta,
    ginhom_average,
    kinhom_average,
)
from .geometry import apply_rotation, bin_counts, build_grid, build_pattern, rotation_gain
from .inference import (
    AndrieuThoms,
    ConstantH,
    McmcConfig,
    OutputConfig,
    PredictConfig,
    exceed_probs,
    predict,
)
from .intensity import (
    constant_in_time,
    default_bandwidth,
    kernel_lambda,
    mu_estimate,
    num_intervals,
)
from .io import (
    load_lambda,
    load_mu,
    load_pattern,
    load_project,
    read_curve_csv,
    read_points_csv,
    read_window_geojson,
    require_project_entry,
    save_lambda,
    save_mu,
    save_pattern,
    save_prediction_summary,
    save_project,
    write_curve_csv,
    write_points_csv,
)
from .simulate import lgcp_sim
from .storage import expectation, open_store
from .storage import quantile as store_quantile
from .intensity import SpatialIntensity

DEFAULT_R_POINTS = 128


def default_r_max(window) -> float:
    xmin, xmax, ymin, ymax = window.bbox
    return 0.25 * min(xmax - xmin, ymax - ymin)


def _parse_pair(value, name):
    parts = value.split(",")
    if len(parts) != 2:
        raise click.BadParameter(f"{name} must be two comma-separated numbers")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise click.BadParameter(f"{name} must be numeric") from None


def _parse_floats(value, name):
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"{name} must be comma-separated numbers") from None


def _parse_adaptive(value):
    name, _, rest = value.partition(":")
    args = _parse_floats(rest, "--adaptive arguments") if rest else []
    if name == "andrieuthomsh":
        if len(args) != 4:
            raise click.BadParameter(
                "andrieuthomsh takes inith,alpha,C,target (four numbers)"
            )
        return AndrieuThoms(inith=args[0], alpha=args[1], C=args[2], target=args[3])
    if name == "constanth":
        if len(args) != 1:
            raise click.BadParameter("constanth takes a single step size")
        return ConstantH(h=args[0])
    raise click.BadParameter(f"unknown adaptive scheme {name!r}")


def _parse_index_range(value, name):
    if value.strip().lower() in ("all", "-1"):
        return "all"
    parts = value.split(",")
    try:
        if len(parts) == 1:
            return int(parts[0])
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise click.BadParameter(f"{name} must be 'all', an index, or lo,hi")


class _JsonErrors(click.Group):
    """Convert pipeline errors to a JSON object on stderr, exit status 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (CoxmapError, OSError, ValueError) as exc:
            click.echo(
                json.dumps({"error": type(exc).__name__, "message": str(exc)}),
                err=True,
            )
            ctx.exit(1)


@click.group(cls=_JsonErrors)
@click.option(
    "--project",
    type=click.Path(path_type=Path),
    default=Path("coxmap.json"),
    show_default=True,
    help="Project file recording stage outputs.",
)
@click.pass_context
def cli(ctx, project):
    """Spatio-temporal Cox process mapping pipeline."""
    ctx.obj = project


def _update(project_path: Path, **fields) -> dict:
    proj = load_project(project_path)
    proj.update(fields)
    save_project(proj, project_path)
    return proj


def _sibling(project_path: Path, name: str) -> Path:
    return project_path.parent / name


def _pattern_from(proj) -> "object":
    return load_pattern(require_project_entry(proj, "pattern", "coxmap ingest"))


# ---------------------------------------------------------------------------
# data preparation


@cli.command()
@click.option("--points", "points_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="CSV of events with x, y, t columns.")
@click.option("--window", "window_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="GeoJSON polygon observation window.")
@click.option("--tlim", required=True, help="Time interval a,b.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Pattern file [default: pattern.json beside the project].")
@click.pass_obj
def ingest(project_path, points_path, window_path, tlim, out):
    """Validate raw events against the window and time interval."""
    tlim = _parse_pair(tlim, "--tlim")
    try:
        pattern = build_pattern(
            read_points_csv(points_path), read_window_geojson(window_path), tlim
        )
    except (PointOutsideWindowError, TimeOutsideRangeError) as exc:
        # the +2 converts the 0-based point index to the CSV line number
        raise type(exc)(
            exc.index, f"{points_path}, line {exc.index + 2}: {exc}"
        ) from None
    out = out or _sibling(project_path, "pattern.json")
    save_pattern(pattern, out)
    _update(project_path, pattern=str(out), tlim=list(tlim))
    click.echo(pattern.summary())
    click.echo(f"pattern written to {out}")


@cli.command("lambda")
@click.option("--cellwidth", type=float, default=None,
              help="Analysis cell width (remembered for later stages).")
@click.option("--bandwidth", type=float, default=None,
              help="Gaussian kernel bandwidth [default: 0.1 x shorter window side].")
@click.option("--adjust", type=float, default=1.0, show_default=True,
              help="Bandwidth multiplier.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Intensity file [default: lambda.json beside the project].")
@click.pass_obj
def lambda_(project_path, cellwidth, bandwidth, adjust, out):
    """Kernel density estimate of the spatial intensity."""
    proj = load_project(project_path)
    pattern = _pattern_from(proj)
    if cellwidth is None:
        cellwidth = proj.get("cellwidth")
        if cellwidth is None:
            raise ConfigError("no cell width on record; pass --cellwidth")
    grid = build_grid(pattern.window, cellwidth=cellwidth)
    defaulted = bandwidth is None
    if defaulted:
        bandwidth = default_bandwidth(pattern.window)
    lam = kernel_lambda(pattern, grid, bandwidth, adjust)
    out = out or _sibling(project_path, "lambda.json")
    save_lambda(lam, out)
    _update(
        project_path,
        cellwidth=cellwidth,
        **{"lambda": str(out)},
        lambda_params={"bandwidth": bandwidth, "adjust": adjust},
    )
    mark = " (default)" if defaulted else ""
    click.echo(
        f"lambda on a {grid.M} x {grid.N} grid, cellwidth {cellwidth:g}, "
        f"bandwidth {bandwidth:g}{mark}, adjust {adjust:g}"
    )
    click.echo(f"lambda written to {out}")


@cli.command()
@click.option("--method", type=click.Choice(["lowess", "constant"]),
              default="lowess", show_default=True)
@click.option("--f", "span", type=float, default=2.0 / 3.0,
              help="Lowess span [default: 2/3].")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Rate file [default: mu.json beside the project].")
@click.pass_obj
def mu(project_path, method, span, out):
    """Temporal intensity from the per-interval event counts."""
    proj = load_project(project_path)
    pattern = _pattern_from(proj)
    est = mu_estimate(pattern, f=span) if method == "lowess" else constant_in_time(pattern)
    out = out or _sibling(project_path, "mu.json")
    save_mu(est, out)
    _update(project_path, mu=str(out), mu_params={"method": method, "f": span})
    click.echo(f"mu ({method}) over {est.intervals} unit intervals written to {out}")


# ---------------------------------------------------------------------------
# summaries and fitting


@cli.command()
@click.option("--kind", type=click.Choice(["g", "k", "acf"]), required=True)
@click.option("--rmax", type=float, default=None,
              help="Largest distance [default: quarter of the shorter window side].")
@click.option("--rpoints", type=int, default=DEFAULT_R_POINTS, show_default=True)
@click.option("--maxlag", type=int, default=None,
              help="Largest count lag [default: intervals - 2, capped at 14].")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Curve file [default: summary-<kind>.csv beside the project].")
@click.pass_obj
def summaries(project_path, kind, rmax, rpoints, maxlag, out):
    """Empirical second-order summaries for fitting and plotting."""
    proj = load_project(project_path)
    pattern = _pattern_from(proj)
    out = out or _sibling(project_path, f"summary-{kind}.csv")
    if kind == "acf":
        mu_est = load_mu(proj["mu"]) if "mu" in proj else None
        defaulted = maxlag is None
        if defaulted:
            maxlag = min(num_intervals(pattern.tlim) - 2, 14)
        acf = count_acf(pattern, maxlag, mu_est)
        write_curve_csv(out, {"lag": acf.lags, "empirical": acf.values})
        mark = " (default)" if defaulted else ""
        click.echo(f"count autocorrelation, lags 1..{maxlag}{mark}")
    else:
        grid = build_grid(
            pattern.window,
            cellwidth=require_project_entry(proj, "cellwidth", "coxmap lambda"),
        )
        lam = load_lambda(require_project_entry(proj, "lambda", "coxmap lambda"), grid)
        mu_est = load_mu(require_project_entry(proj, "mu", "coxmap mu"))
        defaulted = rmax is None
        if defaulted:
            rmax = default_r_max(pattern.window)
        r = np.linspace(rmax / rpoints, rmax, rpoints)
        fn = ginhom_average if kind == "g" else kinhom_average
        summary = fn(pattern, lam, mu_est, r)
        write_curve_csv(out, {
            "r": summary.r,
            "empirical": summary.empirical,
            "weight": summary.weights,
        })
        mark = " (default)" if defaulted else ""
        click.echo(f"{kind} summary on {rpoints} distances up to {rmax:g}{mark}")
    _update(project_path, **{f"summary_{kind}": str(out)})
    click.echo(f"summary written to {out}")


def _load_second_order(proj, kind):
    path = require_project_entry(proj, f"summary_{kind}", f"coxmap summaries --kind {kind}")
    cols = read_curve_csv(path)
    return SecondOrderSummary(
        "pcf" if kind == "g" else "kfun",
        cols["r"],
        cols["empirical"],
        cols.get("weight", np.ones_like(cols["r"])),
    )


def _load_acf(proj):
    path = require_project_entry(proj, "summary_acf", "coxmap summaries --kind acf")
    cols = read_curve_csv(path)
    return TemporalAcf(cols["lag"].astype(int), cols["empirical"])


@cli.command("fit-spatial")
@click.option("--family", default="exponential", show_default=True)
@click.option("--nu", type=float, default=1.0, show_default=True)
@click.option("--sigma-range", default="0,10", show_default=True)
@click.option("--phi-range", default="0,10", show_default=True)
@click.option("--kind", type=click.Choice(["g", "k"]), default="g", show_default=True,
              help="Summary to fit against.")
@click.pass_obj
def fit_spatial(project_path, family, nu, sigma_range, phi_range, kind):
    """Least-squares fit of (sigma, phi) to a recorded summary curve."""
    proj = load_project(project_path)
    summary = _load_second_order(proj, kind)
    sig, phi, contrast = fit_spatial_pars(
        summary,
        family=family,
        nu=nu,
        sigma_range=_parse_pair(sigma_range, "--sigma-range"),
        phi_range=_parse_pair(phi_range, "--phi-range"),
    )
    params = dict(proj.get("params", {}))
    params.update(sigma=sig, phi=phi, family=family, nu=nu)
    _update(project_path, params=params)
    click.echo(json.dumps(
        {"sigma": sig, "phi": phi, "family": family, "nu": nu, "contrast": contrast}
    ))


@cli.command("fit-theta")
@click.option("--theta-range", default="0.01,10", show_default=True)
@click.pass_obj
def fit_theta_cmd(project_path, theta_range):
    """Least-squares fit of the temporal decay rate to the count acf."""
    proj = load_project(project_path)
    acf = _load_acf(proj)
    lo, hi = _parse_pair(theta_range, "--theta-range")
    if lo <= 0:
        lo = 0.01
        click.echo("theta range lower bound raised to 0.01", err=True)
    theta = fit_theta(acf, theta_range=(lo, hi))
    _, residual = acf_decay_curve(acf, theta)
    params = dict(proj.get("params", {}))
    params["theta"] = theta
    _update(project_path, params=params)
    click.echo(json.dumps({"theta": theta, "residual": residual}))


# ---------------------------------------------------------------------------
# prediction


def _model_from(params, name, flag, fallback=None):
    if flag is not None:
        return flag
    if name in params:
        return params[name]
    if fallback is not None:
        return fallback
    raise ConfigError(f"no {name} available; pass --{name} or run the fitting stages")


@cli.command("predict")
@click.option("--T", "t_pred", type=int, required=True,
              help="Prediction time (unit-interval index).")
@click.option("--laglength", type=int, required=True,
              help="Number of past intervals conditioned on.")
@click.option("--sigma", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--family", default=None, help="[default: fitted family or exponential]")
@click.option("--nu", type=float, default=None)
@click.option("--cellwidth", type=float, default=None)
@click.option("--mala-length", type=int, required=True)
@click.option("--burnin", type=int, required=True)
@click.option("--retain", type=int, default=1, show_default=True,
              help="Keep every retain-th post-burn-in iteration.")
@click.option("--mcmc-diag", type=int, default=0, show_default=True,
              help="Number of randomly chosen cells with full chains kept.")
@click.option("--adaptive", default=None,
              help="andrieuthomsh:inith,alpha,C,target or constanth:h.")
@click.option("--dump", "dump_dir", type=click.Path(path_type=Path), default=None,
              help="Directory receiving the raw sample store.")
@click.option("--lastonly", is_flag=True, help="Dump only the prediction slice.")
@click.option("--exceed", default=None, help="Exceedance thresholds, e.g. 1.5,2,3.")
@click.option("--autorotate", is_flag=True,
              help="Rotate the data first when that shrinks the FFT grid.")
@click.option("--gradtrunc", default="auto", show_default=True,
              help="Gradient truncation bound, or 'auto'.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Summary directory [default: run/ beside the project].")
@click.option("--force", is_flag=True, help="Skip the dump disk-space confirmation.")
@click.pass_obj
def predict_cmd(project_path, t_pred, laglength, sigma, phi, theta, family, nu,
                cellwidth, mala_length, burnin, retain, mcmc_diag, adaptive,
                dump_dir, lastonly, exceed, autorotate, gradtrunc, seed, out_dir,
                force):
    """Sample the latent field at time T given the recorded data."""
    proj = load_project(project_path)
    pattern = _pattern_from(proj)
    mu_est = load_mu(require_project_entry(proj, "mu", "coxmap mu"))
    params = proj.get("params", {})
    model = CovarianceModel(
        family=_model_from(params, "family", family, "exponential"),
        sigma=_model_from(params, "sigma", sigma),
        phi=_model_from(params, "phi", phi),
        theta=_model_from(params, "theta", theta),
        nu=_model_from(params, "nu", nu, 1.0),
    )
    if cellwidth is None:
        cellwidth = require_project_entry(proj, "cellwidth", "coxmap lambda")

    rotation = None
    if autorotate:
        candidate = rotation_gain(pattern, cellwidth)
        if candidate.worthwhile:
            rotation = candidate
            pattern = apply_rotation(pattern, rotation)
    grid = build_grid(pattern.window, cellwidth=cellwidth)
    if rotation is None:
        lam = load_lambda(require_project_entry(proj, "lambda", "coxmap lambda"), grid)
    else:
        # the stored density lives on the unrotated grid; re-estimate on the
        # rotated one with the recorded kernel settings
        lp = require_project_entry(proj, "lambda_params", "coxmap lambda")
        lam = kernel_lambda(pattern, grid, lp["bandwidth"], lp.get("adjust", 1.0))

    thresholds = _parse_floats(exceed, "--exceed") if exceed else None
    grid_functions = {"exceed": exceed_probs(thresholds)} if thresholds else {}
    dump_path = None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        dump_path = dump_dir / "samples.lgd"
    confirm = None
    if dump_path is not None and not force and sys.stdin.isatty():
        confirm = lambda nbytes: click.confirm(
            f"sample store needs about {nbytes / 2**20:.1f} MiB; continue?"
        )

    if gradtrunc != "auto":
        try:
            gradtrunc = float(gradtrunc)
        except ValueError:
            raise click.BadParameter("--gradtrunc takes 'auto' or a number") from None
    cfg = PredictConfig(
        t_pred=t_pred, laglength=laglength, model=model, grid=grid,
        lam=lam, mu=mu_est, gradtrunc=gradtrunc,
    )
    mcmc_kwargs = dict(
        mala_length=mala_length, burnin=burnin, retain=retain,
        mcmc_diag_cells=mcmc_diag, seed=seed,
    )
    if adaptive is not None:
        mcmc_kwargs["adaptive"] = _parse_adaptive(adaptive)
    mcmc = McmcConfig(**mcmc_kwargs)
    output = OutputConfig(
        grid_functions=grid_functions,
        dump_path=None if dump_path is None else str(dump_path),
        lastonly=lastonly,
        dump_force=force,
        dump_confirm=confirm,
    )

    started = time.perf_counter()
    summ = predict(pattern, cfg, mcmc, output)
    elapsed = time.perf_counter() - started

    out_dir = out_dir or _sibling(project_path, "run")
    save_prediction_summary(summ, out_dir, grid=grid)
    run_entry = {
        "out": str(out_dir),
        "dump": None if dump_path is None else str(dump_path),
        "exceed_thresholds": thresholds,
        "seed": seed,
    }
    if rotation is not None:
        run_entry["rotation_degrees"] = math.degrees(rotation.angle)
        run_entry["rotation_gain_percent"] = rotation.gain_percent
    _update(project_path, run=run_entry)

    counts = bin_counts(pattern, grid, list(cfg.time_labels)).counts
    per_slice = counts.reshape(counts.shape[0], -1).sum(axis=1).astype(int)
    lines = [
        f"fft grid: {grid.M} x {grid.N} (embedding {2 * grid.M} x {2 * grid.N})",
        "interval | " + " ".join(f"{t:>6d}" for t in cfg.time_labels),
        "count    | " + " ".join(f"{c:>6d}" for c in per_slice),
        f"model: {model.family} sigma={model.sigma:g} phi={model.phi:g} "
        f"theta={model.theta:g} nu={model.nu:g}",
        f"dump: {dump_path if dump_path is not None else 'none'}",
        f"grid functions: {', '.join(grid_functions) if grid_functions else 'none'}",
        f"elapsed: {elapsed:.1f} s",
        f"iterations: {mala_length}  burn-in: {burnin}  thinning: {retain}",
        f"retained: {summ.n_retained}  mean acceptance: "
        f"{float(np.mean(summ.acceptance_trace)):.3f}",
        f"adaptation: {type(mcmc.adaptive).__name__.lower()}  final h: {summ.final_h:.6g}",
    ]
    if rotation is not None:
        lines.insert(1, f"rotation: {math.degrees(rotation.angle):.2f} deg "
                        f"(grid shrunk {rotation.gain_percent:.0f}%)")
    if seed is not None:
        lines.append(f"seed: {seed}")
    click.echo("\n".join(lines))
    click.echo(f"summaries written to {out_dir}")


# ---------------------------------------------------------------------------
# sample-store operations


def _resolve_store(project_path, store_path):
    """Explicit --store wins; otherwise the dump recorded by predict."""
    if store_path is not None:
        return store_path
    dump = load_project(project_path).get("run", {}).get("dump")
    if not dump:
        raise ConfigError("no sample store on record; pass --store or rerun "
                          "`coxmap predict --dump DIR`")
    return Path(dump)


@cli.command()
@click.option("--store", "store_path", type=click.Path(path_type=Path),
              default=None, help="Sample store [default: the last dump].")
@click.option("--x", default="all", show_default=True)
@click.option("--y", default="all", show_default=True)
@click.option("--t", default="all", show_default=True)
@click.option("--s", default="all", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="CSV destination [default: stdout].")
@click.pass_obj
def extract(project_path, store_path, x, y, t, s, out):
    """Pull a block of samples from a store as x,y,t,s,value rows."""
    ranges = {
        name: _parse_index_range(val, f"--{name}")
        for name, val in (("x", x), ("y", y), ("t", t), ("s", s))
    }
    store = open_store(_resolve_store(project_path, store_path))
    try:
        block = store.extract(**ranges)
        starts = []
        for name, size in zip(("x", "y", "t", "s"), block.shape):
            spec = ranges[name]
            starts.append(spec[0] if isinstance(spec, tuple)
                          else spec if isinstance(spec, int) and spec != -1 else 1)
    finally:
        store.close()
    dest = open(out, "w", newline="") if out else sys.stdout
    try:
        dest.write("x,y,t,s,value\n")
        for idx in np.ndindex(block.shape):
            coords = [starts[d] + idx[d] for d in range(4)]
            dest.write(",".join(map(str, coords)) + f",{float(block[idx])!r}\n")
    finally:
        if out:
            dest.close()
            click.echo(f"{block.size} values written to {out}")


def _store_fn(what):
    return np.exp if what == "exp" else None


@cli.command("expectation")
@click.option("--store", "store_path", type=click.Path(path_type=Path),
              default=None, help="Sample store [default: the last dump].")
@click.option("--what", type=click.Choice(["y", "exp"]), default="y",
              show_default=True, help="Average the field or its exponential.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="JSON destination [default: stdout].")
@click.pass_obj
def expectation_cmd(project_path, store_path, what, out):
    """Cellwise posterior mean over the stored samples."""
    store = open_store(_resolve_store(project_path, store_path))
    try:
        fn = _store_fn(what) or (lambda y: y)
        vals = expectation(store, fn)
        payload = {
            "what": what,
            "time_labels": list(store.time_labels),
            "values": [v.tolist() for v in vals],
        }
    finally:
        store.close()
    text = json.dumps(payload)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"expectation written to {out}")
    else:
        click.echo(text)


@cli.command("quantile")
@click.option("--store", "store_path", type=click.Path(path_type=Path),
              default=None, help="Sample store [default: the last dump].")
@click.option("--probs", default="0.5", show_default=True)
@click.option("--what", type=click.Choice(["y", "exp"]), default="y",
              show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="JSON destination [default: stdout].")
@click.pass_obj
def quantile_cmd(project_path, store_path, probs, what, out):
    """Cellwise posterior quantiles over the stored samples."""
    plist = _parse_floats(probs, "--probs")
    store = open_store(_resolve_store(project_path, store_path))
    try:
        vals = store_quantile(store, plist, fn=_store_fn(what))
        payload = {
            "what": what,
            "probs": plist,
            "time_labels": list(store.time_labels),
            "values": [v.tolist() for v in vals],
        }
    finally:
        store.close()
    text = json.dumps(payload)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"quantiles written to {out}")
    else:
        click.echo(text)


# ---------------------------------------------------------------------------
# simulation and rotation report


@cli.command()
@click.option("--window", "window_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--tlim", required=True, help="Time interval a,b.")
@click.option("--mu", "mu_rate", type=float, required=True,
              help="Events per unit time.")
@click.option("--cellwidth", type=float, required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--phi", type=float, required=True)
@click.option("--theta", type=float, required=True)
@click.option("--family", default="exponential", show_default=True)
@click.option("--nu", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Points CSV [default: sim-points.csv beside the project].")
@click.option("--manifest", type=click.Path(path_type=Path), default=None,
              help="True-parameter JSON [default: sim-manifest.json].")
@click.pass_obj
def simulate(project_path, window_path, tlim, mu_rate, cellwidth, sigma, phi,
             theta, family, nu, seed, out, manifest):
    """Draw a synthetic pattern from the model, uniform in space."""
    tlim = _parse_pair(tlim, "--tlim")
    window = read_window_geojson(window_path)
    grid = build_grid(window, cellwidth=cellwidth)
    lam = SpatialIntensity.from_values(grid, grid.inside_mask.astype(float))
    model = CovarianceModel(family=family, sigma=sigma, phi=phi, theta=theta, nu=nu)
    pattern = lgcp_sim(window, tlim, lam, mu_rate, cellwidth, model, seed=seed)
    out = out or _sibling(project_path, "sim-points.csv")
    manifest = manifest or _sibling(project_path, "sim-manifest.json")
    write_points_csv(pattern.points, out)
    Path(manifest).write_text(json.dumps({
        "family": family, "sigma": sigma, "phi": phi, "theta": theta, "nu": nu,
        "mu": mu_rate, "tlim": list(tlim), "cellwidth": cellwidth, "seed": seed,
        "events": pattern.n,
    }, indent=2) + "\n")
    click.echo(f"{pattern.n} events written to {out}")
    click.echo(f"manifest written to {manifest}")


@cli.command("rotate-check")
@click.option("--cellwidth", type=float, required=True)
@click.pass_obj
def rotate_check(project_path, cellwidth):
    """Report how much a rotation would shrink the FFT grid."""
    proj = load_project(project_path)
    pattern = _pattern_from(proj)
    rot = rotation_gain(pattern, cellwidth)
    click.echo(json.dumps({
        "angle_radians": rot.angle,
        "angle_degrees": math.degrees(rot.angle),
        "gain_percent": rot.gain_percent,
        "worthwhile": rot.worthwhile,
    }))


# ---------------------------------------------------------------------------
# serving and plotting


@cli.command()
@click.option("--serve", is_flag=True, help="Start the HTTP API.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8717, show_default=True)
@click.pass_obj
def tune(project_path, serve, host, port):
    """HTTP API for the browser tuning panels."""
    if not serve:
        click.echo("pass --serve to start the API (see the frontend README)")
        return
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(project_path), host=host, port=port, log_level="warning")


@cli.command()
@click.option("--what", required=True,
              type=click.Choice(["rr", "serr", "intensity", "exceed",
                                 "quantile", "htrace", "trace"]))
@click.option("--run", "run_dir", type=click.Path(path_type=Path), default=None,
              help="Prediction output directory [default: the last run].")
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None,
              help="Sample store for quantile maps [default: the last dump].")
@click.option("--probs", default="0.5,0.9", show_default=True,
              help="Probabilities for quantile maps.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="PNG destination [default: <what>.png beside the run].")
@click.pass_obj
def plot(project_path, what, run_dir, store_path, probs, out):
    """Render prediction heatmaps and chain diagnostics as PNG files."""
    from .plots import render_plot

    proj = load_project(project_path)
    run_entry = proj.get("run", {})
    if run_dir is None and "out" in run_entry:
        run_dir = Path(run_entry["out"])
    if store_path is None and run_entry.get("dump"):
        store_path = Path(run_entry["dump"])
    if run_dir is None and what != "quantile":
        raise ConfigError("no prediction run on record; pass --run")
    pattern = load_pattern(proj["pattern"]) if "pattern" in proj else None
    target = render_plot(
        what,
        run_dir=run_dir,
        store_path=store_path,
        probs=_parse_floats(probs, "--probs"),
        pattern=pattern,
        thresholds=run_entry.get("exceed_thresholds"),
        out=out,
    )
    click.echo(f"plot written to {target}")


def main():
    cli(prog_name="coxmap")


if __name__ == "__main__":
    main()
