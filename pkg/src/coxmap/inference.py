"""MALA prediction of the latent field over the most recent time intervals.

The chain lives in whitened coordinates: each time slice t carries an
extended-grid array Gamma_t with Y_t = fieldMean + C^{1/2} Gamma_t.  The
stationary AR(1) structure exp(-theta u) in time then makes the prior on the
block (Gamma_{T-p}, ..., Gamma_T) a product of standard normals chained by
Gamma_t = a Gamma_{t-1} + sqrt(1-a^2) eps,  a = exp(-theta).

The target is this prior times the Poisson likelihood of the binned counts,
cell exposure mu(t) * lambda(cell) * cellwidth^2.  Additive constants are
dropped throughout; theta is fixed during a run so they never matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .covariance import CovarianceModel, apply_sqrt_cov, build_embedding, unwhiten
from .errors import DimensionMismatchError, NonFiniteTargetError, TimeIndexError
from .geometry import CountStack, GridSpec, bin_counts, num_intervals
from .intensity import SpatialIntensity, TemporalIntensity
from .storage import create_store

H_FLOOR = 1e-12
DEFAULT_TARGET_ACCEPTANCE = 0.574


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ConstantH:
    """Fixed Langevin step size (no adaptation)."""

    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"step size must be positive, got {self.h}")


@dataclass(frozen=True)
class AndrieuThoms:
    """Diminishing Robbins-Monro adaptation of the step size.

    h <- h + C / iteration^alpha * (acceptProb - target); the decaying gain
    keeps total adaptation infinite but square-summable-ish, so the chain
    still targets the right law while h settles near the optimum.
    """

    inith: float = 1.0
    alpha: float = 0.5
    C: float = 1.0
    target: float = DEFAULT_TARGET_ACCEPTANCE

    def __post_init__(self):
        if not (math.isfinite(self.inith) and self.inith > 0):
            raise ValueError(f"initial step must be positive, got {self.inith}")
        if not (0 < self.alpha <= 1):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (math.isfinite(self.C) and self.C > 0):
            raise ValueError(f"gain constant must be positive, got {self.C}")
        if not (0 < self.target < 1):
            raise ValueError(f"target acceptance must lie in (0, 1), got {self.target}")


def adapt_h(scheme, h: float, accept_prob: float, iteration: int) -> float:
    """Step size for the next iteration; floored so it can never reach 0."""
    if iteration < 1:
        raise ValueError("iteration count is 1-based")
    if isinstance(scheme, ConstantH):
        return scheme.h
    step = scheme.C / iteration**scheme.alpha * (accept_prob - scheme.target)
    return max(H_FLOOR, h + step)


AUTO = "auto"


@dataclass(frozen=True)
class PredictConfig:
    """What to predict: the block of intervals (t_pred - laglength, t_pred]."""

    t_pred: int
    laglength: int
    model: CovarianceModel
    grid: GridSpec
    lam: SpatialIntensity
    mu: TemporalIntensity
    gradtrunc: float | str = AUTO

    def __post_init__(self):
        if self.laglength < 0:
            raise ValueError("laglength must be >= 0")
        if self.t_pred - self.laglength < 1:
            raise TimeIndexError(
                f"window [{self.t_pred - self.laglength}, {self.t_pred}] starts "
                "before the first data interval"
            )
        if self.t_pred > self.mu.intervals:
            raise TimeIndexError(
                f"t_pred {self.t_pred} beyond the {self.mu.intervals} observed intervals"
            )
        g, lg = self.grid, self.lam.grid
        if (g.M, g.N, g.cellwidth, g.origin) != (lg.M, lg.N, lg.cellwidth, lg.origin):
            raise DimensionMismatchError("lambda was estimated on a different grid")
        if self.gradtrunc != AUTO:
            v = float(self.gradtrunc)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"gradtrunc must be positive or 'auto', got {v}")

    @property
    def time_labels(self) -> list[int]:
        return list(range(self.t_pred - self.laglength, self.t_pred + 1))


@dataclass(frozen=True)
class McmcConfig:
    mala_length: int
    burnin: int
    retain: int = 1
    inits: np.ndarray | None = None
    mcmc_diag_cells: int = 0
    adaptive: ConstantH | AndrieuThoms = field(default_factory=AndrieuThoms)
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.burnin < self.mala_length:
            raise ValueError("need 0 <= burnin < mala_length")
        if self.retain < 1:
            raise ValueError("retain must be >= 1")
        if self.mcmc_diag_cells < 0:
            raise ValueError("mcmc_diag_cells must be >= 0")
        if self.n_retained < 1:
            raise ValueError("no iterations would be retained; lower retain or burnin")

    @property
    def n_retained(self) -> int:
        return (self.mala_length - self.burnin) // self.retain


@dataclass(frozen=True)
class OutputConfig:
    """Where predict sends its output beyond the in-memory summary.

    grid_functions are Monte Carlo averaged per slice over retained samples;
    dump_path writes every retained frame to a sample store; status receives
    "progress <percent>" lines.
    """

    grid_functions: dict[str, Callable] = field(default_factory=dict)
    dump_path: str | None = None
    lastonly: bool = False
    dump_force: bool = False
    dump_confirm: Callable[[int], bool] | None = None
    status: object = None  # file-like sink for "progress <percent>" lines


# ---------------------------------------------------------------------------
# target density


class _Target:
    """Log density and gradient of the whitened block, data folded in."""

    def __init__(self, embedding, counts, exposures, inside_mask, theta):
        self.embedding = embedding
        self.slices = counts.shape[0]
        self.inside = inside_mask
        self.counts = np.ascontiguousarray(
            counts[:, inside_mask].astype(float)
        )
        self.exposures = np.ascontiguousarray(exposures[:, inside_mask])
        self.a = math.exp(-theta)
        self.block_shape = (self.slices,) + embedding.shape
        m, n = inside_mask.shape
        self._m, self._n = m, n

    def _check(self, block):
        block = np.asarray(block, dtype=float)
        if block.shape != self.block_shape:
            raise DimensionMismatchError(
                f"block shape {block.shape}, target expects {self.block_shape}"
            )
        return block

    def _y_inside(self, block, t):
        y = unwhiten(self.embedding, block[t])
        return y[: self._m, : self._n][self.inside], y

    def log_target(self, block) -> float:
        block = self._check(block)
        total = 0.0
        for t in range(self.slices):
            y_in, _ = self._y_inside(block, t)
            ll, _ = _kernels.poisson_ll_grad(y_in, self.counts[t], self.exposures[t])
            total += ll
        total -= 0.5 * float(np.sum(block[0] ** 2))
        if self.slices > 1:
            v = 1.0 - self.a**2
            diff = block[1:] - self.a * block[:-1]
            total -= 0.5 * float(np.sum(diff**2)) / v
        return total

    def grad_log_target(self, block) -> np.ndarray:
        block = self._check(block)
        grad = np.empty_like(block)
        pad = np.zeros(self.embedding.shape)
        for t in range(self.slices):
            y_in, _ = self._y_inside(block, t)
            _, g = _kernels.poisson_ll_grad(y_in, self.counts[t], self.exposures[t])
            pad[:] = 0.0
            sub = pad[: self._m, : self._n]
            sub[self.inside] = g
            grad[t] = apply_sqrt_cov(self.embedding, pad)
        grad[0] -= block[0]
        if self.slices > 1:
            v = 1.0 - self.a**2
            diff = (block[1:] - self.a * block[:-1]) / v
            grad[1:] -= diff
            grad[:-1] += self.a * diff
        return grad

    def prior_block(self, rng) -> np.ndarray:
        """One draw of the whitened block from the AR(1) prior."""
        block = np.empty(self.block_shape)
        block[0] = rng.standard_normal(self.embedding.shape)
        scale = math.sqrt(1.0 - self.a**2)
        for t in range(1, self.slices):
            block[t] = self.a * block[t - 1] + scale * rng.standard_normal(
                self.embedding.shape
            )
        return block


def _build_target(counts, cfg: PredictConfig) -> _Target:
    arr = counts.counts if isinstance(counts, CountStack) else np.asarray(counts)
    slices = cfg.laglength + 1
    if arr.shape != (slices, cfg.grid.M, cfg.grid.N):
        raise DimensionMismatchError(
            f"counts shape {arr.shape}, expected {(slices, cfg.grid.M, cfg.grid.N)}"
        )
    embedding = build_embedding(cfg.model, cfg.grid)
    area = cfg.grid.cell_area
    exposures = np.stack(
        [cfg.mu.rate(t) * cfg.lam.values * area for t in cfg.time_labels]
    )
    exposures *= cfg.grid.inside_mask
    return _Target(embedding, arr, exposures, cfg.grid.inside_mask, cfg.model.theta)


def log_target(block, counts, cfg: PredictConfig) -> float:
    """Unnormalised log density of the whitened block given binned counts."""
    return _build_target(counts, cfg).log_target(block)


def grad_log_target(block, counts, cfg: PredictConfig) -> np.ndarray:
    return _build_target(counts, cfg).grad_log_target(block)


# ---------------------------------------------------------------------------
# proposal machinery


def truncate_gradient(grad, bound: float) -> np.ndarray:
    """Scale the gradient onto the L2 ball of the given radius if outside."""
    if not (math.isfinite(bound) and bound > 0):
        raise ValueError(f"truncation bound must be positive, got {bound}")
    grad = np.asarray(grad, dtype=float)
    norm = float(np.sqrt(np.sum(grad**2)))
    if norm > bound:
        return grad * (bound / norm)
    return grad


def auto_grad_trunc(counts, cfg: PredictConfig, seed=None) -> float:
    """Truncation bound: max gradient norm over 100 prior draws of the block."""
    target = _build_target(counts, cfg)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        g = target.grad_log_target(target.prior_block(rng))
        worst = max(worst, float(np.sqrt(np.sum(g**2))))
    if worst <= 0 or not math.isfinite(worst):
        raise NonFiniteTargetError(
            "gradient norm under the prior is degenerate; check lambda and mu"
        )
    return worst


@dataclass
class ChainState:
    gamma: np.ndarray
    logpi: float
    tgrad: np.ndarray  # gradient at gamma, already truncated


@dataclass(frozen=True)
class StepInfo:
    accept_prob: float
    accepted: bool
    nonfinite: bool


def mala_step(state: ChainState, target: _Target, bound: float, h: float, rng) -> StepInfo:
    """One Metropolis-adjusted Langevin step; mutates state when accepted.

    Both the forward and reverse drifts use truncated gradients, so the
    Hastings ratio stays consistent with the proposal actually made.  A
    proposal with non-finite density is rejected outright and flagged.
    """
    if not math.isfinite(state.logpi):
        raise NonFiniteTargetError("current chain state has non-finite log target")
    z = rng.standard_normal(state.gamma.shape)
    half = 0.5 * h * h
    prop = state.gamma + half * state.tgrad + h * z
    logpi_p = target.log_target(prop)
    if not math.isfinite(logpi_p):
        if logpi_p > 0:  # +inf target would break the ratio; -inf is a plain reject
            raise NonFiniteTargetError("proposal log target is +inf")
        return StepInfo(accept_prob=0.0, accepted=False, nonfinite=True)
    tgrad_p = truncate_gradient(target.grad_log_target(prop), bound)
    log_fwd = -0.5 * float(np.sum(z**2))
    back = state.gamma - prop - half * tgrad_p
    log_rev = -0.5 * float(np.sum(back**2)) / (h * h)
    log_ratio = logpi_p - state.logpi + log_rev - log_fwd
    accept_prob = 1.0 if log_ratio >= 0 else math.exp(log_ratio)
    accepted = rng.uniform() < accept_prob
    if accepted:
        state.gamma = prop
        state.logpi = logpi_p
        state.tgrad = tgrad_p
    return StepInfo(accept_prob=accept_prob, accepted=accepted, nonfinite=False)


# ---------------------------------------------------------------------------
# grid functions


class ExceedanceFunction:
    """Cellwise indicators 1{exp(Y) > k} stacked over thresholds.

    Averaging over posterior samples turns the stack into exceedance
    probabilities of the relative risk surface.
    """

    def __init__(self, thresholds):
        t = tuple(float(v) for v in thresholds)
        if len(t) == 0:
            raise ValueError("need at least one threshold")
        if any(not math.isfinite(v) for v in t):
            raise ValueError("thresholds must be finite")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("thresholds must be strictly ascending")
        self.thresholds = t

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        risk = np.exp(y)
        return np.stack([(risk > k).astype(float) for k in self.thresholds], axis=-1)


def exceed_probs(thresholds) -> ExceedanceFunction:
    return ExceedanceFunction(thresholds)


# ---------------------------------------------------------------------------
# the full prediction loop


class _Welford:
    """Online mean and (n-1)-normalised variance per cell."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def update(self, x):
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def variance(self):
        if self.n < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n - 1)


@dataclass(frozen=True)
class PredictionSummary:
    """Posterior summaries on the output grid, one leading slice axis.

    mean_intensity is per unit area: lambda * mu * E[exp Y].  se_exp_y is
    the naive Monte Carlo standard error of mean_exp_y (no autocorrelation
    correction); grid_averages are plain sample means of the requested
    functions.  Traces cover every iteration including burn-in.
    """

    time_labels: tuple
    mean_y: np.ndarray
    var_y: np.ndarray
    mean_exp_y: np.ndarray
    se_exp_y: np.ndarray
    mean_intensity: np.ndarray
    grid_averages: dict
    h_trace: np.ndarray
    acceptance_trace: np.ndarray
    diag_cells: tuple
    diag_traces: np.ndarray
    n_retained: int
    accepted: int
    nonfinite_rejects: int

    @property
    def final_h(self) -> float:
        return float(self.h_trace[-1])


def predict(pattern, cfg: PredictConfig, mcmc: McmcConfig, output: OutputConfig | None = None):
    """Sample the latent block for (t_pred - laglength, t_pred] given a pattern."""
    output = output or OutputConfig()
    if tuple(pattern.tlim) != tuple(cfg.mu.tlim):
        raise ValueError("pattern and mu disagree on the time window")
    if num_intervals(pattern.tlim) < cfg.t_pred:
        raise TimeIndexError("prediction time beyond the observed pattern")
    labels = cfg.time_labels
    counts = bin_counts(pattern, cfg.grid, labels)
    target = _build_target(counts, cfg)

    if cfg.gradtrunc == AUTO:
        bound = auto_grad_trunc(counts, cfg, seed=mcmc.seed)
    else:
        bound = float(cfg.gradtrunc)

    rng = np.random.default_rng(mcmc.seed)
    slices = cfg.laglength + 1
    m, n = cfg.grid.M, cfg.grid.N

    if mcmc.inits is not None:
        gamma = np.array(mcmc.inits, dtype=float)
        if gamma.shape != target.block_shape:
            raise DimensionMismatchError(
                f"inits shape {gamma.shape}, expected {target.block_shape}"
            )
        if not np.all(np.isfinite(gamma)):
            raise ValueError("inits must be finite")
    else:
        gamma = np.zeros(target.block_shape)
    logpi0 = target.log_target(gamma)
    if not math.isfinite(logpi0):
        raise NonFiniteTargetError("log target is non-finite at the initial state")
    state = ChainState(gamma, logpi0, truncate_gradient(target.grad_log_target(gamma), bound))

    if mcmc.mcmc_diag_cells:
        flat = rng.choice(slices * m * n, size=min(mcmc.mcmc_diag_cells, slices * m * n),
                          replace=False)
        diag_cells = tuple(
            (int(f) // (m * n), int(f) % (m * n) // n, int(f) % n) for f in flat
        )
    else:
        diag_cells = ()
    diag_traces = np.empty((len(diag_cells), mcmc.mala_length))

    store = None
    if output.dump_path is not None:
        dump_slices = 1 if output.lastonly else slices
        store = create_store(
            output.dump_path, m, n, dump_slices, mcmc.n_retained,
            meta={
                "model": {
                    "family": cfg.model.family, "sigma": cfg.model.sigma,
                    "phi": cfg.model.phi, "theta": cfg.model.theta, "nu": cfg.model.nu,
                },
                "t_pred": cfg.t_pred,
                "laglength": cfg.laglength,
                "mala_length": mcmc.mala_length,
                "burnin": mcmc.burnin,
                "retain": mcmc.retain,
            },
            cellwidth=cfg.grid.cellwidth, x0=cfg.grid.x0, y0=cfg.grid.y0,
            time_labels=[labels[-1]] if output.lastonly else labels,
            lastonly=output.lastonly,
            force=output.dump_force, confirm=output.dump_confirm,
        )

    welford_y = _Welford((slices, m, n))
    welford_exp = _Welford((slices, m, n))
    grid_sums = {name: None for name in output.grid_functions}

    h = mcmc.adaptive.h if isinstance(mcmc.adaptive, ConstantH) else mcmc.adaptive.inith
    h_trace = np.empty(mcmc.mala_length)
    accept_trace = np.empty(mcmc.mala_length)
    accepted = 0
    nonfinite = 0
    last_pct = -1

    try:
        for i in range(1, mcmc.mala_length + 1):
            h_trace[i - 1] = h
            info = mala_step(state, target, bound, h, rng)
            accept_trace[i - 1] = info.accept_prob
            accepted += info.accepted
            nonfinite += info.nonfinite
            h = adapt_h(mcmc.adaptive, h, info.accept_prob, i)
            for j, (t, ix, iy) in enumerate(diag_cells):
                diag_traces[j, i - 1] = state.gamma[t, ix, iy]

            if i > mcmc.burnin and (i - mcmc.burnin) % mcmc.retain == 0:
                y = np.empty((slices, m, n))
                for t in range(slices):
                    y[t] = unwhiten(target.embedding, state.gamma[t])[:m, :n]
                welford_y.update(y)
                welford_exp.update(np.exp(y))
                for name, fn in output.grid_functions.items():
                    vals = np.stack([np.asarray(fn(y[t]), dtype=float) for t in range(slices)])
                    if grid_sums[name] is None:
                        grid_sums[name] = vals
                    else:
                        grid_sums[name] += vals
                if store is not None:
                    store.append(y[-1:] if output.lastonly else y)

            pct = 100 * i // mcmc.mala_length
            if output.status is not None and pct > last_pct:
                output.status.write(f"progress {pct}\n")
                output.status.flush()
                last_pct = pct
    finally:
        if store is not None:
            store.close()

    nret = welford_y.n
    mean_exp = welford_exp.mean
    var_exp = welford_exp.variance()
    rates = np.array([cfg.mu.rate(t) for t in labels])
    return PredictionSummary(
        time_labels=tuple(labels),
        mean_y=welford_y.mean,
        var_y=welford_y.variance(),
        mean_exp_y=mean_exp,
        se_exp_y=np.sqrt(var_exp / nret),
        mean_intensity=rates[:, None, None] * cfg.lam.values[None, :, :] * mean_exp,
        grid_averages={k: v / nret for k, v in grid_sums.items()},
        h_trace=h_trace,
        acceptance_trace=accept_trace,
        diag_cells=diag_cells,
        diag_traces=diag_traces,
        n_retained=nret,
        accepted=accepted,
        nonfinite_rejects=nonfinite,
    )
