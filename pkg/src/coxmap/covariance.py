"""Stationary covariance models, circulant embedding and whitening.

The latent field is stationary and separable: spatial correlation r(d; phi)
from a small set of families, temporal correlation exp(-theta*u).  Spatial
covariance matrices on the (2M, 2N) extension of the output grid are block
circulant with respect to wrapped (minimum-image) distances, so their
eigendecomposition is a 2-D DFT and sampling / whitening are O(n log n).

All transforms use the real DFT pair (rfft2/irfft2): the covariance square
root acts as a real symmetric operator, so whitened states stay real arrays
of the full extended-grid shape.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import (
    DimensionMismatchError,
    EmbeddingNotPSDError,
    InvalidParameterError,
    NegativeDistanceError,
    NegativeLagError,
)

__all__ = [
    "CovarianceModel",
    "SpectralEmbedding",
    "spatial_correlation",
    "spatial_covariance",
    "temporal_correlation",
    "build_embedding",
    "sample_field",
    "whiten",
    "unwhiten",
    "apply_sqrt_cov",
]

FAMILIES = ("exponential", "whittle", "matern")

EIG_CLAMP_TOL = 1e-6  # relative window of negative eigenvalues clamped to 0


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Separable space-time covariance: sigma^2 r(d; phi) exp(-theta u).

    nu is the matern smoothness, treated as known (it is hard to estimate
    from data); whittle is matern with nu = 1, exponential ignores nu.
    """

    family: str
    sigma: float
    phi: float
    theta: float
    nu: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(
                f"unknown family {self.family!r}; choose from {FAMILIES}"
            )
        for name in ("sigma", "phi", "theta", "nu"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidParameterError(f"{name} must be positive, got {v}")

    @property
    def field_mean(self):
        """Mean of Y, fixed at -sigma^2/2 so that E[exp(Y)] = 1."""
        return -0.5 * self.sigma**2


def _matern(d, phi, nu):
    shape = np.shape(d)
    scaled = np.atleast_1d(np.asarray(d, dtype=float)) / phi
    out = np.ones_like(scaled)
    pos = scaled > 1e-12
    x = scaled[pos]
    with np.errstate(over="ignore", invalid="ignore"):
        val = (2.0 ** (1.0 - nu) / special.gamma(nu)) * x**nu * special.kv(nu, x)
    # kv underflows to 0 for large x (the correct limit); for tiny x it can
    # overflow while the product tends to 1, so map non-finite values there
    val = np.where(np.isfinite(val), val, 1.0)
    out[pos] = np.clip(val, 0.0, 1.0)
    return out.reshape(shape)


def spatial_correlation(model, distance):
    """r(distance; phi) for the model's family; r(0) = 1."""
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise NegativeDistanceError("distances must be >= 0")
    if model.family == "exponential":
        out = np.exp(-d / model.phi)
    else:
        nu = 1.0 if model.family == "whittle" else model.nu
        out = _matern(d, model.phi, nu)
    return float(out) if out.ndim == 0 else out


def spatial_covariance(model, distance):
    """sigma^2 r(distance; phi): spatial covariance at zero time lag."""
    return model.sigma**2 * spatial_correlation(model, distance)


def temporal_correlation(model, lag):
    """exp(-theta * lag)."""
    lag = np.asarray(lag, dtype=float)
    if np.any(lag < 0):
        raise NegativeLagError("lags must be >= 0")
    out = np.exp(-model.theta * lag)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SpectralEmbedding:
    """Eigenstructure of the block-circulant spatial covariance.

    ``eigenvalues`` is the full (ext_m, ext_n) array Lambda; the half-plane
    square-root multipliers used by the real DFT pair are precomputed.
    """

    ext_m: int
    ext_n: int
    cellwidth: float
    field_mean: float
    sigma: float
    eigenvalues: np.ndarray = field(repr=False)
    _sqrt_half: np.ndarray = field(repr=False)
    _inv_sqrt_half: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return (self.ext_m, self.ext_n)


def _wrapped_distance_grid(ext_m, ext_n, cellwidth):
    ix = np.arange(ext_m)
    iy = np.arange(ext_n)
    dx = np.minimum(ix, ext_m - ix) * cellwidth
    dy = np.minimum(iy, ext_n - iy) * cellwidth
    return np.hypot(dx[:, None], dy[None, :])


def build_embedding(model, grid):
    """Embed the spatial covariance on the doubled torus; eigenvalues via DFT.

    Wrapped minimum-image distances make the base row an even function on
    the torus, so the DFT is real.  Negative eigenvalues within
    EIG_CLAMP_TOL of zero (relative to the max) are clamped; anything worse
    raises EmbeddingNotPSD.
    """
    ext_m, ext_n = 2 * grid.M, 2 * grid.N
    base = spatial_covariance(model, _wrapped_distance_grid(ext_m, ext_n, grid.cellwidth))
    lam_c = np.fft.fft2(base)
    max_eig = float(lam_c.real.max())
    if max_eig <= 0:
        raise EmbeddingNotPSDError(max_eig, 0.0, "embedding has no positive eigenvalue")
    if float(np.abs(lam_c.imag).max()) > 1e-8 * max_eig:
        raise EmbeddingNotPSDError(
            0.0, 0.0, "embedding eigenvalues are materially complex; base row not even"
        )
    lam = lam_c.real.copy()
    tol = EIG_CLAMP_TOL * max_eig
    min_eig = float(lam.min())
    if min_eig < -tol:
        raise EmbeddingNotPSDError(min_eig, tol)
    lam[lam < 0.0] = 0.0
    half = lam[:, : ext_n // 2 + 1]
    sqrt_half = np.sqrt(half)
    with np.errstate(divide="ignore"):
        inv_sqrt_half = np.where(half > 0.0, 1.0 / np.sqrt(np.where(half > 0, half, 1.0)), 0.0)
    return SpectralEmbedding(
        ext_m=ext_m,
        ext_n=ext_n,
        cellwidth=grid.cellwidth,
        field_mean=model.field_mean,
        sigma=model.sigma,
        eigenvalues=lam,
        _sqrt_half=sqrt_half,
        _inv_sqrt_half=inv_sqrt_half,
    )


def _check_dims(embedding, arr):
    if arr.shape != embedding.shape:
        raise DimensionMismatchError(
            f"array shape {arr.shape} does not match embedding {embedding.shape}"
        )


def apply_sqrt_cov(embedding, arr):
    """Apply the symmetric square root C^{1/2} (no mean shift).

    This is its own adjoint, which the likelihood gradient relies on.
    """
    arr = np.asarray(arr, dtype=float)
    _check_dims(embedding, arr)
    spec = np.fft.rfft2(arr)
    return np.fft.irfft2(embedding._sqrt_half * spec, s=embedding.shape)


def sample_field(embedding, white_noise):
    """fieldMean + C^{1/2} Z: a draw of Y when Z is i.i.d. standard normal."""
    return embedding.field_mean + apply_sqrt_cov(embedding, white_noise)


def unwhiten(embedding, gamma):
    """Map whitened coordinates to the field: Y = fieldMean + C^{1/2} Gamma."""
    return embedding.field_mean + apply_sqrt_cov(embedding, gamma)


def whiten(embedding, y_ext):
    """Map a field to whitened coordinates: Gamma = C^{-1/2} (Y - fieldMean).

    Components on zero eigenvalues are set to 0 (they do not affect Y).
    """
    y_ext = np.asarray(y_ext, dtype=float)
    _check_dims(embedding, y_ext)
    spec = np.fft.rfft2(y_ext - embedding.field_mean)
    return np.fft.irfft2(embedding._inv_sqrt_half * spec, s=embedding.shape)
