"""coxmap: spatio-temporal log-Gaussian Cox process modelling.

The package covers the full workflow for point-process risk mapping with a
latent Gaussian field that is stationary in space (exponential / Whittle /
Matern correlation) and Markov in time (exponential decay):

* ``geometry``   windows, patterns, FFT grids, rotation optimisation
* ``intensity``  fixed spatial and temporal intensity estimation
* ``covariance`` circulant embedding, field sampling, whitening
* ``estimation`` second-order summaries and parameter fitting
* ``inference``  MALA sampling of the latent field, online outputs
* ``storage``    on-disk sample archives and post-hoc functionals
* ``simulate``   forward simulation of the model
* ``cli``        command-line workflow and the tuning HTTP API
"""

__version__ = "0.1.0"

from . import errors  # noqa: F401
from ._kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION  # noqa: F401
