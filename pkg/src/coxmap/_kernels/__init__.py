"""Hot numerical kernels, with an optional compiled fast path.

``_fast`` is a Cython extension compiled at install time; ``_ref`` holds
pure-numpy implementations of the identical contract.  The active
implementation is selected once at import: the compiled module when it is
present, the reference module otherwise.  Set ``COXMAP_PURE_PYTHON=1`` to
force the reference path (used by the benchmark suite and for debugging).

Both implementations must agree to floating-point roundoff; the test suite
checks them against each other whenever the extension is available.
"""

import os

from . import _ref

_impl = _ref
if os.environ.get("COXMAP_PURE_PYTHON") != "1":
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

IMPLEMENTATION = "python" if _impl is _ref else "compiled"

points_in_polygon = _impl.points_in_polygon
pcf_pairs = _impl.pcf_pairs
kfun_pairs = _impl.kfun_pairs
poisson_ll_grad = _impl.poisson_ll_grad
