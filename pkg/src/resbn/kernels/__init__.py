"""Hot kernels: family counting/scoring and mixed-row dissimilarity.

The compiled core (``_ckernels``) is used when it was built; otherwise, or
when ``RESBN_PURE_PYTHON`` is set, the NumPy fallback in ``_pykernels`` is
selected.  ``BACKEND`` names the active implementation.
"""
import os

from resbn.kernels import _pykernels

K2, BIC, MI = _pykernels.K2, _pykernels.BIC, _pykernels.MI

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("RESBN_PURE_PYTHON"):
    try:
        from resbn.kernels import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

discrete_family_score = _impl.discrete_family_score
mixed_dissimilarity = _impl.mixed_dissimilarity

__all__ = ["BACKEND", "K2", "BIC", "MI", "discrete_family_score", "mixed_dissimilarity"]
