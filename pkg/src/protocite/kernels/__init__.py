"""Numeric kernels with a compiled fast path.

The compiled Cython lane is preferred when the extension was built;
otherwise (or when PROTOCITE_PURE_KERNELS=1 is set) the pure-numpy lane
is used. Both lanes implement the same contracts and agree to float
rounding; ``tests/test_kernels.py`` pins the parity.
"""

import os

from . import _pykernels

if os.environ.get("PROTOCITE_PURE_KERNELS", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

ACTIVE_LANE = _impl.LANE

pairwise_sqdist = _impl.pairwise_sqdist
similarity_forward = _impl.similarity_forward
cosine_assign = _impl.cosine_assign

__all__ = ["ACTIVE_LANE", "pairwise_sqdist", "similarity_forward", "cosine_assign"]
