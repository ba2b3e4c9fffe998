"""Kernel selection: the compiled core when importable, else the pure-Python twin.

Set ``EDGETPU_EVAL_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pycore

BACKEND = "python"
_core = None
if not os.environ.get("EDGETPU_EVAL_PURE"):
    try:
        from . import _core  # type: ignore[attr-defined,no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        _core = None


def canonical_code(n: int, bits: int, labels, *, pure: bool = False) -> int:
    if _core is not None and not pure:
        return int(_core.canonical_code(n, bits, list(labels)))
    return _pycore.canonical_code(n, bits, list(labels))


def valid_matrices(n: int, max_edges: int, *, pure: bool = False) -> np.ndarray:
    if _core is not None and not pure:
        mats = _core.valid_matrices(n, max_edges)
    else:
        mats = _pycore.valid_matrices(n, max_edges)
    return np.asarray(mats, dtype=np.int64)


def matrix_codes(n: int, matrices: np.ndarray, *, pure: bool = False) -> np.ndarray:
    """Codes for every (matrix, labeling) pair as a ``(len(matrices), 3**(n-2))`` array."""
    matrices = np.ascontiguousarray(matrices, dtype=np.int64)
    nlab = 3 ** (n - 2)
    if _core is not None and not pure:
        out = np.empty(len(matrices) * nlab, dtype=np.uint64)
        _core.fill_matrix_codes(n, matrices, out)
    else:
        out = np.asarray(_pycore.matrix_codes(n, matrices.tolist()), dtype=np.uint64)
    return out.reshape(len(matrices), nlab)
