"""Isomorphism-invariant hashing and enumeration of the cell space."""
from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Iterator

import numpy as np

from . import kernels
from .cell import MAX_EDGES, MAX_VERTICES, CellGraph, _require_valid


def canonical_code(cell: CellGraph) -> int:
    """Exact canonical integer: equal iff the labeled cells are isomorphic."""
    _require_valid(cell)
    return kernels.canonical_code(cell.num_vertices, cell.bits(), [int(o) for o in cell.ops])


def hash_code(code: int) -> str:
    return hashlib.blake2b(int(code).to_bytes(8, "big"), digest_size=16).hexdigest()


def canonical_hash(cell: CellGraph) -> str:
    """32-hex-digit digest of :func:`canonical_code`; stable across runs and platforms."""
    return hash_code(canonical_code(cell))


@lru_cache(maxsize=None)
def _valid_matrices(n: int, max_edges: int) -> np.ndarray:
    mats = kernels.valid_matrices(n, max_edges)
    mats.setflags(write=False)
    return mats


def _labels(n: int, index: int) -> list[int]:
    labels = [0] * n
    labels[n - 1] = 4
    for v in range(n - 2, 0, -1):
        labels[v] = 1 + index % 3
        index //= 3
    return labels


def _check_limits(max_vertices: int, max_edges: int) -> None:
    if not 2 <= max_vertices <= MAX_VERTICES:
        raise ValueError(f"max_vertices must be in [2, {MAX_VERTICES}]")
    if not 1 <= max_edges <= MAX_EDGES:
        raise ValueError(f"max_edges must be in [1, {MAX_EDGES}]")


def enumerate_cells(
    max_vertices: int = MAX_VERTICES,
    max_edges: int = MAX_EDGES,
    *,
    sample: int | None = None,
    seed: int = 0,
) -> Iterator[CellGraph]:
    """Yield unique valid cells.

    Full mode (``sample=None``) emits every isomorphism class exactly once,
    in order of first occurrence over (vertex count, adjacency bits,
    labeling). Sample mode draws ``sample`` distinct classes by walking the
    raw (matrix, labeling) candidates in a seeded random order, so a class
    is picked with probability proportional to its number of labeled
    representations.
    """
    _check_limits(max_vertices, max_edges)
    if sample is None:
        yield from _enumerate_full(max_vertices, max_edges)
    else:
        yield from _enumerate_sample(max_vertices, max_edges, sample, seed)


def _enumerate_full(max_vertices: int, max_edges: int) -> Iterator[CellGraph]:
    for n in range(2, max_vertices + 1):
        mats = _valid_matrices(n, max_edges)
        if len(mats) == 0:
            continue
        codes = kernels.matrix_codes(n, mats).ravel()
        _, first = np.unique(codes, return_index=True)
        first.sort()
        nlab = 3 ** (n - 2)
        for flat in first.tolist():
            m, li = divmod(flat, nlab)
            yield CellGraph.from_bits(n, int(mats[m]), _labels(n, li))


def _enumerate_sample(
    max_vertices: int, max_edges: int, count: int, seed: int
) -> Iterator[CellGraph]:
    if count < 0:
        raise ValueError("sample size must be non-negative")
    sizes = []
    for n in range(2, max_vertices + 1):
        sizes.append((n, len(_valid_matrices(n, max_edges)) * 3 ** (n - 2)))
    offsets = np.cumsum([0] + [s for _, s in sizes])
    rng = np.random.default_rng(seed)
    order = rng.permutation(int(offsets[-1]))
    seen: set[int] = set()
    for idx in order.tolist():
        if len(seen) >= count:
            return
        block = int(np.searchsorted(offsets, idx, side="right")) - 1
        n = sizes[block][0]
        local = idx - int(offsets[block])
        m, li = divmod(local, 3 ** (n - 2))
        bits = int(_valid_matrices(n, max_edges)[m])
        labels = _labels(n, li)
        code = kernels.canonical_code(n, bits, labels)
        if code in seen:
            continue
        seen.add(code)
        yield CellGraph.from_bits(n, bits, labels)
