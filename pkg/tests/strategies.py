"""Hypothesis strategies and small helpers shared by the test modules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from hypothesis import strategies as st

from edgetpu_eval.nas_graph import CellGraph, OperationKind, topological_reorder
from edgetpu_eval.nas_graph import kernels
from edgetpu_eval.nas_graph._pycore import labeling

INTERIOR = ("conv3x3", "conv1x1", "maxpool3x3")


@lru_cache(maxsize=None)
def matrices(n: int) -> tuple[int, ...]:
    return tuple(int(b) for b in kernels.valid_matrices(n, 9))


def cell_from(n: int, bits: int, labels) -> CellGraph:
    labels = [int(x) for x in labels]
    if len(labels) == n - 2:
        labels = [0, *labels, 4]
    return CellGraph.from_bits(n, bits, labels)


@st.composite
def valid_cells(draw, min_vertices: int = 2, max_vertices: int = 7) -> CellGraph:
    n = draw(st.integers(min_vertices, max_vertices))
    bits = draw(st.sampled_from(matrices(n)))
    labels = draw(st.lists(st.integers(1, 3), min_size=n - 2, max_size=n - 2))
    return cell_from(n, bits, labels)


def random_cells(count: int, seed: int, min_vertices: int = 2, max_vertices: int = 7) -> list[CellGraph]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(min_vertices, max_vertices + 1))
        mats = matrices(n)
        bits = mats[int(rng.integers(len(mats)))]
        out.append(cell_from(n, bits, rng.integers(1, 4, size=n - 2)))
    return out


def all_raw_cells(max_vertices: int):
    """Every valid (matrix, labeling) pair up to ``max_vertices``, without dedup."""
    for n in range(2, max_vertices + 1):
        for bits in matrices(n):
            for li in range(3 ** (n - 2)):
                yield cell_from(n, bits, labeling(n, li))


def random_relabel(cell: CellGraph, rng) -> CellGraph:
    n = cell.num_vertices
    perm = [0] + [int(x) + 1 for x in rng.permutation(n - 2)] + [n - 1]
    return topological_reorder(cell.relabel(perm))


def op_names(cell: CellGraph) -> list[str]:
    return [o.label for o in cell.ops]


def adjacency(cell: CellGraph) -> list[list[int]]:
    return [list(r) for r in cell.adjacency]


def chain(*interior: str) -> CellGraph:
    return CellGraph.chain([OperationKind.from_label(x) for x in interior])
