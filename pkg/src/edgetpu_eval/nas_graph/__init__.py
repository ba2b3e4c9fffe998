"""Cell graphs, their enumeration, and expansion into full networks."""
from .canonical import canonical_code, canonical_hash, enumerate_cells, hash_code
from .cell import (
    INTERIOR_OPS,
    MAX_EDGES,
    MAX_VERTICES,
    CellGraph,
    OperationKind,
    ValidationReport,
    cell_depth,
    cell_width,
    count_op_kinds,
    topological_reorder,
    validate_cell,
)
from .kernels import BACKEND
from .network import (
    LayerKind,
    LayerWorkload,
    NetworkSpec,
    NetworkWorkload,
    cell_layer_count,
    expand_network,
    fixed_layer_count,
    vertex_channels,
)

__all__ = [
    "BACKEND", "INTERIOR_OPS", "MAX_EDGES", "MAX_VERTICES", "CellGraph", "LayerKind",
    "LayerWorkload", "NetworkSpec", "NetworkWorkload", "OperationKind", "ValidationReport",
    "canonical_code", "canonical_hash", "cell_depth", "cell_layer_count", "cell_width",
    "count_op_kinds", "enumerate_cells", "expand_network", "fixed_layer_count", "hash_code",
    "topological_reorder", "validate_cell", "vertex_channels",
]
