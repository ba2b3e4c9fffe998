"""Cell graphs: labeled DAGs of at most seven vertices and nine edges."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from itertools import combinations
from typing import Iterable, Sequence

MAX_VERTICES = 7
MAX_EDGES = 9


class OperationKind(IntEnum):
    """Vertex operations. The integer value is the kernel op code."""

    INPUT = 0
    CONV3X3 = 1
    CONV1X1 = 2
    MAXPOOL3X3 = 3
    OUTPUT = 4

    @property
    def label(self) -> str:
        return _NAMES[self]

    @classmethod
    def from_label(cls, name: str) -> "OperationKind":
        try:
            return _BY_NAME[name]
        except KeyError:
            raise ValueError(f"unknown operation {name!r}") from None


_NAMES = {
    OperationKind.INPUT: "input",
    OperationKind.CONV3X3: "conv3x3",
    OperationKind.CONV1X1: "conv1x1",
    OperationKind.MAXPOOL3X3: "maxpool3x3",
    OperationKind.OUTPUT: "output",
}
_BY_NAME = {v: k for k, v in _NAMES.items()}

INTERIOR_OPS = (OperationKind.CONV3X3, OperationKind.CONV1X1, OperationKind.MAXPOOL3X3)


@dataclass(frozen=True)
class CellGraph:
    """A cell: ``ops[i]`` labels vertex ``i``; ``adjacency[i][j]`` is edge i->j.

    Construction does not validate; use :func:`validate_cell`.
    """

    ops: tuple[OperationKind, ...]
    adjacency: tuple[tuple[int, ...], ...]

    def __init__(self, ops: Iterable, adjacency: Iterable[Iterable[int]]):
        ops_t = tuple(o if isinstance(o, OperationKind) else _coerce_op(o) for o in ops)
        adj_t = tuple(tuple(int(bool(x)) for x in row) for row in adjacency)
        object.__setattr__(self, "ops", ops_t)
        object.__setattr__(self, "adjacency", adj_t)

    @property
    def num_vertices(self) -> int:
        return len(self.ops)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [
            (i, j)
            for i, row in enumerate(self.adjacency)
            for j, x in enumerate(row)
            if x
        ]

    @property
    def num_edges(self) -> int:
        return sum(sum(row) for row in self.adjacency)

    def predecessors(self, v: int) -> list[int]:
        return [u for u in range(self.num_vertices) if self.adjacency[u][v]]

    def successors(self, v: int) -> list[int]:
        return [w for w, x in enumerate(self.adjacency[v]) if x]

    def bits(self) -> int:
        """Upper-triangular adjacency packed row-major (the kernel encoding)."""
        n = self.num_vertices
        out = 0
        for k, (i, j) in enumerate(combinations(range(n), 2)):
            if self.adjacency[i][j]:
                out |= 1 << k
        return out

    @classmethod
    def from_bits(cls, n: int, bits: int, labels: Sequence[int]) -> "CellGraph":
        adj = [[0] * n for _ in range(n)]
        for k, (i, j) in enumerate(combinations(range(n), 2)):
            if (bits >> k) & 1:
                adj[i][j] = 1
        return cls([OperationKind(x) for x in labels], adj)

    @classmethod
    def chain(cls, interior: Sequence) -> "CellGraph":
        """Input -> interior[0] -> ... -> Output."""
        ops = [OperationKind.INPUT, *interior, OperationKind.OUTPUT]
        n = len(ops)
        adj = [[int(j == i + 1) for j in range(n)] for i in range(n)]
        return cls(ops, adj)

    def relabel(self, perm: Sequence[int]) -> "CellGraph":
        """Move vertex ``v`` to position ``perm[v]``. The result may not be upper-triangular."""
        n = self.num_vertices
        ops = [OperationKind.INPUT] * n
        adj = [[0] * n for _ in range(n)]
        for v in range(n):
            ops[perm[v]] = self.ops[v]
        for i, j in self.edges:
            adj[perm[i]][perm[j]] = 1
        return CellGraph(ops, adj)

    def with_op(self, vertex: int, op: OperationKind) -> "CellGraph":
        ops = list(self.ops)
        ops[vertex] = op
        return CellGraph(ops, self.adjacency)

    def to_dict(self) -> dict:
        return {"ops": [o.label for o in self.ops], "adjacency": [list(r) for r in self.adjacency]}

    @classmethod
    def from_dict(cls, data: dict) -> "CellGraph":
        ops = data["ops"]
        adj = data["adjacency"]
        if not isinstance(ops, list) or not isinstance(adj, list):
            raise ValueError("'ops' and 'adjacency' must be lists")
        n = len(ops)
        if len(adj) != n or any(not isinstance(r, list) or len(r) != n for r in adj):
            raise ValueError(f"adjacency must be a {n}x{n} matrix")
        for row in adj:
            for x in row:
                if x not in (0, 1) or isinstance(x, bool):
                    raise ValueError(f"adjacency entries must be 0 or 1, got {x!r}")
        return cls([OperationKind.from_label(o) for o in ops], adj)


def _coerce_op(o) -> OperationKind:
    if isinstance(o, str):
        return OperationKind.from_label(o)
    return OperationKind(o)


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


# Violation codes
TOO_FEW_VERTICES = "too few vertices"
TOO_MANY_VERTICES = "too many vertices"
TOO_MANY_EDGES = "too many edges"
NOT_SQUARE = "adjacency not square"
NOT_UPPER_TRIANGULAR = "adjacency not strictly upper-triangular"
BAD_INPUT = "first vertex is not the only input"
BAD_OUTPUT = "last vertex is not the only output"
DANGLING = "dangling vertex"


def validate_cell(
    cell: CellGraph, max_vertices: int = MAX_VERTICES, max_edges: int = MAX_EDGES
) -> ValidationReport:
    violations = []
    n = cell.num_vertices
    if n < 2:
        violations.append(TOO_FEW_VERTICES)
    if n > max_vertices:
        violations.append(TOO_MANY_VERTICES)
    if len(cell.adjacency) != n or any(len(r) != n for r in cell.adjacency):
        violations.append(NOT_SQUARE)
        return ValidationReport(False, violations)
    if any(cell.adjacency[i][j] for i in range(n) for j in range(i + 1)):
        violations.append(NOT_UPPER_TRIANGULAR)
    if cell.num_edges > max_edges:
        violations.append(TOO_MANY_EDGES)
    if n >= 1:
        if cell.ops[0] != OperationKind.INPUT or cell.ops[1:].count(OperationKind.INPUT):
            violations.append(BAD_INPUT)
        if cell.ops[-1] != OperationKind.OUTPUT or cell.ops[:-1].count(OperationKind.OUTPUT):
            violations.append(BAD_OUTPUT)
    if n >= 2 and NOT_UPPER_TRIANGULAR not in violations:
        fwd = _reach(cell, 0, forward=True)
        bwd = _reach(cell, n - 1, forward=False)
        if any(v not in fwd or v not in bwd for v in range(n)):
            violations.append(DANGLING)
    return ValidationReport(not violations, violations)


def _reach(cell: CellGraph, start: int, forward: bool) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        nxt = cell.successors(v) if forward else cell.predecessors(v)
        for w in nxt:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _require_valid(cell: CellGraph) -> None:
    report = validate_cell(cell)
    if not report.ok:
        raise ValueError(f"invalid cell: {', '.join(report.violations)}")


def cell_depth(cell: CellGraph) -> int:
    """Edges on the longest Input->Output path."""
    n = cell.num_vertices
    longest = [0] * n
    for j in range(1, n):
        preds = cell.predecessors(j)
        longest[j] = max((longest[i] + 1 for i in preds), default=0)
    return longest[n - 1]


def cell_width(cell: CellGraph) -> int:
    """Largest number of edges leaving a predecessor-closed vertex set.

    The sets range over every topological prefix of the cell: they contain
    Input, exclude Output, and contain all predecessors of each member.
    """
    n = cell.num_vertices
    pred_mask = [sum(1 << u for u in cell.predecessors(v)) for v in range(n)]
    edges = cell.edges
    best = 0
    # Input (bit 0) always in, Output (bit n-1) always out.
    for sub in range(1 << max(n - 2, 0)):
        members = 1 | (sub << 1)
        if any((members >> v) & 1 and pred_mask[v] & ~members for v in range(n)):
            continue
        cut = sum(1 for i, j in edges if (members >> i) & 1 and not (members >> j) & 1)
        best = max(best, cut)
    return best


def count_op_kinds(cell: CellGraph) -> dict[OperationKind, int]:
    counts = {op: 0 for op in INTERIOR_OPS}
    for op in cell.ops[1:-1]:
        counts[op] += 1
    return counts


def topological_reorder(cell: CellGraph) -> CellGraph:
    """Renumber vertices along a topological order so the adjacency becomes upper-triangular.

    Useful after :meth:`CellGraph.relabel`. Raises ``ValueError`` on a cycle.
    """
    n = cell.num_vertices
    indeg = [len(cell.predecessors(v)) for v in range(n)]
    ready = sorted(v for v in range(n) if indeg[v] == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for w in cell.successors(v):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
                ready.sort()
    if len(order) != n:
        raise ValueError("cell graph has a cycle")
    perm = [0] * n
    for position, v in enumerate(order):
        perm[v] = position
    return cell.relabel(perm)
