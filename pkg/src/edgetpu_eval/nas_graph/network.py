"""Expansion of a cell into a full stacked CNN with per-layer MAC and byte accounting."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .cell import CellGraph, OperationKind, _require_valid


class LayerKind(str, Enum):
    STEM = "stem"
    PROJECTION = "projection"
    CONV3X3 = "conv3x3"
    CONV1X1 = "conv1x1"
    MAXPOOL3X3 = "maxpool3x3"
    DOWNSAMPLE = "downsample"
    POOL = "pool"
    DENSE = "dense"

    @property
    def is_pooling(self) -> bool:
        return self in (LayerKind.MAXPOOL3X3, LayerKind.DOWNSAMPLE, LayerKind.POOL)


_VERTEX_KIND = {
    OperationKind.CONV3X3: LayerKind.CONV3X3,
    OperationKind.CONV1X1: LayerKind.CONV1X1,
    OperationKind.MAXPOOL3X3: LayerKind.MAXPOOL3X3,
}


@dataclass(frozen=True)
class NetworkSpec:
    input_height: int = 32
    input_width: int = 32
    input_channels: int = 3
    stem_channels: int = 128
    num_stacks: int = 3
    cells_per_stack: int = 3
    num_classes: int = 10
    bytes_per_weight: int = 1
    bytes_per_activation: int = 1
    # Per-output-channel bytes stored alongside the weights (folded bias); 0 disables.
    bias_bytes_per_channel: int = 0
    # Trainable normalization parameters per conv output channel (scale + offset).
    norm_params_per_channel: int = 2

    def __post_init__(self):
        for name in (
            "input_height", "input_width", "input_channels", "stem_channels",
            "num_stacks", "cells_per_stack", "num_classes", "bytes_per_weight",
            "bytes_per_activation",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.bias_bytes_per_channel < 0 or self.norm_params_per_channel < 0:
            raise ValueError("bias bytes and norm params must be non-negative")


@dataclass(frozen=True)
class LayerWorkload:
    kind: LayerKind
    out_height: int
    out_width: int
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    macs: int
    params: int
    param_bytes: int
    input_activation_bytes: int
    output_activation_bytes: int
    depth_rank: int

    @property
    def element_ops(self) -> int:
        """Comparisons/adds for pooling: one per kernel tap per output element."""
        return self.out_height * self.out_width * self.out_channels * self.kernel_h * self.kernel_w


@dataclass(frozen=True)
class NetworkWorkload:
    layers: tuple[LayerWorkload, ...]
    total_params: int
    total_macs: int
    source_cell: CellGraph
    spec: NetworkSpec

    @property
    def total_param_bytes(self) -> int:
        return sum(layer.param_bytes for layer in self.layers)


def vertex_channels(in_channels: int, out_channels: int, cell: CellGraph) -> list[int]:
    """Channel count of every vertex.

    The output budget is split evenly over the vertices feeding Output, the
    remainder going one apiece to the earliest of them; every other interior
    vertex takes the widest of its interior successors.
    """
    n = cell.num_vertices
    adj = cell.adjacency
    channels = [0] * n
    channels[0] = in_channels
    channels[n - 1] = out_channels
    if n == 2:
        return channels
    feeders = [v for v in range(1, n - 1) if adj[v][n - 1]]
    share, remainder = divmod(out_channels, len(feeders))
    for v in feeders:
        channels[v] = share
        if remainder:
            channels[v] += 1
            remainder -= 1
    for v in range(n - 3, 0, -1):
        if adj[v][n - 1]:
            continue
        for dst in range(v + 1, n - 1):
            if adj[v][dst]:
                channels[v] = max(channels[v], channels[dst])
    if any(c <= 0 for c in channels):
        raise ValueError("channel allocation infeasible")
    return channels


class _Builder:
    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.layers: list[LayerWorkload] = []

    def conv(self, kind, h, w, cin, cout, k, rank, *, norm=True, bias=0):
        spec = self.spec
        weights = k * k * cin * cout
        params = weights + (spec.norm_params_per_channel * cout if norm else 0) + bias
        self.layers.append(
            LayerWorkload(
                kind=kind,
                out_height=h,
                out_width=w,
                in_channels=cin,
                out_channels=cout,
                kernel_h=k,
                kernel_w=k,
                macs=h * w * weights,
                params=params,
                param_bytes=weights * spec.bytes_per_weight + cout * spec.bias_bytes_per_channel,
                input_activation_bytes=h * w * cin * spec.bytes_per_activation,
                output_activation_bytes=h * w * cout * spec.bytes_per_activation,
                depth_rank=rank,
            )
        )
        return rank

    def pool(self, kind, in_h, in_w, out_h, out_w, channels, k, rank):
        b = self.spec.bytes_per_activation
        self.layers.append(
            LayerWorkload(
                kind=kind,
                out_height=out_h,
                out_width=out_w,
                in_channels=channels,
                out_channels=channels,
                kernel_h=k[0],
                kernel_w=k[1],
                macs=0,
                params=0,
                param_bytes=0,
                input_activation_bytes=in_h * in_w * channels * b,
                output_activation_bytes=out_h * out_w * channels * b,
                depth_rank=rank,
            )
        )
        return rank

    def cell(self, cell: CellGraph, h, w, cin, cout, in_rank) -> int:
        n = cell.num_vertices
        adj = cell.adjacency
        channels = vertex_channels(cin, cout, cell)
        rank = [0] * n
        rank[0] = in_rank
        out_rank = in_rank
        for t in range(1, n - 1):
            c = channels[t]
            feed = [rank[src] for src in range(1, t) if adj[src][t]]
            if adj[0][t]:
                feed.append(self.conv(LayerKind.PROJECTION, h, w, cin, c, 1, in_rank + 1))
            r = max(feed) + 1
            op = cell.ops[t]
            if op == OperationKind.MAXPOOL3X3:
                self.pool(LayerKind.MAXPOOL3X3, h, w, h, w, c, (3, 3), r)
            else:
                k = 3 if op == OperationKind.CONV3X3 else 1
                self.conv(_VERTEX_KIND[op], h, w, c, c, k, r)
            rank[t] = r
            if adj[t][n - 1]:
                out_rank = max(out_rank, r)
        if adj[0][n - 1]:
            out_rank = max(out_rank, self.conv(LayerKind.PROJECTION, h, w, cin, cout, 1, in_rank + 1))
        return out_rank


def expand_network(cell: CellGraph, spec: NetworkSpec | None = None) -> NetworkWorkload:
    """Stem, ``num_stacks`` stacks of repeated cells with 2x downsampling and
    channel doubling between stacks, then global average pool and dense.
    """
    spec = spec or NetworkSpec()
    _require_valid(cell)
    b = _Builder(spec)
    h, w = spec.input_height, spec.input_width
    channels = spec.stem_channels
    rank = b.conv(LayerKind.STEM, h, w, spec.input_channels, channels, 3, 0)
    cin = channels
    for stack in range(spec.num_stacks):
        if stack > 0:
            oh, ow = (h + 1) // 2, (w + 1) // 2
            rank = b.pool(LayerKind.DOWNSAMPLE, h, w, oh, ow, cin, (2, 2), rank + 1)
            h, w = oh, ow
            channels *= 2
        for _ in range(spec.cells_per_stack):
            rank = b.cell(cell, h, w, cin, channels, rank)
            cin = channels
    rank = b.pool(LayerKind.POOL, h, w, 1, 1, cin, (h, w), rank + 1)
    b.conv(LayerKind.DENSE, 1, 1, cin, spec.num_classes, 1, rank + 1, norm=False, bias=spec.num_classes)
    layers = tuple(b.layers)
    return NetworkWorkload(
        layers=layers,
        total_params=sum(layer.params for layer in layers),
        total_macs=sum(layer.macs for layer in layers),
        source_cell=cell,
        spec=spec,
    )


def cell_layer_count(cell: CellGraph) -> int:
    """Layers contributed by one cell instantiation."""
    n = cell.num_vertices
    return (n - 2) + sum(cell.adjacency[0][1:n])


def fixed_layer_count(spec: NetworkSpec) -> int:
    """Stem, downsamples, global pool, dense."""
    return 1 + (spec.num_stacks - 1) + 2
