"""Per-layer roofline latency/energy model with parameter caching.

Each layer costs ``max(compute_cycles, memory_cycles)`` cycles. Compute is
MACs over the array's MACs/cycle (or pooling element ops over one element
per lane per cycle). Memory is the DRAM traffic the layer cannot avoid:
parameters that are not cached on chip, plus activations that overflow the
PE memory left over after parameter caching.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .accel_config import AcceleratorConfig, EnergyCoefficients, cache_capacity, total_core_memory, total_pe_memory
from .nas_graph import (
    CellGraph,
    NetworkSpec,
    NetworkWorkload,
    OperationKind,
    canonical_hash,
    cell_depth,
    cell_width,
    count_op_kinds,
    expand_network,
)
from .nas_graph.network import LayerWorkload

STEADY = "steady_state"
COLD = "cold"
MODES = (STEADY, COLD)


class Bound(str, Enum):
    COMPUTE = "compute"
    MEMORY = "memory"


@dataclass(frozen=True)
class CachePlan:
    cached: tuple[bool, ...]
    cached_bytes: int
    streamed_bytes: int
    capacity: int


@dataclass(frozen=True)
class LayerEstimate:
    compute_cycles: int
    memory_cycles: int
    bound: Bound
    dram_bytes: int
    sram_bytes: int

    @property
    def cycles(self) -> int:
        return max(self.compute_cycles, self.memory_cycles)


@dataclass(frozen=True)
class PerfEstimate:
    latency_s: float
    energy_j: float
    total_cycles: int
    per_layer: tuple[LayerEstimate, ...]
    cache_plan: CachePlan
    mode: str
    macs: int
    dram_bytes: int
    sram_bytes: int

    @property
    def bound_fraction_memory(self) -> float:
        if not self.per_layer:
            return 0.0
        return sum(le.bound is Bound.MEMORY for le in self.per_layer) / len(self.per_layer)


def _layers(net) -> Sequence[LayerWorkload]:
    return net.layers if isinstance(net, NetworkWorkload) else tuple(net)


def plan_cache(net, cfg: AcceleratorConfig, capacity: int | None = None) -> CachePlan:
    """Cache whole layers in descending parameter-size order until one does not fit.

    Stopping at the first misfit (rather than skipping it) keeps the cached
    set a prefix of a fixed order, so a larger capacity never uncaches a layer.
    """
    layers = _layers(net)
    cap = cache_capacity(cfg) if capacity is None else capacity
    order = sorted(range(len(layers)), key=lambda i: -layers[i].param_bytes)
    cached = [False] * len(layers)
    used = 0
    for i in order:
        size = layers[i].param_bytes
        if size == 0:
            break
        if used + size > cap:
            break
        cached[i] = True
        used += size
    total = sum(layer.param_bytes for layer in layers)
    return CachePlan(tuple(cached), used, total - used, cap)


def estimate_energy(
    macs: float, dram_bytes: float, sram_bytes: float, latency_s: float, coeffs: EnergyCoefficients
) -> float:
    """Joules: dynamic MAC/DRAM/SRAM energy plus static power over the latency."""
    dynamic_pj = macs * coeffs.pj_per_mac + dram_bytes * coeffs.pj_per_dram_byte + sram_bytes * coeffs.pj_per_sram_byte
    return dynamic_pj * 1e-12 + coeffs.static_mw * 1e-3 * latency_s


def estimate(net, cfg: AcceleratorConfig, mode: str = STEADY, plan: CachePlan | None = None) -> PerfEstimate:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    layers = _layers(net)
    plan = plan or plan_cache(layers, cfg)
    cold = mode == COLD
    param_spill = max(0, plan.cached_bytes - total_core_memory(cfg))
    activation_room = max(0, total_pe_memory(cfg) - param_spill)
    bw = cfg.effective_bandwidth
    mpc = cfg.macs_per_cycle
    vpc = cfg.vector_ops_per_cycle

    per_layer = []
    total_cycles = 0
    macs = dram_total = sram_total = 0
    for layer, cached in zip(layers, plan.cached):
        if layer.kind.is_pooling:
            compute = -(-layer.element_ops // vpc)
        elif layer.macs == 0:
            compute = 0
        elif mpc == 0:
            raise ValueError(f"{cfg.name}: no MAC throughput for a MAC layer")
        else:
            compute = -(-layer.macs // mpc)
        streams_params = cold or not cached
        activations = layer.input_activation_bytes + layer.output_activation_bytes
        spill = max(0, activations - activation_room)
        dram = (layer.param_bytes if streams_params else 0) + spill
        sram = (0 if streams_params else layer.param_bytes) + activations - spill
        memory = math.ceil(dram * cfg.clock_hz / bw) if dram else 0
        bound = Bound.MEMORY if memory > compute else Bound.COMPUTE
        le = LayerEstimate(compute, memory, bound, dram, sram)
        per_layer.append(le)
        total_cycles += le.cycles + cfg.layer_overhead_cycles
        macs += layer.macs
        dram_total += dram
        sram_total += sram

    latency = total_cycles / cfg.clock_hz
    energy = estimate_energy(macs, dram_total, sram_total, latency, cfg.energy)
    return PerfEstimate(
        latency_s=latency,
        energy_j=energy,
        total_cycles=total_cycles,
        per_layer=tuple(per_layer),
        cache_plan=plan,
        mode=mode,
        macs=macs,
        dram_bytes=dram_total,
        sram_bytes=sram_total,
    )


def estimate_rows(
    cells: Iterable[CellGraph],
    accels: Sequence[AcceleratorConfig],
    spec: NetworkSpec | None = None,
    mode: str = STEADY,
    threads: int = 1,
):
    """Result rows for every (cell, accelerator) pair, cell-major, in input order."""
    from .analysis import ResultRow

    spec = spec or NetworkSpec()

    def one(cell: CellGraph):
        net = expand_network(cell, spec)
        h = canonical_hash(cell)
        counts = count_op_kinds(cell)
        depth = cell_depth(cell)
        width = cell_width(cell)
        rows = []
        for cfg in accels:
            est = estimate(net, cfg, mode)
            rows.append(
                ResultRow(
                    cell_hash=h,
                    accel=cfg.name,
                    latency_ms=est.latency_s * 1e3,
                    energy_mj=est.energy_j * 1e3,
                    total_params=net.total_params,
                    total_macs=net.total_macs,
                    depth=depth,
                    width=width,
                    n_conv3x3=counts[OperationKind.CONV3X3],
                    n_conv1x1=counts[OperationKind.CONV1X1],
                    n_maxpool3x3=counts[OperationKind.MAXPOOL3X3],
                    bound_fraction_memory=est.bound_fraction_memory,
                )
            )
        return rows

    if threads <= 1:
        for cell in cells:
            yield from one(cell)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rows in pool.map(one, cells):
                yield from rows
