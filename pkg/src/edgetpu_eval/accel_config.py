"""Template accelerator parameterization and the three studied presets."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

KIB = 1024
MIB = 1024 * 1024


@dataclass(frozen=True)
class EnergyCoefficients:
    """Uncalibrated defaults of the right order for 8-bit edge inference."""

    pj_per_mac: float = 1.0
    pj_per_dram_byte: float = 100.0
    pj_per_sram_byte: float = 1.0
    static_mw: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class AcceleratorConfig:
    """PE array -> cores -> compute lanes -> multi-way MACs, plus cost-model knobs.

    Memory sizes are per PE (``pe_memory_bytes``) and per core
    (``core_memory_bytes``). The instruction/parameter/activation memory
    entries are opaque counts carried for completeness; the cost model does
    not use them.
    """

    name: str
    clock_hz: float
    pes_x: int
    pes_y: int
    pe_memory_bytes: int
    cores_per_pe: int
    core_memory_bytes: int
    compute_lanes: int
    macs_per_lane: int = 4
    instruction_memory_entries: int = 16384
    parameter_memory_entries: int = 8192
    activation_memory_entries: int = 1024
    io_bandwidth_bytes_per_s: float = 32e9
    sustained_bw_fraction: float = 1.0
    pe_cache_fraction: float = 0.75
    layer_overhead_cycles: int = 0
    energy: EnergyCoefficients = field(default_factory=EnergyCoefficients)

    def __post_init__(self):
        if isinstance(self.energy, dict):
            object.__setattr__(self, "energy", EnergyCoefficients(**self.energy))
        for name in ("pes_x", "pes_y", "cores_per_pe", "compute_lanes",
                     "instruction_memory_entries", "parameter_memory_entries",
                     "activation_memory_entries"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.macs_per_lane < 0:
            raise ValueError("macs_per_lane must be non-negative")
        if self.clock_hz <= 0 or self.io_bandwidth_bytes_per_s <= 0:
            raise ValueError("clock and I/O bandwidth must be positive")
        if self.pe_memory_bytes < 0 or self.core_memory_bytes < 0:
            raise ValueError("memory sizes must be non-negative")
        if not 0 < self.sustained_bw_fraction <= 1:
            raise ValueError("sustained_bw_fraction must lie in (0, 1]")
        if not 0 <= self.pe_cache_fraction <= 1:
            raise ValueError("pe_cache_fraction must lie in [0, 1]")
        if self.layer_overhead_cycles < 0:
            raise ValueError("layer_overhead_cycles must be non-negative")

    @property
    def total_pes(self) -> int:
        return self.pes_x * self.pes_y

    @property
    def macs_per_cycle(self) -> int:
        return self.total_pes * self.cores_per_pe * self.compute_lanes * self.macs_per_lane

    @property
    def vector_ops_per_cycle(self) -> int:
        # One element per lane per cycle; pooling bypasses the MAC units.
        return self.total_pes * self.cores_per_pe * self.compute_lanes

    @property
    def effective_bandwidth(self) -> float:
        return self.io_bandwidth_bytes_per_s * self.sustained_bw_fraction

    def with_(self, **changes) -> "AcceleratorConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AcceleratorConfig":
        data = dict(data)
        energy = data.pop("energy", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown accelerator fields: {sorted(unknown)}")
        if energy is not None:
            data["energy"] = EnergyCoefficients(**energy)
        return cls(**data)


def peak_tops(cfg: AcceleratorConfig) -> float:
    """Tera-ops per second, counting a MAC as two ops."""
    return 2 * cfg.macs_per_cycle * cfg.clock_hz / 1e12


def total_core_memory(cfg: AcceleratorConfig) -> int:
    return cfg.core_memory_bytes * cfg.total_pes * cfg.cores_per_pe


def total_pe_memory(cfg: AcceleratorConfig) -> int:
    return cfg.pe_memory_bytes * cfg.total_pes


def cache_capacity(cfg: AcceleratorConfig) -> int:
    """Bytes available for cached parameters: all core memory plus a share of PE memory."""
    return total_core_memory(cfg) + int(cfg.pe_cache_fraction * total_pe_memory(cfg))


_PRESETS = {
    "V1": AcceleratorConfig(
        name="V1",
        clock_hz=800e6,
        pes_x=4,
        pes_y=4,
        pe_memory_bytes=2 * MIB,
        cores_per_pe=4,
        core_memory_bytes=32 * KIB,
        compute_lanes=64,
        instruction_memory_entries=16384,
        parameter_memory_entries=16384,
        activation_memory_entries=1024,
        io_bandwidth_bytes_per_s=17e9,
        sustained_bw_fraction=1.0,
    ),
    "V2": AcceleratorConfig(
        name="V2",
        clock_hz=1066e6,
        pes_x=4,
        pes_y=4,
        pe_memory_bytes=384 * KIB,
        cores_per_pe=1,
        core_memory_bytes=32 * KIB,
        compute_lanes=64,
        instruction_memory_entries=16384,
        parameter_memory_entries=8192,
        activation_memory_entries=1024,
        io_bandwidth_bytes_per_s=32e9,
        sustained_bw_fraction=1.0,
    ),
    "V3": AcceleratorConfig(
        name="V3",
        clock_hz=1066e6,
        pes_x=4,
        pes_y=1,
        pe_memory_bytes=2 * MIB,
        cores_per_pe=8,
        core_memory_bytes=8 * KIB,
        compute_lanes=32,
        instruction_memory_entries=16384,
        parameter_memory_entries=8192,
        activation_memory_entries=1024,
        io_bandwidth_bytes_per_s=32e9,
        sustained_bw_fraction=0.85,
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> AcceleratorConfig:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown accelerator preset {name!r}; expected one of {PRESET_NAMES}") from None


def save_config(cfg: AcceleratorConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def load_config(path: str | Path) -> AcceleratorConfig:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: accelerator config must be a JSON object")
    return AcceleratorConfig.from_dict(data)
