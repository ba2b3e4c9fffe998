import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgetpu_eval.accel_config import (
    KIB,
    MIB,
    PRESET_NAMES,
    AcceleratorConfig,
    EnergyCoefficients,
    cache_capacity,
    load_config,
    peak_tops,
    preset,
    save_config,
    total_core_memory,
    total_pe_memory,
)


def test_v1_values():
    v1 = preset("V1")
    assert v1.clock_hz == 800e6
    assert v1.io_bandwidth_bytes_per_s == 17e9
    assert (v1.pes_x, v1.pes_y, v1.cores_per_pe, v1.compute_lanes) == (4, 4, 4, 64)
    assert v1.pe_memory_bytes == 2 * MIB and v1.core_memory_bytes == 32 * KIB


def test_v3_values():
    v3 = preset("V3")
    assert (v3.pes_x, v3.pes_y) == (4, 1)
    assert v3.cores_per_pe == 8 and v3.compute_lanes == 32
    assert v3.core_memory_bytes == 8 * KIB
    assert v3.clock_hz == 1066e6 and v3.io_bandwidth_bytes_per_s == 32e9


def test_memory_entries():
    assert [preset(n).parameter_memory_entries for n in PRESET_NAMES] == [16384, 8192, 8192]
    assert {preset(n).instruction_memory_entries for n in PRESET_NAMES} == {16384}
    assert {preset(n).activation_memory_entries for n in PRESET_NAMES} == {1024}


@pytest.mark.parametrize("name,tops", [("V1", 26.2), ("V2", 8.73), ("V3", 8.73)])
def test_peak_tops(name, tops):
    assert peak_tops(preset(name)) == pytest.approx(tops, rel=0.01)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_macs_per_lane_inverted_from_tops(name):
    cfg = preset(name)
    table = {"V1": 26.2, "V2": 8.73, "V3": 8.73}[name] * 1e12
    m = table / (2 * cfg.total_pes * cfg.cores_per_pe * cfg.compute_lanes * cfg.clock_hz)
    assert round(m) == cfg.macs_per_lane == 4


def test_zero_macs_per_lane_gives_zero_tops():
    assert peak_tops(preset("V1").with_(macs_per_lane=0)) == 0


def test_total_memories():
    assert total_core_memory(preset("V1")) == 2 * MIB
    assert total_core_memory(preset("V2")) == 512 * KIB
    assert total_core_memory(preset("V3")) == 256 * KIB
    assert total_pe_memory(preset("V1")) == 32 * MIB


def test_cache_capacity():
    assert cache_capacity(preset("V1")) == 2 * MIB + 24 * MIB
    assert cache_capacity(preset("V1").with_(pe_cache_fraction=0.0)) == 2 * MIB


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown accelerator preset"):
        preset("V4")


@pytest.mark.parametrize("field,value", [
    ("pes_x", 0), ("compute_lanes", -1), ("sustained_bw_fraction", 0.0),
    ("sustained_bw_fraction", 1.5), ("clock_hz", 0), ("pe_cache_fraction", 2.0),
])
def test_invalid_fields(field, value):
    with pytest.raises(ValueError):
        preset("V2").with_(**{field: value})


def test_negative_energy_rejected():
    with pytest.raises(ValueError):
        EnergyCoefficients(pj_per_mac=-1)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_file_round_trip(tmp_path, name):
    cfg = preset(name)
    path = tmp_path / "a.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back == cfg
    for f in (peak_tops, total_core_memory, total_pe_memory, cache_capacity):
        assert f(back) == f(cfg)


@given(
    st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.integers(1, 128), st.integers(0, 8),
    st.floats(0.01, 1.0), st.floats(1e8, 2e9),
)
def test_dict_round_trip_property(px, py, cores, lanes, mpl, frac, clock):
    cfg = AcceleratorConfig("X", clock, px, py, MIB, cores, 4 * KIB, lanes, mpl, sustained_bw_fraction=frac)
    back = AcceleratorConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    assert peak_tops(back) == peak_tops(cfg) and cache_capacity(back) == cache_capacity(cfg)


def test_unknown_field_rejected():
    d = preset("V1").to_dict()
    d["turbo"] = True
    with pytest.raises(ValueError, match="turbo"):
        AcceleratorConfig.from_dict(d)
