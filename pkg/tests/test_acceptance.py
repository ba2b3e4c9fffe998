"""Acceptance criteria, each at its stated tolerance. A summary line per criterion is
printed at the end of the pytest run."""
import time

import numpy as np
import pytest

from edgetpu_eval.accel_config import PRESET_NAMES, peak_tops, preset
from edgetpu_eval.analysis import pearson, spearman, swap_impact, trend_report
from edgetpu_eval.cli import run
from edgetpu_eval.cost_model import COLD, STEADY, estimate, estimate_rows
from edgetpu_eval.learned_model import GraphBatch, TrainConfig, init_model, loss_and_grads, predict, step_loss
from edgetpu_eval.learned_model.graphnet import forward_batch
from edgetpu_eval.nas_graph import OperationKind, canonical_hash, enumerate_cells, expand_network

from conftest import CRITERIA
from oracles import oracle_network_params, oracle_pearson, oracle_spearman
from strategies import adjacency, chain, op_names, random_cells

PRESETS = [preset(n) for n in PRESET_NAMES]
PARAMS_LOW = 227_274
PARAMS_STEP = 4_975_200
PARAMS_COUNTS = [210_673, 102_488, 44_272, 3_513, 38_003, 4_413, 15_041, 3_533, 1_209, 479]


def check(name, ok, detail):
    CRITERIA.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def full_space():
    t = time.perf_counter()
    cells = list(enumerate_cells())
    return cells, time.perf_counter() - t


@pytest.fixture(scope="module")
def full_params(full_space):
    return np.array([expand_network(c).total_params for c in full_space[0]])


@pytest.fixture(scope="module")
def sample_5000():
    return list(enumerate_cells(sample=5000, seed=0))


def test_c1_enumeration_exact(full_space):
    cells, secs = full_space
    unique = len({canonical_hash(c) for c in cells})
    check("C1 enumeration", len(cells) == unique == 423_624 and secs < 1800,
          f"{len(cells)} cells, {unique} unique hashes, {secs:.1f}s")


def test_c2_peak_tops():
    got = [peak_tops(cfg) for cfg in PRESETS]
    ok = all(abs(g - t) / t <= 0.01 for g, t in zip(got, (26.2, 8.73, 8.73)))
    check("C2 peak TOPS", ok, " / ".join(f"{g:.4f}" for g in got))


def test_c3_parameter_oracle(full_params):
    cells = random_cells(200, seed=123)
    mismatches = sum(expand_network(c).total_params != oracle_network_params(op_names(c), adjacency(c))
                     for c in cells)
    lo = int(full_params.min())
    ok = mismatches == 0 and abs(lo - PARAMS_LOW) / PARAMS_LOW <= 0.01
    check("C3 parameter oracle", ok,
          f"{len(cells) - mismatches}/{len(cells)} exact, min total_params {lo} vs {PARAMS_LOW}")
    assert lo == PARAMS_LOW


def test_parameter_histogram(full_params):
    edges = PARAMS_LOW + PARAMS_STEP * np.arange(11)
    counts, _ = np.histogram(full_params, bins=edges)
    check("Param histogram", list(counts) == PARAMS_COUNTS and full_params.max() == edges[-1],
          f"{counts.tolist()}, max {int(full_params.max())}")


def test_c4_gradient_check():
    t = time.perf_counter()
    model = init_model(0)
    rng = np.random.default_rng(1)
    for k in model.params:
        model.params[k] = model.params[k] + 0.1 * rng.standard_normal(model.params[k].shape)
    batch = GraphBatch.from_cells([chain("conv1x1")])
    target = np.array([-0.4])
    _, grads = loss_and_grads(model, batch, target)
    worst_by_group = {}
    h = 1e-5
    for k, v in model.params.items():
        flat = v.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = step_loss(forward_batch(model, batch), target)
            flat[i] = old - h
            lm = step_loss(forward_batch(model, batch), target)
            flat[i] = old
            fd = (lp - lm) / (2 * h)
            g = grads[k].reshape(-1)[i]
            worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), 1e-6))
        worst_by_group[k] = worst
    secs = time.perf_counter() - t
    worst = max(worst_by_group.values())
    check("C4 gradients", worst < 1e-4 and secs < 60,
          f"max rel err {worst:.2e} over {len(worst_by_group)} tensors, {secs:.1f}s")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_c5_surrogate_quality(name):
    t = time.perf_counter()
    cells = list(enumerate_cells(sample=10_000, seed=0))
    cfg = preset(name)
    y = np.array([estimate(expand_network(c), cfg).latency_s * 1e3 for c in cells])
    _, report = train(cells, y)
    secs = time.perf_counter() - t
    ok = report.spearman >= 0.95 and report.accuracy >= 0.90 and secs < 1800
    check(f"C5 surrogate {name}", ok,
          f"test Spearman {report.spearman:.4f}, 1-MAPE {report.accuracy:.4f}, "
          f"best epoch {report.best_epoch}, {secs:.0f}s")


def train(cells, y):
    from edgetpu_eval.learned_model import train as fit

    return fit(cells, y, TrainConfig(seed=0))


def test_c6a_conv3x3_trend(sample_5000):
    rows = list(estimate_rows(sample_5000, PRESETS))
    verdicts = {t.accel: t for t in trend_report(rows) if t.feature == "n_conv3x3"}
    means = {a: [round(g.mean_ms, 4) for g in t.groups] for a, t in verdicts.items()}
    ok = all(np.all(np.diff([g.mean_ms for g in t.groups]) > 0) for t in verdicts.values())
    check("C6a latency rises with conv3x3 count", ok and len(verdicts) == 3, str(means))


def test_c6b_conv1x1_to_conv3x3_swap(sample_5000):
    deltas = {}
    matched = {}
    for cfg in PRESETS:
        lat = {canonical_hash(c): estimate(expand_network(c), cfg).latency_s * 1e3 for c in sample_5000}
        m = swap_impact(sample_5000, lat, cfg.name)
        e = m[(OperationKind.CONV1X1, OperationKind.CONV3X3)]
        deltas[cfg.name] = e.mean_delta_ms
        matched[cfg.name] = e.count
    ok = all(d > 0 for d in deltas.values()) and all(c > 0 for c in matched.values())
    check("C6b conv1x1->conv3x3 swap", ok,
          ", ".join(f"{a} +{deltas[a]:.4f} ms over {matched[a]} matches" for a in deltas))


def test_c6c_streaming_and_crossover(sample_5000):
    t = time.perf_counter()
    nets = [expand_network(c) for c in sample_5000]
    params = np.array([n.total_params for n in nets])
    top = [n for n in nets if n.total_params >= np.quantile(params, 0.9)]
    cold = {cfg.name: np.mean([estimate(n, cfg, COLD).latency_s for n in top]) * 1e3 for cfg in PRESETS}
    streaming_ok = cold["V2"] < cold["V1"] and cold["V3"] < cold["V1"]

    steady = np.array([[estimate(n, cfg, STEADY).latency_s for cfg in PRESETS] for n in nets])
    v1_fastest = steady[:, 0] < steady[:, 1:].min(axis=1)
    band = (params >= 5e6) & (params <= 30e6)
    crossover_ok = band.any() and v1_fastest[band].all()
    secs = time.perf_counter() - t
    check("C6c streaming order and V1 range", streaming_ok and crossover_ok and secs < 600,
          f"cold top-decile ms {', '.join(f'{k} {v:.3f}' for k, v in cold.items())}; "
          f"V1 fastest on {v1_fastest[band].mean():.0%} of {band.sum()} cells in 5-30M params")


def test_c7_determinism(tmp_path):
    cells = tmp_path / "cells.ndjson"
    assert run(["generate", "--sample", "400", "--seed", "11", "--out", str(cells)]) == 0
    outputs = []
    for k in range(2):
        res = tmp_path / f"r{k}.csv"
        model = tmp_path / f"m{k}.json"
        assert run(["estimate", "--cells", str(cells), "--accel", "V1", "V2", "V3", "--out", str(res)]) == 0
        assert run(["train", "--cells", str(cells), "--results", str(res), "--accel", "V3",
                    "--epochs", "2", "--seed", "5", "--out", str(model)]) == 0
        outputs.append((res.read_bytes(), model.read_bytes(),
                        (tmp_path / f"m{k}.json.metrics.json").read_bytes()))
    check("C7 determinism", outputs[0] == outputs[1],
          f"results {len(outputs[0][0])} B, model {len(outputs[0][1])} B identical across runs")


def test_c8_correlation_oracle():
    rng = np.random.default_rng(8)
    worst = 0.0
    for k in range(1000):
        n = int(rng.integers(2, 200))
        xs = rng.standard_normal(n) if k % 2 else rng.integers(0, 10, n).astype(float)
        ys = rng.standard_normal(n) if k % 3 else rng.integers(0, 10, n).astype(float)
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            xs[0], ys[0] = 100.0, -100.0
        worst = max(worst, abs(spearman(xs, ys) - oracle_spearman(list(xs), list(ys))),
                    abs(pearson(xs, ys) - oracle_pearson(list(xs), list(ys))))
    check("C8 correlation oracle", worst <= 1e-12, f"max abs diff {worst:.1e} over 1000 vector pairs")


def test_c9_prediction_throughput():
    model = init_model(0)
    cells = list(enumerate_cells(sample=10_000, seed=3))
    predict(model, cells[:100])
    t = time.perf_counter()
    preds = predict(model, cells)
    secs = time.perf_counter() - t
    rate = len(cells) / secs
    check("C9 prediction throughput", rate >= 2000 and np.isfinite(preds).all(),
          f"{rate:,.0f} predictions/s single-threaded ({secs:.2f}s for 10k, encoding included)")
