import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgetpu_eval.learned_model import (
    Adam,
    GraphBatch,
    GraphFeatures,
    TrainConfig,
    decode_graph,
    encode_cell,
    forward,
    forward_batch,
    gn_block,
    init_model,
    load_model,
    loss_and_grads,
    model_from_dict,
    model_to_dict,
    predict,
    save_model,
    split_indices,
    split_sizes,
    step_loss,
    train,
)
from edgetpu_eval.learned_model.nn import layer_norm, mlp_forward
from edgetpu_eval.nas_graph import CellGraph, OperationKind, count_op_kinds, topological_reorder

from strategies import chain, random_cells, random_relabel, valid_cells

I, C3, C1, MP, O = (OperationKind.INPUT, OperationKind.CONV3X3, OperationKind.CONV1X1,
                    OperationKind.MAXPOOL3X3, OperationKind.OUTPUT)
IDENTITY = CellGraph([I, O], [[0, 1], [0, 0]])


def perturbed(model, seed=0, scale=0.1):
    rng = np.random.default_rng(seed)
    for k in model.params:
        model.params[k] = model.params[k] + scale * rng.standard_normal(model.params[k].shape)
    return model


# -- features -------------------------------------------------------------------


def test_identity_cell_features():
    f = encode_cell(IDENTITY)
    assert f.node_features.tolist() == [[1.0], [5.0]]
    assert f.edge_features.tolist() == [[1.0]]
    assert f.global_feature.tolist() == [1.0]
    assert (f.senders.tolist(), f.receivers.tolist()) == ([0], [1])


def test_op_codes():
    f = encode_cell(chain("conv3x3", "maxpool3x3", "conv1x1"))
    assert f.node_features[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_encoding_injective():
    cells = random_cells(300, seed=3)
    seen = {}
    for c in cells:
        f = encode_cell(c)
        k = (f.node_features.tobytes(), f.senders.tobytes(), f.receivers.tobytes())
        assert seen.setdefault(k, c) == c


def test_bad_edge_endpoint():
    with pytest.raises(ValueError):
        GraphFeatures(np.ones((2, 1)), np.array([0]), np.array([5]), np.ones((1, 1)), np.ones(1))


# -- layer norm / init -------------------------------------------------------------


@given(st.integers(0, 1000))
def test_layer_norm_normalizes(seed):
    x = np.random.default_rng(seed).standard_normal((5, 16)) * 10 + 3
    xhat, _ = layer_norm(x)
    assert np.allclose(xhat.mean(axis=1), 0, atol=1e-6)
    assert np.allclose(xhat.var(axis=1), 1, atol=1e-6)


def test_init_rule():
    m = init_model(3)
    for k, v in m.params.items():
        if k.endswith("/b") or k.endswith("ln_offset"):
            assert not v.any()
        elif k.endswith("ln_scale"):
            assert (v == 1).all()
        else:
            fan_in = v.shape[0]
            assert np.abs(v).max() <= 2.0 / np.sqrt(fan_in)
    assert m.params["core/edge/l0/w"].shape == (128, 16)
    assert m.params["output/w"].shape == (16, 1)


def test_init_std_over_seeds():
    stds = [init_model(s).params["core/edge/l1/w"].std() for s in range(100)]
    assert np.mean(stds) == pytest.approx(0.25, rel=0.2)


def test_init_deterministic():
    a, b = init_model(7), init_model(7)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


# -- gn block -----------------------------------------------------------------------


def reference_block(params, prefix, e, v, u, senders, receivers):
    """Loop-by-loop evaluation of the three update equations for one graph."""
    def mlp(name, x):
        return mlp_forward(params, f"{prefix}/{name}", x[None, :])[0][0]

    e_new = np.array([mlp("edge", np.concatenate([e[k], v[receivers[k]], v[senders[k]], u]))
                      for k in range(len(senders))]).reshape(len(senders), -1)
    v_new = []
    for i in range(len(v)):
        agg = sum((e_new[k] for k in range(len(senders)) if receivers[k] == i), np.zeros(e_new.shape[1] if len(e_new) else 16))
        v_new.append(mlp("node", np.concatenate([agg, v[i], u])))
    v_new = np.array(v_new)
    e_sum = e_new.sum(axis=0) if len(e_new) else np.zeros(16)
    u_new = mlp("global", np.concatenate([e_sum, v_new.sum(axis=0), u]))
    return e_new, v_new, u_new


def test_gn_block_matches_hand_trace():
    model = perturbed(init_model(0), seed=1)
    cells = [chain("conv3x3"), topological_reorder(chain("conv1x1", "maxpool3x3", "conv3x3"))]
    batch = GraphBatch.from_cells(cells)
    rng = np.random.default_rng(2)
    e = rng.standard_normal((len(batch.senders), 32))
    v = rng.standard_normal((len(batch.nodes), 32))
    u = rng.standard_normal((2, 32))
    (e2, v2, u2), _ = gn_block(model.params, "core", e, v, u, batch)
    off_v = off_e = 0
    for g, cell in enumerate(cells):
        ne, nv = cell.num_edges, cell.num_vertices
        s = batch.senders[off_e:off_e + ne] - off_v
        r = batch.receivers[off_e:off_e + ne] - off_v
        re, rv, ru = reference_block(model.params, "core", e[off_e:off_e + ne], v[off_v:off_v + nv], u[g], s, r)
        assert np.allclose(e2[off_e:off_e + ne], re, atol=1e-12)
        assert np.allclose(v2[off_v:off_v + nv], rv, atol=1e-12)
        assert np.allclose(u2[g], ru, atol=1e-12)
        off_e += ne
        off_v += nv


def test_gn_block_without_edges():
    model = perturbed(init_model(0), seed=4)
    feats = GraphFeatures(np.array([[1.0], [5.0]]), np.zeros(0, np.int64), np.zeros(0, np.int64),
                          np.zeros((0, 1)), np.ones(1))
    batch = GraphBatch.from_features([feats])
    rng = np.random.default_rng(0)
    v, u = rng.standard_normal((2, 32)), rng.standard_normal((1, 32))
    (e2, v2, u2), cache = gn_block(model.params, "core", np.zeros((0, 32)), v, u, batch)
    node_in = cache[1][0]
    assert e2.shape == (0, 16)
    assert not node_in[:, :16].any()


def test_gn_block_width_mismatch():
    model = init_model(0)
    batch = GraphBatch.from_cells([IDENTITY])
    with pytest.raises(ValueError):
        gn_block(model.params, "core", np.zeros((1, 32)), np.zeros((3, 32)), np.zeros((1, 32)), batch)


def test_node_permutation_equivariance():
    model = perturbed(init_model(0), seed=5)
    cell = chain("conv3x3", "conv1x1", "maxpool3x3")
    f = encode_cell(cell)
    perm = np.array([3, 0, 4, 1, 2])  # old index -> new index
    nodes = np.empty_like(f.node_features)
    nodes[perm] = f.node_features
    g = GraphFeatures(nodes, perm[f.senders], perm[f.receivers], f.edge_features, f.global_feature)
    b1, b2 = GraphBatch.from_features([f]), GraphBatch.from_features([g])
    rng = np.random.default_rng(0)
    e, v, u = rng.standard_normal((4, 32)), rng.standard_normal((5, 32)), rng.standard_normal((1, 32))
    vp = np.empty_like(v)
    vp[perm] = v
    (_, v1, u1), _ = gn_block(model.params, "core", e, v, u, b1)
    (_, v2, u2), _ = gn_block(model.params, "core", e, vp, u, b2)
    assert np.allclose(v2[perm], v1, atol=1e-12)
    assert np.allclose(u1, u2, atol=1e-12)


# -- forward ----------------------------------------------------------------------------


def test_forward_deterministic():
    m = perturbed(init_model(0))
    cell = chain("conv3x3", "conv1x1")
    assert forward(m, cell) == forward(m, cell)
    assert len(forward(m, cell)) == 7


def test_zero_steps_ignores_structure():
    m = perturbed(init_model(0, steps=0))
    preds = predict(m, random_cells(20, seed=1))
    assert np.all(preds == preds[0])


def test_forward_finite_fuzz():
    rng = np.random.default_rng(0)
    for k in range(50):
        m = perturbed(init_model(k), seed=k, scale=float(rng.uniform(0, 2)))
        preds = forward_batch(m, GraphBatch.from_cells(random_cells(20, seed=k)))
        assert np.isfinite(preds).all()


@settings(max_examples=40, deadline=None)
@given(valid_cells(), st.randoms(use_true_random=False))
def test_prediction_invariant_under_relabeling(cell, rnd):
    m = perturbed(init_model(1), seed=3)
    other = random_relabel(cell, np.random.default_rng(rnd.randint(0, 2**31)))
    assert predict(m, [cell])[0] == pytest.approx(predict(m, [other])[0], rel=1e-9)


def test_batched_matches_single():
    m = perturbed(init_model(0))
    cells = random_cells(10, seed=6)
    batched = predict(m, cells)
    single = [forward(m, c)[-1] for c in cells]
    assert np.allclose(batched, single, rtol=1e-12)


def test_decode_graph_shapes():
    m = init_model(0)
    batch = GraphBatch.from_cells([chain("conv3x3"), IDENTITY])
    e, v, u = decode_graph(m, batch)
    assert e.shape == (3, 16) and v.shape == (5, 16) and u.shape == (2, 16)


# -- loss and gradients -------------------------------------------------------------------


def test_loss_examples():
    assert step_loss(np.array([[2.0], [2.0]]), np.array([2.0])) == 0
    assert step_loss(np.array([[4.0], [2.0]]), np.array([3.0])) == 1.0


def test_gradient_matches_finite_differences():
    m = perturbed(init_model(0), seed=8)
    cell = chain("conv3x3")  # three vertices
    batch = GraphBatch.from_cells([cell])
    target = np.array([0.7])
    _, grads = loss_and_grads(m, batch, target)
    h = 1e-5
    worst = 0.0
    for k, v in m.params.items():
        flat = v.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = step_loss(forward_batch(m, batch), target)
            flat[i] = old - h
            lm = step_loss(forward_batch(m, batch), target)
            flat[i] = old
            fd = (lp - lm) / (2 * h)
            g = grads[k].reshape(-1)[i]
            worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), 1e-6))
    assert worst < 1e-4


def test_gradient_batched_zero_steps():
    m = perturbed(init_model(0, steps=0), seed=2)
    batch = GraphBatch.from_cells(random_cells(4, seed=2))
    t = np.array([0.1, -0.3, 1.0, 0.4])
    _, grads = loss_and_grads(m, batch, t)
    w = m.params["output/w"]
    w[3, 0] += 1e-6
    lp = step_loss(forward_batch(m, batch), t)
    w[3, 0] -= 2e-6
    lm = step_loss(forward_batch(m, batch), t)
    assert grads["output/w"][3, 0] == pytest.approx((lp - lm) / 2e-6, rel=1e-5)


def test_unused_paths_get_zero_gradient():
    m = perturbed(init_model(0), seed=9)
    # mask decoder output feature 5: the matching output weight sees only zeros
    m.params["decoder/global/ln_scale"][5] = 0.0
    m.params["decoder/global/ln_offset"][5] = 0.0
    _, grads = loss_and_grads(m, GraphBatch.from_cells(random_cells(8, seed=1)), np.zeros(8) + 0.5)
    assert grads["output/w"][5, 0] == 0.0
    assert grads["output/w"][4, 0] != 0.0
    for k, g in grads.items():
        if k.startswith("decoder/edge") or k.startswith("decoder/node"):
            assert not g.any()


def test_single_step_descends():
    m = perturbed(init_model(0), seed=10)
    batch = GraphBatch.from_cells(random_cells(16, seed=4))
    t = np.linspace(-1, 1, 16)
    before, grads = loss_and_grads(m, batch, t)
    for k in m.params:
        m.params[k] -= 1e-4 * grads[k]
    after, _ = loss_and_grads(m, batch, t)
    assert after < before


# -- training -------------------------------------------------------------------------------


def test_split_sizes_full_space():
    assert split_sizes(423_624, TrainConfig()) == (254_174, 84_725, 84_725)


def test_split_indices_partition():
    tr, va, te = split_indices(101, TrainConfig(seed=3))
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(101))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(train_fraction=0.5)
    with pytest.raises(ValueError):
        TrainConfig(target_transform="sqrt")


def toy_dataset():
    cells = random_cells(100, seed=17)
    return cells, np.array([1.0 + 0.5 * count_op_kinds(c)[C3] for c in cells])


def test_toy_dataset_is_learned():
    cells, y = toy_dataset()
    # layer norm makes every scalar node code look alike until the biases move, so the
    # 60-sample run needs many epochs
    _, report = train(cells, y, TrainConfig(epochs=800, seed=0, target_transform="identity"))
    assert report.split_sizes == (60, 20, 20)
    assert report.accuracy > 0.95


def test_training_deterministic():
    cells, y = toy_dataset()
    cfg = TrainConfig(epochs=2, seed=5)
    m1, r1 = train(cells, y, cfg)
    m2, r2 = train(cells, y, cfg)
    assert r1 == r2
    assert json.dumps(model_to_dict(m1)) == json.dumps(model_to_dict(m2))


def test_degenerate_targets():
    cells = random_cells(10, seed=1)
    with pytest.raises(ValueError, match="variance"):
        train(cells, np.ones(10), TrainConfig(epochs=1))
    with pytest.raises(ValueError, match="NaN"):
        train(cells, np.r_[np.ones(9), np.nan], TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(cells, np.r_[np.ones(9), -1.0], TrainConfig(epochs=1))


def test_identity_transform_trains():
    cells, y = toy_dataset()
    m, report = train(cells, y, TrainConfig(epochs=2, target_transform="identity"))
    assert m.target_transform == "identity" and np.isfinite(report.rmse)


def test_adam_first_step_is_lr_sized():
    p = {"x": np.array([1.0, -2.0])}
    Adam(0.1).step(p, {"x": np.array([3.0, -0.5])})
    assert np.allclose(p["x"], [0.9, -1.9])


# -- checkpoint --------------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    m = perturbed(init_model(4), seed=4)
    m.target_mean, m.target_std, m.train_config = 0.123456789, 1.987654321, TrainConfig().to_dict()
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert set(back.params) == set(m.params)
    for k in m.params:
        assert back.params[k].shape == m.params[k].shape
        assert back.params[k].tobytes() == m.params[k].tobytes()
    assert (back.target_mean, back.target_std, back.train_config) == (m.target_mean, m.target_std, m.train_config)
    cells = random_cells(5, seed=0)
    assert predict(back, cells).tobytes() == predict(m, cells).tobytes()


def test_bad_checkpoint(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ValueError, match="malformed"):
        load_model(path)
    d = model_to_dict(init_model(0))
    d["params"]["output/w"]["shape"] = [3, 3]
    with pytest.raises(ValueError, match="output/w"):
        model_from_dict(d)
