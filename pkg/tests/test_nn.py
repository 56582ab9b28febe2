import numpy as np
import pytest

from topoprobe.data import LabeledDataset
from topoprobe.nn import (
    NeuralNet,
    TrainConfig,
    architecture,
    ensemble_train,
    load_model,
    nn_init,
    nn_train,
    save_model,
)
from topoprobe.rng import BlockRng

SMALL = {
    "input": {"kind": "image", "channels": 2, "size": 4},
    "layers": [
        {"type": "conv", "filters": 3, "kernel": 3},
        {"type": "relu"},
        {"type": "conv", "filters": 2, "kernel": 2},
        {"type": "relu"},
        {"type": "flatten"},
        {"type": "dense", "units": 7},
        {"type": "relu"},
        {"type": "dropout", "rate": 0.3},
        {"type": "dense", "units": 1},
    ],
    "label_range": [0.0, 1.0],
}


def test_stabilizer_parameter_count():
    net = nn_init(architecture("stabilizer", (0.0, 1.0), input_dim=4), 0)
    assert net.param_count() == 541  # 4*20+20 + 20*20+20 + 20*1+1


def test_init_determinism():
    a = nn_init(SMALL, 5)
    b = nn_init(SMALL, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a.parameters(), b.parameters()))
    c = nn_init(SMALL, 6)
    assert any(not np.array_equal(x, y) for x, y in zip(a.parameters(), c.parameters()))


def test_zeroed_net_returns_descaled_bias():
    desc = dict(architecture("stabilizer", (0.5, 2.5), input_dim=3))
    net = nn_init(desc, 1)
    net.set_parameters([np.zeros_like(p) for p in net.parameters()])
    net.layers[-1].b[:] = 0.25
    x = BlockRng(1).uniforms((5, 3))
    assert np.allclose(net.predict(x), 0.5 + 0.25 * 2.0)


def test_label_scaling_round_trip():
    net = nn_init(architecture("stabilizer", (0.0, 5.0), input_dim=3), 0)
    grid = np.linspace(0.0, 5.0, 50)
    assert np.allclose(net.descale(net.scale_labels(grid)), grid, atol=1e-12)


def test_translation_invariance_with_global_pooling():
    desc = {
        "input": {"kind": "image", "channels": 2, "size": 5},
        "layers": [
            {"type": "conv", "filters": 4, "kernel": 3},
            {"type": "relu"},
            {"type": "gap"},
            {"type": "dense", "units": 1},
        ],
        "label_range": [0.0, 1.0],
    }
    net = nn_init(desc, 2)
    x = BlockRng(3).uniforms((6, 2, 5, 5)) * 2 - 1
    shifted = np.roll(np.roll(x, 2, axis=2), 1, axis=3)
    assert np.allclose(net.predict(x), net.predict(shifted), atol=1e-10)


def test_forward_matches_naive_reimplementation():
    net = nn_init(SMALL, 9)
    rng = BlockRng(4)
    x = rng.uniforms((3, 2, 4, 4)) * 2 - 1
    # straight-line recomputation with explicit loops
    conv1, _, conv2, _, _, dense1, _, _, dense2 = net.layers
    n = 4

    def conv_naive(inp, layer):
        co, ci, k, _ = layer.w.shape
        out = np.zeros((inp.shape[0], co, n, n))
        for b in range(inp.shape[0]):
            for o in range(co):
                for y in range(n):
                    for xx in range(n):
                        acc = layer.b[o]
                        for c in range(ci):
                            for dy in range(k):
                                for dx in range(k):
                                    acc += layer.w[o, c, dy, dx] * inp[b, c, (y + dy) % n, (xx + dx) % n]
                        out[b, o, y, xx] = acc
        return out

    h = np.maximum(conv_naive(x, conv1), 0.0)
    h = np.maximum(conv_naive(h, conv2), 0.0)
    h = h.reshape(3, -1)
    h = np.maximum(h @ dense1.w + dense1.b, 0.0)
    expected = (h @ dense2.w + dense2.b)[:, 0]
    got = net.predict_scaled(x)
    assert np.allclose(got, expected, atol=1e-10)


def test_gradients_match_finite_differences():
    net = nn_init(SMALL, 3)
    rng = BlockRng(7)
    x = rng.uniforms((5, 2, 4, 4)) * 2 - 1
    y = rng.uniforms(5)
    masks = net.draw_dropout_masks(rng, 5)
    _, grads = net.loss_and_grads(x, y, masks)
    params = net.parameters()
    probe = np.random.default_rng(1)
    eps = 1e-5
    for _ in range(30):
        pi = int(probe.integers(len(params)))
        idx = tuple(probe.integers(s) for s in params[pi].shape)
        orig = params[pi][idx]
        params[pi][idx] = orig + eps
        lp, _ = net.loss_and_grads(x, y, masks)
        params[pi][idx] = orig - eps
        lm, _ = net.loss_and_grads(x, y, masks)
        params[pi][idx] = orig
        fd = (lp - lm) / (2 * eps)
        assert abs(grads[pi][idx] - fd) / max(1e-6, abs(grads[pi][idx]), abs(fd)) < 1e-4


def _feature_dataset(count, dim, seed, label_fn):
    rng = BlockRng(seed)
    values = rng.uniforms((count, dim)) * 2 - 1
    labels = label_fn(values)
    return LabeledDataset(labels, values, "features", 2)


def test_constant_label_training():
    ds = _feature_dataset(512, 4, 11, lambda v: np.full(v.shape[0], 0.7))
    desc = architecture("stabilizer", (0.0, 1.0), input_dim=4)
    net, history = nn_train(ds, nn_init(desc, 0), TrainConfig(epochs=30, seed=0))
    assert history[-1]["train_loss"] <= history[0]["train_loss"]
    holdout = BlockRng(99).uniforms((64, 4)) * 2 - 1
    assert np.allclose(net.predict(holdout), 0.7, atol=0.01)


def test_two_cluster_separable_dataset():
    # all-up spin images map to 5, random images map to 0
    rng = BlockRng(5)
    n = 4
    ups = np.ones((150, 2 * n * n), dtype=np.int8)
    randoms = np.where(rng.uniforms((150, 2 * n * n)) < 0.5, -1, 1).astype(np.int8)
    values = np.vstack([ups, randoms])
    labels = np.array([5.0] * 150 + [0.0] * 150)
    ds = LabeledDataset(labels, values, "spin", n, basis="z")
    desc = {
        "input": {"kind": "image", "channels": 2, "size": n},
        "layers": [
            {"type": "conv", "filters": 4, "kernel": 3},
            {"type": "relu"},
            {"type": "gap"},
            {"type": "dense", "units": 8},
            {"type": "relu"},
            {"type": "dense", "units": 1},
        ],
        "label_range": [0.0, 5.0],
    }
    net, _ = nn_train(ds, nn_init(desc, 1), TrainConfig(epochs=60, seed=1))
    held_ups = np.ones((40, 2 * n * n), dtype=np.int8)
    held_rand = np.where(BlockRng(77).uniforms((40, 2 * n * n)) < 0.5, -1, 1).astype(np.int8)
    held = LabeledDataset(
        np.array([5.0] * 40 + [0.0] * 40),
        np.vstack([held_ups, held_rand]), "spin", n, basis="z",
    )
    preds = net.predict_dataset(held)
    mse = float(np.mean((preds - held.labels) ** 2)) / 25.0  # scaled units
    assert mse < 0.05


def test_training_determinism_and_history():
    ds = _feature_dataset(300, 4, 3, lambda v: (v[:, 0] + 1) / 2)
    desc = architecture("stabilizer", (0.0, 1.0), input_dim=4)
    cfg = TrainConfig(epochs=4, seed=8, validation_fraction=0.2)
    n1, h1 = nn_train(ds, nn_init(desc, 8), cfg)
    n2, h2 = nn_train(ds, nn_init(desc, 8), cfg)
    assert all(np.array_equal(a, b) for a, b in zip(n1.parameters(), n2.parameters()))
    assert h1 == h2
    assert all("val_loss" in e for e in h1)
    assert h1[-1]["train_loss"] <= h1[0]["train_loss"]


def test_divergence_aborts():
    ds = _feature_dataset(128, 4, 3, lambda v: v[:, 0])
    desc = architecture("stabilizer", (0.0, 1.0), input_dim=4)
    with pytest.raises(RuntimeError, match="diverged"):
        nn_train(ds, nn_init(desc, 0), TrainConfig(step_size=1e12, epochs=3, seed=0))


def test_ensemble_spread_rules():
    ds = _feature_dataset(200, 4, 2, lambda v: (v[:, 0] + 1) / 2)
    desc = architecture("stabilizer", (0.0, 1.0), input_dim=4)
    cfg = TrainConfig(epochs=2, seed=0)
    single = ensemble_train(ds, desc, cfg, [7])
    assert len(single) == 1
    same = ensemble_train(ds, desc, cfg, [7, 7, 7])
    p0 = same[0].parameters()
    assert all(
        all(np.array_equal(a, b) for a, b in zip(p0, member.parameters()))
        for member in same
    )
    pooled = ensemble_train(ds, desc, cfg, [7, 8], pool_threads=2)
    assert all(np.array_equal(a, b) for a, b in zip(pooled[0].parameters(), p0))


def test_model_file_round_trip(tmp_path):
    ds = _feature_dataset(64, 4, 1, lambda v: (v[:, 1] + 1) / 2)
    desc = architecture("stabilizer", (0.0, 1.0), input_dim=4)
    net, _ = nn_train(ds, nn_init(desc, 2), TrainConfig(epochs=1, seed=2))
    path = tmp_path / "model.tprb"
    save_model(net, path)
    loaded = load_model(path)
    x = BlockRng(1).uniforms((10, 4))
    assert np.array_equal(loaded.predict(x), net.predict(x))
    assert loaded.descriptor == net.descriptor
    with pytest.raises(ValueError):
        load_model(__file__)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=1.0)
    with pytest.raises(ValueError):
        NeuralNet({"input": {"kind": "vector", "dim": 3},
                   "layers": [{"type": "dense", "units": 2}],
                   "label_range": [0.0, 1.0]}, 0)
