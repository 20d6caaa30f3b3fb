"""Losses, synthetic datasets, SGD training, checkpoints."""

import numpy as np
import pytest

from gspline.errors import DivergenceDetected, ShapeMismatch
from gspline.learning import (
    batch_loss,
    classification_accuracy,
    detection_fraction,
    load_checkpoint,
    loss_eval,
    make_synthetic_dataset,
    predict_maps,
    save_checkpoint,
    sgd_train,
)
from gspline.network import Network

TINY_CLS = {
    "input": {"channels": 1},
    "layers": [
        {"type": "lift", "out_channels": 2, "size": 3, "n_h": 4},
        {"type": "relu"},
        {"type": "project", "mode": "mean"},
        {"type": "maxpool", "factor": 22},
        {"type": "conv1x1", "out_channels": 2},
        {"type": "bias"},
        {"type": "softmax"},
    ],
}


class TestLossEval:
    def test_softmax_ce_uniform_logits(self):
        loss, grad = loss_eval(np.zeros((4, 2)), np.array([0, 1, 0, 1]), "softmax_ce")
        assert loss == pytest.approx(np.log(2.0))
        # gradient is (p - onehot)/n
        assert grad[0, 0] == pytest.approx((0.5 - 1.0) / 4)
        assert grad[0, 1] == pytest.approx(0.5 / 4)

    def test_softmax_ce_gradient_matches_fd(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(3, 5))
        labels = rng.integers(0, 5, size=3)
        _, grad = loss_eval(logits, labels, "softmax_ce")
        eps = 1e-6
        for pos in [(0, 0), (1, 3), (2, 4)]:
            lp = logits.copy()
            lp[pos] += eps
            up, _ = loss_eval(lp, labels, "softmax_ce")
            lp[pos] -= 2 * eps
            dn, _ = loss_eval(lp, labels, "softmax_ce")
            assert grad[pos] == pytest.approx((up - dn) / (2 * eps), abs=1e-8)

    def test_sigmoid_bce_values(self):
        loss, _ = loss_eval(np.zeros(5), np.full(5, 0.5), "sigmoid_bce")
        assert loss == pytest.approx(np.log(2.0))
        # extreme logits must not overflow
        loss, grad = loss_eval(np.array([500.0, -500.0]), np.array([1.0, 0.0]), "sigmoid_bce")
        assert np.isfinite(loss) and loss == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.isfinite(grad))

    def test_sigmoid_bce_gradient_matches_fd(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(2, 3))
        target = rng.uniform(size=(2, 3))
        _, grad = loss_eval(logits, target, "sigmoid_bce")
        eps = 1e-6
        lp = logits.copy()
        lp[1, 2] += eps
        up, _ = loss_eval(lp, target, "sigmoid_bce")
        lp[1, 2] -= 2 * eps
        dn, _ = loss_eval(lp, target, "sigmoid_bce")
        assert grad[1, 2] == pytest.approx((up - dn) / (2 * eps), abs=1e-8)

    def test_shape_and_kind_errors(self):
        with pytest.raises(ShapeMismatch):
            loss_eval(np.zeros((3, 2)), np.zeros(4, dtype=int), "softmax_ce")
        with pytest.raises(ShapeMismatch):
            loss_eval(np.zeros((3, 2)), np.zeros((3, 3)), "sigmoid_bce")
        with pytest.raises(ValueError):
            loss_eval(np.zeros(2), np.zeros(2), "hinge")


class TestDatasets:
    def test_rot_patterns_shapes_and_balance(self):
        train, test = make_synthetic_dataset("rot_patterns", 40, 20, seed=3)
        assert train.inputs.shape == (40, 1, 24, 24)
        assert test.inputs.shape == (20, 1, 24, 24)
        assert set(np.unique(train.targets)) == {0, 1}
        assert abs(train.targets.mean() - 0.5) <= 0.05

    def test_scale_blobs_shapes(self):
        train, test = make_synthetic_dataset("scale_blobs", 10, 5, seed=3)
        assert train.inputs.shape == (10, 1, 32, 32)
        assert train.targets.shape == (10, 1, 32, 32)
        assert test.inputs.shape == (5, 1, 32, 32)

    def test_determinism(self):
        a, _ = make_synthetic_dataset("rot_patterns", 8, 4, seed=5)
        b, _ = make_synthetic_dataset("rot_patterns", 8, 4, seed=5)
        c, _ = make_synthetic_dataset("rot_patterns", 8, 4, seed=6)
        assert np.array_equal(a.inputs, b.inputs)
        assert not np.array_equal(a.inputs, c.inputs)

    def test_train_test_independent_noise(self):
        train, test = make_synthetic_dataset("rot_patterns", 8, 8, seed=5)
        assert not np.array_equal(train.inputs, test.inputs)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            make_synthetic_dataset("rot_patterns", 0, 4)
        with pytest.raises(ValueError):
            make_synthetic_dataset("mystery_task", 4, 4)

    def test_rot_patterns_linearly_nontrivial(self):
        # a least-squares probe on raw pixels picks up some signal within
        # the training arcs; the task is easy enough that even this crude
        # oracle clears chance
        train, _ = make_synthetic_dataset("rot_patterns", 400, 10, seed=0)
        x = train.inputs.reshape(len(train), -1)
        x = np.concatenate([x, np.ones((len(x), 1))], axis=1)
        y = 2.0 * train.targets - 1.0
        w, *_ = np.linalg.lstsq(x[:300], y[:300], rcond=1e-6)
        acc = np.mean(np.sign(x[300:] @ w) == y[300:])
        assert acc > 0.6


class TestTraining:
    def test_zero_lr_keeps_parameters(self):
        train, _ = make_synthetic_dataset("rot_patterns", 8, 4, seed=0)
        net = Network(TINY_CLS, seed=0)
        before = net.get_flat().copy()
        _, losses = sgd_train(net, train, lr=0.0, epochs=1, batch=4, seed=0)
        assert np.array_equal(net.get_flat(), before)
        assert len(losses) == 1 and np.isfinite(losses[0])

    def test_negative_lr_rejected(self):
        train, _ = make_synthetic_dataset("rot_patterns", 4, 4, seed=0)
        with pytest.raises(ValueError):
            sgd_train(TINY_CLS, train, lr=-0.1, epochs=1)

    def test_divergence_detected(self):
        train, _ = make_synthetic_dataset("rot_patterns", 8, 4, seed=0)
        net = Network(TINY_CLS, seed=0)
        net.set_flat(net.get_flat() * np.nan)
        with pytest.raises(DivergenceDetected):
            sgd_train(net, train, lr=0.1, epochs=1, batch=4, seed=0)

    def test_determinism(self):
        train, _ = make_synthetic_dataset("rot_patterns", 16, 4, seed=0)
        n1, l1 = sgd_train(TINY_CLS, train, lr=0.05, epochs=2, batch=8, seed=4)
        n2, l2 = sgd_train(TINY_CLS, train, lr=0.05, epochs=2, batch=8, seed=4)
        assert l1 == l2
        assert np.array_equal(n1.get_flat(), n2.get_flat())

    def test_overfits_single_sample(self):
        train, _ = make_synthetic_dataset("rot_patterns", 2, 2, seed=1)
        from gspline.learning import SyntheticDataset

        one = SyntheticDataset(train.inputs[:1], train.targets[:1], 1, "rot_patterns")
        net, losses = sgd_train(TINY_CLS, one, lr=0.5, epochs=200, batch=1, seed=0)
        assert losses[-1] < 0.01
        assert classification_accuracy(net, one) == 1.0

    def test_batch_loss_strips_softmax(self):
        train, _ = make_synthetic_dataset("rot_patterns", 4, 4, seed=0)
        net = Network(TINY_CLS, seed=0)
        loss, grads, _ = batch_loss(net, train.inputs, train.targets)
        assert grads.layers[-1] == {}
        # loss at init should be near chance level
        assert loss == pytest.approx(np.log(2.0), abs=0.5)


class TestMetrics:
    def test_detection_fraction(self):
        t = np.zeros((2, 1, 9, 9))
        t[0, 0, 4, 4] = 1.0
        t[1, 0, 2, 2] = 1.0
        p = np.zeros((2, 1, 9, 9))
        p[0, 0, 5, 5] = 1.0  # within radius 3
        p[1, 0, 8, 8] = 1.0  # too far
        assert detection_fraction(p, t) == 0.5

    def test_predict_maps_matches_forward(self):
        cfg = {
            "input": {"channels": 1},
            "layers": [
                {"type": "lift", "out_channels": 1, "size": 3, "n_h": 2, "padding": "zero"},
                {"type": "project", "mode": "mean"},
                {"type": "sigmoid"},
            ],
        }
        net = Network(cfg, seed=0)
        x = np.random.default_rng(2).normal(size=(5, 1, 8, 8))
        direct, _ = net.forward(x)
        assert np.array_equal(predict_maps(net, x, batch=2), direct)


class TestCheckpoints:
    def test_roundtrip(self, tmp_path):
        net = Network(TINY_CLS, seed=0)
        flat = np.random.default_rng(3).normal(size=net.get_flat().shape)
        net.set_flat(flat)
        path = tmp_path / "ckpt.gst"
        save_checkpoint(path, net)
        other = Network(TINY_CLS, seed=9)
        load_checkpoint(path, other)
        assert np.allclose(other.get_flat(), flat)

    def test_shape_mismatch(self, tmp_path):
        net = Network(TINY_CLS, seed=0)
        path = tmp_path / "ckpt.gst"
        save_checkpoint(path, net)
        other_cfg = dict(TINY_CLS, layers=TINY_CLS["layers"][:-2])
        with pytest.raises(ShapeMismatch):
            load_checkpoint(path, Network(other_cfg, seed=0))
