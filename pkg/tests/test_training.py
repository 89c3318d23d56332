import json
import math

import numpy as np
import pytest

from hhn.config import HHNConfig, SynthSpec, TrainConfig
from hhn.errors import DimensionError, NumericError
from hhn.linalg import ParamTensor
from hhn.model import ModelState, init_state
from hhn.synth import generate_samples
from hhn.training import (
    adam_step,
    focal_loss,
    focal_loss_grad,
    head_backward,
    learning_rate,
    train_loop,
)


class TestFocalLoss:
    def test_perfect_positives_vanish(self):
        probs = np.full((3, 4), 1.0 - 1e-7)
        labels = np.ones((3, 4))
        assert focal_loss(probs, labels) == pytest.approx(0.0, abs=1e-12)

    def test_single_positive_at_half(self):
        assert focal_loss(np.array([[0.5]]), np.array([[1.0]])) == pytest.approx(
            0.17328679513998632, abs=1e-15
        )

    def test_clamp_keeps_loss_finite(self):
        loss = focal_loss(np.array([[1e-12]]), np.array([[1.0]]))
        assert math.isfinite(loss)
        assert loss == pytest.approx(16.118092427339352, abs=1e-9)

    def test_negatives_do_not_contribute(self):
        probs = np.array([[0.5, 0.123]])
        assert focal_loss(probs, np.array([[1.0, 0.0]])) == focal_loss(
            np.array([[0.5, 0.99]]), np.array([[1.0, 0.0]])
        )

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            probs = rng.uniform(1e-6, 1 - 1e-6, size=(4, 3))
            labels = rng.integers(0, 2, size=(4, 3))
            assert focal_loss(probs, labels) >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            focal_loss(np.ones((2, 2)), np.ones((2, 3)))

    def test_grad_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        probs = rng.uniform(0.1, 0.9, size=(3, 4))
        labels = rng.integers(0, 2, size=(3, 4)).astype(float)
        grad = focal_loss_grad(probs, labels)
        eps = 1e-6
        for i in range(3):
            for j in range(4):
                p_plus, p_minus = probs.copy(), probs.copy()
                p_plus[i, j] += eps
                p_minus[i, j] -= eps
                numeric = (focal_loss(p_plus, labels) - focal_loss(p_minus, labels)) / (2 * eps)
                assert grad[i, j] == pytest.approx(numeric, abs=1e-6)


class TestHeadBackward:
    def test_sigmoid_chain(self):
        rng = np.random.default_rng(2)
        probs = rng.uniform(0.05, 0.95, size=(2, 3))
        d_probs = rng.normal(size=(2, 3))
        out = head_backward(probs, d_probs, "multilabel_sigmoid")
        assert np.allclose(out, d_probs * probs * (1 - probs), atol=1e-15)

    def test_softmax_rows_orthogonal_to_ones(self):
        # softmax outputs live on the simplex, so logit gradients sum to zero
        rng = np.random.default_rng(3)
        raw = rng.normal(size=(2, 4))
        probs = np.exp(raw) / np.exp(raw).sum(axis=1, keepdims=True)
        out = head_backward(probs, rng.normal(size=(2, 4)), "singlelabel_softmax")
        assert np.allclose(out.sum(axis=1), 0.0, atol=1e-12)


def _scalar_state(value: float) -> ModelState:
    cfg = HHNConfig().validate()
    param = ParamTensor("w", np.array([[value]]))
    return ModelState(config=cfg, seq_dim=1, video_dim=1, params={"w": param})


class TestAdamStep:
    def test_zero_gradient_is_fixpoint(self):
        state = _scalar_state(1.5)
        state.params["w"].moment1[...] = 0.3
        state.params["w"].moment2[...] = 0.4
        adam_step(state, lr=0.1, t=1)
        assert state.params["w"].value[0, 0] == 1.5
        assert state.params["w"].moment1[0, 0] == pytest.approx(0.27)
        assert state.params["w"].moment2[0, 0] == pytest.approx(0.3996)

    def test_first_step_closed_form(self):
        state = _scalar_state(3.0)
        state.params["w"].grad[...] = 1.0
        adam_step(state, lr=0.01, t=1)
        # bias corrections cancel at t=1: delta = -lr * 1 / (1 + eps)
        assert state.params["w"].value[0, 0] == pytest.approx(3.0 - 0.01, abs=1e-9)
        assert state.params["w"].grad[0, 0] == 0.0

    def test_nonfinite_gradient_names_parameter(self):
        state = _scalar_state(0.0)
        state.params["w"].grad[...] = np.nan
        with pytest.raises(NumericError, match="'w'"):
            adam_step(state, lr=0.01, t=1)

    def test_moment2_stays_nonnegative(self):
        state = _scalar_state(0.0)
        rng = np.random.default_rng(4)
        for t in range(1, 20):
            state.params["w"].grad[...] = rng.normal()
            adam_step(state, lr=0.001, t=t)
            assert state.params["w"].moment2[0, 0] >= 0.0


class TestLearningRate:
    def test_breakpoint_table(self):
        cfg = TrainConfig(iterations=2000, warmup=100, learning_rate=0.001).validate()
        expected = [
            (0, 0.001 * 1 / 100),
            (49, 0.001 * 50 / 100),
            (99, 0.001),
            (100, 0.001),
            (349, 0.001),
            (350, 0.0001),
            (599, 0.0001),
            (600, 0.00001),
        ]
        for t, lr in expected:
            assert learning_rate(t, cfg) == pytest.approx(lr, rel=1e-12), f"t={t}"

    def test_zero_warmup_starts_at_base(self):
        cfg = TrainConfig(iterations=100, warmup=0, learning_rate=0.005).validate()
        assert learning_rate(0, cfg) == 0.005


def _tiny_dataset(n, mode="seq_only", seed=0, offset=0):
    spec = SynthSpec(
        n_samples=n,
        n_classes=2,
        seq_nodes=8,
        video_nodes=5,
        seq_dim=6,
        video_dim=8,
        mode=mode,
        noise_sigma=0.3,
        seed=seed,
        sample_offset=offset,
    )
    return generate_samples(spec)


def _tiny_model_cfg():
    return HHNConfig(
        n_layers=2,
        hidden_dim=8,
        hyperedge_size=3,
        hop=1,
        r_min=2,
        alpha=1.0,
        head="singlelabel_softmax",
        n_classes=2,
    ).validate()


class TestTrainLoop:
    def test_single_sample_loss_strictly_decreases(self):
        samples = _tiny_dataset(1, seed=3)
        tcfg = TrainConfig(
            iterations=50, warmup=0, batch_size=1, learning_rate=0.005, eval_every=50, seed=0
        ).validate()
        _, report = train_loop(samples, [], tcfg, _tiny_model_cfg())
        tail = report.loss_curve[10:]
        assert all(b < a for a, b in zip(tail, tail[1:]))

    def test_seed_determinism_bitwise(self):
        samples = _tiny_dataset(6)
        val = _tiny_dataset(4, offset=6)
        tcfg = TrainConfig(
            iterations=20, warmup=5, batch_size=4, learning_rate=0.005, eval_every=10, seed=9
        ).validate()
        _, r1 = train_loop(samples, val, tcfg, _tiny_model_cfg())
        _, r2 = train_loop(samples, val, tcfg, _tiny_model_cfg())
        assert json.dumps(r1.to_dict()) == json.dumps(r2.to_dict())

    def test_loss_halves_on_planted_task_five_seeds(self):
        samples = _tiny_dataset(12)
        for seed in range(5):
            tcfg = TrainConfig(
                iterations=60, warmup=5, batch_size=12, learning_rate=0.005, eval_every=30, seed=seed
            ).validate()
            _, report = train_loop(samples, [], tcfg, _tiny_model_cfg())
            assert report.loss_curve[-1] <= 0.5 * report.loss_curve[0], f"seed {seed}"

    def test_best_validation_checkpoint_retained(self):
        samples = _tiny_dataset(10)
        val = _tiny_dataset(6, offset=10)
        tcfg = TrainConfig(
            iterations=30, warmup=0, batch_size=5, learning_rate=0.005, eval_every=10, seed=1
        ).validate()
        state, report = train_loop(samples, val, tcfg, _tiny_model_cfg())
        assert 0.0 <= report.mean_ap <= 1.0
        assert len(report.loss_curve) == 30
        assert state.params["classifier_weight"].value.shape == (8, 2)
