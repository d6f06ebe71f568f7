import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamperloc.core import ConfigurationError, NumericError, Tensor
from tamperloc.dataforge.synth import procedural_corpus
from tamperloc.decoder import DecoderConfig
from tamperloc.model import TamperLocNet
from tamperloc.trainer import (
    OptimizerState, TrainConfig, TrainingDiverged, adamw_step, decays, lr_at, train, write_curve,
)

from oracles import adam_scalar

# plain-Python scalar Adam on f(t) = t**2 from t = 1, lr 0.1, 200 steps
ADAM_THETA_200 = -7.21798647770884e-06


def test_lr_examples():
    cfg = TrainConfig()
    assert lr_at(1500, cfg) == 1e-4
    assert lr_at(cfg.max_iters, cfg) == 0.0
    assert lr_at(750, cfg) == pytest.approx((0.01 + 0.99 / 2) * 1e-4, rel=1e-15)
    assert lr_at(0, cfg) == pytest.approx(1e-6, rel=1e-15)
    with pytest.raises(ValueError):
        lr_at(cfg.max_iters + 1, cfg)


def test_lr_continuous_at_warmup_and_non_increasing_after():
    cfg = TrainConfig.desk()
    assert abs(lr_at(cfg.warmup_iters - 1, cfg) - lr_at(cfg.warmup_iters, cfg)) < 0.011 * cfg.base_lr
    tail = [lr_at(t, cfg) for t in range(cfg.warmup_iters, cfg.max_iters + 1)]
    assert all(a >= b for a, b in zip(tail, tail[1:]))
    head = [lr_at(t, cfg) for t in range(cfg.warmup_iters + 1)]
    assert all(a < b for a, b in zip(head, head[1:]))


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(warmup_iters=10, max_iters=10)
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=0)


def _param(value, name="w"):
    return [(name, Tensor(np.array(value, dtype=np.float64), requires_grad=True))]


def test_zero_gradient_without_decay_leaves_params():
    named = _param([[1.0, -2.0]])
    named[0][1].grad = np.zeros((1, 2))
    adamw_step(named, OptimizerState(), 0.1, TrainConfig(weight_decay=0.0))
    np.testing.assert_array_equal(named[0][1].data, [[1.0, -2.0]])


def test_decoupled_decay_in_isolation():
    cfg = TrainConfig(weight_decay=0.05)
    named = _param([[2.0, -4.0]])
    bias = _param([3.0], "b")
    state = OptimizerState()
    for _ in range(5):
        named[0][1].grad = np.zeros((1, 2))
        bias[0][1].grad = np.zeros(1)
        adamw_step(named + bias, state, 0.1, cfg)
    np.testing.assert_allclose(named[0][1].data, np.array([[2.0, -4.0]]) * (1 - 0.1 * 0.05) ** 5, rtol=1e-15)
    assert bias[0][1].data[0] == 3.0  # 1-D parameters are exempt
    assert state.step == 5


def test_scalar_quadratic_matches_oracle():
    cfg = TrainConfig(weight_decay=0.0)
    named = _param([1.0])
    state = OptimizerState()
    for _ in range(200):
        named[0][1].grad = 2 * named[0][1].data
        adamw_step(named, state, 0.1, cfg)
    theta = named[0][1].data[0]
    assert abs(theta) < 1e-3
    assert theta == pytest.approx(ADAM_THETA_200, abs=1e-15)
    assert adam_scalar(1.0, lambda t: 2 * t, 200, 0.1) == pytest.approx(ADAM_THETA_200, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_one_step_descends_random_quadratic(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 4))
    q = a @ a.T + 0.1 * np.eye(4)
    b = rng.standard_normal(4)

    def f(x):
        return 0.5 * x @ q @ x - b @ x

    named = _param(rng.standard_normal((1, 4)))
    x0 = named[0][1].data[0].copy()
    named[0][1].grad = (q @ x0 - b)[None]
    adamw_step(named, OptimizerState(), 1e-4, TrainConfig(weight_decay=0.0))
    assert f(named[0][1].data[0]) <= f(x0)


def test_nonfinite_gradient_names_parameter_and_changes_nothing():
    named = _param([[1.0]]) + _param([[2.0]], "enc.bad")
    named[0][1].grad = np.ones((1, 1))
    named[1][1].grad = np.array([[np.nan]])
    with pytest.raises(NumericError, match="enc.bad"):
        adamw_step(named, OptimizerState(), 0.1, TrainConfig())
    assert named[0][1].data[0, 0] == 1.0


def test_clip_norm_bounds_update_direction():
    cfg = TrainConfig(weight_decay=0.0, clip_norm=1.0)
    named = _param([[0.0, 0.0]])
    named[0][1].grad = np.array([[300.0, 400.0]])
    state = adamw_step(named, OptimizerState(), 0.1, cfg)
    np.testing.assert_allclose(state.m["w"], [[0.1 * 0.6, 0.1 * 0.8]])


def test_decay_exemptions():
    net = TamperLocNet()
    for name, p in net.named_parameters():
        exempt = name.endswith(("bias", "gamma", "beta", ".ls"))
        assert decays(name, p) != exempt, name


def _tiny_data(n=4):
    corpus = procedural_corpus(n, 32, 2)
    return np.stack([s.image for s in corpus]), np.stack([s.mask for s in corpus])


def _tiny_cfg(**kw):
    return TrainConfig.desk(**{"max_iters": 6, "warmup_iters": 2, "batch_size": 2, "log_every": 2, **kw})


def _tiny_net():
    return TamperLocNet(dec_cfg=DecoderConfig.desk(ppm_bins=(1,)), seed=3)


def test_training_is_bit_reproducible(tmp_path):
    images, masks = _tiny_data()
    curves = []
    for k in range(2):
        result = train(_tiny_net(), images, masks, _tiny_cfg())
        write_curve(tmp_path / f"c{k}.csv", result.curve)
        curves.append((tmp_path / f"c{k}.csv").read_bytes())
    assert curves[0] == curves[1]
    assert curves[0].startswith(b"iter,lr,loss,f1\n")
    assert [row[0] for row in result.curve] == [0, 2, 4, 5]


def test_checkpoints_written_periodically(tmp_path):
    images, masks = _tiny_data()
    train(_tiny_net(), images, masks, _tiny_cfg(checkpoint_every=3), out_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["checkpoint_000003.bin", "checkpoint_000006.bin"]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_batch_indices():
    images, masks = _tiny_data()
    net = _tiny_net()
    net.decoder.head.classifier.weight.data[...] = np.inf
    with pytest.raises(TrainingDiverged, match="batch indices"):
        train(net, images, masks, _tiny_cfg())
