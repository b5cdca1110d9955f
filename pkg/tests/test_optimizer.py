import numpy as np
import pytest

from cppruner import optimizer as opt
from cppruner.config import TrainConfig


def _scalar_adam_reference(grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook Adam recurrence on one parameter, written independently."""
    theta = 0.0
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        theta -= lr * mh / (np.sqrt(vh) + eps)
    return theta


def test_adam_matches_scalar_reference_bitwise():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=100)
    theta = np.zeros(1)
    state = opt.AdamState.fresh(1)
    for g in grads:
        opt.adam_step(theta, np.array([g]), state)
    assert theta[0] == _scalar_adam_reference(grads)


def test_adam_state_shapes_checked():
    state = opt.AdamState.fresh(3)
    with pytest.raises(ValueError):
        opt.adam_step(np.zeros(2), np.zeros(2), state)


def test_train_quadratic_converges():
    target = np.array([1.0, -2.0, 3.0])

    def objective(theta, it):
        diff = theta - target
        return float(diff @ diff), 2.0 * diff

    config = TrainConfig(iterations=5000, lr=1e-2, trace_every=100)
    theta, trace = opt.train(objective, np.zeros(3), config)
    assert float(np.sum((theta - target) ** 2)) < 1e-6
    # loss trace decreases after warmup
    losses = [l for _, l in trace]
    assert losses[-1] < losses[1]


def test_train_deterministic():
    def objective(theta, it):
        diff = theta - 1.0
        return float(diff @ diff), 2.0 * diff

    config = TrainConfig(iterations=200, trace_every=10)
    t1, tr1 = opt.train(objective, np.zeros(4), config)
    t2, tr2 = opt.train(objective, np.zeros(4), config)
    assert np.array_equal(t1, t2)
    assert tr1 == tr2


def test_train_zero_gradient_keeps_params():
    def objective(theta, it):
        return 0.0, np.zeros_like(theta)

    config = TrainConfig(iterations=10, trace_every=0)
    theta, _ = opt.train(objective, np.array([1.0, 2.0]), config)
    assert np.array_equal(theta, [1.0, 2.0])


def test_train_aborts_on_nonfinite_loss():
    def objective(theta, it):
        if it == 3:
            return float("nan"), np.zeros_like(theta)
        return 1.0, np.zeros_like(theta)

    config = TrainConfig(iterations=10, trace_every=0)
    with pytest.raises(opt.TrainingDiverged) as e:
        opt.train(objective, np.zeros(2), config)
    assert e.value.iteration == 3


def test_write_trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    opt.write_trace(path, [(0, 1.5), (10, 0.25)])
    assert path.read_text() == "0,1.5\n10,0.25\n"
    opt.write_trace(path, [(0, 1.5)], psnrs=[20.0])
    assert path.read_text() == "0,1.5,20\n"
