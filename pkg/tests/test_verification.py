import numpy as np
import pytest

from cppruner import neural_field as nf
from cppruner import verification as V
from cppruner.config import TrainConfig
from cppruner.rng import RngStream


def _field(seed=0):
    return nf.init_params(TrainConfig(order=3, rank=3, layers=2, width=6,
                                      fourier_m=3, activation="sine", seed=seed))


def test_theorem1_clean_pass():
    rep = V.check_theorem1(30, seed=2)
    assert rep.ok
    assert rep.worst <= 1e-9
    assert rep.details["index_sets_checked"] > 0
    assert "PASS" in rep.summary()


def test_theorem1_deterministic():
    a = V.check_theorem1(10, seed=5)
    b = V.check_theorem1(10, seed=5)
    assert a.worst == b.worst


def test_jacobian_fd_on_known_function():
    f = lambda b: (b[:, 0] ** 2 + 3.0 * b[:, 1] - np.sin(b[:, 2]))
    x = np.array([0.4, 0.7, 0.2])
    g = V.jacobian_fd(f, x)
    assert np.allclose(g, [0.8, 3.0, -np.cos(0.2)], atol=1e-8)


def test_norm_chain_bounds_ordering():
    m = np.random.default_rng(0).normal(size=(3, 5))
    spec, fro, upper = V.norm_chain_bounds(m)
    assert spec <= fro + 1e-12
    assert fro <= upper + 1e-12


def test_check_norm_chain_scalar_field():
    params = _field(1)
    pts = RngStream(1, "pts").uniform(9).reshape(3, 3)
    rep = V.check_norm_chain(params, pts)
    assert rep.ok


def test_hutchinson_check_accuracy():
    params = _field(2)
    eval_fn = lambda b: nf.field_values(params, b)
    x = RngStream(2, "x").uniform(3)
    rep = V.check_hutchinson(eval_fn, x, 1e-3, 50000, seed=3)
    assert rep.ok
    assert rep.details["reference"] > 0


def test_hutchinson_slope_near_monte_carlo_rate():
    params = _field(3)
    eval_fn = lambda b: nf.field_values(params, b)
    x = RngStream(3, "x").uniform(3)
    slope = V.hutchinson_error_slope(eval_fn, x, 1e-3,
                                     [100, 316, 1000, 3162, 10000],
                                     trials=20, seed=4)
    assert -0.65 < slope < -0.35


def test_check_gradients_passes():
    rep = V.check_gradients(5, seed=6)
    assert rep.ok
    assert rep.worst < 1e-5


def test_relative_grad_error_detects_corruption():
    g = np.linspace(1, 2, 10)
    assert V.relative_grad_error(g, g) == 0.0
    bad = g.copy()
    bad[4] *= 1.001  # a 0.1% error must be visible at the 1e-5 level
    assert V.relative_grad_error(bad, g) > 1e-4


def test_fd_grad_helper():
    fn = lambda th: float(th @ th)
    theta = np.array([1.0, -2.0, 0.5])
    assert np.allclose(V._fd_grad(fn, theta), 2 * theta, atol=1e-8)
