"""Regularizers: variational Schatten-p quasi-norm, Hutchinson smoothness,
and the sparse-noise soft-thresholding operator, each with exact gradients."""

from dataclasses import dataclass

import numpy as np

from . import neural_field
from .tensor_core import FactorMatrices

EPSILON_FLOOR = 1e-12


@dataclass
class RegWeights:
    lambda_vsp: float = 1e-4
    p: float = 0.1
    lambda_j: float = 0.01
    kappa: float = 1.0
    hutchinson_samples: int = 1
    epsilon_floor: float = EPSILON_FLOOR

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.lambda_vsp < 0 or self.lambda_j < 0 or self.hutchinson_samples < 1:
            raise ValueError("invalid regularizer weights")

    @classmethod
    def from_config(cls, config):
        return cls(
            lambda_vsp=config.lambda_vsp,
            p=config.p,
            lambda_j=config.lambda_j,
            kappa=config.kappa,
            hutchinson_samples=config.hutch_samples,
            epsilon_floor=config.epsilon_floor,
        )


def vsp_norm(factors: FactorMatrices, p: float, epsilon_floor: float = EPSILON_FLOOR):
    """(1/D) sum_r sum_d ||u_r^(d)||^q with q = p*D, plus per-factor gradients.

    The gradient of ||u||^q is smoothed as q (||u||^2 + eps)^((q-2)/2) u so
    pruned (zero-norm) rows stay finite when q < 2.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must be in (0, 1], got {p}")
    ndim = factors.order
    q = p * ndim
    value = 0.0
    grads = []
    for f in factors.factors:
        norms2 = (f * f).sum(axis=1)
        value += float(np.sum(norms2 ** (q / 2.0)))
        grads.append((q / ndim) * ((norms2 + epsilon_floor) ** ((q - 2.0) / 2.0))[:, None] * f)
    return value / ndim, grads


def vsp_middle_term(factors: FactorMatrices, p: float) -> float:
    """sum_r (prod_d ||u_r^(d)||^q)^(1/D); the middle link of the norm chain."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must be in (0, 1], got {p}")
    ndim = factors.order
    q = p * ndim
    prod = np.ones(factors.rank)
    for f in factors.factors:
        prod = prod * np.sqrt((f * f).sum(axis=1)) ** q
    return float(np.sum(prod ** (1.0 / ndim)))


def soft_threshold(t: np.ndarray, tau: float) -> np.ndarray:
    """Element-wise sgn(x) * max(|x| - tau, 0)."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    t = np.asarray(t, dtype=np.float64)
    return np.sign(t) * np.maximum(np.abs(t) - tau, 0.0)


def _draw_perturbations(pts, kappa, n_samples, rng, kappa_scale, fixed_direction):
    npts, ndim = pts.shape
    if fixed_direction is not None:
        eps = np.zeros((npts, n_samples, ndim))
        eps[:, :, fixed_direction] = kappa
    else:
        eps = kappa * rng.normal(npts * n_samples * ndim).reshape(npts, n_samples, ndim)
    if kappa_scale is not None:
        eps = eps * np.asarray(kappa_scale, dtype=np.float64)[None, None, :]
    return eps


def hutchinson_value(eval_fn, pts, kappa, n_samples, rng=None, kappa_scale=None,
                     fixed_direction=None, frozen_eps=None) -> float:
    """Monte-Carlo estimate of the mean squared Jacobian norm over pts.

    Average of ||f(x + eps) - f(x)||^2 / kappa^2 with eps ~ N(0, kappa^2 I).
    ``eval_fn`` maps an (n, D) batch to n values.  ``fixed_direction`` pins
    eps to kappa times a coordinate axis (the differential-TV degeneration).
    """
    pts = np.asarray(pts, dtype=np.float64)
    if frozen_eps is None:
        frozen_eps = _draw_perturbations(pts, kappa, n_samples, rng, kappa_scale,
                                         fixed_direction)
    npts, n_samples, ndim = frozen_eps.shape
    base = eval_fn(pts)
    shifted = eval_fn((pts[:, None, :] + frozen_eps).reshape(-1, ndim)).reshape(npts, n_samples)
    diff = shifted - base[:, None]
    return float(np.mean(diff ** 2) / (kappa * kappa))


def hutchinson_smoothness(params, pts, kappa, n_samples, rng=None, kappa_scale=None,
                          fixed_direction=None, frozen_eps=None):
    """Hutchinson smoothness penalty with gradients through both evaluations."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    pts = np.asarray(pts, dtype=np.float64)
    if frozen_eps is None:
        frozen_eps = _draw_perturbations(pts, kappa, n_samples, rng, kappa_scale,
                                         fixed_direction)
    npts, n_samples, ndim = frozen_eps.shape
    shifted_pts = (pts[:, None, :] + frozen_eps).reshape(-1, ndim)
    base = neural_field.field_values(params, pts)
    shifted = neural_field.field_values(params, shifted_pts).reshape(npts, n_samples)
    diff = shifted - base[:, None]
    scale = 1.0 / (kappa * kappa * npts * n_samples)
    value = float(np.sum(diff ** 2) * scale)
    up_shifted = (2.0 * scale) * diff
    g_shift = neural_field.field_backward(params, shifted_pts, up_shifted.ravel())
    g_base = neural_field.field_backward(params, pts, -up_shifted.sum(axis=1))
    return value, g_shift.weights + g_base.weights


def combined_regularizer(params, grids, batch_pts, reg: RegWeights, rng,
                         kappa_scale=None):
    """lambda_vsp * VS_p(factors on grids) + Hutchinson term on batch_pts.

    Returns (value, flat weight gradient).  Factor matrices are materialized
    from the field on the supplied per-dimension grids and the VS_p gradient
    is chained through the per-dimension networks.
    """
    nparams = neural_field.num_params(params)
    value = 0.0
    grad = np.zeros(nparams)
    if reg.lambda_vsp > 0.0:
        _, factors, caches = neural_field._materialize_with_caches(params, grids)
        v, fgrads = vsp_norm(factors, reg.p, reg.epsilon_floor)
        value += reg.lambda_vsp * v
        gws, gbs = neural_field._zero_grad_lists(params)
        for d in range(params.order):
            gout = reg.lambda_vsp * fgrads[d].T  # (I_d, R)
            ws, bs, _ = neural_field.mlp_backward(params.stacks[d], caches[d], gout)
            for l in range(len(ws)):
                gws[d][l] += ws[l]
                gbs[d][l] += bs[l]
        grad += neural_field._flatten_grads(params, gws, gbs)
    if reg.lambda_j > 0.0 and batch_pts is not None and len(batch_pts):
        v, g = hutchinson_smoothness(params, batch_pts, reg.kappa,
                                     reg.hutchinson_samples, rng,
                                     kappa_scale=kappa_scale)
        value += reg.lambda_j * v
        grad += reg.lambda_j * g
    return value, grad
