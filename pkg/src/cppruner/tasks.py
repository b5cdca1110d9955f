"""Task drivers: inpainting, alternating denoising, SDF point-cloud
upsampling, and the CP component mass profile."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, neural_field, optimizer, regularizers, tensor_core
from .config import TrainConfig
from .regularizers import RegWeights
from .rng import RngStream


def grid_coordinates(shape):
    """Per-dimension normalized coordinates: index i maps to i/(I-1) in [0, 1]."""
    return [np.linspace(0.0, 1.0, s) if s > 1 else np.zeros(1) for s in shape]


def _kappa_scale(config: TrainConfig, shape):
    """Perturbation scale per dimension; kappa counts grid cells by default."""
    if config.kappa_units == "normalized":
        return None
    return np.array([1.0 / (s - 1) if s > 1 else 1.0 for s in shape])


def _hutch_anchor_points(stream, n, ndim):
    return stream.uniform(n * ndim).reshape(n, ndim)


@dataclass
class InpaintResult:
    tensor: np.ndarray
    factors: tensor_core.FactorMatrices
    params: neural_field.FieldParams
    trace: list
    observed_rmse: float


@dataclass
class DenoiseResult:
    clean: np.ndarray
    sparse: np.ndarray
    params: neural_field.FieldParams
    trace: list


@dataclass
class SdfModel:
    """Field over the normalized unit cube interpreted as a world-unit SDF."""

    params: neural_field.FieldParams
    center: np.ndarray
    scale: float
    trace: list = field(default_factory=list)

    def normalize(self, pts):
        return 0.5 + (np.asarray(pts, dtype=np.float64) - self.center) * self.scale

    def denormalize(self, pts):
        return (np.asarray(pts, dtype=np.float64) - 0.5) / self.scale + self.center

    def sdf(self, world_pts):
        return neural_field.field_values(self.params, self.normalize(world_pts))

    def sdf_gradients(self, world_pts):
        g = neural_field.input_gradients(self.params, self.normalize(world_pts))
        return g * self.scale


def _data_term_objective(observed, mask, config, reference=None):
    """Closure shared by inpainting; returns (objective, params, grids, streams)."""
    shape = observed.shape
    config = config.replace(order=observed.ndim).validate()
    params = neural_field.init_params(config)
    grids = grid_coordinates(shape)
    reg = RegWeights.from_config(config)
    hutch = RngStream(config.seed, "hutch")
    batch = RngStream(config.seed, "batch")
    kscale = _kappa_scale(config, shape)
    full = observed.size <= config.full_grid_limit
    obs_idx = np.flatnonzero(mask.ravel())
    maskf = mask.astype(np.float64)
    n_obs = obs_idx.size

    # the data term is the mean squared residual over observed entries, so
    # the regularization weights keep their meaning across tensor sizes
    def objective(theta, it):
        neural_field.set_param_vector(params, theta)
        tensor, factors, caches = neural_field._materialize_with_caches(params, grids)
        if full:
            resid = (tensor - observed) * maskf
            loss = float(np.sum(resid * resid)) / n_obs
            g_tensor = (2.0 / n_obs) * resid
        else:
            take = batch.integers(config.batch_size, n_obs)
            idx = obs_idx[take]
            diff = tensor.ravel()[idx] - observed.ravel()[idx]
            loss = float(np.sum(diff * diff)) / idx.size
            g_flat = np.zeros(observed.size)
            np.add.at(g_flat, idx, (2.0 / idx.size) * diff)
            g_tensor = g_flat.reshape(shape)
        grad = neural_field.grid_backward(params, grids, g_tensor, caches, factors)
        if reg.lambda_j > 0 and config.hutch_points > 0:
            anchors = _hutch_anchor_points(hutch, config.hutch_points, observed.ndim)
        else:
            anchors = None
        rv, rg = regularizers.combined_regularizer(params, grids, anchors, reg, hutch,
                                                   kappa_scale=kscale)
        return loss + rv, grad + rg

    return objective, params, grids


def inpaint(observed, mask, config: TrainConfig, reference=None) -> InpaintResult:
    """Recover a tensor from partially observed entries."""
    observed = np.asarray(observed, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != observed.shape:
        raise tensor_core.ShapeError("mask shape must match the observed tensor")
    if not mask.any():
        raise ValueError("observation mask is empty")
    objective, params, grids = _data_term_objective(observed, mask, config)
    theta, trace = optimizer.train(objective, neural_field.param_vector(params), config)
    neural_field.set_param_vector(params, theta)
    tensor, factors = neural_field.materialize_grid(params, grids)
    rmse = float(np.sqrt(np.mean((tensor - observed)[mask] ** 2)))
    return InpaintResult(tensor, factors, params, trace, rmse)


def denoise(observed, config: TrainConfig) -> DenoiseResult:
    """Alternating minimization: one Adam step on the field, then a
    closed-form soft-threshold update of the sparse component."""
    observed = np.asarray(observed, dtype=np.float64)
    if observed.ndim != 3:
        raise tensor_core.ShapeError("denoising expects a 3-way tensor")
    if config.lambda_s < 0:
        raise ValueError("lambda_s must be nonnegative")
    config = config.replace(order=3).validate()
    shape = observed.shape
    params = neural_field.init_params(config)
    grids = grid_coordinates(shape)
    reg = RegWeights.from_config(config)
    hutch = RngStream(config.seed, "hutch")
    kscale = _kappa_scale(config, shape)
    theta = neural_field.param_vector(params)
    state = optimizer.AdamState.from_config(theta.size, config)
    tau = config.lambda_s / 2.0
    trace = []
    sparse = np.zeros(shape)
    for it in range(config.iterations):
        neural_field.set_param_vector(params, theta)
        tensor, factors, caches = neural_field._materialize_with_caches(params, grids)
        sparse = regularizers.soft_threshold(observed - tensor, tau)
        resid = tensor + sparse - observed
        loss = float(np.sum(resid * resid)) / observed.size
        grad = neural_field.grid_backward(params, grids, (2.0 / observed.size) * resid,
                                          caches, factors)
        anchors = (_hutch_anchor_points(hutch, config.hutch_points, 3)
                   if reg.lambda_j > 0 and config.hutch_points > 0 else None)
        rv, rg = regularizers.combined_regularizer(params, grids, anchors, reg, hutch,
                                                   kappa_scale=kscale)
        loss += rv
        grad += rg
        if not np.isfinite(loss):
            raise optimizer.TrainingDiverged(it, loss, float(np.linalg.norm(theta)))
        if config.trace_every > 0 and it % config.trace_every == 0:
            trace.append((it, loss))
        optimizer.adam_step(theta, grad, state)
    neural_field.set_param_vector(params, theta)
    tensor, _ = neural_field.materialize_grid(params, grids)
    sparse = regularizers.soft_threshold(observed - tensor, tau)
    return DenoiseResult(tensor, sparse, params, trace)


def sdf_train(points, config: TrainConfig) -> SdfModel:
    """Fit a signed distance field to a sparse point cloud.

    Points are mapped into [0.1, 0.9]^3 by a uniform invertible transform;
    the SDF keeps world units, so the unit-gradient (eikonal) constraint is
    enforced on world-coordinate gradients.  Integrals are approximated as
    means over the observed points and freshly sampled free-space points.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        raise ValueError("empty point set")
    config = config.replace(order=3).validate()
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    extent = float((hi - lo).max())
    if extent == 0.0:
        extent = 1.0
    scale = 0.8 / extent
    center = (lo + hi) / 2.0
    model = SdfModel(neural_field.init_params(config), center, scale)
    params = model.params
    obs = model.normalize(points)
    n_obs = obs.shape[0]
    n_free = config.free_factor * n_obs
    ref_grids = [np.linspace(0.0, 1.0, config.ref_grid)] * 3
    reg = RegWeights.from_config(config)
    free_stream = RngStream(config.seed, "free")
    hutch = RngStream(config.seed, "hutch")
    batch = RngStream(config.seed, "batch")
    grad_scale = np.full(3, scale)
    kscale = np.full(3, 1.0 / (config.ref_grid - 1))

    def objective(theta, it):
        neural_field.set_param_vector(params, theta)
        free_pts = free_stream.uniform(n_free * 3).reshape(n_free, 3)

        s_obs = neural_field.field_values(params, obs)
        loss = float(np.mean(np.abs(s_obs)))
        g_obs = neural_field.field_backward(params, obs, np.sign(s_obs) / n_obs)
        grad = g_obs.weights

        # off-surface supervision: |s| should match the distance to the
        # nearest observed point (in world units).  An exponential penalty on
        # small |s| alone has vanishing gradients once the field collapses to
        # zero, so this distance target is what keeps the field from going flat.
        s_free = neural_field.field_values(params, free_pts)
        d_nn = np.sqrt(_kernels.nn_min_sqdists(free_pts, obs)) / scale
        sgn = np.where(s_free >= 0.0, 1.0, -1.0)
        gap = np.abs(s_free) - d_nn
        loss += config.freespace_weight * float(np.mean(gap * gap))
        up_free = config.freespace_weight * 2.0 * gap * sgn / n_free
        grad += neural_field.field_backward(params, free_pts, up_free).weights

        eik_pts = np.vstack([obs, free_pts])
        if 0 < config.eikonal_batch < eik_pts.shape[0]:
            take = batch.integers(config.eikonal_batch, eik_pts.shape[0])
            eik_pts = eik_pts[take]
        w = np.full(eik_pts.shape[0], config.eikonal_weight / eik_pts.shape[0])
        ev, eg, _ = neural_field.eikonal_term(params, eik_pts, w, grad_scale=grad_scale)
        loss += ev
        grad += eg

        anchors = free_pts[: config.hutch_points] if reg.lambda_j > 0 else None
        rv, rg = regularizers.combined_regularizer(params, ref_grids, anchors, reg, hutch,
                                                   kappa_scale=kscale)
        return loss + rv, grad + rg

    theta, trace = optimizer.train(objective, neural_field.param_vector(params), config)
    neural_field.set_param_vector(params, theta)
    model.trace = trace
    return model


def upsample(model: SdfModel, grid_resolution: int, tau_thr: float,
             min_points: int = 1000):
    """Dense point cloud from the near-zero level set of the SDF.

    Evaluates the field on an evenly spaced grid over the normalized cube
    and keeps de-normalized points with |s| below the threshold.  If fewer
    than ``min_points`` survive, the resolution is doubled once.
    """
    if grid_resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    for attempt, g in enumerate((grid_resolution, 2 * grid_resolution)):
        axes = [np.linspace(0.0, 1.0, g)] * 3
        values, _ = neural_field.materialize_grid(model.params, axes)
        sel = np.abs(values) < tau_thr
        idx = np.argwhere(sel)
        if idx.shape[0] >= min_points or attempt == 1:
            break
    norm_pts = np.stack([axes[d][idx[:, d]] for d in range(3)], axis=1)
    return model.denormalize(norm_pts)


def cp_mass_profile(factors: tensor_core.FactorMatrices):
    """Mass fraction per CP component, sorted descending.

    mass_r = prod_d ||u_r^(d)||; fractions are zero by convention when all
    components vanish.  Returns a list of (component index, fraction).
    """
    masses = np.ones(factors.rank)
    for f in factors.factors:
        masses *= np.sqrt((f * f).sum(axis=1))
    total = masses.sum()
    fracs = masses / total if total > 0 else np.zeros_like(masses)
    order = np.argsort(-fracs, kind="stable")
    return [(int(r), float(fracs[r])) for r in order]
