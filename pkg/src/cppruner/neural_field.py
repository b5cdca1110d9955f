"""CP-structured implicit neural field.

The field value at a D-dimensional coordinate x is
sum_r prod_d f_d(x_d)[r], where each per-dimension function f_d is a small
MLP applied to a sinusoidal feature encoding of the scalar coordinate.
This module provides forward evaluation (pointwise and on grids), exact
reverse-mode gradients with respect to all weights and inputs, and the
second-order machinery needed to differentiate input-gradient penalties
(tangent propagation plus its reverse pass).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor_core
from .rng import RngStream


@dataclass
class FourierMap:
    """Sinusoidal coordinate encoding; output dimension is 2*len(a)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.shape != self.b.shape or self.a.ndim != 1 or self.a.size == 0:
            raise ValueError("coefficients and frequencies must be matching nonempty vectors")

    @property
    def m(self) -> int:
        return self.a.size


@dataclass
class MlpStack:
    """Per-dimension MLP: weights[l] has shape (h_l, h_{l-1})."""

    weights: list
    biases: list
    activation: str = "sine"
    linear_head: bool = True

    def __post_init__(self):
        for l in range(1, len(self.weights)):
            if self.weights[l].shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l} input dim does not chain with layer {l - 1}")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]


@dataclass
class FieldParams:
    fourier: FourierMap
    stacks: list
    domain: np.ndarray  # (D, 2) coordinate intervals
    use_bias: bool = True

    def __post_init__(self):
        self.domain = np.asarray(self.domain, dtype=np.float64)
        if self.domain.shape != (len(self.stacks), 2):
            raise ValueError("domain must be one (lo, hi) interval per dimension")
        if np.any(self.domain[:, 1] <= self.domain[:, 0]):
            raise ValueError("degenerate domain interval")
        ranks = {s.out_dim for s in self.stacks}
        if len(ranks) != 1:
            raise ValueError("all stacks must output the same rank")

    @property
    def order(self) -> int:
        return len(self.stacks)

    @property
    def rank(self) -> int:
        return self.stacks[0].out_dim


@dataclass
class GradientBundle:
    """Flat weight gradient plus optional per-point input gradients."""

    weights: np.ndarray
    inputs: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# activations

def _act_fns(name):
    if name == "relu":
        # subgradient 0 at the kink
        return (
            lambda z: np.maximum(z, 0.0),
            lambda z: (z > 0.0).astype(np.float64),
            lambda z: np.zeros_like(z),
        )
    if name == "sine":
        return (np.sin, np.cos, lambda z: -np.sin(z))
    if name == "tanh":
        return (
            np.tanh,
            lambda z: 1.0 - np.tanh(z) ** 2,
            lambda z: -2.0 * np.tanh(z) * (1.0 - np.tanh(z) ** 2),
        )
    raise ValueError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# Fourier features

def fourier_features(x, fmap: FourierMap) -> np.ndarray:
    """[a_j cos(2 pi b_j x), a_j sin(2 pi b_j x)] interleaved; norm is constant."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ang = 2.0 * np.pi * x[:, None] * fmap.b[None, :]
    out = np.empty((x.shape[0], 2 * fmap.m))
    out[:, 0::2] = fmap.a * np.cos(ang)
    out[:, 1::2] = fmap.a * np.sin(ang)
    return out


def fourier_features_prime(x, fmap: FourierMap) -> np.ndarray:
    """d/dx of fourier_features."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    w = 2.0 * np.pi * fmap.b
    ang = x[:, None] * w[None, :]
    out = np.empty((x.shape[0], 2 * fmap.m))
    out[:, 0::2] = -fmap.a * w * np.sin(ang)
    out[:, 1::2] = fmap.a * w * np.cos(ang)
    return out


# ---------------------------------------------------------------------------
# MLP forward / reverse / tangent passes

def mlp_forward(stack: MlpStack, x: np.ndarray):
    """Returns (output (B, R), cache) for a batch of feature vectors."""
    act, _, _ = _act_fns(stack.activation)
    hs = [x]
    zs = []
    h = x
    last = stack.depth - 1
    for l, (w, b) in enumerate(zip(stack.weights, stack.biases)):
        z = h @ w.T + b
        zs.append(z)
        h = z if (l == last and stack.linear_head) else act(z)
        hs.append(h)
    return h, (hs, zs)


def mlp_backward(stack: MlpStack, cache, gout: np.ndarray):
    """VJP: gradients of sum(gout * output) w.r.t. weights, biases and input."""
    hs, zs = cache
    _, dact, _ = _act_fns(stack.activation)
    last = stack.depth - 1
    gws = [None] * stack.depth
    gbs = [None] * stack.depth
    gh = gout
    for l in range(last, -1, -1):
        gz = gh if (l == last and stack.linear_head) else gh * dact(zs[l])
        gws[l] = gz.T @ hs[l]
        gbs[l] = gz.sum(axis=0)
        gh = gz @ stack.weights[l]
    return gws, gbs, gh


def mlp_jvp(stack: MlpStack, cache, t0: np.ndarray):
    """Tangent propagation: directional derivative of the output along t0."""
    hs, zs = cache
    _, dact, _ = _act_fns(stack.activation)
    last = stack.depth - 1
    ts = [t0]
    cs = []
    t = t0
    for l, w in enumerate(stack.weights):
        c = t @ w.T
        cs.append(c)
        t = c if (l == last and stack.linear_head) else dact(zs[l]) * c
        ts.append(t)
    return t, (ts, cs)


def mlp_jvp_backward(stack: MlpStack, cache, tcache, gh_out, gu_out):
    """Reverse pass through forward + tangent graphs.

    Returns weight/bias gradients of sum(gh_out * output + gu_out * tangent).
    With gu_out = 0 this reduces to mlp_backward.
    """
    hs, zs = cache
    ts, cs = tcache
    _, dact, d2act = _act_fns(stack.activation)
    last = stack.depth - 1
    gws = [None] * stack.depth
    gbs = [None] * stack.depth
    gh = gh_out
    gu = gu_out
    for l in range(last, -1, -1):
        if l == last and stack.linear_head:
            gz = gh
            gc = gu
        else:
            dz = dact(zs[l])
            gz = gh * dz + gu * d2act(zs[l]) * cs[l]
            gc = gu * dz
        gws[l] = gz.T @ hs[l] + gc.T @ ts[l]
        gbs[l] = gz.sum(axis=0)
        gh = gz @ stack.weights[l]
        gu = gc @ stack.weights[l]
    return gws, gbs


# ---------------------------------------------------------------------------
# field evaluation

def dim_forward(params: FieldParams, d: int, x) -> np.ndarray:
    """Evaluate dimension d's latent function at coordinates x -> (B, R).

    Coordinates outside the stored domain are evaluated as-is (smooth
    extrapolation; no clamping).
    """
    feats = fourier_features(x, params.fourier)
    out, _ = mlp_forward(params.stacks[d], feats)
    return out


def _forward_caches(params: FieldParams, pts: np.ndarray):
    vs = []
    caches = []
    for d in range(params.order):
        feats = fourier_features(pts[:, d], params.fourier)
        v, cache = mlp_forward(params.stacks[d], feats)
        vs.append(v)
        caches.append(cache)
    return vs, caches


def _combine(vs):
    """Field values from per-dimension outputs, summed sequentially over r."""
    term = vs[0]
    for v in vs[1:]:
        term = term * v
    out = np.zeros(term.shape[0])
    for r in range(term.shape[1]):
        out += term[:, r]
    return out


def _leave_one_out(vs):
    """loo[d] = elementwise product of vs over all dims except d."""
    n = len(vs)
    prefix = [None] * n
    suffix = [None] * n
    run = np.ones_like(vs[0])
    for d in range(n):
        prefix[d] = run
        run = run * vs[d]
    run = np.ones_like(vs[0])
    for d in range(n - 1, -1, -1):
        suffix[d] = run
        run = run * vs[d]
    return [prefix[d] * suffix[d] for d in range(n)]


def _leave_two_out(vs, d, e):
    out = np.ones_like(vs[0])
    for i, v in enumerate(vs):
        if i != d and i != e:
            out = out * v
    return out


def field_forward(params: FieldParams, x):
    """Value and per-dimension factor vectors at one coordinate vector."""
    pts = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if pts.shape[1] != params.order:
        raise ValueError(f"expected {params.order} coordinates, got {pts.shape[1]}")
    vs, _ = _forward_caches(params, pts)
    value = float(_combine(vs)[0])
    return value, [v[0] for v in vs]


def field_values(params: FieldParams, pts: np.ndarray) -> np.ndarray:
    """Batched field values at pts of shape (B, D)."""
    vs, _ = _forward_caches(params, np.asarray(pts, dtype=np.float64))
    return _combine(vs)


# ---------------------------------------------------------------------------
# trainable parameter flattening

def trainable_arrays(params: FieldParams):
    arrs = []
    for stack in params.stacks:
        for l in range(stack.depth):
            arrs.append(stack.weights[l])
            if params.use_bias:
                arrs.append(stack.biases[l])
    return arrs


def param_vector(params: FieldParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in trainable_arrays(params)])


def set_param_vector(params: FieldParams, vec: np.ndarray):
    offset = 0
    for a in trainable_arrays(params):
        n = a.size
        a[...] = vec[offset:offset + n].reshape(a.shape)
        offset += n
    if offset != vec.size:
        raise ValueError("parameter vector length mismatch")


def _zero_grad_lists(params: FieldParams):
    return [[np.zeros_like(w) for w in s.weights] for s in params.stacks], [
        [np.zeros_like(b) for b in s.biases] for s in params.stacks
    ]


def _flatten_grads(params: FieldParams, gws, gbs) -> np.ndarray:
    parts = []
    for d in range(params.order):
        for l in range(params.stacks[d].depth):
            parts.append(gws[d][l].ravel())
            if params.use_bias:
                parts.append(gbs[d][l].ravel())
    return np.concatenate(parts)


def num_params(params: FieldParams) -> int:
    return sum(a.size for a in trainable_arrays(params))


# ---------------------------------------------------------------------------
# reverse mode

def field_backward(params: FieldParams, pts, upstream, want_input_grads=False) -> GradientBundle:
    """Gradients of sum_i upstream[i] * f(pts[i]) w.r.t. all weights.

    When requested, also returns d value / d x_d per point, with the
    feature-map derivative taken analytically.
    """
    pts = np.asarray(pts, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    vs, caches = _forward_caches(params, pts)
    loo = _leave_one_out(vs)
    gws, gbs = _zero_grad_lists(params)
    for d in range(params.order):
        gv = upstream[:, None] * loo[d]
        ws, bs, _ = mlp_backward(params.stacks[d], caches[d], gv)
        for l in range(len(ws)):
            gws[d][l] += ws[l]
            gbs[d][l] += bs[l]
    inputs = None
    if want_input_grads:
        inputs = np.empty_like(pts)
        for d in range(params.order):
            t0 = fourier_features_prime(pts[:, d], params.fourier)
            tang, _ = mlp_jvp(params.stacks[d], caches[d], t0)
            inputs[:, d] = (tang * loo[d]).sum(axis=1)
    return GradientBundle(_flatten_grads(params, gws, gbs), inputs)


def input_gradients(params: FieldParams, pts) -> np.ndarray:
    """d f / d x per point, shape (B, D)."""
    pts = np.asarray(pts, dtype=np.float64)
    vs, caches = _forward_caches(params, pts)
    loo = _leave_one_out(vs)
    out = np.empty_like(pts)
    for d in range(params.order):
        t0 = fourier_features_prime(pts[:, d], params.fourier)
        tang, _ = mlp_jvp(params.stacks[d], caches[d], t0)
        out[:, d] = (tang * loo[d]).sum(axis=1)
    return out


def eikonal_term(params: FieldParams, pts, point_weights, grad_scale=None):
    """Weighted eikonal penalty sum_i w_i * | ||grad f(x_i)||^2 - 1 |.

    grad_scale rescales the input gradient per dimension (used when the
    field operates on normalized coordinates but the unit-gradient
    constraint lives in original units).  Returns (value, flat weight
    gradient, per-point residuals).
    """
    pts = np.asarray(pts, dtype=np.float64)
    w = np.asarray(point_weights, dtype=np.float64)
    ndim = params.order
    if grad_scale is None:
        grad_scale = np.ones(ndim)
    grad_scale = np.asarray(grad_scale, dtype=np.float64)

    vs, caches = _forward_caches(params, pts)
    loo = _leave_one_out(vs)
    tangs = []
    tcaches = []
    for d in range(ndim):
        t0 = fourier_features_prime(pts[:, d], params.fourier)
        tang, tc = mlp_jvp(params.stacks[d], caches[d], t0)
        tangs.append(tang)
        tcaches.append(tc)
    g = np.empty_like(pts)
    for d in range(ndim):
        g[:, d] = grad_scale[d] * (tangs[d] * loo[d]).sum(axis=1)
    e = (g * g).sum(axis=1) - 1.0
    residuals = np.abs(e)
    value = float(np.sum(w * residuals))
    # upstream on the raw (pre-scale) per-dimension gradient components
    u = (w * np.sign(e) * 2.0)[:, None] * g * grad_scale[None, :]

    gws, gbs = _zero_grad_lists(params)
    for d in range(ndim):
        gu_out = u[:, d][:, None] * loo[d]
        gh_out = np.zeros_like(loo[d])
        for other in range(ndim):
            if other == d:
                continue
            gh_out += u[:, other][:, None] * tangs[other] * _leave_two_out(vs, other, d)
        ws, bs = mlp_jvp_backward(params.stacks[d], caches[d], tcaches[d], gh_out, gu_out)
        for l in range(len(ws)):
            gws[d][l] += ws[l]
            gbs[d][l] += bs[l]
    return value, _flatten_grads(params, gws, gbs), residuals


# ---------------------------------------------------------------------------
# grids

def materialize_grid(params: FieldParams, grids):
    """Factor matrices on per-dimension coordinate lists, plus the dense tensor."""
    tensor, factors, _ = _materialize_with_caches(params, grids)
    return tensor, factors


def _materialize_with_caches(params: FieldParams, grids):
    factor_list = []
    caches = []
    for d, grid in enumerate(grids):
        feats = fourier_features(np.asarray(grid, dtype=np.float64), params.fourier)
        out, cache = mlp_forward(params.stacks[d], feats)
        factor_list.append(out.T.copy())
        caches.append(cache)
    factors = tensor_core.FactorMatrices(factor_list)
    return tensor_core.cp_reconstruct(factors), factors, caches


def _khatri_rao_except(factors, skip):
    out = None
    for d, f in enumerate(factors):
        if d == skip:
            continue
        out = f if out is None else (out[:, :, None] * f[:, None, :]).reshape(f.shape[0], -1)
    return out


def grid_backward(params: FieldParams, grids, grad_tensor, caches=None,
                  factors=None) -> np.ndarray:
    """Flat weight gradient of sum(grad_tensor * materialized tensor)."""
    if caches is None or factors is None:
        _, factors, caches = _materialize_with_caches(params, grids)
    fl = factors.factors
    gws, gbs = _zero_grad_lists(params)
    for d in range(params.order):
        if params.order == 1:
            g = np.asarray(grad_tensor, dtype=np.float64).ravel()
            du = np.broadcast_to(g, (params.rank, g.size))
        else:
            g_unf = tensor_core.unfold(np.asarray(grad_tensor, dtype=np.float64), (d,))
            kr = _khatri_rao_except(fl, d)
            du = kr @ g_unf.T
        ws, bs, _ = mlp_backward(params.stacks[d], caches[d], du.T)
        for l in range(len(ws)):
            gws[d][l] += ws[l]
            gbs[d][l] += bs[l]
    return _flatten_grads(params, gws, gbs)


# ---------------------------------------------------------------------------
# initialization

def init_params(config, seed=None) -> FieldParams:
    """Fresh parameters from a TrainConfig-like object.

    Weights are uniform Glorot draws from per-dimension "init" substreams,
    biases start at zero, the feature map uses a_j = 1/m with octave
    frequencies b_j = b_base * 2^(j-1).
    """
    if seed is None:
        seed = config.seed
    ndim = config.order
    m = config.fourier_m
    a = np.full(m, 1.0 / m)
    b = config.b_base * (2.0 ** np.arange(m))
    fourier = FourierMap(a, b)
    dims = [2 * m] + [config.width] * (config.layers - 1) + [config.rank]
    stacks = []
    for d in range(ndim):
        stream = RngStream(seed, f"init/dim{d}")
        weights = []
        biases = []
        for l in range(config.layers):
            fan_in, fan_out = dims[l], dims[l + 1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = (stream.uniform(fan_out * fan_in) * 2.0 - 1.0) * bound
            if l == config.layers - 1:
                w = w * getattr(config, "head_init_scale", 1.0)
            weights.append(w.reshape(fan_out, fan_in))
            biases.append(np.zeros(fan_out))
        stacks.append(
            MlpStack(weights, biases, activation=config.activation,
                     linear_head=config.linear_head)
        )
    domain = np.tile([0.0, 1.0], (ndim, 1))
    return FieldParams(fourier, stacks, domain, use_bias=config.use_bias)
