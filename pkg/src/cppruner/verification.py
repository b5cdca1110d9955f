"""Numerical certification of the core inequalities and gradients:
the Schatten-p norm chain, Jacobian norm identities, Hutchinson
convergence, and reverse-mode correctness against finite differences."""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import neural_field, regularizers, tensor_core
from .config import TrainConfig
from .rng import RngStream

FD_STEP_WEIGHTS = 1e-6
FD_STEP_INPUTS = 1e-5


@dataclass
class CheckReport:
    name: str
    instances: int
    failures: int
    worst: float
    seed: int
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def summary(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"[{status}] {self.name}: {self.failures}/{self.instances} failures, "
                f"worst slack {self.worst:.3e} (seed {self.seed})")


# ---------------------------------------------------------------------------
# norm-chain certification

def _random_factors(stream):
    ndim = 3 + int(stream.uniform(1)[0] * 2)
    rank = 1 + int(stream.uniform(1)[0] * 5)
    shape = [2 + int(u * 7) for u in stream.uniform(ndim)]
    mats = [stream.normal(rank * s).reshape(rank, s) for s in shape]
    return tensor_core.FactorMatrices(mats)


def check_theorem1(n_instances: int, seed: int = 0, rel_tol: float = 1e-9) -> CheckReport:
    """Certify schatten_p(unfolding) <= middle term <= VS_p over random factors.

    Every proper nonempty index set of every instance is checked; any
    violation beyond the relative tolerance is a hard failure.
    """
    stream = RngStream(seed, "verify/theorem1")
    p_choices = (0.1, 0.5, 1.0)
    failures = 0
    worst = -np.inf
    checked = 0
    for _ in range(n_instances):
        factors = _random_factors(stream)
        p = p_choices[int(stream.uniform(1)[0] * len(p_choices))]
        tensor = tensor_core.cp_reconstruct(factors)
        middle = regularizers.vsp_middle_term(factors, p)
        upper, _ = regularizers.vsp_norm(factors, p)
        scale = max(abs(upper), 1e-30)
        slack_mid = (middle - upper) / scale
        worst = max(worst, slack_mid)
        if slack_mid > rel_tol:
            failures += 1
        ndim = factors.order
        for size in range(1, ndim):
            for modes in combinations(range(ndim), size):
                lhs = tensor_core.schatten_p(tensor_core.unfold(tensor, modes), p)
                slack = (lhs - middle) / max(abs(middle), 1e-30)
                worst = max(worst, slack)
                checked += 1
                if slack > rel_tol:
                    failures += 1
    return CheckReport("theorem1", n_instances, failures, worst, seed,
                       {"index_sets_checked": checked})


# ---------------------------------------------------------------------------
# Jacobian helpers

def jacobian_fd(eval_fn, x, h: float = FD_STEP_INPUTS) -> np.ndarray:
    """Central-difference gradient of a scalar field at one point."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.size)
    for d in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[d] += h
        lo[d] -= h
        out[d] = (eval_fn(hi[None, :])[0] - eval_fn(lo[None, :])[0]) / (2.0 * h)
    return out


def norm_chain_bounds(mat) -> tuple:
    """(spectral norm, Frobenius norm, sqrt(min(m, n)) * spectral norm)."""
    mat = np.asarray(mat, dtype=np.float64)
    sv = tensor_core.singular_values(mat)
    fro = float(np.sqrt((mat * mat).sum()))
    return float(sv[0]), fro, float(np.sqrt(min(mat.shape)) * sv[0])


def check_norm_chain(params, pts, tol: float = 1e-10) -> CheckReport:
    """Scalar-output degeneration: spectral and Frobenius norms coincide
    for the 1 x D Jacobian at every supplied point."""
    pts = np.asarray(pts, dtype=np.float64)
    eval_fn = lambda batch: neural_field.field_values(params, batch)
    failures = 0
    worst = 0.0
    for x in pts:
        jac = jacobian_fd(eval_fn, x)[None, :]
        spec, fro, upper = norm_chain_bounds(jac)
        denom = max(fro, 1e-30)
        gap = abs(spec - fro) / denom
        worst = max(worst, gap)
        if gap > tol or not (spec <= fro + tol * denom <= upper + 2 * tol * denom):
            failures += 1
    return CheckReport("normchain", pts.shape[0], failures, worst, 0)


# ---------------------------------------------------------------------------
# Hutchinson estimator

def _hutchinson_samples(eval_fn, x, kappa, n, stream):
    x = np.asarray(x, dtype=np.float64)
    eps = kappa * stream.normal(n * x.size).reshape(n, x.size)
    base = eval_fn(x[None, :])[0]
    shifted = eval_fn(x[None, :] + eps)
    return (shifted - base) ** 2 / (kappa * kappa)


def check_hutchinson(eval_fn, x, kappa: float, n: int, seed: int = 0,
                     rel_tol: float = 0.02) -> CheckReport:
    """Compare the Monte-Carlo squared-Jacobian-norm estimate against the
    central-difference reference; reports deviation and a 3-SE band."""
    stream = RngStream(seed, "hutch")
    samples = _hutchinson_samples(eval_fn, x, kappa, n, stream)
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    ref = float(np.sum(jacobian_fd(eval_fn, x) ** 2))
    deviation = abs(est - ref) / max(abs(ref), 1e-30)
    failures = 0 if deviation <= rel_tol else 1
    return CheckReport("hutchinson", 1, failures, deviation, seed,
                       {"estimate": est, "reference": ref, "band_3se": 3 * se})


def hutchinson_error_slope(eval_fn, x, kappa, sample_sizes, trials: int,
                           seed: int = 0) -> float:
    """Slope of the mean absolute relative error versus n on log-log axes."""
    ref = float(np.sum(jacobian_fd(eval_fn, x) ** 2))
    means = []
    for n in sample_sizes:
        errs = []
        for t in range(trials):
            stream = RngStream(seed, f"hutch/slope/{n}/{t}")
            est = float(_hutchinson_samples(eval_fn, x, kappa, n, stream).mean())
            errs.append(abs(est - ref) / max(abs(ref), 1e-30))
        means.append(np.mean(errs))
    slope = np.polyfit(np.log10(np.asarray(sample_sizes, dtype=float)),
                       np.log10(np.asarray(means)), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# gradient checks

def relative_grad_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic).ravel()
    numeric = np.asarray(numeric).ravel()
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _fd_grad(fn, theta, h=FD_STEP_WEIGHTS):
    out = np.empty_like(theta)
    for i in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += h
        lo[i] -= h
        out[i] = (fn(hi) - fn(lo)) / (2.0 * h)
    return out


def _sample_check_config(stream):
    return TrainConfig(
        order=2 + int(stream.uniform(1)[0] * 2),
        rank=1 + int(stream.uniform(1)[0] * 8),
        layers=1 + int(stream.uniform(1)[0] * 3),
        width=3 + int(stream.uniform(1)[0] * 4),
        fourier_m=1 + int(stream.uniform(1)[0] * 3),
        activation=("sine", "tanh", "relu")[int(stream.uniform(1)[0] * 3)],
        seed=int(stream.u64(1)[0] & 0xFFFFFFFF),
    )


def _perturb_init(params, stream):
    # nonzero biases and head weights so no term is trivially zero
    vec = neural_field.param_vector(params)
    vec += 0.3 * stream.normal(vec.size)
    neural_field.set_param_vector(params, vec)


def check_gradients(n_configs: int, seed: int = 0, config_sampler=None,
                    tol: float = 1e-5) -> CheckReport:
    """Reverse-mode vs central finite differences across random small
    configurations, for the data term, the VS_p term, the frozen-noise
    Hutchinson term, and the SDF loss terms (pointwise, free-space,
    eikonal)."""
    master = RngStream(seed, "verify/grad")
    sampler = config_sampler or _sample_check_config
    worst = 0.0
    worst_term = ""
    failures = 0
    for i in range(n_configs):
        config = sampler(master)
        params = neural_field.init_params(config)
        _perturb_init(params, master)
        ndim = config.order
        npts = 3
        pts = master.uniform(npts * ndim).reshape(npts, ndim)
        upstream = master.normal(npts)
        grids = [np.sort(master.uniform(4)) for _ in range(ndim)]
        theta0 = neural_field.param_vector(params)
        frozen = 0.05 * master.normal(npts * 2 * ndim).reshape(npts, 2, ndim)
        reg = regularizers.RegWeights(lambda_vsp=1.0, p=0.5, lambda_j=0.0)

        def with_theta(theta, fn):
            neural_field.set_param_vector(params, theta)
            try:
                return fn()
            finally:
                neural_field.set_param_vector(params, theta0)

        terms = {}

        terms["data"] = (
            lambda th: with_theta(th, lambda: float(
                np.dot(upstream, neural_field.field_values(params, pts)))),
            lambda: neural_field.field_backward(params, pts, upstream).weights,
        )
        terms["vsp"] = (
            lambda th: with_theta(th, lambda: regularizers.combined_regularizer(
                params, grids, None, reg, None)[0]),
            lambda: regularizers.combined_regularizer(params, grids, None, reg, None)[1],
        )
        terms["hutchinson"] = (
            lambda th: with_theta(th, lambda: regularizers.hutchinson_smoothness(
                params, pts, 0.05, 2, frozen_eps=frozen)[0]),
            lambda: regularizers.hutchinson_smoothness(
                params, pts, 0.05, 2, frozen_eps=frozen)[1],
        )
        terms["sdf_point"] = (
            lambda th: with_theta(th, lambda: float(
                np.mean(np.abs(neural_field.field_values(params, pts))))),
            lambda: neural_field.field_backward(
                params, pts,
                np.sign(neural_field.field_values(params, pts)) / npts).weights,
        )
        terms["sdf_free"] = (
            lambda th: with_theta(th, lambda: float(
                np.mean(np.exp(-np.abs(neural_field.field_values(params, pts)))))),
            lambda: neural_field.field_backward(
                params, pts,
                -np.sign(neural_field.field_values(params, pts))
                * np.exp(-np.abs(neural_field.field_values(params, pts))) / npts).weights,
        )
        ew = np.full(npts, 1.0 / npts)
        terms["eikonal"] = (
            lambda th: with_theta(th, lambda: neural_field.eikonal_term(
                params, pts, ew)[0]),
            lambda: neural_field.eikonal_term(params, pts, ew)[1],
        )

        for name, (value_fn, grad_fn) in terms.items():
            if config.activation == "relu" and name == "eikonal":
                # second derivative is identically zero but the tangent has
                # kinks; skip FD comparison at nondifferentiable points
                continue
            analytic = grad_fn()
            numeric = _fd_grad(value_fn, theta0)
            err = relative_grad_error(analytic, numeric)
            if err > worst:
                worst = err
                worst_term = f"{name}@{i}"
            if err > tol:
                failures += 1
    return CheckReport("gradients", n_configs, failures, worst, seed,
                       {"worst_term": worst_term})
