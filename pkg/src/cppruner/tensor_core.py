"""Dense tensor operations: CP reconstruction, unfolding, Schatten-p, metrics."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL_SCALE = 1e-12


class ShapeError(ValueError):
    """Structurally invalid input (mismatched shapes, bad index sets)."""


@dataclass
class FactorMatrices:
    """The D factor matrices of a CP decomposition, factor d of shape (R, I_d)."""

    factors: list = field(default_factory=list)

    def __post_init__(self):
        if not self.factors:
            raise ShapeError("need at least one factor matrix")
        self.factors = [np.asarray(f, dtype=np.float64) for f in self.factors]
        ranks = {f.shape[0] for f in self.factors}
        if any(f.ndim != 2 for f in self.factors):
            raise ShapeError("factor matrices must be 2-D")
        if len(ranks) != 1:
            raise ShapeError(f"factors disagree on rank: {sorted(ranks)}")

    @property
    def rank(self) -> int:
        return self.factors[0].shape[0]

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    def scaled(self, c: float) -> "FactorMatrices":
        return FactorMatrices([c * f for f in self.factors])


def cp_reconstruct(factors: FactorMatrices) -> np.ndarray:
    """Entry (i_1..i_D) = sum_r prod_d factors[d][r, i_d].

    Summation order is fixed (r outer, dimensions ascending) so the result
    is bit-reproducible against a nested-loop evaluation.
    """
    return _kernels.cp_reconstruct(factors.factors)


def unfold(t: np.ndarray, modes) -> np.ndarray:
    """Matricize ``t`` with ``modes`` (0-based, ascending) indexing rows.

    Rows flatten the selected dimensions row-major (last listed fastest),
    columns flatten the complement the same way.
    """
    t = np.asarray(t)
    modes = tuple(modes)
    if len(modes) != len(set(modes)):
        raise ShapeError("duplicate modes in index set")
    if any(m < 0 or m >= t.ndim for m in modes):
        raise ShapeError(f"modes {modes} out of range for order-{t.ndim} tensor")
    if len(modes) == 0 or len(modes) == t.ndim:
        raise ShapeError("index set must be a nonempty proper subset of the dimensions")
    modes = tuple(sorted(modes))
    rest = tuple(d for d in range(t.ndim) if d not in modes)
    rows = int(np.prod([t.shape[m] for m in modes]))
    return np.transpose(t, modes + rest).reshape(rows, -1)


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values via cyclic-Jacobi eigendecomposition of the Gram matrix.

    Eigenvalues below the rotation convergence tolerance are clamped to
    zero: round-off residue at that level is indistinguishable from a zero
    singular value, and for p < 1 its p-th power would otherwise dominate
    rank-deficient spectra.  The Gram matrix is taken on the smaller side;
    the nonzero spectrum is the same either way.
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("non-finite entries in matrix")
    fro = np.sqrt((m * m).sum())
    if fro == 0.0:
        return np.zeros(min(m.shape))
    if m.shape[0] <= m.shape[1]:
        gram = m @ m.T
    else:
        gram = m.T @ m
    eig = _kernels.jacobi_eigvals_sym(
        np.ascontiguousarray(gram), JACOBI_TOL_SCALE * fro, JACOBI_MAX_SWEEPS
    )
    # clamp threshold lives on the Gram scale (squared norms)
    eig = np.where(eig < JACOBI_TOL_SCALE * fro * fro, 0.0, eig)
    return np.sort(np.sqrt(eig))[::-1]


def schatten_p(m: np.ndarray, p: float) -> float:
    """sum_i sigma_i(m)^p for p in (0, 1]."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must be in (0, 1], got {p}")
    sv = singular_values(m)
    return float(np.sum(sv ** p))


def _check_same_shape(ref, est):
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ShapeError(f"shape mismatch: {ref.shape} vs {est.shape}")
    return ref, est


def psnr(ref: np.ndarray, est: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); +inf when the tensors coincide."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    ref, est = _check_same_shape(ref, est)
    mse = float(np.mean((ref - est) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


def nrmse(ref: np.ndarray, est: np.ndarray) -> float:
    ref, est = _check_same_shape(ref, est)
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ValueError("reference tensor has zero norm")
    return float(np.linalg.norm(ref - est) / denom)


def _gaussian_kernel(size=11, sigma=1.5):
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


def _ssim_slice(x, y, kern):
    win = kern.shape[0]
    from numpy.lib.stride_tricks import sliding_window_view

    def filt(img):
        w = sliding_window_view(img, (win, win))
        return np.tensordot(w, kern, axes=([2, 3], [0, 1]))

    mx = filt(x)
    my = filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2.0 * mx * my + _SSIM_C1) * (2.0 * sxy + _SSIM_C2)
    den = (mx * mx + my * my + _SSIM_C1) * (sxx + syy + _SSIM_C2)
    return float(np.mean(num / den))


def ssim(ref: np.ndarray, est: np.ndarray) -> float:
    """Mean SSIM over 11x11 Gaussian windows (sigma 1.5), dynamic range 1.

    Computed per frontal slice (first two axes) and averaged over the
    remaining axes.  Inputs are expected in [0, 1].
    """
    ref, est = _check_same_shape(ref, est)
    if ref.ndim < 2 or ref.shape[0] < 11 or ref.shape[1] < 11:
        raise ShapeError("ssim needs the first two axes to be at least 11")
    kern = _gaussian_kernel()
    r2 = ref.reshape(ref.shape[0], ref.shape[1], -1)
    e2 = est.reshape(ref.shape[0], ref.shape[1], -1)
    vals = [_ssim_slice(r2[:, :, k], e2[:, :, k], kern) for k in range(r2.shape[2])]
    return float(np.mean(vals))


def _as_points(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ShapeError("point set must be a nonempty (n, dim) array")
    return np.ascontiguousarray(p)


def chamfer(a, b) -> float:
    """Symmetric average of mean nearest-neighbor distances."""
    a = _as_points(a)
    b = _as_points(b)
    d_ab = np.sqrt(_kernels.nn_min_sqdists(a, b))
    d_ba = np.sqrt(_kernels.nn_min_sqdists(b, a))
    return float(0.5 * (d_ab.mean() + d_ba.mean()))


def f_score(pred, gt, thr: float) -> float:
    """Harmonic mean of threshold precision and recall; 0 when both vanish."""
    if thr <= 0:
        raise ValueError("threshold must be positive")
    pred = _as_points(pred)
    gt = _as_points(gt)
    precision = float(np.mean(np.sqrt(_kernels.nn_min_sqdists(pred, gt)) <= thr))
    recall = float(np.mean(np.sqrt(_kernels.nn_min_sqdists(gt, pred)) <= thr))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def auto_fscore_threshold(gt) -> float:
    """Default F-score threshold: 1% of the ground-truth bounding-box diagonal."""
    gt = _as_points(gt)
    diag = float(np.linalg.norm(gt.max(axis=0) - gt.min(axis=0)))
    if diag == 0.0:
        raise ValueError("degenerate ground-truth bounding box")
    return 0.01 * diag
