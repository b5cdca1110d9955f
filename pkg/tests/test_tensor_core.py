import numpy as np
import pytest

from cppruner import tensor_core as tc


# ---------------------------------------------------------------------------
# oracles

def _power_iteration_svals(m, k, iters=500, seed=0):
    """Independent SVD oracle: power iteration with deflation on m mᵀ."""
    g = np.asarray(m, dtype=np.float64)
    gram = g @ g.T if g.shape[0] <= g.shape[1] else g.T @ g
    rng = np.random.default_rng(seed)
    vals = []
    vecs = []
    for _ in range(k):
        v = rng.normal(size=gram.shape[0])
        for u in vecs:
            v -= (v @ u) * u
        v /= np.linalg.norm(v)
        for _ in range(iters):
            v = gram @ v
            for u in vecs:
                v -= (v @ u) * u
            v /= np.linalg.norm(v)
        lam = float(v @ gram @ v)
        vals.append(np.sqrt(max(lam, 0.0)))
        vecs.append(v)
        gram = gram - lam * np.outer(v, v)
    return np.array(vals)


# ---------------------------------------------------------------------------
# FactorMatrices / cp_reconstruct

def test_factor_matrices_validation():
    with pytest.raises(tc.ShapeError):
        tc.FactorMatrices([])
    with pytest.raises(tc.ShapeError):
        tc.FactorMatrices([np.zeros((2, 3)), np.zeros((3, 3))])
    with pytest.raises(tc.ShapeError):
        tc.FactorMatrices([np.zeros(3)])


def test_cp_reconstruct_matches_nested_loops():
    rng = np.random.default_rng(0)
    factors = tc.FactorMatrices([rng.normal(size=(3, n)) for n in (4, 5, 6)])
    t = tc.cp_reconstruct(factors)
    ref = np.zeros((4, 5, 6))
    for r in range(3):
        for i in range(4):
            for j in range(5):
                for k in range(6):
                    ref[i, j, k] += (factors.factors[0][r, i]
                                     * factors.factors[1][r, j]
                                     * factors.factors[2][r, k])
    assert np.allclose(t, ref, atol=1e-13)


def test_cp_reconstruct_rank1_outer():
    u = np.array([1.0, 2.0])
    v = np.array([3.0, 4.0, 5.0])
    t = tc.cp_reconstruct(tc.FactorMatrices([u[None, :], v[None, :]]))
    assert np.array_equal(t, np.outer(u, v))


# ---------------------------------------------------------------------------
# unfold

def test_unfold_matrix_identity():
    m = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(tc.unfold(m, (0,)), m)
    assert np.array_equal(tc.unfold(m, (1,)), m.T)


def test_unfold_index_mapping():
    t = np.empty((2, 3, 4))
    for i1 in range(2):
        for i2 in range(3):
            for i3 in range(4):
                t[i1, i2, i3] = i1 + 10 * i2 + 100 * i3
    m = tc.unfold(t, (1,))
    for i1 in range(2):
        for i2 in range(3):
            for i3 in range(4):
                assert m[i2, i1 * 4 + i3] == i1 + 10 * i2 + 100 * i3


def test_unfold_rank1_has_rank1():
    rng = np.random.default_rng(1)
    factors = tc.FactorMatrices([rng.normal(size=(1, n)) for n in (3, 4, 5)])
    t = tc.cp_reconstruct(factors)
    for modes in [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]:
        sv = tc.singular_values(tc.unfold(t, modes))
        assert np.sum(sv > 1e-10 * sv[0]) == 1


def test_unfold_rejects_bad_modes():
    t = np.zeros((2, 3, 4))
    for modes in [(), (0, 1, 2), (0, 0), (3,), (-1,)]:
        with pytest.raises(tc.ShapeError):
            tc.unfold(t, modes)


# ---------------------------------------------------------------------------
# singular values / schatten

def test_singular_values_vs_power_iteration_oracle():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(6, 8))
    mine = tc.singular_values(m)
    oracle = _power_iteration_svals(m, 6)
    assert np.allclose(np.sort(mine)[::-1], np.sort(oracle)[::-1], rtol=1e-8)


def test_schatten_p_identity():
    assert tc.schatten_p(np.eye(3), 0.5) == pytest.approx(3.0, abs=1e-12)


def test_schatten_p_diag():
    m = np.diag([4.0, 1.0])
    assert tc.schatten_p(m, 0.5) == pytest.approx(3.0, abs=1e-12)


def test_schatten_p_matches_oracle_p07():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(6, 8))
    oracle = float(np.sum(_power_iteration_svals(m, 6) ** 0.7))
    assert tc.schatten_p(m, 0.7) == pytest.approx(oracle, rel=1e-8)


def test_schatten_p_rejects_bad_p():
    with pytest.raises(ValueError):
        tc.schatten_p(np.eye(2), 0.0)
    with pytest.raises(ValueError):
        tc.schatten_p(np.eye(2), 1.5)


def test_schatten_p_nonfinite():
    with pytest.raises(FloatingPointError):
        tc.schatten_p(np.array([[np.nan, 0.0], [0.0, 1.0]]), 0.5)


# ---------------------------------------------------------------------------
# metrics

def test_psnr_identical_inf():
    t = np.random.default_rng(4).uniform(size=(5, 5))
    assert np.isinf(tc.psnr(t, t))


def test_psnr_known_value():
    ref = np.ones((4, 4))
    est = np.full((4, 4), 0.9)
    assert tc.psnr(ref, est) == pytest.approx(20.0, abs=1e-10)


def test_psnr_matches_direct_formula():
    rng = np.random.default_rng(5)
    a = rng.uniform(size=(6, 7))
    b = rng.uniform(size=(6, 7))
    mse = np.mean((a - b) ** 2)
    assert tc.psnr(a, b) == pytest.approx(10 * np.log10(1.0 / mse), abs=1e-12)


def test_nrmse_basic():
    rng = np.random.default_rng(6)
    a = rng.uniform(size=(5, 5)) + 0.1
    assert tc.nrmse(a, a) == 0.0
    assert tc.nrmse(a, 2 * a) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        tc.nrmse(np.zeros((3, 3)), np.ones((3, 3)))


def test_shape_mismatch_raises():
    with pytest.raises(tc.ShapeError):
        tc.psnr(np.zeros((2, 2)), np.zeros((3, 3)))


# ---------------------------------------------------------------------------
# ssim

def _ssim_oracle(x, y):
    # direct sliding-window implementation, loops only
    size, sigma = 11, 1.5
    ax = np.arange(size) - 5.0
    g = np.exp(-(ax ** 2) / (2 * sigma * sigma))
    kern = np.outer(g, g)
    kern /= kern.sum()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            wx = x[i:i + size, j:j + size]
            wy = y[i:i + size, j:j + size]
            mx = (kern * wx).sum()
            my = (kern * wy).sum()
            sxx = (kern * wx * wx).sum() - mx * mx
            syy = (kern * wy * wy).sum() - my * my
            sxy = (kern * wx * wy).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * sxy + c2))
                        / ((mx * mx + my * my + c1) * (sxx + syy + c2)))
    return float(np.mean(vals))


def test_ssim_identical_is_one():
    t = np.random.default_rng(7).uniform(size=(16, 16, 2))
    assert tc.ssim(t, t) == pytest.approx(1.0, abs=1e-12)


def test_ssim_negative_image_degrades():
    t = np.random.default_rng(8).uniform(size=(16, 16))
    assert tc.ssim(t, 1.0 - t) < 1.0


def test_ssim_matches_sliding_window_oracle():
    rng = np.random.default_rng(9)
    a = rng.uniform(size=(14, 15))
    b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
    assert tc.ssim(a, b) == pytest.approx(_ssim_oracle(a, b), abs=1e-10)


def test_ssim_small_image_rejected():
    with pytest.raises(tc.ShapeError):
        tc.ssim(np.zeros((8, 8)), np.zeros((8, 8)))


# ---------------------------------------------------------------------------
# point metrics

def test_chamfer_bruteforce_oracle():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(30, 3))
    b = rng.normal(size=(20, 3))
    d_ab = np.mean([min(np.linalg.norm(p - q) for q in b) for p in a])
    d_ba = np.mean([min(np.linalg.norm(q - p) for p in a) for q in b])
    assert tc.chamfer(a, b) == pytest.approx(0.5 * (d_ab + d_ba), abs=1e-12)


def test_chamfer_identical_zero():
    a = np.random.default_rng(11).normal(size=(15, 3))
    assert tc.chamfer(a, a) == 0.0


def test_chamfer_symmetry():
    rng = np.random.default_rng(12)
    a = rng.normal(size=(25, 3))
    b = rng.normal(size=(31, 3))
    assert tc.chamfer(a, b) == pytest.approx(tc.chamfer(b, a), abs=1e-12)


def test_f_score_exact_subsample_values():
    # an exact k-fraction subsample at tight threshold gives 2k/(1+k)
    rng = np.random.default_rng(13)
    gt = rng.normal(size=(1000, 3))
    for frac, expected in ((0.2, 1.0 / 3.0), (0.05, 2 * 0.05 / 1.05)):
        pred = gt[: int(1000 * frac)]
        assert tc.f_score(pred, gt, 1e-9) == pytest.approx(expected, abs=1e-12)


def test_f_score_zero_when_disjoint():
    a = np.zeros((5, 3))
    b = np.full((5, 3), 100.0)
    assert tc.f_score(a, b, 0.01) == 0.0


def test_auto_fscore_threshold():
    gt = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]])
    assert tc.auto_fscore_threshold(gt) == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(ValueError):
        tc.auto_fscore_threshold(np.zeros((3, 3)))
