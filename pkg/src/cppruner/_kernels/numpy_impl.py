"""Pure-numpy implementations of the hot kernels.

These are the fallback path selected by CPPRUNER_NO_NUMBA=1 (or when numba
is not importable).  They must produce results interchangeable with the
numba versions; the integer RNG kernel is bit-exact by construction, the
floating-point kernels apply the same operations in the same order.
"""

import numpy as np

_MASK = (1 << 64) - 1


def xoshiro256pp_fill(state, out):
    """Fill ``out`` (uint64) from a xoshiro256++ stream, advancing ``state`` in place."""
    s0 = int(state[0])
    s1 = int(state[1])
    s2 = int(state[2])
    s3 = int(state[3])
    for i in range(out.shape[0]):
        x = (s0 + s3) & _MASK
        out[i] = (((x << 23) | (x >> 41)) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def jacobi_eigvals_sym(a, tol, max_sweeps):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    ``a`` is destroyed.  Sweeps stop once every off-diagonal magnitude is
    below ``tol`` or after ``max_sweeps`` sweeps.
    """
    n = a.shape[0]
    if n == 1:
        return a[0, :1].copy()
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            m = np.max(np.abs(a[p, p + 1:]))
            if m > off:
                off = m
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    return np.diag(a).copy()


def cp_reconstruct_dense(factors):
    """Sum of rank-1 outer products; r outer loop, dimensions multiplied ascending."""
    shape = tuple(f.shape[1] for f in factors)
    out = np.zeros(shape)
    rank = factors[0].shape[0]
    for r in range(rank):
        term = factors[0][r]
        for f in factors[1:]:
            term = term[..., None] * f[r]
        out += term
    return out


def nn_min_sqdists(a, b, block=256):
    """Per-row minimum squared Euclidean distance from points ``a`` to set ``b``."""
    n = a.shape[0]
    out = np.empty(n)
    for i0 in range(0, n, block):
        chunk = a[i0:i0 + block]
        d2 = ((chunk[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        out[i0:i0 + chunk.shape[0]] = d2.min(axis=1)
    return out
