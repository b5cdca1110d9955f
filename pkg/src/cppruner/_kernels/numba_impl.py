"""Numba-compiled hot kernels.  See numpy_impl for the reference semantics."""

import numpy as np
from numba import njit

_U = np.uint64


@njit(cache=True)
def xoshiro256pp_fill(state, out):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    for i in range(out.shape[0]):
        x = s0 + s3
        out[i] = ((x << _U(23)) | (x >> _U(41))) + s0
        t = s1 << _U(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << _U(45)) | (s3 >> _U(19))
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


@njit(cache=True)
def jacobi_eigvals_sym(a, tol, max_sweeps):
    n = a.shape[0]
    if n == 1:
        return a[0, :1].copy()
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                v = abs(a[p, q])
                if v > off:
                    off = v
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
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    out = np.empty(n)
    for i in range(n):
        out[i] = a[i, i]
    return out


@njit(cache=True)
def cp_reconstruct_3d(u1, u2, u3):
    rank = u1.shape[0]
    ni = u1.shape[1]
    nj = u2.shape[1]
    nk = u3.shape[1]
    out = np.zeros((ni, nj, nk))
    for r in range(rank):
        for i in range(ni):
            a = u1[r, i]
            for j in range(nj):
                ab = a * u2[r, j]
                for k in range(nk):
                    out[i, j, k] += ab * u3[r, k]
    return out


@njit(cache=True)
def nn_min_sqdists(a, b):
    n = a.shape[0]
    m = b.shape[0]
    dim = a.shape[1]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(m):
            s = 0.0
            for k in range(dim):
                d = a[i, k] - b[j, k]
                s += d * d
            if s < best:
                best = s
        out[i] = best
    return out
