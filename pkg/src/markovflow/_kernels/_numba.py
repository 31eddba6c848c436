"""numba-compiled kernels; same contracts as ``_numpy``.

Matrices here are tiny (d <= 64, usually <= 6) so explicit loops beat BLAS
dispatch.
"""

import math

import numpy as np
from numba import njit

TAYLOR_DEGREE = 18
SCALE_TARGET = 0.5


@njit(cache=True)
def _matmul(A, B, out):
    n = A.shape[0]
    m = B.shape[1]
    p = A.shape[1]
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(p):
                acc += A[i, k] * B[k, j]
            out[i, j] = acc


@njit(cache=True)
def _expm_one(A, out):
    d = A.shape[0]
    norm = 0.0
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += abs(A[i, j])
        if row > norm:
            norm = row
    s = 0
    if norm > SCALE_TARGET:
        s = int(math.ceil(math.log2(norm / SCALE_TARGET)))
    scale = math.ldexp(1.0, -s)
    X = A * scale
    E = np.eye(d)
    tmp = np.empty((d, d))
    for k in range(TAYLOR_DEGREE, 0, -1):
        _matmul(X, E, tmp)
        for i in range(d):
            for j in range(d):
                E[i, j] = tmp[i, j] / k
            E[i, i] += 1.0
    for _ in range(s):
        _matmul(E, E, tmp)
        E[:, :] = tmp
    out[:, :] = E


@njit(cache=True)
def expm_batch(A):
    n = A.shape[0]
    d = A.shape[1]
    out = np.empty((n, d, d))
    for i in range(n):
        _expm_one(np.ascontiguousarray(A[i]), out[i])
    return out


@njit(cache=True)
def cumsimpson(y, h):
    n_int = y.shape[0]
    n_nodes = y.shape[1]
    m = y.shape[2]
    out = np.empty_like(y)
    carry = np.zeros(m)
    for i in range(n_int):
        hi = h[i]
        for c in range(m):
            out[i, 0, c] = carry[c]
        for k in range(0, n_nodes - 1, 2):
            for c in range(m):
                y0 = y[i, k, c]
                y1 = y[i, k + 1, c]
                y2 = y[i, k + 2, c]
                base = out[i, k, c]
                out[i, k + 1, c] = base + hi / 12.0 * (5.0 * y0 + 8.0 * y1 - y2)
                out[i, k + 2, c] = base + hi / 3.0 * (y0 + 4.0 * y1 + y2)
        for c in range(m):
            carry[c] = out[i, n_nodes - 1, c]
    return out


@njit(cache=True)
def rk4_propagate(M0, Qs, h):
    n_steps = Qs.shape[0]
    d = M0.shape[0]
    out = np.empty((n_steps + 1, d, d))
    M = M0.copy()
    out[0] = M
    k1 = np.empty((d, d))
    k2 = np.empty((d, d))
    k3 = np.empty((d, d))
    k4 = np.empty((d, d))
    tmp = np.empty((d, d))
    for s in range(n_steps):
        hk = h[s]
        _matmul(M, Qs[s, 0], k1)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = M[i, j] + 0.5 * hk * k1[i, j]
        _matmul(tmp, Qs[s, 1], k2)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = M[i, j] + 0.5 * hk * k2[i, j]
        _matmul(tmp, Qs[s, 1], k3)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = M[i, j] + hk * k3[i, j]
        _matmul(tmp, Qs[s, 2], k4)
        for i in range(d):
            for j in range(d):
                M[i, j] += hk / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        out[s + 1] = M
    return out


@njit(cache=True)
def pbs_series(A, h, tol, max_terms):
    n_int = A.shape[0]
    n_nodes = A.shape[1]
    d = A.shape[2]
    term = np.zeros((n_int, n_nodes, d, d))
    total = np.zeros((n_int, n_nodes, d, d))
    for i in range(n_int):
        for k in range(n_nodes):
            for a in range(d):
                term[i, k, a, a] = 1.0
                total[i, k, a, a] = 1.0
    prod = np.empty((n_int, n_nodes, d * d))
    tmp = np.empty((d, d))
    n = 0
    last = np.inf
    while n < max_terms:
        for i in range(n_int):
            for k in range(n_nodes):
                _matmul(term[i, k], A[i, k], tmp)
                for a in range(d):
                    for b in range(d):
                        prod[i, k, a * d + b] = tmp[a, b]
        cum = cumsimpson(prod, h)
        last = 0.0
        for i in range(n_int):
            for k in range(n_nodes):
                for a in range(d):
                    for b in range(d):
                        v = cum[i, k, a * d + b]
                        term[i, k, a, b] = v
                        total[i, k, a, b] += v
                        if abs(v) > last:
                            last = abs(v)
        n += 1
        if last < tol:
            break
    return total, n, last
