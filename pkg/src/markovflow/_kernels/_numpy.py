"""Vectorised numpy implementations of the hot kernels.

Every function here has a twin in ``_numba`` with identical signature and
semantics; the two are compared in ``tests/test_kernels.py`` and timed in
``benchmarks/bench_kernels.py``.
"""

import numpy as np

TAYLOR_DEGREE = 18
SCALE_TARGET = 0.5


def _squaring_counts(A):
    norms = np.abs(A).sum(axis=-1).max(axis=-1)
    s = np.zeros(norms.shape, dtype=np.int64)
    big = norms > SCALE_TARGET
    s[big] = np.ceil(np.log2(norms[big] / SCALE_TARGET)).astype(np.int64)
    return s


def expm_batch(A):
    """exp of every matrix in a stack of shape (n, d, d)."""
    A = np.asarray(A, dtype=np.float64)
    n, d, _ = A.shape
    if n == 0:
        return A.copy()
    s = _squaring_counts(A)
    X = A / np.ldexp(1.0, s)[:, None, None]
    eye = np.broadcast_to(np.eye(d), A.shape)
    E = eye.copy()
    for k in range(TAYLOR_DEGREE, 0, -1):
        E = eye + np.matmul(X, E) / k
    smax = int(s.max())
    for j in range(smax):
        active = s > j
        E[active] = np.matmul(E[active], E[active])
    return E


def cumsimpson(y, h):
    """Cumulative composite Simpson integral over consecutive intervals.

    ``y`` has shape (n_int, n_sub + 1, m) with ``n_sub`` even; interval ``i``
    is sampled uniformly with spacing ``h[i]``.  The result has the same shape
    and holds the integral from the first node of interval 0 up to each node.
    Odd nodes use the half-panel rule h/12 (5 y0 + 8 y1 - y2).
    """
    y = np.asarray(y, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)[:, None, None]
    y0 = y[:, 0:-1:2]
    y1 = y[:, 1::2]
    y2 = y[:, 2::2]
    panels = h / 3.0 * (y0 + 4.0 * y1 + y2)
    halves = h / 12.0 * (5.0 * y0 + 8.0 * y1 - y2)
    even = np.cumsum(panels, axis=1)
    out = np.empty_like(y)
    out[:, 0] = 0.0
    out[:, 2::2] = even
    out[:, 1::2] = halves
    out[:, 3::2] += even[:, :-1]
    totals = even[:, -1]
    carry = np.concatenate([np.zeros((1,) + totals.shape[1:]), np.cumsum(totals, axis=0)[:-1]])
    out += carry[:, None, :]
    return out


def rk4_propagate(M0, Qs, h):
    """Classical RK4 for dM/dt = M Q with Q sampled at (t, t+h/2, t+h)."""
    n_steps = Qs.shape[0]
    out = np.empty((n_steps + 1,) + M0.shape)
    M = np.array(M0, dtype=np.float64)
    out[0] = M
    for k in range(n_steps):
        hk = h[k]
        Qa, Qb, Qc = Qs[k, 0], Qs[k, 1], Qs[k, 2]
        k1 = M @ Qa
        k2 = (M + 0.5 * hk * k1) @ Qb
        k3 = (M + 0.5 * hk * k2) @ Qb
        k4 = (M + hk * k3) @ Qc
        M = M + hk / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = M
    return out


def pbs_series(A, h, tol, max_terms):
    """Peano-Baker partial sums on a shared partition.

    ``A`` holds the generator on the nodes, shape (n_int, n_sub + 1, d, d).
    Returns ``(total, n_terms, last_norm)`` where ``total`` is the partial
    sum at every node and ``n_terms`` counts the iterates I_1, I_2, ...
    that were added.  Stops once the sup-norm of the newest iterate is
    below ``tol``; ``n_terms == max_terms`` signals non-convergence.
    """
    n_int, n_nodes, d, _ = A.shape
    eye = np.broadcast_to(np.eye(d), A.shape)
    term = eye.copy()
    total = eye.copy()
    last = np.inf
    n = 0
    while n < max_terms:
        prod = np.matmul(term, A).reshape(n_int, n_nodes, d * d)
        term = cumsimpson(prod, h).reshape(A.shape)
        total = total + term
        n += 1
        last = float(np.abs(term).max())
        if last < tol:
            break
    return total, n, last
