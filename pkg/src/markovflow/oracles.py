"""Independent numerical ground truth for the closed forms.

* ``pbs_solve``       Peano-Baker series on a shared refined partition
* ``pbs_terms``       the individual Peano-Baker iterates
* ``ode_solve``       RK4 (fixed step) or Dormand-Prince 5(4) (adaptive)
* ``dense_expm``      scaling and squaring with a Taylor core
* ``dense_logm_principal``  integral representation, adaptive quadrature
* ``magnus_residual`` finite-difference check of the Magnus ODE
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from . import _kernels
from .errors import (
    DimensionMismatch,
    NonpositiveSpectrum,
    QuadratureNotConverged,
    SeriesNotConverged,
    StepUnderflow,
)
from .quadrature import Partition, make_knots
from .special import bernoulli_numbers


@dataclass(frozen=True)
class PBSConfig:
    tol: float = 1e-10
    max_terms: int = 60
    panels: tuple = (16, 1 << 14)  # first and last n_sub of the doubling schedule

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_terms < 3:
            raise ValueError("max_terms must be >= 3")


@dataclass(frozen=True)
class ODEConfig:
    method: str = "RK45_ADAPTIVE"
    step: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if self.method not in ("RK4_FIXED", "RK45_ADAPTIVE"):
            raise ValueError(f"unknown ODE method {self.method!r}")
        if not (self.step > 0 and self.rtol > 0 and self.atol > 0):
            raise ValueError("step and tolerances must be positive")


@dataclass(frozen=True)
class PBSInfo:
    n_terms: int
    n_sub: int
    change: float


def _times(t):
    arr = np.asarray(t, dtype=np.float64)
    return arr, np.atleast_1d(arr)


def _initial(M0, d):
    return np.eye(d) if M0 is None else np.asarray(M0, dtype=np.float64)


def pbs_solve(family, t, cfg: PBSConfig = PBSConfig(), M0=None, return_info=False):
    """Solution of dM/dt = M Q(t), M(0) = M0 by the Peano-Baker series.

    ``t`` may be a scalar or an array of times; the result has a matching
    leading shape.
    """
    arr, times = _times(t)
    d = family.dim
    start = _initial(M0, d)
    knots, index = make_knots(times, family.breakpoints())
    if knots.size == 1:
        out = np.broadcast_to(start, times.shape + (d, d)).copy()
        info = PBSInfo(0, 0, 0.0)
        out = out.reshape(arr.shape + (d, d))
        return (out, info) if return_info else out
    term_tol = 0.01 * cfg.tol
    prev = None
    n_sub = cfg.panels[0]
    change = np.inf
    while n_sub <= cfg.panels[1]:
        part = Partition(knots, n_sub)
        A = family.generator(part.nodes, part.anchors)
        total, n_terms, last = _kernels.pbs_series(A, part.h, term_tol, cfg.max_terms)
        if last >= term_tol:
            raise SeriesNotConverged("Peano-Baker series hit max_terms", max_terms=cfg.max_terms, last=last)
        cur = part.at_knots(total)[index]
        if prev is not None:
            change = float(np.abs(cur - prev).max())
            if change <= cfg.tol * max(1.0, float(np.abs(cur).max())):
                out = (start @ cur).reshape(arr.shape + (d, d))
                info = PBSInfo(n_terms, n_sub, change)
                return (out, info) if return_info else out
        prev = cur
        n_sub *= 2
    raise QuadratureNotConverged("Peano-Baker quadrature did not settle", last_change=change, tol=cfg.tol)


def pbs_terms(family, t: float, n_terms: int, n_sub: int = 256) -> list[np.ndarray]:
    """The iterates I_0 = 1, I_(n+1)(t) = int_0^t I_n A on one fixed partition."""
    d = family.dim
    knots, index = make_knots([t], family.breakpoints())
    if knots.size == 1:
        return [np.eye(d)] + [np.zeros((d, d))] * n_terms
    part = Partition(knots, n_sub)
    A = family.generator(part.nodes, part.anchors)
    term = np.broadcast_to(np.eye(d), A.shape)
    out = [np.eye(d)]
    for _ in range(n_terms):
        term = part.cumulative(term @ A)
        out.append(part.at_knots(term)[index[0]])
    return out


# ODE integrators -------------------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_BSTAR = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B - _DP_BSTAR


def _dp_interval(family, M, a, b, anchor, rtol, atol):
    h = b - a
    q_norm = float(np.abs(family.generator(np.array([a]), np.array([anchor]))[0]).sum(axis=1).max())
    h = min(h, 0.1 / max(q_norm, 1e-12))
    t = a
    K = np.empty((7,) + M.shape)
    while t < b:
        if b - t <= h * (1 + 1e-12):
            h = b - t
        if h <= 1e-14 * max(1.0, abs(t)):
            raise StepUnderflow("adaptive step size underflow", t=t, h=h)
        ts = t + _DP_C * h
        Qs = family.generator(ts, np.full(7, anchor))
        for i in range(7):
            Y = M.copy()
            for j, aij in enumerate(_DP_A[i]):
                if aij:
                    Y += h * aij * K[j]
            K[i] = Y @ Qs[i]
        M_new = M + h * np.tensordot(_DP_B, K, axes=1)
        err = h * np.tensordot(_DP_E, K, axes=1)
        scale = atol + rtol * np.maximum(np.abs(M), np.abs(M_new))
        e = float(np.abs(err / scale).max())
        if e <= 1.0:
            t = b if h == b - t else t + h
            M = M_new
        factor = 0.9 * e ** (-0.2) if e > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return M


def ode_solve(family, t, cfg: ODEConfig = ODEConfig(), M0=None):
    """Numerical solution of dM/dt = M Q(t), M(0) = M0 (identity by default).

    Breakpoints of piecewise families are always step boundaries.
    """
    arr, times = _times(t)
    d = family.dim
    start = _initial(M0, d)
    knots, index = make_knots(times, family.breakpoints())
    at_knots = np.empty((knots.size, d, d))
    at_knots[0] = start
    if cfg.method == "RK4_FIXED":
        Qs, hs, ends = [], [], []
        for a, b in zip(knots[:-1], knots[1:]):
            n = max(1, math.ceil((b - a) / cfg.step - 1e-9))
            h = (b - a) / n
            t0 = a + h * np.arange(n)
            stages = np.stack([t0, t0 + 0.5 * h, t0 + h], axis=1)
            stages[-1, 2] = b
            Qs.append(family.generator(stages, np.full(stages.shape, 0.5 * (a + b))))
            hs.append(np.full(n, h))
            ends.append(n)
        if Qs:
            traj = _kernels.rk4_propagate(start, np.concatenate(Qs), np.concatenate(hs))
            at_knots[1:] = traj[np.cumsum(ends)]
    else:
        M = start.copy()
        for i, (a, b) in enumerate(zip(knots[:-1], knots[1:])):
            M = _dp_interval(family, M, a, b, 0.5 * (a + b), cfg.rtol, cfg.atol)
            at_knots[i + 1] = M
    return at_knots[index].reshape(arr.shape + (d, d))


# dense matrix functions ------------------------------------------------------


def dense_expm(B):
    """Matrix exponential of one matrix (d, d) or a stack (..., d, d)."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim < 2 or B.shape[-1] != B.shape[-2]:
        raise ValueError(f"square matrices required, got shape {B.shape}")
    flat = B.reshape((-1,) + B.shape[-2:])
    return _kernels.expm_batch(flat).reshape(B.shape)


def dense_logm_principal(B, epsabs=1e-14, epsrel=1e-13):
    """Principal logarithm via log B = int_0^1 (B - I)(s (B - I) + I)^(-1) ds."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"square matrix required, got shape {B.shape}")
    eig = np.linalg.eigvals(B)
    scale = max(1.0, float(np.abs(eig).max()))
    on_axis = (np.abs(eig.imag) <= 1e-12 * scale) & (eig.real <= 1e-14 * scale)
    if np.any(on_axis):
        raise NonpositiveSpectrum("eigenvalue on the closed negative real axis", eigenvalue=complex(eig[on_axis][0]))
    d = B.shape[0]
    A = B - np.eye(d)

    def integrand(s):
        return np.linalg.solve(s * A + np.eye(d), A)

    val, err = quad_vec(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, norm="max", limit=2000)
    if not np.all(np.isfinite(val)):
        raise QuadratureNotConverged("logm integral is not finite")
    return val


def twisted_adjoint_power(R, Q, n: int):
    """n-fold twisted adjoint: X -> X R - R X applied n times to Q."""
    R = np.asarray(R, dtype=np.float64)
    X = np.asarray(Q, dtype=np.float64)
    if R.shape != X.shape:
        raise DimensionMismatch("matrix shapes differ", R=R.shape, Q=X.shape)
    if n < 0:
        raise ValueError("n must be non-negative")
    for _ in range(n):
        X = X @ R - R @ X
    return X


def magnus_series(R, Q, N: int):
    """sum_{n<=N} b_n / n! * twisted-ad^n_R(Q)."""
    b = bernoulli_numbers(N)
    X = np.asarray(Q, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    out = float(b[0]) * X
    for n in range(1, N + 1):
        X = X @ R - R @ X
        coef = float(b[n] / math.factorial(n))
        if coef:
            out = out + coef * X
    return out


def magnus_residual(family, t: float, N: int = 8, fd_step: float = 1e-5, tol: float = 1e-12) -> float:
    """max-abs of (R(t+h) - R(t-h)) / 2h minus the truncated Bernoulli ad-series.

    R is the closed-form principal logarithm for the family's kind.
    """
    from .flows import closed_form_log

    if t - fd_step < 0.0:
        raise ValueError("t must be at least fd_step")
    times = np.array([t - fd_step, t, t + fd_step])
    R = closed_form_log(family, times, tol=tol)
    Rdot = (R[2] - R[0]) / (2.0 * fd_step)
    Q = family.generator(np.array([t]))[0]
    return float(np.abs(Rdot - magnus_series(R[1], Q, N)).max())
