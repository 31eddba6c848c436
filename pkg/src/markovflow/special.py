"""Scalar special functions, Bernoulli numbers and small dense matrix functions.

Scalar kernels (all finite at u = 0 by continuous extension)::

    H(u)       = (1 - exp(-u)) / u          H(0) = 1
    F(u)       = u / (exp(u) - 1)           F(0) = 1
    G(u)       = (F(u) - 1) / u             G(0) = -1/2
    STAMM_H(u) = -u - log F(u)              STAMM_H(0) = 0,  d/du STAMM_H = G

F has simple poles at 2 pi i n, n != 0; so does G.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from . import _kernels
from .errors import IllConditioned, PoleProximity

TWO_PI = 2.0 * math.pi
POLE_MARGIN = 0.1
EIG_COND_MAX = 1e6
TAYLOR_RADIUS = 0.9 * TWO_PI
SERIES_CUTOFF = 0.5
MAX_BERNOULLI = 60


class KernelKind(enum.Enum):
    H = "H"
    F = "F"
    G = "G"
    STAMM_H = "STAMM_H"


class MatrixKernel(enum.Enum):
    EXP = "EXP"
    F = "F"
    G = "G"


# Bernoulli numbers ---------------------------------------------------------


@dataclass(frozen=True)
class BernoulliTable:
    """Exact Bernoulli numbers b_0..b_N with the convention b_1 = -1/2."""

    values: tuple

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    @property
    def N(self) -> int:
        return len(self.values) - 1


@lru_cache(maxsize=None)
def _bernoulli_exact(N):
    b = [Fraction(1)]
    for m in range(1, N + 1):
        acc = Fraction(0)
        binom = 1
        for k in range(m):
            acc += binom * b[k]
            binom = binom * (m + 1 - k) // (k + 1)
        b.append(-acc / (m + 1))
    return tuple(b)


def bernoulli_numbers(N: int) -> BernoulliTable:
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N}")
    if N > MAX_BERNOULLI:
        raise ValueError(f"N={N} exceeds the supported table size {MAX_BERNOULLI}")
    return BernoulliTable(_bernoulli_exact(N))


@lru_cache(maxsize=None)
def f_taylor_coefficients(n_terms: int) -> np.ndarray:
    """Float coefficients c_n = b_n / n! of F(u) = sum c_n u^n, n < n_terms.

    Exact rationals up to n = 60, then c_2m = (-1)^(m+1) 2 zeta(2m) / (2 pi)^2m.
    """
    c = np.zeros(n_terms)
    exact = _bernoulli_exact(min(n_terms - 1, MAX_BERNOULLI))
    for n, bn in enumerate(exact):
        c[n] = float(bn / math.factorial(n))
    for n in range(MAX_BERNOULLI + 1, n_terms):
        if n % 2 == 0:
            m = n // 2
            sign = 1.0 if m % 2 == 1 else -1.0
            c[n] = sign * 2.0 * zeta(n) * math.exp(-n * math.log(TWO_PI))
    c.flags.writeable = False
    return c


_SERIES_TERMS = 40


def _series(u, coeffs, shift=0):
    # sum_n coeffs[n + shift] u^n by Horner
    acc = np.zeros_like(u)
    for n in range(len(coeffs) - 1 - shift, -1, -1):
        acc = acc * u + coeffs[n + shift]
    return acc


def _g_series(u):
    return _series(u, f_taylor_coefficients(_SERIES_TERMS), shift=1)


def _stamm_series(u):
    c = f_taylor_coefficients(_SERIES_TERMS)
    coeffs = np.zeros(_SERIES_TERMS)
    coeffs[1:] = c[1:] / np.arange(1, _SERIES_TERMS)
    return _series(u, coeffs)


def _f_any(u):
    small = np.abs(u) < SERIES_CUTOFF
    out = np.empty_like(u)
    out[small] = _series(u[small], f_taylor_coefficients(_SERIES_TERMS))
    big = ~small
    out[big] = u[big] / np.expm1(u[big])
    return out


def _g_any(u):
    small = np.abs(u) < SERIES_CUTOFF
    out = np.empty_like(u)
    out[small] = _g_series(u[small])
    big = ~small
    ub = u[big]
    out[big] = (ub / np.expm1(ub) - 1.0) / ub
    return out


def _h(u):
    out = np.ones_like(u)
    nz = u != 0
    out[nz] = -np.expm1(-u[nz]) / u[nz]
    return out


def _stamm(u):
    out = np.empty_like(u)
    small = np.abs(u) < SERIES_CUTOFF
    out[small] = _stamm_series(u[small])
    pos = (~small) & (u > 0)
    neg = (~small) & (u < 0)
    out[pos] = np.log1p(-np.exp(-u[pos])) - np.log(u[pos])
    out[neg] = -u[neg] + np.log(np.expm1(u[neg]) / u[neg])
    return out


_SCALAR = {
    KernelKind.H: _h,
    KernelKind.F: _f_any,
    KernelKind.G: _g_any,
    KernelKind.STAMM_H: _stamm,
}


def kernel_eval(kind, u):
    """Evaluate a scalar kernel at real ``u`` (scalar or array)."""
    kind = KernelKind(kind) if not isinstance(kind, KernelKind) else kind
    arr = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("kernel_eval needs finite input")
    out = _SCALAR[kind](np.atleast_1d(arr).astype(np.float64))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def h_fn(u):
    return kernel_eval(KernelKind.H, u)


def f_fn(u):
    return kernel_eval(KernelKind.F, u)


def g_fn(u):
    return kernel_eval(KernelKind.G, u)


# matrix functions ------------------------------------------------------------


def pole_distance(eigs) -> float:
    """Smallest distance from any eigenvalue to a pole 2 pi i n with n != 0."""
    eigs = np.atleast_1d(np.asarray(eigs, dtype=np.complex128))
    best = np.inf
    for lam in eigs:
        k = int(round(lam.imag / TWO_PI))
        for n in (k - 1, k, k + 1):
            if n == 0:
                continue
            best = min(best, abs(lam - 1j * TWO_PI * n))
    return float(best)


def check_poles(B, margin=POLE_MARGIN, eigs=None):
    if eigs is None:
        eigs = np.linalg.eigvals(np.asarray(B, dtype=np.float64))
    dist = pole_distance(eigs)
    if dist < margin:
        raise PoleProximity("eigenvalue too close to a pole 2*pi*i*n", distance=round(dist, 6))
    return eigs


def _taylor_matrix(kind, B):
    # powers of B / (2 pi) stay bounded inside the disc; the rescaled
    # coefficients c_n (2 pi)^n are O(1)
    d = B.shape[0]
    n_terms = 4000
    c = f_taylor_coefficients(n_terms)
    n = np.arange(n_terms)
    scaled = np.zeros(n_terms)
    head = min(n_terms, MAX_BERNOULLI + 1)
    scaled[:head] = c[:head] * TWO_PI ** n[:head]
    for k in range(head, n_terms, 1):
        if k % 2 == 0:
            scaled[k] = (1.0 if (k // 2) % 2 == 1 else -1.0) * 2.0 * zeta(k)
    shift = 1 if kind is MatrixKernel.G else 0
    Bs = B / TWO_PI
    prefactor = 1.0 / TWO_PI if shift else 1.0
    S = scaled[shift] * np.eye(d)
    P = np.eye(d)
    quiet = 0
    for n in range(1, n_terms - shift):
        P = P @ Bs
        coef = scaled[n + shift]
        if coef == 0.0:
            continue
        term = coef * P
        S = S + term
        if np.abs(term).max() <= 1e-17 * max(1.0, np.abs(S).max()):
            quiet += 1
            if quiet >= 2:
                return prefactor * S
        else:
            quiet = 0
    raise IllConditioned("Taylor fallback did not converge", terms=n_terms)


def matrix_kernel_eval(kind, B) -> np.ndarray:
    """exp, F or G of a small real square matrix.

    EXP uses scaling and squaring.  F and G use an eigendecomposition when
    the eigenvector matrix has condition number <= 1e6, else the Taylor
    series (only valid for spectral radius <= 0.9 * 2 pi).
    """
    kind = MatrixKernel(kind) if not isinstance(kind, MatrixKernel) else kind
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"square matrix required, got shape {B.shape}")
    if kind is MatrixKernel.EXP:
        return _kernels.expm_batch(B[None])[0]
    lam, V = np.linalg.eig(B)
    check_poles(B, eigs=lam)
    cond = np.linalg.cond(V)
    if np.isfinite(cond) and cond <= EIG_COND_MAX:
        fl = _f_any(lam) if kind is MatrixKernel.F else _g_any(lam)
        out = (V * fl) @ np.linalg.inv(V)
        return np.ascontiguousarray(out.real)
    rho = float(np.abs(lam).max()) if lam.size else 0.0
    if rho > TAYLOR_RADIUS:
        raise IllConditioned(
            "defective matrix outside the Taylor disc", spectral_radius=round(rho, 6), cond=cond
        )
    return _taylor_matrix(kind, B)
