"""Seeded fixture generators that any implementation language can reproduce.

Every random quantity comes from a 64-bit linear congruential generator

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64
    u      = (state >> 11) * 2**-53

seeded with ``state = seed mod 2**64``; the state is advanced before each
draw.  Matrices are filled row-major and diagonals are skipped where they are
determined by zero row sums.
"""

from __future__ import annotations

import math

import numpy as np

from .families import CommutingFamily, EqualInputFamily, PerturbedFamily
from .timefn import Constant, Exponential, Piecewise, Polynomial, Sinusoid, VectorTimeFunction

_A = 6364136223846793005
_C = 1442695040888963407
_MASK = (1 << 64) - 1


class Lcg:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def uniform(self) -> float:
        self.state = (_A * self.state + _C) & _MASK
        return (self.state >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)])

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + min(hi - lo, int(self.uniform() * (hi - lo + 1)))

    def symmetric(self, scale=1.0) -> float:
        return scale * (2.0 * self.uniform() - 1.0)


def int_params(rng: Lcg, d: int, lo=-10, hi=10) -> list[int]:
    return [rng.integer(lo, hi) for _ in range(d)]


def real_params(rng: Lcg, d: int, scale=1.0) -> np.ndarray:
    return np.array([rng.symmetric(scale) for _ in range(d)])


def rate_params(rng: Lcg, d: int, scale=1.0) -> np.ndarray:
    return scale * rng.uniforms(d)


def _fill_offdiag(rng: Lcg, d: int, draw) -> np.ndarray:
    Q = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            if i != j:
                Q[i, j] = draw()
    Q[np.diag_indices(d)] = -Q.sum(axis=1)
    return Q


def rate_matrix(rng: Lcg, d: int, scale=1.0) -> np.ndarray:
    """Off-diagonals scale * u, diagonal fixed by zero row sums."""
    return _fill_offdiag(rng, d, lambda: scale * rng.uniform())


def zero_row_sum_matrix(rng: Lcg, d: int, scale=1.0) -> np.ndarray:
    """Off-diagonals scale * (2u - 1), diagonal fixed by zero row sums."""
    return _fill_offdiag(rng, d, lambda: rng.symmetric(scale))


def matrix_with_radius(rng: Lcg, d: int, radius: float) -> np.ndarray:
    """Entries 2u - 1, rescaled to the given spectral radius."""
    B = np.array([[rng.symmetric() for _ in range(d)] for _ in range(d)])
    rho = float(np.abs(np.linalg.eigvals(B)).max())
    return B * (radius / rho)


def traceless_sinusoid(rng: Lcg, d: int, amp=0.2, omega=1.0) -> VectorTimeFunction:
    """q_i(t) = a_i sin(omega t) + c_i with sum(a) = sum(c) = 0."""
    a = [rng.symmetric(amp) for _ in range(d - 1)]
    c = [rng.symmetric(0.5 * amp) for _ in range(d - 1)]
    a.append(-math.fsum(a))
    c.append(-math.fsum(c))
    return VectorTimeFunction(tuple(Sinusoid(ai, omega, 0.0, ci) for ai, ci in zip(a, c)))


EI_KINDS = ("polynomial", "exponential", "sinusoid", "piecewise")


def _rate_component(rng: Lcg, kind: str):
    if kind == "polynomial":
        return Polynomial((0.05 + 0.2 * rng.uniform(), 0.1 * rng.uniform(), 0.02 * rng.uniform()))
    if kind == "exponential":
        return Exponential(0.05 + 0.3 * rng.uniform(), -1.0 + 1.2 * rng.uniform())
    if kind == "sinusoid":
        offset = 0.05 + 0.25 * rng.uniform()
        return Sinusoid(offset * rng.uniform(), 0.5 + 2.0 * rng.uniform(), 2.0 * math.pi * rng.uniform(), offset)
    if kind == "piecewise":
        pieces = (
            Constant(0.3 * rng.uniform()),
            Polynomial((0.1 * rng.uniform(), 0.1 * rng.uniform())),
            Exponential(0.05 + 0.2 * rng.uniform(), -0.5 * rng.uniform()),
        )
        return Piecewise((1.0, 2.0), pieces)
    raise ValueError(f"unknown fixture kind {kind!r}")


def rate_ei_family(rng: Lcg, d: int, kind: str) -> EqualInputFamily:
    """Equal-input family with q(t) >= 0 componentwise on t >= 0."""
    return EqualInputFamily(VectorTimeFunction(tuple(_rate_component(rng, kind) for _ in range(d))))


def ei_fixture_set(seed: int = 2024, d: int = 4, per_kind: int = 5) -> list[tuple[str, EqualInputFamily]]:
    rng = Lcg(seed)
    return [(f"{kind}-{i}", rate_ei_family(rng, d, kind)) for kind in EI_KINDS for i in range(per_kind)]


def perturbed_fixture(rng: Lcg, d: int = 4, q0_scale=None, amp=0.2) -> PerturbedFamily:
    """mu(t) = 1 + 0.5 sin t, random rate Q0, traceless sinusoidal q."""
    scale = 1.0 / (d - 1) if q0_scale is None else q0_scale
    Q0 = rate_matrix(rng, d, scale)
    return PerturbedFamily(Sinusoid(0.5, 1.0, 0.0, 1.0), Q0, traceless_sinusoid(rng, d, amp))


def perturbed_fixture_set(seed: int = 4242, n: int = 20, d: int = 4) -> list[PerturbedFamily]:
    rng = Lcg(seed)
    return [perturbed_fixture(rng, d) for _ in range(n)]


def commuting_fixture(rng: Lcg, d: int = 4, scale=None, amp=0.2) -> CommutingFamily:
    """Q0(t) = (1 + t) K + 0.5 sin(t) K^2 with K a random rate matrix."""
    K = rate_matrix(rng, d, 1.0 / (d - 1) if scale is None else scale)
    terms = ((Polynomial((1.0, 1.0)), K), (Sinusoid(0.5, 1.0), K @ K))
    return CommutingFamily(terms, traceless_sinusoid(rng, d, amp))


def magnus_zeroth_order_fixture() -> PerturbedFamily:
    """Non-commuting perturbed family on which the zeroth Magnus term alone is off by > 1e-3 at t = 0.5."""
    return perturbed_fixture(Lcg(99), 4)
