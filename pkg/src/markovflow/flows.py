"""Closed-form Markov flows and their principal logarithms.

Homogeneous equal-input exponentials and the BCH logarithm are exact.  The
time-dependent families reduce to one-dimensional (vector-valued) integrals
that are evaluated by cumulative Simpson quadrature on a refined partition
of the output grid; every inner integral of a TimeFunction is exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .algebra import (
    MARKOV_TOL,
    EqualInputGenerator,
    EqualInputMatrix,
    _check_dims,
    is_rate_dense,
)
from .errors import IllConditioned, PoleProximity, SeriesNotConverged, XGeOne
from .families import CommutingFamily, EqualInputFamily, PerturbedFamily
from .quadrature import Partition, QuadInfo, make_knots, refine
from .special import MatrixKernel, f_fn, h_fn, matrix_kernel_eval

DEFAULT_TOL = 1e-10
SERIES_TOL = 1e-12
MAX_TERMS = 60


def _rowvec_times(v, A):
    return np.einsum("...i,...ij->...j", v, A)


def _equal_rows(v):
    v = np.asarray(v, dtype=np.float64)
    return np.repeat(v[..., None, :], v.shape[-1], axis=-2)


def _check_grid(grid):
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    return grid


@dataclass
class FlowResult:
    grid: np.ndarray
    M: np.ndarray
    R: list
    det: np.ndarray
    embeddable: list
    x_traj: np.ndarray | None = None
    A0: np.ndarray | None = None
    A_tri: np.ndarray | None = None
    skipped: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.M.shape[-1]


# homogeneous closed forms -----------------------------------------------------


def ei_exp(q: EqualInputGenerator, t: float) -> EqualInputMatrix:
    """exp(t Q_x) = M_c with c = t h(t x) x, where h(u) = (1 - e^-u)/u."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    x = float(q.summatory)
    coef = t * h_fn(t * x)
    return EqualInputMatrix(np.asarray(q.params.entries, dtype=np.float64) * coef)


def bch_log(a: EqualInputGenerator, b: EqualInputGenerator) -> EqualInputGenerator:
    """Equal-input logarithm of exp(Q_a) exp(Q_b)."""
    _check_dims(a, b)
    x = float(a.summatory)
    y = float(b.summatory)
    pa = np.asarray(a.params.entries, dtype=np.float64)
    pb = np.asarray(b.params.entries, dtype=np.float64)
    z = (h_fn(x) * math.exp(-y) * pa + h_fn(y) * pb) / h_fn(x + y)
    return EqualInputGenerator(z)


def ei_principal_log(m: EqualInputMatrix):
    """Principal logarithm of M_x for x < 1 and the homogeneous embedding verdict.

    Returns ``(R, embeddable)`` with R = (-log(1 - x) / x) Q_x.
    """
    x = float(m.summatory)
    if x >= 1.0:
        raise XGeOne("equal-input logarithm needs summatory < 1", x=x)
    coef = 1.0 if x == 0.0 else -math.log1p(-x) / x
    R = EqualInputGenerator(np.asarray(m.params.entries, dtype=np.float64) * coef)
    return R, R.is_rate()


class SignClass(enum.Enum):
    POSITIVE = "POSITIVE"
    ZERO = "ZERO"
    SIGN_BY_PARITY = "SIGN_BY_PARITY"


def det_flow(family, grid, M0_det=None, x0=0.0):
    """det M(t) = det M(0) * exp(int_0^t tr Q) and the sign class of the start.

    For equal-input starts M(0) = M_{x0}, det M(0) = (1 - x0)^(d-1) unless
    ``M0_det`` is given.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    d = family.dim
    if M0_det is None:
        M0_det = (1.0 - x0) ** (d - 1)
    if x0 < 1.0:
        cls = SignClass.POSITIVE
    elif x0 == 1.0:
        cls = SignClass.ZERO
    else:
        cls = SignClass.SIGN_BY_PARITY
    return M0_det * np.exp(family.trace_integral(grid)), cls


# equal-input families --------------------------------------------------------


def _ei_weighted(family: EqualInputFamily, times, tol):
    """int_0^t exp(U(s)) q(s) ds and U(t) = int_0^t q_sum, at ``times``."""
    d = family.dim
    knots, index = make_knots(times, family.breakpoints())
    U = family.q.summatory_antiderivative(times)
    if knots.size == 1:
        return np.zeros((times.size, d)), U, QuadInfo(0, 0.0, 0)

    def compute(part):
        Un = family.q.summatory_antiderivative(part.nodes)
        vals = family.q(part.nodes, part.anchors) * np.exp(Un)[..., None]
        return part.at_knots(part.cumulative(vals))

    integral, info = refine(compute, knots, tol)
    return integral[index], U, info


def ei_flow(family: EqualInputFamily, grid, tol=DEFAULT_TOL) -> FlowResult:
    """M(t) = M_{x(t)} with x(t) = exp(-U(t)) int_0^t q(s) exp(U(s)) ds."""
    grid = _check_grid(grid)
    d = family.dim
    integral, U, info = _ei_weighted(family, grid, tol)
    x = np.exp(-U)[:, None] * integral
    M = np.empty((grid.size, d, d))
    R, emb, skipped = [], [], {}
    for i, xv in enumerate(x):
        m = EqualInputMatrix(xv)
        M[i] = m.dense()
        try:
            Ri, ok = ei_principal_log(m)
        except XGeOne as exc:
            R.append(None)
            emb.append(None)
            skipped[i] = str(exc)
        else:
            R.append(Ri.dense())
            emb.append(ok)
    det = (1.0 - x.sum(axis=1)) ** (d - 1)
    return FlowResult(
        grid,
        M,
        R,
        det,
        emb,
        x_traj=x,
        skipped=skipped,
        diagnostics={"n_sub": info.n_sub, "quadrature_change": info.error},
    )


def weighted_integral_log(family: EqualInputFamily, t, tol=DEFAULT_TOL):
    """R(t) = f(u(t)) int_0^t exp(u(s)) Q(s) ds with u = int q_sum.

    Returns one EqualInputGenerator for scalar ``t``, else a list.
    """
    arr = np.asarray(t, dtype=np.float64)
    times = np.atleast_1d(arr)
    integral, U, _ = _ei_weighted(family, times, tol)
    out = [EqualInputGenerator(f_fn(u) * v) for u, v in zip(U, integral)]
    return out[0] if arr.ndim == 0 else out


# perturbed and commuting families --------------------------------------------


def _series_guard(n, bound, contrib, series_tol):
    return n > 2.0 * bound and float(np.abs(contrib).max()) < series_tol


def _start_level(bound):
    # the discrete cumulative operator decays like (h |Q0|)^n, so keep that below ~1/4
    return max(3, int(math.ceil(math.log2(max(1.0, 4.0 * bound)))))


def _term_budget(bound, max_terms):
    # max_terms counts terms past the 2 * bound threshold the guard waits for
    return int(math.ceil(2.0 * bound)) + max_terms


def _perturbed_series(family: PerturbedFamily, times, tol, series_tol, max_terms):
    """w(t) = sum_n q^(n)(t) Q0^(n-1), so that A_tri(t) = C_w."""
    d = family.dim
    Q0 = family.Q0
    knots, index = make_knots(times, family.breakpoints())
    if knots.size == 1:
        return np.zeros((times.size, d)), QuadInfo(0, 0.0, 0), 0
    bound = float(np.abs(family.u(knots)).max()) * float(np.abs(Q0).sum(axis=1).max())
    used = [0]

    def compute(part):
        mu = family.mu(part.nodes, part.anchors)
        term = part.cumulative(family.q(part.nodes, part.anchors))
        P = np.eye(d)
        w = np.zeros((knots.size, d))
        for n in range(1, _term_budget(bound, max_terms) + 1):
            contrib = part.at_knots(term) @ P
            w += contrib
            if _series_guard(n, bound, contrib, series_tol):
                used[0] = n
                return w
            term = part.cumulative(mu[..., None] * term)
            P = P @ Q0
        raise SeriesNotConverged("perturbation series hit max_terms", max_terms=max_terms)

    w, info = refine(compute, knots, tol, k_start=_start_level(bound))
    return w[index], info, used[0]


def _commuting_bound(family: CommutingFamily, knots) -> float:
    part = Partition(knots, 8)
    norms = np.abs(family.Q0(part.nodes, part.anchors)).sum(axis=-1).max(axis=-1)
    return float(part.at_knots(part.cumulative(norms)).max())


def _commuting_series(family: CommutingFamily, times, tol, series_tol, max_terms):
    """w(t) = sum_n w_n(t), w_1 = int q, w_(n+1) = int w_n Q0, so A_tri = C_w."""
    d = family.dim
    knots, index = make_knots(times, family.breakpoints())
    if knots.size == 1:
        return np.zeros((times.size, d)), QuadInfo(0, 0.0, 0), 0
    used = [0]

    def compute(part):
        Q0n = family.Q0(part.nodes, part.anchors)
        norms = np.abs(Q0n).sum(axis=-1).max(axis=-1)
        bound = float(part.at_knots(part.cumulative(norms)).max())
        term = part.cumulative(family.q(part.nodes, part.anchors))
        w = np.zeros((knots.size, d))
        for n in range(1, _term_budget(bound, max_terms) + 1):
            contrib = part.at_knots(term)
            w += contrib
            if _series_guard(n, bound, contrib, series_tol):
                used[0] = n
                return w
            term = part.cumulative(_rowvec_times(term, Q0n))
        raise SeriesNotConverged("commuting series hit max_terms", max_terms=max_terms)

    w, info = refine(compute, knots, tol, k_start=_start_level(_commuting_bound(family, knots)))
    return w[index], info, used[0]


def _twisted_integral(family, times, tol, R0_of):
    """v(t) = int_0^t q(s) exp(-R0(s)) ds for R0 given by ``R0_of``."""
    d = family.dim
    knots, index = make_knots(times, family.breakpoints())
    if knots.size == 1:
        return np.zeros((times.size, d)), QuadInfo(0, 0.0, 0)

    def compute(part):
        R0 = R0_of(part.nodes)
        E = _kernels.expm_batch(-R0.reshape(-1, d, d)).reshape(R0.shape)
        vals = _rowvec_times(family.q(part.nodes, part.anchors), E)
        return part.at_knots(part.cumulative(vals))

    v, info = refine(compute, knots, tol)
    return v[index], info


def _log_from_twisted(R0_t, v_t):
    """R = R0 + C_{v f(-R0)}; raises PoleProximity / IllConditioned."""
    F = matrix_kernel_eval(MatrixKernel.F, -R0_t)
    return R0_t + _equal_rows(v_t @ F)


def _log_grid(family, times, tol):
    """Principal logs of a perturbed or commuting family at ``times``.

    Returns ``(R list with None where the pole guard failed, {index: error}, info)``.
    """
    R0_of = _R0_function(family)
    v, info = _twisted_integral(family, times, tol, R0_of)
    R0 = R0_of(times)
    out, reasons = [], {}
    for i in range(times.size):
        try:
            out.append(_log_from_twisted(R0[i], v[i]))
        except (PoleProximity, IllConditioned) as exc:
            out.append(None)
            reasons[i] = exc
    return out, reasons, info


def _R0_function(family):
    if isinstance(family, PerturbedFamily):
        Q0 = family.Q0
        return lambda t: np.asarray(family.u(t))[..., None, None] * Q0
    if isinstance(family, CommutingFamily):
        return family.R0
    raise TypeError(f"no R0 for family kind {family.kind}")


def _strict_logs(family, t, tol):
    arr = np.asarray(t, dtype=np.float64)
    times = np.atleast_1d(arr)
    R, reasons, _ = _log_grid(family, times, tol)
    if reasons:
        raise reasons[min(reasons)]
    out = np.stack(R)
    return out[0] if arr.ndim == 0 else out


def perturbed_log(family: PerturbedFamily, t, tol=DEFAULT_TOL):
    """R(t) = u(t) Q0 + [int_0^t C_q(s) exp(-u(s) Q0) ds] f(-u(t) Q0)."""
    return _strict_logs(family, t, tol)


def _finish_flow(family, grid, M, A0, A_tri, tol, with_log, info, n_terms):
    det, _ = det_flow(family, grid)
    R, emb, skipped = [None] * grid.size, [None] * grid.size, {}
    log_info = None
    if with_log:
        R, errors, log_info = _log_grid(family, grid, tol)
        skipped = {i: str(exc) for i, exc in errors.items()}
        emb = [None if r is None else is_rate_dense(r, MARKOV_TOL) for r in R]
    diag = {"n_sub": info.n_sub, "quadrature_change": info.error, "series_terms": n_terms}
    if log_info is not None:
        diag["log_n_sub"] = log_info.n_sub
    return FlowResult(grid, M, R, det, emb, A0=A0, A_tri=A_tri, skipped=skipped, diagnostics=diag)


def perturbed_flow(
    family: PerturbedFamily, grid, tol=DEFAULT_TOL, series_tol=SERIES_TOL, max_terms=MAX_TERMS, with_log=True
) -> FlowResult:
    """M(t) = exp(u(t) Q0) + sum_n C_{q^(n)(t)} Q0^(n-1)."""
    grid = _check_grid(grid)
    d = family.dim
    w, info, n_terms = _perturbed_series(family, grid, tol, series_tol, max_terms)
    E = _kernels.expm_batch(family.u(grid)[:, None, None] * family.Q0)
    A0 = E - np.eye(d)
    A_tri = _equal_rows(w)
    return _finish_flow(family, grid, E + A_tri, A0, A_tri, tol, with_log, info, n_terms)


@dataclass(frozen=True)
class CommutingLog:
    R: np.ndarray
    M: np.ndarray
    M_series: np.ndarray
    discrepancy: float


def commuting_flow_log(family: CommutingFamily, t, tol=DEFAULT_TOL) -> CommutingLog:
    """R = R0 + R_tri with R0 = int Q0 and R_tri from the twisted integral.

    Also evaluates the series form M = exp(R0) + sum C_{w_n}; ``discrepancy``
    is the max-abs difference between exp(R) and that series.
    """
    arr = np.asarray(t, dtype=np.float64)
    times = np.atleast_1d(arr)
    R = np.atleast_3d(_strict_logs(family, times, tol)).reshape(times.size, family.dim, family.dim)
    M = _kernels.expm_batch(R)
    w, _, _ = _commuting_series(family, times, tol, SERIES_TOL, MAX_TERMS)
    M_series = _kernels.expm_batch(family.R0(times)) + _equal_rows(w)
    disc = float(np.abs(M - M_series).max())
    if arr.ndim == 0:
        return CommutingLog(R[0], M[0], M_series[0], disc)
    return CommutingLog(R, M, M_series, disc)


def commuting_flow(
    family: CommutingFamily, grid, tol=DEFAULT_TOL, series_tol=SERIES_TOL, max_terms=MAX_TERMS, with_log=True
) -> FlowResult:
    """Series form M(t) = exp(R0(t)) + C_{w(t)} on a grid, with logs where defined."""
    grid = _check_grid(grid)
    d = family.dim
    w, info, n_terms = _commuting_series(family, grid, tol, series_tol, max_terms)
    E = _kernels.expm_batch(family.R0(grid))
    A_tri = _equal_rows(w)
    return _finish_flow(family, grid, E + A_tri, E - np.eye(d), A_tri, tol, with_log, info, n_terms)


def closed_form_flow(family, grid, tol=DEFAULT_TOL) -> FlowResult:
    if isinstance(family, EqualInputFamily):
        return ei_flow(family, grid, tol)
    if isinstance(family, PerturbedFamily):
        return perturbed_flow(family, grid, tol)
    if isinstance(family, CommutingFamily):
        return commuting_flow(family, grid, tol)
    raise TypeError(f"unsupported family {type(family).__name__}")


def closed_form_log(family, times, tol=DEFAULT_TOL) -> np.ndarray:
    """Stack of closed-form principal logarithms at arbitrary increasing times."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if isinstance(family, EqualInputFamily):
        integral, U, _ = _ei_weighted(family, times, tol)
        x = np.exp(-U)[:, None] * integral
        return np.stack([ei_principal_log(EqualInputMatrix(xv))[0].dense() for xv in x])
    return _strict_logs(family, times, tol).reshape(times.size, family.dim, family.dim)
