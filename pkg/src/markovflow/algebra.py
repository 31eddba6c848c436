"""Structured algebra of equal-rows, equal-input and zero-row-sum matrices.

All structured matrices are stored by their parameter vector only.  With
``x`` the parameter vector and ``x`` (scalar) its summatory parameter:

* ``EqualRowsMatrix``      C_x, every row equal to x
* ``EqualInputMatrix``     M_x = (1 - x) I + C_x
* ``EqualInputGenerator``  Q_x = -x I + C_x

Parameter vectors may hold ``int``/``Fraction`` objects (``dtype=object``);
all products below then stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .errors import DimensionMismatch

MARKOV_TOL = 1e-12
NULLSPACE_RTOL = 1e-10


def _exact_sum(arr):
    if arr.dtype == object:
        return sum(arr.tolist(), 0)
    return math.fsum(arr.tolist())


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Parameter vector of length d >= 2 with cached summatory parameter."""

    entries: np.ndarray
    summatory: Real = field(init=False)

    def __post_init__(self):
        if isinstance(self.entries, ParamVector):
            arr = self.entries.entries.copy()
        else:
            arr = np.array(self.entries)
            if arr.dtype != object:
                arr = arr.astype(np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"parameter vector needs shape (d,) with d >= 2, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "summatory", _exact_sum(arr))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_exact(self) -> bool:
        return self.entries.dtype == object

    def scaled(self, lam) -> "ParamVector":
        return ParamVector(self.entries * lam)

    def __add__(self, other):
        _check_dims(self, other)
        return ParamVector(self.entries + other.entries)

    def __sub__(self, other):
        _check_dims(self, other)
        return ParamVector(self.entries - other.entries)

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.dim == other.dim and bool(np.all(self.entries == other.entries))

    def __hash__(self):
        return hash(tuple(self.entries.tolist()))

    def __repr__(self):
        return f"ParamVector({self.entries.tolist()!r})"


def _as_params(p) -> ParamVector:
    return p if isinstance(p, ParamVector) else ParamVector(p)


def _check_dims(a, b):
    if a.dim != b.dim:
        raise DimensionMismatch("dimensions differ", left=a.dim, right=b.dim)


def _eye(d, exact):
    if exact:
        out = np.zeros((d, d), dtype=object)
        out[...] = 0
        for i in range(d):
            out[i, i] = 1
        return out
    return np.eye(d)


class _Structured:
    __slots__ = ("params",)

    def __init__(self, params):
        object.__setattr__(self, "params", _as_params(params))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def summatory(self):
        return self.params.summatory

    def _rows(self):
        return np.tile(self.params.entries, (self.dim, 1))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, self.params))

    def __repr__(self):
        return f"{type(self).__name__}({self.params.entries.tolist()!r})"


class EqualRowsMatrix(_Structured):
    """C_x: every row equals the parameter vector."""

    __slots__ = ()

    def dense(self) -> np.ndarray:
        return self._rows()

    def __matmul__(self, other):
        if isinstance(other, EqualRowsMatrix):
            return c_product(self, other)
        return np.asarray(self.dense()) @ other


class EqualInputMatrix(_Structured):
    """M_x = (1 - x) I + C_x; unit row sums by construction."""

    __slots__ = ()

    def dense(self) -> np.ndarray:
        eye = _eye(self.dim, self.params.is_exact)
        return (1 - self.summatory) * eye + self._rows()

    def is_markov(self, tol=MARKOV_TOL) -> bool:
        x = np.asarray(self.params.entries, dtype=np.float64)
        s = float(self.summatory)
        return bool(np.all(x >= -tol) and np.all(1.0 + x - s >= -tol))


class EqualInputGenerator(_Structured):
    """Q_x = -x I + C_x; zero row sums by construction."""

    __slots__ = ()

    def dense(self) -> np.ndarray:
        eye = _eye(self.dim, self.params.is_exact)
        return -self.summatory * eye + self._rows()

    def is_rate(self, tol=MARKOV_TOL) -> bool:
        return bool(np.all(np.asarray(self.params.entries, dtype=np.float64) >= -tol))

    def scaled(self, lam) -> "EqualInputGenerator":
        return EqualInputGenerator(self.params.scaled(lam))

    def __add__(self, other):
        return EqualInputGenerator(self.params + other.params)

    def __mul__(self, lam):
        return self.scaled(lam)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, EqualInputGenerator):
            return q_product(self, other)
        return np.asarray(self.dense()) @ other


def c_product(a: EqualRowsMatrix, b: EqualRowsMatrix) -> EqualRowsMatrix:
    """C_a C_b = a C_b, with a the summatory parameter of the left factor."""
    _check_dims(a, b)
    return EqualRowsMatrix(b.params.scaled(a.summatory))


def q_product(a: EqualInputGenerator, b: EqualInputGenerator) -> EqualInputGenerator:
    """Q_a Q_b = -b Q_a, with b the summatory parameter of the right factor."""
    _check_dims(a, b)
    return EqualInputGenerator(a.params.scaled(-b.summatory))


def constant_input_generator(d: int) -> np.ndarray:
    """The fixed constant-input basis element J_d - I (dense)."""
    return np.full((d, d), 1.0 / d) - np.eye(d)


def decompose(q: EqualInputGenerator):
    """Split Q_q = mu (J_d - I) + C_r with mu = q (summatory) and r traceless.

    Returns ``(mu, C_r)``.
    """
    d = q.dim
    mu = q.summatory
    entries = q.params.entries
    if q.params.is_exact:
        from fractions import Fraction

        r = entries - Fraction(mu) / d
    else:
        r = entries - mu / d
    return mu, EqualRowsMatrix(r)


def recompose(mu, traceless: EqualRowsMatrix) -> np.ndarray:
    return mu * constant_input_generator(traceless.dim) + traceless.dense()


def spectrum_and_det(m: EqualInputMatrix):
    """Eigenvalues {1, 1-x (d-1 times)} and determinant (1-x)^(d-1)."""
    d = m.dim
    lam = 1 - m.summatory
    eig = np.array([1.0] + [float(lam)] * (d - 1))
    return eig, lam ** (d - 1)


def extremal_vertices(d: int) -> list[EqualInputMatrix]:
    """The d + 2 extreme points of the convex set of equal-input Markov matrices.

    Order: C_{e_1}, ..., C_{e_d}, the identity, then (C_1 - I) / (d - 1).
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    eye = np.eye(d)
    out = [EqualInputMatrix(eye[i]) for i in range(d)]
    out.append(EqualInputMatrix(np.zeros(d)))
    out.append(EqualInputMatrix(np.full(d, 1.0 / (d - 1))))
    return out


@dataclass(frozen=True)
class StructureReport:
    is_nilpotent: bool
    nilpotency_degree: int | None
    null_space_dim: int
    ideal_residual: float


def null_space_dim(A, rtol=NULLSPACE_RTOL) -> int:
    A = np.asarray(A, dtype=np.float64)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return A.shape[1]
    return int(np.sum(sv <= rtol * sv[0]))


def verify_structure(c: EqualRowsMatrix, zero_row_sum=(), traceless=(), tol=MARKOV_TOL) -> StructureReport:
    """Nilpotency, null space and nil-ideal checks for an equal-rows matrix.

    ``zero_row_sum`` are dense witnesses A with zero row sums and ``traceless``
    are further ``EqualRowsMatrix`` witnesses of trace zero.  When ``c`` is
    itself traceless, ``ideal_residual`` is the largest max-abs entry of
    A @ C and C_x @ C_y over all witnesses (0.0 if there are none).
    """
    entries = np.asarray(c.params.entries, dtype=np.float64)
    scale = max(1.0, float(np.abs(entries).sum()))
    x = float(c.summatory)
    nilpotent = abs(x) <= tol * scale
    if not np.any(entries):
        degree = 0
    elif nilpotent:
        degree = 2
    else:
        degree = None
    C = c.dense().astype(np.float64)
    residual = 0.0
    if nilpotent:
        for A in zero_row_sum:
            A = np.asarray(A, dtype=np.float64)
            if A.shape != C.shape:
                raise DimensionMismatch("witness shape", witness=A.shape, matrix=C.shape)
            residual = max(residual, float(np.abs(A @ C).max()))
        for w in traceless:
            _check_dims(c, w)
            W = w.dense().astype(np.float64)
            residual = max(residual, float(np.abs(C @ W).max()), float(np.abs(W @ C).max()))
    return StructureReport(nilpotent, degree, null_space_dim(C), residual)


# dense predicates ---------------------------------------------------------


def is_markov_dense(M, tol=MARKOV_TOL) -> bool:
    M = np.asarray(M, dtype=np.float64)
    return bool(np.all(M >= -tol) and np.all(np.abs(M.sum(axis=1) - 1.0) <= tol * max(1.0, M.shape[0])))


def is_rate_dense(Q, tol=MARKOV_TOL) -> bool:
    Q = np.asarray(Q, dtype=np.float64)
    off = Q - np.diag(np.diag(Q))
    scale = max(1.0, float(np.abs(Q).max()))
    return bool(np.all(off >= -tol * scale) and np.all(np.abs(Q.sum(axis=1)) <= tol * scale * Q.shape[0]))


def row_sum_residual(A, target=0.0) -> float:
    A = np.asarray(A, dtype=np.float64)
    return float(np.abs(A.sum(axis=-1) - target).max())


def traceless_ideal_residual(A) -> float:
    """Distance of a dense matrix from E'_0: equal rows and zero trace.

    Max-abs of the deviation of each row from the first row, combined with
    |trace|.
    """
    A = np.asarray(A, dtype=np.float64)
    rows = float(np.abs(A - A[..., :1, :]).max())
    return max(rows, float(np.abs(np.trace(A, axis1=-2, axis2=-1)).max()))


def params_of_equal_rows(A) -> np.ndarray:
    """Parameter vector of a dense matrix assumed to have equal rows."""
    return np.asarray(A, dtype=np.float64).mean(axis=-2)


def equal_input_params(M, tol=1e-10):
    """Recover x from a dense matrix of the form lam I + C_x with row sums s.

    Works for both M_x (row sums 1) and Q_x (row sums 0): the off-diagonal
    entries of column j must all equal x_j.  Returns ``None`` if the matrix
    is not of that form within ``tol``.
    """
    M = np.asarray(M, dtype=np.float64)
    d = M.shape[0]
    off = ~np.eye(d, dtype=bool)
    x = np.empty(d)
    for j in range(d):
        col = M[off[:, j], j]
        if np.ptp(col) > tol * max(1.0, float(np.abs(col).max())):
            return None
        x[j] = col.mean()
    diag_shift = np.diag(M) - x
    if np.ptp(diag_shift) > tol * max(1.0, float(np.abs(diag_shift).max())):
        return None
    return x
