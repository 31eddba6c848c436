"""Time-dependent generator families for the forward equation dM/dt = M Q(t).

Three kinds are supported:

``EqualInputFamily``   Q(t) = Q_{q(t)}
``PerturbedFamily``    Q(t) = mu(t) Q0 + C_{q(t)},  q traceless, mu > 0
``CommutingFamily``    Q(t) = sum_k a_k(t) K_k + C_{q(t)},  K_k pairwise commuting

All three evaluate densely at arrays of times and expose the exact integral
of their trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidFamily, NotCommuting, SchemaError
from .timefn import TimeFunction, VectorTimeFunction

TRACE_TOL = 1e-12
COMMUTE_TOL = 1e-12
SAMPLES = 1000


def _equal_rows(v):
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[-1]
    return np.broadcast_to(v[..., None, :], v.shape[:-1] + (d, d))


def _sample_times(horizon, n=SAMPLES):
    return horizon * np.arange(1, n + 1) / n


def _check_traceless(q: VectorTimeFunction, horizon):
    ts = _sample_times(horizon)
    vals = q(ts)
    tr = vals.sum(axis=-1)
    scale = np.maximum(1.0, np.abs(vals).sum(axis=-1))
    bad = np.abs(tr) > TRACE_TOL * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise InvalidFamily("q(t) must be traceless", t=round(float(ts[i]), 4), trace=float(tr[i]))


def _check_zero_row_sums(K, label):
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise SchemaError("matrix must be square", path=label, shape=K.shape)
    res = float(np.abs(K.sum(axis=1)).max())
    if res > TRACE_TOL * max(1.0, float(np.abs(K).max())) * K.shape[0]:
        raise InvalidFamily("matrix must have zero row sums", which=label, residual=res)


def _frozen(K):
    K = np.array(K, dtype=np.float64)
    K.flags.writeable = False
    return K


@dataclass(frozen=True, eq=False)
class EqualInputFamily:
    q: VectorTimeFunction
    kind = "EQUAL_INPUT"

    @property
    def dim(self) -> int:
        return self.q.dim

    def generator(self, t, anchor=None):
        qv = self.q(t, anchor)
        d = self.dim
        return _equal_rows(qv) - qv.sum(axis=-1)[..., None, None] * np.eye(d)

    def trace(self, t, anchor=None):
        return -(self.dim - 1) * self.q.summatory(t, anchor)

    def trace_integral(self, t):
        return -(self.dim - 1) * self.q.summatory_antiderivative(t)

    def breakpoints(self):
        return self.q.breakpoints()

    def validate(self, horizon):
        return self

    def is_rate(self, horizon, n=SAMPLES) -> bool:
        ts = np.concatenate([[0.0], _sample_times(horizon, n)])
        bps = [b for b in self.breakpoints() if b <= horizon]
        vals = self.q(ts)
        ok = bool(np.all(vals >= -TRACE_TOL))
        if bps:
            bps = np.asarray(bps)
            left = self.q(bps, bps - 1e-9 * max(1.0, horizon))
            ok = ok and bool(np.all(left >= -TRACE_TOL))
        return ok


@dataclass(frozen=True, eq=False)
class PerturbedFamily:
    mu: TimeFunction
    Q0: np.ndarray
    q: VectorTimeFunction
    kind = "PERTURBED"

    def __post_init__(self):
        object.__setattr__(self, "Q0", _frozen(self.Q0))
        if self.Q0.shape != (self.q.dim, self.q.dim):
            raise SchemaError("Q0 shape does not match q", Q0=self.Q0.shape, dim=self.q.dim)

    @property
    def dim(self) -> int:
        return self.q.dim

    def generator(self, t, anchor=None):
        mu = np.asarray(self.mu(t, anchor))
        return mu[..., None, None] * self.Q0 + _equal_rows(self.q(t, anchor))

    def trace(self, t, anchor=None):
        return np.asarray(self.mu(t, anchor)) * float(np.trace(self.Q0))

    def trace_integral(self, t):
        return self.mu.antiderivative(t) * float(np.trace(self.Q0))

    def u(self, t):
        return self.mu.antiderivative(t)

    def breakpoints(self):
        return tuple(sorted(set(self.mu.breakpoints()) | set(self.q.breakpoints())))

    def validate(self, horizon):
        ts = _sample_times(horizon)
        mu = self.mu(ts)
        bad = mu <= 0.0
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvalidFamily("mu(t) must be strictly positive", t=round(float(ts[i]), 4), mu=float(mu[i]))
        _check_traceless(self.q, horizon)
        _check_zero_row_sums(self.Q0, "Q0")
        return self


@dataclass(frozen=True, eq=False)
class CommutingFamily:
    terms: tuple  # ((TimeFunction, matrix), ...)
    q: VectorTimeFunction
    kind = "COMMUTING"

    def __post_init__(self):
        terms = tuple((fn, _frozen(K)) for fn, K in self.terms)
        if not terms:
            raise SchemaError("commuting family needs at least one term")
        for _, K in terms:
            if K.shape != (self.q.dim, self.q.dim):
                raise SchemaError("term matrix shape does not match q", K=K.shape, dim=self.q.dim)
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self) -> int:
        return self.q.dim

    def Q0(self, t, anchor=None):
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros(t.shape + (self.dim, self.dim))
        for fn, K in self.terms:
            out += np.asarray(fn(t, anchor))[..., None, None] * K
        return out

    def R0(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros(t.shape + (self.dim, self.dim))
        for fn, K in self.terms:
            out += np.asarray(fn.antiderivative(t))[..., None, None] * K
        return out

    def generator(self, t, anchor=None):
        return self.Q0(t, anchor) + _equal_rows(self.q(t, anchor))

    def trace(self, t, anchor=None):
        return sum(np.asarray(fn(t, anchor)) * float(np.trace(K)) for fn, K in self.terms)

    def trace_integral(self, t):
        return sum(np.asarray(fn.antiderivative(t)) * float(np.trace(K)) for fn, K in self.terms)

    def breakpoints(self):
        out = set(self.q.breakpoints())
        for fn, _ in self.terms:
            out.update(fn.breakpoints())
        return tuple(sorted(out))

    def commutator_norm(self) -> float:
        worst = 0.0
        for i, (_, A) in enumerate(self.terms):
            for _, B in self.terms[i + 1 :]:
                worst = max(worst, float(np.abs(A @ B - B @ A).max()))
        return worst

    def validate(self, horizon):
        norm = self.commutator_norm()
        if norm > COMMUTE_TOL:
            raise NotCommuting("constant matrices of Q0(t) do not commute", commutator_norm=norm)
        for k, (_, K) in enumerate(self.terms):
            _check_zero_row_sums(K, f"terms[{k}].K")
        _check_traceless(self.q, horizon)
        return self


def perturbed_as_commuting(fam: PerturbedFamily) -> CommutingFamily:
    return CommutingFamily(((fam.mu, fam.Q0),), fam.q)
