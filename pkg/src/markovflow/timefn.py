"""Exactly evaluable scalar and vector time functions.

Each function can be evaluated at arrays of times and integrated exactly
from 0.  ``anchor`` selects the piece of a piecewise function independently
of ``t``, so a quadrature interval ending on a breakpoint can use the
left-hand piece at its right end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError


class TimeFunction:
    kind: str = ""

    def __call__(self, t, anchor=None):
        raise NotImplementedError

    def antiderivative(self, t):
        """Integral from 0 to t."""
        raise NotImplementedError

    def breakpoints(self):
        return ()

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(TimeFunction):
    c: float
    kind = "constant"

    def __call__(self, t, anchor=None):
        return np.full(np.shape(t), float(self.c))

    def antiderivative(self, t):
        return self.c * np.asarray(t, dtype=np.float64)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class Polynomial(TimeFunction):
    coeffs: tuple  # ascending powers
    kind = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise SchemaError("polynomial needs at least one coefficient")

    def __call__(self, t, anchor=None):
        t = np.asarray(t, dtype=np.float64)
        return np.polynomial.polynomial.polyval(t, self.coeffs) + np.zeros_like(t)

    def antiderivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        integ = (0.0,) + tuple(c / (k + 1) for k, c in enumerate(self.coeffs))
        return np.polynomial.polynomial.polyval(t, integ) + np.zeros_like(t)

    def to_dict(self):
        return {"kind": self.kind, "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Exponential(TimeFunction):
    """a * exp(k t)"""

    a: float
    k: float
    kind = "exponential"

    def __call__(self, t, anchor=None):
        return self.a * np.exp(self.k * np.asarray(t, dtype=np.float64))

    def antiderivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.k == 0.0:
            return self.a * t
        return self.a * np.expm1(self.k * t) / self.k

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "k": self.k}


@dataclass(frozen=True)
class Sinusoid(TimeFunction):
    """a * sin(omega t + phi) + offset"""

    a: float
    omega: float
    phi: float = 0.0
    offset: float = 0.0
    kind = "sinusoid"

    def __call__(self, t, anchor=None):
        t = np.asarray(t, dtype=np.float64)
        return self.a * np.sin(self.omega * t + self.phi) + self.offset

    def antiderivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.omega == 0.0:
            return (self.a * math.sin(self.phi) + self.offset) * t
        osc = (math.cos(self.phi) - np.cos(self.omega * t + self.phi)) / self.omega
        return self.a * osc + self.offset * t

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "omega": self.omega, "phi": self.phi, "offset": self.offset}


@dataclass(frozen=True)
class Piecewise(TimeFunction):
    """``pieces[i]`` applies on [breaks[i-1], breaks[i]) with breaks[-1] = 0.

    Pieces are evaluated in absolute time.
    """

    breaks: tuple
    pieces: tuple
    kind = "piecewise"

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if len(self.pieces) != len(breaks) + 1:
            raise SchemaError(
                "piecewise needs len(pieces) == len(breakpoints) + 1",
                pieces=len(self.pieces),
                breakpoints=len(breaks),
            )
        if any(b <= 0.0 for b in breaks) or any(b1 >= b2 for b1, b2 in zip(breaks, breaks[1:])):
            raise SchemaError("piecewise breakpoints must be positive and strictly increasing", breakpoints=breaks)

    def _index(self, where):
        return np.searchsorted(np.asarray(self.breaks), where, side="right")

    def __call__(self, t, anchor=None):
        t = np.asarray(t, dtype=np.float64)
        where = t if anchor is None else np.broadcast_to(np.asarray(anchor, dtype=np.float64), t.shape)
        idx = self._index(where)
        out = np.zeros(t.shape)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece(t[mask], None if anchor is None else where[mask])
        return out

    def antiderivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        edges = (0.0,) + self.breaks + (np.inf,)
        out = np.zeros(t.shape)
        for i, piece in enumerate(self.pieces):
            lo, hi = edges[i], edges[i + 1]
            upper = np.clip(t, lo, hi)
            contrib = piece.antiderivative(upper) - piece.antiderivative(np.full(t.shape, lo))
            out += np.where(t > lo, contrib, 0.0)
        return out

    def breakpoints(self):
        inner = set(self.breaks)
        for p in self.pieces:
            inner.update(p.breakpoints())
        return tuple(sorted(inner))

    def to_dict(self):
        return {
            "kind": self.kind,
            "breakpoints": list(self.breaks),
            "pieces": [p.to_dict() for p in self.pieces],
        }


def _num(node, key, path, default=None):
    if key not in node:
        if default is not None:
            return default
        raise SchemaError("missing field", path=f"{path}.{key}")
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SchemaError("expected a number", path=f"{path}.{key}", got=type(val).__name__)
    if not math.isfinite(val):
        raise SchemaError("expected a finite number", path=f"{path}.{key}")
    return float(val)


def time_function_from_dict(node, path="$") -> TimeFunction:
    """Build a TimeFunction from its tagged-object JSON form.

    Bare numbers are accepted as constants.
    """
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return Constant(float(node))
    if not isinstance(node, dict):
        raise SchemaError("time function must be an object or a number", path=path)
    kind = node.get("kind")
    if kind == "constant":
        return Constant(_num(node, "c", path))
    if kind == "polynomial":
        coeffs = node.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise SchemaError("coeffs must be a non-empty list", path=f"{path}.coeffs")
        return Polynomial(tuple(_num({"c": c}, "c", f"{path}.coeffs[{i}]") for i, c in enumerate(coeffs)))
    if kind == "exponential":
        return Exponential(_num(node, "a", path), _num(node, "k", path))
    if kind == "sinusoid":
        return Sinusoid(
            _num(node, "a", path),
            _num(node, "omega", path),
            _num(node, "phi", path, 0.0),
            _num(node, "offset", path, 0.0),
        )
    if kind == "piecewise":
        bps = node.get("breakpoints")
        pieces = node.get("pieces")
        if not isinstance(bps, list) or not isinstance(pieces, list):
            raise SchemaError("piecewise needs 'breakpoints' and 'pieces' lists", path=path)
        breaks = tuple(_num({"b": b}, "b", f"{path}.breakpoints[{i}]") for i, b in enumerate(bps))
        subs = tuple(time_function_from_dict(p, f"{path}.pieces[{i}]") for i, p in enumerate(pieces))
        try:
            return Piecewise(breaks, subs)
        except SchemaError as exc:
            exc.context.setdefault("path", path)
            raise
    raise SchemaError("unknown time function kind", path=f"{path}.kind", kind=kind)


@dataclass(frozen=True)
class VectorTimeFunction:
    """d scalar time functions, evaluated as a row vector."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 2:
            raise SchemaError("vector time function needs at least 2 components")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, t, anchor=None):
        return np.stack([c(t, anchor) for c in self.components], axis=-1)

    def antiderivative(self, t):
        return np.stack([c.antiderivative(t) for c in self.components], axis=-1)

    def summatory(self, t, anchor=None):
        return self(t, anchor).sum(axis=-1)

    def summatory_antiderivative(self, t):
        return self.antiderivative(t).sum(axis=-1)

    def breakpoints(self):
        out = set()
        for c in self.components:
            out.update(c.breakpoints())
        return tuple(sorted(out))

    def to_list(self):
        return [c.to_dict() for c in self.components]

    @classmethod
    def from_list(cls, specs, path="$"):
        if not isinstance(specs, list):
            raise SchemaError("expected a list of time functions", path=path)
        if len(specs) < 2:
            raise SchemaError("vector time function needs at least 2 components", path=path)
        return cls(tuple(time_function_from_dict(s, f"{path}[{i}]") for i, s in enumerate(specs)))

    @classmethod
    def constant(cls, values):
        return cls(tuple(Constant(float(v)) for v in values))
