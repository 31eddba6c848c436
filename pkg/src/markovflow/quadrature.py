"""Shared refined partitions and cumulative composite Simpson quadrature.

A ``Partition`` splits [0, T] at a set of knots (output times and
breakpoints) and samples every knot interval with ``n_sub`` equal panels.
Nested integrals are evaluated node-by-node on the same partition, and
``refine`` doubles ``n_sub`` until the knot values settle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import QuadratureNotConverged

MAX_NODES = 1 << 23


def make_knots(times, breakpoints=(), merge_tol=1e-13):
    """Sorted knots containing 0, every time and every interior breakpoint.

    Returns ``(knots, index)`` where ``knots[index[i]] == times[i]``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if np.any(times < 0.0):
        raise ValueError("times must be non-negative")
    end = float(times.max()) if times.size else 0.0
    extra = [b for b in breakpoints if 0.0 < b < end]
    pts = np.unique(np.concatenate([[0.0], times, np.asarray(extra, dtype=np.float64)]))
    keep = [0]
    for i in range(1, pts.size):
        if pts[i] - pts[keep[-1]] > merge_tol * max(1.0, abs(pts[i])):
            keep.append(i)
    knots = pts[keep]
    index = np.searchsorted(knots, times - merge_tol * np.maximum(1.0, np.abs(times)), side="left")
    index = np.minimum(index, knots.size - 1)
    return knots, index


class Partition:
    def __init__(self, knots, n_sub):
        if n_sub < 2 or n_sub % 2:
            raise ValueError("n_sub must be even and >= 2")
        knots = np.asarray(knots, dtype=np.float64)
        self.knots = knots
        self.n_sub = int(n_sub)
        lo, hi = knots[:-1], knots[1:]
        self.h = (hi - lo) / n_sub
        frac = np.arange(n_sub + 1) / n_sub
        self.nodes = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        self.nodes[:, -1] = hi
        self.anchors = np.broadcast_to((0.5 * (lo + hi))[:, None], self.nodes.shape)

    @property
    def n_intervals(self) -> int:
        return self.knots.size - 1

    def cumulative(self, values):
        """Cumulative integral from 0 of node values shaped (n_int, n_sub+1, ...)."""
        values = np.asarray(values, dtype=np.float64)
        tail = values.shape[2:]
        flat = values.reshape(values.shape[0], values.shape[1], -1)
        out = _kernels.cumsimpson(flat, self.h)
        return out.reshape(values.shape[:2] + tail)

    def at_knots(self, node_values):
        node_values = np.asarray(node_values)
        return np.concatenate([node_values[:1, 0], node_values[:, -1]], axis=0)


@dataclass(frozen=True)
class QuadInfo:
    n_sub: int
    error: float
    levels: int


def refine(compute, knots, tol, k_start=3, k_max=20):
    """Evaluate ``compute(partition)`` with n_sub = 2^k, k = k_start, ...

    ``compute`` must return an array whose first axis indexes knots.  Stops
    when the max-abs change between successive levels is below
    ``tol * max(1, |result|)``.
    """
    n_int = max(1, len(knots) - 1)
    prev = None
    err = np.inf
    for k in range(k_start, k_max + 1):
        n_sub = 1 << k
        if prev is not None and n_int * (n_sub + 1) > MAX_NODES:
            break
        cur = np.asarray(compute(Partition(knots, n_sub)))
        if prev is not None:
            err = float(np.abs(cur - prev).max()) if cur.size else 0.0
            scale = max(1.0, float(np.abs(cur).max())) if cur.size else 1.0
            if err <= tol * scale:
                return cur, QuadInfo(n_sub, err, k - k_start + 1)
        prev = cur
    raise QuadratureNotConverged("cumulative Simpson did not settle", last_change=err, tol=tol)
