"""The numba and numpy kernel paths must agree with each other and with scipy."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import cumulative_simpson
from scipy.linalg import expm

from markovflow._kernels import _numba, _numpy

from conftest import random_rate

PATHS = [pytest.param(_numpy, id="numpy"), pytest.param(_numba, id="numba")]


@pytest.mark.parametrize("impl", PATHS)
def test_expm_matches_scipy(impl, rng):
    A = np.stack([random_rate(rng, 4, s) for s in (0.01, 0.5, 3.0, 40.0)] + [rng.normal(size=(4, 4))])
    out = impl.expm_batch(A)
    for a, e in zip(A, out):
        ref = expm(a)
        assert np.abs(e - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("impl", PATHS)
def test_expm_zero_row_sums(impl, rng):
    A = np.stack([random_rate(rng, 5, 2.0) for _ in range(6)])
    out = impl.expm_batch(A)
    assert np.abs(out.sum(axis=-1) - 1.0).max() <= 1e-12


@pytest.mark.parametrize("impl", PATHS)
def test_cumsimpson_polynomial_exact(impl):
    n_sub = 8
    knots = np.array([0.0, 0.5, 1.25, 2.0])
    h = np.diff(knots) / n_sub
    nodes = knots[:-1, None] + h[:, None] * np.arange(n_sub + 1)
    y = np.stack([nodes**3, nodes**2, np.cos(nodes)], axis=-1)
    out = impl.cumsimpson(y, h)
    # cubics are exact on even nodes; the half-panel rule on odd nodes is exact for quadratics
    assert np.abs(out[..., 0] - nodes**4 / 4)[:, ::2].max() <= 1e-14
    assert np.abs(out[..., 1] - nodes**3 / 3).max() <= 1e-14
    assert np.abs(out[..., 2] - np.sin(nodes))[:, ::2].max() <= 1e-6


@pytest.mark.parametrize("impl", PATHS)
def test_cumsimpson_matches_scipy_even_nodes(impl):
    x = np.linspace(0.0, 2.0, 17)
    y = np.exp(-x) * np.sin(3 * x)
    ref = cumulative_simpson(y, x=x, initial=0.0)
    out = impl.cumsimpson(y[None, :, None], np.array([x[1] - x[0]]))[0, :, 0]
    assert np.abs(out[::2] - ref[::2]).max() <= 1e-14


def test_paths_agree(rng):
    A = rng.normal(size=(7, 3, 3))
    assert np.abs(_numba.expm_batch(A) - _numpy.expm_batch(A)).max() <= 1e-13 * np.abs(_numpy.expm_batch(A)).max()
    y = rng.normal(size=(3, 9, 4))
    h = np.array([0.1, 0.2, 0.05])
    assert np.abs(_numba.cumsimpson(y, h) - _numpy.cumsimpson(y, h)).max() <= 1e-14
    M0 = np.eye(3)
    Qs = rng.normal(size=(20, 3, 3, 3))
    hs = np.full(20, 0.01)
    assert np.abs(_numba.rk4_propagate(M0, Qs, hs) - _numpy.rk4_propagate(M0, Qs, hs)).max() <= 1e-13
    Aq = 0.3 * rng.normal(size=(2, 9, 3, 3))
    t1, n1, l1 = _numba.pbs_series(Aq, np.array([0.05, 0.05]), 1e-14, 60)
    t2, n2, l2 = _numpy.pbs_series(Aq, np.array([0.05, 0.05]), 1e-14, 60)
    assert n1 == n2 and np.abs(t1 - t2).max() <= 1e-13


@pytest.mark.parametrize("impl", PATHS)
def test_rk4_constant_generator(impl, rng):
    Q = random_rate(rng, 3)
    n = 200
    Qs = np.broadcast_to(Q, (n, 3, 3, 3)).copy()
    traj = impl.rk4_propagate(np.eye(3), Qs, np.full(n, 1.0 / n))
    assert traj.shape == (n + 1, 3, 3)
    assert np.abs(traj[-1] - expm(Q)).max() <= 1e-10


@pytest.mark.parametrize("impl", PATHS)
def test_pbs_series_constant(impl, rng):
    Q = random_rate(rng, 3, 0.5)
    n_sub = 64
    A = np.broadcast_to(Q, (1, n_sub + 1, 3, 3)).copy()
    total, n_terms, last = impl.pbs_series(A, np.array([1.0 / n_sub]), 1e-14, 60)
    assert last < 1e-14 and 3 <= n_terms < 60
    assert np.abs(total[0, -1] - expm(Q)).max() <= 1e-9


def test_backend_flag():
    code = "import markovflow._kernels as k; print(k.BACKEND)"
    for flag, expected in (("0", "numpy"), ("off", "numpy"), ("1", "numba")):
        out = subprocess.run([sys.executable, "-c", code], env={"MARKOVFLOW_JIT": flag, "PATH": ""}, capture_output=True, text=True)
        assert out.stdout.strip() == expected, out.stderr


def test_benchmark_runs_both_backends():
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(script), "--repeat", "1"], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    rows = out.stdout.strip().splitlines()[1:]
    assert [r.split()[0] for r in rows] == ["expm_batch", "cumsimpson", "rk4_propagate", "pbs_series"]
    assert all(float(r.split()[-1]) < 1e-10 for r in rows)
