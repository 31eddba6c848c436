import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.linalg import expm

from markovflow.algebra import constant_input_generator
from markovflow.errors import IllConditioned, PoleProximity
from markovflow.special import (
    KernelKind,
    MatrixKernel,
    bernoulli_numbers,
    f_fn,
    f_taylor_coefficients,
    g_fn,
    h_fn,
    kernel_eval,
    matrix_kernel_eval,
    pole_distance,
)

from conftest import random_rate

# (u, h, f, g, stamm_h) from 40-digit mpmath evaluation of the defining formulas
MPMATH = [
    (-50.0, 1.0369411057174144928e20, 50.0, -0.98, 46.087976994571853941),
    (-3.5, 9.1758434167692325002, 3.6089818074022992517, -0.74542337354351407191, 2.2165743152491723707),
    (-1e-9, 1.0000000005000000002, 1.0000000005000000001, -0.50000000008333333333, 5.0000000004166666667e-10),
    (1e-9, 0.99999999950000000017, 0.99999999950000000008, -0.49999999991666666667, -4.9999999995833333333e-10),
    (0.25, 0.88479686771438052702, 0.88020291604694961606, -0.47918833581220153577, -0.12239718832614151527),
    (2.0, 0.43233235838169365405, 0.31303528549933130364, -0.34348235725033434818, -0.83856063842880436639),
    (37.5, 0.026666666666666665287, 1.940833127175700801e-15, -0.026666666666666614911, -3.6243409329763651829),
]


class TestScalarKernels:
    @pytest.mark.parametrize("u,h,f,g,s", MPMATH)
    def test_against_mpmath(self, u, h, f, g, s):
        for kind, ref in ((KernelKind.H, h), (KernelKind.F, f), (KernelKind.G, g), (KernelKind.STAMM_H, s)):
            assert kernel_eval(kind, u) == pytest.approx(ref, rel=1e-14, abs=0.0)

    def test_values_at_zero(self):
        assert h_fn(0.0) == 1.0 and f_fn(0.0) == 1.0 and g_fn(0.0) == -0.5
        assert kernel_eval(KernelKind.STAMM_H, 0.0) == 0.0

    def test_reflection(self):
        assert kernel_eval("F", 1.0) - kernel_eval("F", -1.0) == pytest.approx(-1.0, abs=1e-15)

    def test_stamm_is_integral_of_g(self):
        # mpmath quadrature of g over [0, 0.7]: -0.32966605886965271114...
        assert kernel_eval(KernelKind.STAMM_H, 0.7) == pytest.approx(-0.3296660588696527111, abs=1e-15)
        val, _ = quad(lambda v: g_fn(v), 0.0, 0.7, epsabs=1e-15)
        assert abs(kernel_eval(KernelKind.STAMM_H, 0.7) - val) <= 1e-12

    @given(st.floats(-50, 50).filter(lambda u: abs(u) > 1e-300))
    def test_defining_identities(self, u):
        assert f_fn(u) * math.expm1(u) == pytest.approx(u, rel=1e-13)
        assert u * h_fn(u) == pytest.approx(-math.expm1(-u), rel=1e-14, abs=1e-300)

    @given(st.floats(1e-6, 50))
    def test_stamm_log_form(self, u):
        assert kernel_eval(KernelKind.STAMM_H, u) == pytest.approx(-u + math.log(math.expm1(u) / u), rel=1e-13, abs=1e-13)

    def test_array_input(self):
        u = np.linspace(-2, 2, 7).reshape(7, 1)
        out = kernel_eval(KernelKind.F, u)
        assert out.shape == (7, 1)
        assert np.allclose(out.ravel(), [f_fn(v) for v in u.ravel()], rtol=1e-15)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            kernel_eval(KernelKind.H, float("nan"))
        with pytest.raises(ValueError):
            kernel_eval(KernelKind.F, [0.0, float("inf")])


class TestBernoulli:
    def test_small_values(self):
        b = bernoulli_numbers(10)
        assert b[0] == 1 and b[1] == Fraction(-1, 2) and b[2] == Fraction(1, 6) and b[3] == 0
        assert len(b) == 11 and b.N == 10

    def test_against_sympy(self):
        b = bernoulli_numbers(60)
        for n in range(61):
            ref = sympy.bernoulli(n)
            if n == 1:
                ref = -abs(ref)  # sympy >= 1.12 returns +1/2
            assert b[n] == Fraction(int(ref.p), int(ref.q))

    def test_odd_vanish(self):
        b = bernoulli_numbers(60)
        assert all(b[2 * m + 1] == 0 for m in range(1, 30))

    def test_partial_sums_reproduce_f(self):
        b = bernoulli_numbers(30)
        for u in (0.5, -1.0, 1.0):
            s = sum(float(b[n] / math.factorial(n)) * u**n for n in range(31))
            assert abs(s - f_fn(u)) <= 1e-13

    def test_limits(self):
        with pytest.raises(ValueError):
            bernoulli_numbers(61)
        with pytest.raises(ValueError):
            bernoulli_numbers(-1)

    def test_float_coefficients_tail(self):
        c = f_taylor_coefficients(80)
        exact = sympy.bernoulli(70) / sympy.factorial(70)
        assert c[70] == pytest.approx(float(exact), rel=1e-14)
        assert c[71] == 0.0


class TestMatrixKernels:
    def test_zero_matrix(self):
        assert np.array_equal(matrix_kernel_eval(MatrixKernel.F, np.zeros((3, 3))), np.eye(3))
        assert np.array_equal(matrix_kernel_eval(MatrixKernel.EXP, np.zeros((3, 3))), np.eye(3))

    def test_constant_input_spectrum(self):
        B = constant_input_generator(3)
        F = matrix_kernel_eval(MatrixKernel.F, B)
        ev = np.sort(np.linalg.eigvals(F).real)
        assert np.allclose(ev, sorted([1.0, f_fn(-1.0), f_fn(-1.0)]), atol=1e-13)

    def test_defining_identity(self, rng):
        for _ in range(10):
            B = random_rate(rng, 4)
            B *= 2.0 / np.abs(np.linalg.eigvals(B)).max()
            F = matrix_kernel_eval(MatrixKernel.F, B)
            assert np.abs(F @ (expm(B) - np.eye(4)) - B).max() <= 1e-9

    def test_g_relation(self, rng):
        B = random_rate(rng, 4)
        F = matrix_kernel_eval(MatrixKernel.F, B)
        G = matrix_kernel_eval(MatrixKernel.G, B)
        assert np.abs(G @ B - (F - np.eye(4))).max() <= 1e-12

    def test_similarity(self, rng):
        V = np.eye(4) + 0.3 * rng.uniform(-1, 1, (4, 4))
        assert np.linalg.cond(V) <= 1e3
        D = np.diag([0.5, -1.0, 2.0, 0.0])
        B = V @ D @ np.linalg.inv(V)
        F = matrix_kernel_eval(MatrixKernel.F, B)
        expected = V @ np.diag([f_fn(v) for v in np.diag(D)]) @ np.linalg.inv(V)
        assert np.abs(F - expected).max() <= 1e-9

    def test_defective_uses_taylor(self):
        N = np.array([[0.0, 3.0], [0.0, 0.0]])
        assert np.allclose(matrix_kernel_eval(MatrixKernel.F, N), np.eye(2) - N / 2, atol=1e-14)
        assert np.allclose(matrix_kernel_eval(MatrixKernel.G, N), -np.eye(2) / 2 + N / 12, atol=1e-14)

    def test_defective_outside_disc(self):
        B = np.array([[6.0, 1.0], [0.0, 6.0]])
        with pytest.raises(IllConditioned):
            matrix_kernel_eval(MatrixKernel.F, B)

    def test_pole_guard(self):
        w = 2 * math.pi
        B = np.array([[0.0, w], [-w, 0.0]])
        assert pole_distance(np.linalg.eigvals(B)) < 1e-12
        with pytest.raises(PoleProximity):
            matrix_kernel_eval(MatrixKernel.F, B)
        rot = np.array([[0.0, w - 0.2], [-(w - 0.2), 0.0]])
        F = matrix_kernel_eval(MatrixKernel.F, rot)
        assert np.abs(F @ (expm(rot) - np.eye(2)) - rot).max() <= 1e-9
