import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathprop.classical import BoundaryData
from pathprop.core import PhysicsConfig
from pathprop.errors import ConvergenceFailure, InvalidParameterError, OracleDomainError, SingularFormError
from pathprop.kernels import free_kernel
from pathprop.quadrature import (
    GaussianForm,
    OscillatoryQuadratureConfig,
    brute_force_gaussian,
    delta_gaussian,
    gaussian_closed_form,
    inverse_sqrt_det,
    momentum_kernel_integral,
    momentum_kernel_ladder,
    regulated_momentum_closed_form,
    richardson_to_zero,
)
from pathprop.verification import random_gaussian_form


@pytest.mark.parametrize(
    "A, B, expected",
    [
        ([[2.0]], [0.0], 1.7724539),
        (np.eye(2), [0.0, 0.0], 2 * math.pi),
        ([[1.0]], [1.0], 4.1327313),
    ],
)
def test_closed_form_reference_values(A, B, expected):
    g = GaussianForm(A, B)
    assert gaussian_closed_form(g) == pytest.approx(expected, rel=1e-7)
    assert brute_force_gaussian(g, cutoff=30, samples=20001 if g.dim == 1 else 2001) == pytest.approx(
        expected, rel=1e-7
    )


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("dim", [1, 2])
def test_closed_form_matches_brute_force(seed, dim):
    g = random_gaussian_form(np.random.default_rng(seed), dim)
    brute = brute_force_gaussian(g, cutoff=12.0, samples=20001 if dim == 1 else 1201)
    assert abs(gaussian_closed_form(g) - brute) < 1e-8 * abs(brute)


def test_det_exponent_is_minus_half():
    A = np.array([[3.0, 0.5], [0.5, 2.0]])
    g = GaussianForm(A, [0.0, 0.0])
    assert gaussian_closed_form(g) == pytest.approx(2 * math.pi / math.sqrt(np.linalg.det(A)))


def test_fresnel_branch():
    # purely imaginary A = i a: each eigenvalue contributes exp(-i pi/4)/sqrt(a)
    val = inverse_sqrt_det(1j * np.diag([2.0, 0.5, 1.0]))
    assert val == pytest.approx(cmath.exp(-3j * math.pi / 4))
    val = inverse_sqrt_det(-1j * np.eye(1) * 4.0)
    assert val == pytest.approx(cmath.exp(1j * math.pi / 4) / 2)


@given(eps=st.floats(0.0, 5.0), a=st.floats(0.2, 5.0))
@settings(max_examples=40, deadline=None)
def test_branch_continuous_along_deformation(eps, a):
    # moving eps slightly never makes the root jump
    v1 = inverse_sqrt_det([[eps + 1j * a]])
    v2 = inverse_sqrt_det([[eps + 1e-6 + 1j * a]])
    assert abs(v1 - v2) < 1e-5 * abs(v1)


def test_form_validation():
    with pytest.raises(InvalidParameterError):
        GaussianForm([[1.0, 2.0], [0.0, 1.0]], [0, 0])
    with pytest.raises(InvalidParameterError):
        GaussianForm([[-1.0]], [0])
    with pytest.raises(InvalidParameterError):
        GaussianForm([[1.0]], [0, 0])
    with pytest.raises(SingularFormError):
        gaussian_closed_form(GaussianForm([[0.0]], [1.0]))
    with pytest.raises(OracleDomainError):
        brute_force_gaussian(GaussianForm([[1j]], [0.0]))


def test_truncated_brute_force_underestimates():
    g = GaussianForm([[1.0]], [0.0])
    assert brute_force_gaussian(g, cutoff=1.0, samples=1001).real < math.sqrt(2 * math.pi)


def test_trapezoid_error_quarters_when_samples_double():
    g = GaussianForm([[1.0]], [0.0])
    exact = math.sqrt(2 * math.pi) * math.erf(1 / math.sqrt(2))
    errs = [abs(brute_force_gaussian(g, cutoff=1.0, samples=n) - exact) for n in (101, 201, 401)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_delta_gaussian():
    assert delta_gaussian([0.0], 1.0) == pytest.approx(0.5641896, rel=1e-7)
    eps = 0.01
    x = np.linspace(-10 * math.sqrt(eps), 10 * math.sqrt(eps), 4001)
    vals = np.array([delta_gaussian([xi], eps) for xi in x])
    assert np.trapezoid(vals, x) == pytest.approx(1.0, abs=1e-10)
    xs = [0.5]
    seq = [delta_gaussian(xs, e) for e in (0.2, 0.05, 0.0125)]
    assert seq[0] > seq[1] > seq[2]
    with pytest.raises(InvalidParameterError):
        delta_gaussian([0.0], 0.0)


def test_richardson_removes_polynomial():
    eps = [0.4, 0.2, 0.1, 0.05]
    vals = [2 + 3 * e - e**2 + 0.5 * e**3 for e in eps]
    assert richardson_to_zero(eps, vals)[-1] == pytest.approx(2.0, abs=1e-12)
    # column one only removes the linear term
    assert abs(richardson_to_zero(eps, vals)[1] - 2.0) > 1e-4


def test_quadrature_config_validation():
    with pytest.raises(InvalidParameterError):
        OscillatoryQuadratureConfig(eps_ladder=(0.1, 0.05))
    with pytest.raises(InvalidParameterError):
        OscillatoryQuadratureConfig(eps_ladder=(0.1, 0.2, 0.05))
    with pytest.raises(InvalidParameterError):
        OscillatoryQuadratureConfig(samples=32)


# -- momentum integral ---------------------------------------------------------

def test_momentum_integral_reference_value():
    b = BoundaryData([0.0], [0.0], 1.0)
    val = momentum_kernel_integral(b, PhysicsConfig())
    assert val == pytest.approx(0.2820948 - 0.2820948j, abs=1e-7)
    # and agrees with the Gaussian formula at eps = 0 (Fresnel branch)
    assert regulated_momentum_closed_form(b, PhysicsConfig(), 0.0) == pytest.approx(val, abs=1e-7)


@pytest.mark.parametrize("eps", [0.01, 0.0025, 0.001])
def test_regulated_integral_matches_closed_form_per_rung(eps):
    cfg = PhysicsConfig(mass=2.0)
    b = BoundaryData([0.0], [1.0], 1.0)
    res = momentum_kernel_ladder(b, cfg, OscillatoryQuadratureConfig(eps_ladder=(4 * eps, 2 * eps, eps)))
    for e, raw in zip(res.eps, res.raw):
        assert raw == pytest.approx(regulated_momentum_closed_form(b, cfg, e), rel=1e-9)


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("dx", [0.0, 1.0, 3.0])
@pytest.mark.parametrize("m, hbar", [(1.0, 1.0), (2.0, 0.5), (0.25, 3.0)])
def test_momentum_modulus_and_phase(T, dx, m, hbar):
    cfg = PhysicsConfig(mass=m, hbar=hbar)
    b = BoundaryData([0.0], [dx], T)
    res = momentum_kernel_ladder(b, cfg)
    assert res.nyquist_ok
    mod = math.sqrt(m / (2 * math.pi * hbar * T))
    assert abs(res.value) == pytest.approx(mod, rel=1e-6)
    S = m * dx * dx / (2 * T)
    dphase = cmath.phase(res.value * cmath.exp(-1j * S / hbar))
    assert dphase == pytest.approx(-math.pi / 4, abs=1e-6)
    assert all(d2 < d1 for d1, d2 in zip(res.differences, res.differences[1:]))


def test_momentum_even_and_rotation_invariant():
    cfg = PhysicsConfig()
    a = momentum_kernel_integral(BoundaryData([0.0], [1.3], 0.8), cfg)
    b = momentum_kernel_integral(BoundaryData([0.0], [-1.3], 0.8), cfg)
    assert abs(a - b) <= 1e-10 * abs(a)
    cfg2 = PhysicsConfig(dim=2)
    u = momentum_kernel_integral(BoundaryData([0, 0], [1.0, 0.0], 1.0), cfg2)
    v = momentum_kernel_integral(BoundaryData([0, 0], [0.6, 0.8], 1.0), cfg2)
    assert abs(u - v) <= 1e-8 * abs(u)


def test_momentum_three_dimensions():
    cfg = PhysicsConfig(dim=3)
    b = BoundaryData([0, 0, 0], [0.5, -0.2, 0.1], 1.0)
    q = OscillatoryQuadratureConfig(samples=4096)
    val = momentum_kernel_integral(b, cfg, q)
    assert abs(val) == pytest.approx(0.0634936, rel=1e-4)
    assert abs(val - free_kernel(b, cfg).value) < 1e-4 * abs(val)


def test_large_action_needs_adaptive_ladder():
    b = BoundaryData([0.0], [6.0], 1.0)
    cfg = PhysicsConfig()
    ref = free_kernel(b, cfg).value
    assert abs(momentum_kernel_integral(b, cfg) / ref - 1) < 1e-7
    fixed = OscillatoryQuadratureConfig(adaptive=False)
    assert abs(momentum_kernel_ladder(b, cfg, fixed).value / ref - 1) > 1e-6


def test_bad_ladder_raises_convergence_failure():
    # regulators this large are far from the linear regime at dx = 3, T = 0.5
    b = BoundaryData([0.0], [3.0], 0.5)
    q = OscillatoryQuadratureConfig(eps_ladder=(0.2, 0.1, 0.05, 0.025), adaptive=False)
    with pytest.raises(ConvergenceFailure) as info:
        momentum_kernel_ladder(b, PhysicsConfig(), q)
    assert "differences" in info.value.diagnostics
