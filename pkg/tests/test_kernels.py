import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathprop.classical import BoundaryData, LinearPotentialSpec
from pathprop.core import PhysicsConfig, build_grid, centered_grid, gaussian_packet
from pathprop.errors import InvalidParameterError, InvalidTimeError, ResolutionError
from pathprop.evolve import evolve_wavefunction, kernel_field, schrodinger_residual
from pathprop.kernels import (
    FREE,
    KernelSpec,
    apply_kernel,
    axis_kernel,
    check_alias_resolution,
    delta_limit_check,
    free_kernel,
    kernel,
    linear_potential_kernel,
    prefactor_modulus,
    semigroup_check,
    significant_support,
)
from pathprop.quadrature import momentum_kernel_integral


def test_free_kernel_reference_value():
    k = free_kernel(BoundaryData([0.0], [0.0], 1.0), PhysicsConfig())
    assert k.value == pytest.approx(0.2820948 - 0.2820948j, abs=1e-7)
    assert k.modulus == pytest.approx(0.3989423, abs=1e-7)
    assert k.phase == pytest.approx(-0.7853982, abs=1e-7)


def test_free_kernel_modulus_independent_of_displacement():
    cfg = PhysicsConfig()
    a = free_kernel(BoundaryData([0.0], [0.0], 1.0), cfg).modulus
    b = free_kernel(BoundaryData([0.0], [5.0], 1.0), cfg).modulus
    assert abs(a - b) <= 1e-14


def test_free_kernel_three_dimensions():
    cfg = PhysicsConfig(dim=3)
    k = free_kernel(BoundaryData([0, 0, 0], [0.3, 0.1, -0.2], 1.0), cfg)
    assert k.modulus == pytest.approx((2 * math.pi) ** -1.5, rel=1e-14)
    assert k.modulus == pytest.approx(0.0634936, abs=1e-7)


@given(
    dx=st.floats(-3, 3),
    T=st.floats(0.3, 3),
    m=st.floats(0.5, 3),
    hbar=st.floats(0.5, 2),
)
@settings(max_examples=40, deadline=None)
def test_free_kernel_against_momentum_route(dx, T, m, hbar):
    cfg = PhysicsConfig(mass=m, hbar=hbar)
    b = BoundaryData([0.0], [dx], T)
    ref = free_kernel(b, cfg).value
    assert abs(momentum_kernel_integral(b, cfg) - ref) < 1e-6 * abs(ref)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_prefactor_phase_branch(dim):
    cfg = PhysicsConfig(dim=dim)
    k = free_kernel(BoundaryData(np.zeros(dim), np.zeros(dim), 0.7), cfg)
    assert cmath.phase(k.value) == pytest.approx(-dim * math.pi / 4, abs=1e-14)
    assert k.modulus == pytest.approx(prefactor_modulus(0.7, cfg), rel=1e-15)


# -- linear potential ------------------------------------------------------

@given(
    x0=st.lists(st.floats(-3, 3), min_size=1, max_size=3),
    T=st.floats(0.1, 5),
    m=st.floats(0.2, 5),
)
@settings(max_examples=50, deadline=None)
def test_linear_kernel_reduces_bitwise(x0, T, m):
    cfg = PhysicsConfig(mass=m, dim=len(x0))
    b = BoundaryData(x0, np.array(x0)[::-1] + 0.3, T)
    zero = LinearPotentialSpec(0.0, 0.0)
    assert linear_potential_kernel(b, zero, cfg).value == free_kernel(b, cfg).value


def test_constant_potential_is_a_phase():
    cfg = PhysicsConfig(hbar=0.7)
    b = BoundaryData([0.2], [1.1], 1.3)
    c = 0.45
    val = linear_potential_kernel(b, LinearPotentialSpec(V0=c), cfg).value
    assert val == pytest.approx(free_kernel(b, cfg).value * cmath.exp(-1j * c * b.T / cfg.hbar), rel=1e-14)


def test_constant_potential_phase_on_evolved_packet():
    cfg = PhysicsConfig()
    g = centered_grid(12.0, 0.05, 1)
    psi = gaussian_packet(g, 0.5, 1.0, k0=0.3)
    c, T = 0.8, 1.5
    free = evolve_wavefunction(psi, T, FREE, cfg).values
    shifted = evolve_wavefunction(psi, T, KernelSpec.linear(V0=c), cfg).values
    np.testing.assert_allclose(shifted, free * cmath.exp(-1j * c * T), rtol=0, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_linear_kernel_solves_schrodinger(seed):
    rng = np.random.default_rng(seed)
    cfg = PhysicsConfig()
    x0, x = rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)
    T = rng.uniform(0.5, 2.0)
    spec = KernelSpec.linear(V0=0.5, F=1.0)
    r = schrodinger_residual(kernel_field(x0, cfg, spec), x, T, cfg, potential=spec.potential, x0=x0)
    assert abs(r) < 1e-6
    # wrong potential sign must fail
    wrong = LinearPotentialSpec(0.5, -1.0)
    assert abs(schrodinger_residual(kernel_field(x0, cfg, spec), x, T, cfg, potential=wrong, x0=x0)) > 1e-3


def test_linear_kernel_in_two_dimensions():
    cfg = PhysicsConfig(mass=1.5, dim=2)
    x0 = np.array([0.3, -0.2])
    spec = KernelSpec.linear(V0=-0.2, F=[0.6, -1.1], x_ref=[0.1, 0.0])
    r = schrodinger_residual(kernel_field(x0, cfg, spec), [0.8, 0.4], 1.1, cfg, potential=spec.potential)
    assert abs(r) < 1e-6


def test_kernel_rejects_bad_time():
    with pytest.raises(InvalidTimeError):
        free_kernel(BoundaryData([0.0], [1.0], 0.0), PhysicsConfig())


def test_kernel_spec_force_length():
    with pytest.raises(InvalidParameterError):
        kernel(BoundaryData([0, 0], [1, 1], 1.0), KernelSpec.linear(F=[1.0, 2.0, 3.0]), PhysicsConfig(dim=2))


# -- grid convolution ---------------------------------------------------------

def _direct_sum(values, grid, T, cfg, spec, ref):
    pts = grid.points()
    w = grid.trapezoid_weights().ravel()
    out = np.zeros(grid.size, complex)
    for i, x in enumerate(pts):
        for j, y in enumerate(pts):
            b = BoundaryData(y, x, T)
            s = spec if spec.is_free else KernelSpec(spec.potential.resolved(ref))
            out[i] += kernel(b, s, cfg).value * w[j] * values.ravel()[j]
    return out.reshape(grid.shape)


@pytest.mark.parametrize(
    "dim, spec",
    [
        (1, FREE),
        (1, KernelSpec.linear(V0=0.3, F=0.9)),
        (2, FREE),
        (2, KernelSpec.linear(V0=-0.1, F=[0.5, -0.4])),
    ],
)
def test_apply_kernel_equals_direct_sum(dim, spec):
    cfg = PhysicsConfig(dim=dim)
    grid = build_grid(-1.0, 0.25, [9] * dim)
    rng = np.random.default_rng(1)
    vals = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    ref = np.full(dim, 0.2)
    fast = apply_kernel(vals, grid, 0.8, cfg, spec, ref=ref)
    slow = _direct_sum(vals, grid, 0.8, cfg, spec, ref)
    np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-12 * np.max(np.abs(slow)))


def test_axis_kernel_midpoint_lacks_cubic_term():
    cfg = PhysicsConfig()
    F, T = 1.3, 0.4
    exact = axis_kernel(0.7, 0.1, T, cfg, F, 0.0, exact=True)
    mid = axis_kernel(0.7, 0.1, T, cfg, F, 0.0, exact=False)
    assert mid / exact == pytest.approx(cmath.exp(1j * F * F * T**3 / 24), rel=1e-14)


def test_alias_check():
    cfg = PhysicsConfig()
    grid = centered_grid(12.0, 0.02, 1)
    psi = gaussian_packet(grid, 0.0, 1.0)
    src = significant_support(psi.values)
    interior = grid.interior_mask()
    check_alias_resolution(grid, 0.2, cfg, src, interior)
    with pytest.raises(ResolutionError) as info:
        check_alias_resolution(grid, 0.05, cfg, src, interior)
    assert info.value.required_spacing < 0.02


def test_alias_prediction_is_real():
    # the rejected configuration does show an alias copy of the packet
    cfg = PhysicsConfig()
    T = 0.05
    grid = centered_grid(12.0, 0.02, 1)
    psi = gaussian_packet(grid, 0.0, 1.0)
    w = grid.trapezoid_weights() * grid.taper()
    out = apply_kernel(psi.values, grid, T, cfg, FREE, w)
    fine = centered_grid(12.0, 0.01, 1)
    psi_f = gaussian_packet(fine, 0.0, 1.0)
    out_f = apply_kernel(psi_f.values, fine, T, cfg, FREE, fine.trapezoid_weights() * fine.taper())
    x = grid.axis(0)
    far = (np.abs(x) > 5) & grid.interior_mask()
    assert np.max(np.abs(out[far] - out_f[::2][far])) > 1e-6


# -- delta limit and semigroup -------------------------------------------------

def test_delta_limit_first_order():
    cfg = PhysicsConfig()
    grid = centered_grid(10.0, 0.015, 1)
    psi = gaussian_packet(grid, 0.0, 1.0)
    rep = delta_limit_check(psi, FREE, cfg, [0.2, 0.1, 0.05])
    assert rep.passed
    assert rep.fitted_order == pytest.approx(1.0, abs=0.05)
    assert not rep.params["boundary_truncation"]


def test_delta_limit_flags_truncated_packet():
    cfg = PhysicsConfig()
    grid = centered_grid(8.0, 0.015, 1)
    rep = delta_limit_check(gaussian_packet(grid, 0.0, 1.0), FREE, cfg, [0.2, 0.1, 0.05])
    assert rep.params["boundary_truncation"] and not rep.passed


def test_delta_limit_ladder_validation():
    grid = centered_grid(10.0, 0.05, 1)
    psi = gaussian_packet(grid, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        delta_limit_check(psi, FREE, PhysicsConfig(), [0.1, 0.05])
    with pytest.raises(InvalidParameterError):
        delta_limit_check(psi, FREE, PhysicsConfig(), [0.05, 0.1, 0.2])


def test_delta_limit_with_linear_potential():
    cfg = PhysicsConfig()
    grid = centered_grid(10.0, 0.015, 1)
    psi = gaussian_packet(grid, 0.0, 1.0)
    rep = delta_limit_check(psi, KernelSpec.linear(V0=0.2, F=0.5), cfg, [0.2, 0.1, 0.05])
    assert rep.passed


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("dx", [0.0, 1.0, 3.0])
def test_semigroup_battery(T, dx):
    cfg = PhysicsConfig()
    rep = semigroup_check(BoundaryData([0.0], [dx], T), T / 2, T / 2, centered_grid(20.0, 0.01, 1), cfg)
    assert rep.passed
    assert rep.residuals[0] < 1e-4 and rep.residuals[1] < 1e-4


def test_semigroup_unequal_split_and_2d():
    cfg = PhysicsConfig(dim=2)
    b = BoundaryData([0.0, 0.5], [1.0, -0.5], 1.2)
    rep = semigroup_check(b, 0.4, 0.8, centered_grid(20.0, 0.01, 2), cfg)
    assert rep.passed


def test_semigroup_preconditions():
    cfg = PhysicsConfig()
    b = BoundaryData([0.0], [1.0], 1.0)
    with pytest.raises(InvalidParameterError):
        semigroup_check(b, 0.5, 0.6, centered_grid(20.0, 0.01, 1), cfg)
    with pytest.raises(ResolutionError):
        semigroup_check(b, 0.5, 0.5, centered_grid(20.0, 0.1, 1), cfg)
    with pytest.raises(ResolutionError):
        semigroup_check(b, 0.5, 0.5, centered_grid(1.0, 0.001, 1), cfg)


@pytest.mark.parametrize("V0", [0.5, -1.25])
def test_constant_potential_phase_sign(V0):
    cfg = PhysicsConfig()
    spec = KernelSpec.linear(V0=V0, F=0.0)
    good = kernel_field([0.1], cfg, spec)
    flipped = lambda x, T: good(x, T) * cmath.exp(2j * V0 * T)  # exp(+i V0 T) instead
    kw = dict(potential=spec.potential, x0=[0.1])
    assert abs(schrodinger_residual(good, [0.7], 1.0, cfg, **kw)) < 1e-6
    assert abs(schrodinger_residual(flipped, [0.7], 1.0, cfg, **kw)) > 1e-1
