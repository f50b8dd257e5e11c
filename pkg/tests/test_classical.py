from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathprop.classical import (
    BoundaryData,
    LinearPotentialSpec,
    classical_action_free,
    classical_action_linear,
    classical_energy,
    classical_momentum,
    classical_trajectory,
    discrete_action,
    free_action_derivatives,
    free_action_function,
    free_action_laplacian,
    hamilton_jacobi_residual,
    linear_action_function,
    linear_trajectory,
    numerical_action_linear,
)
from pathprop.core import PhysicsConfig
from pathprop.errors import EvaluationFailure, InvalidTimeError, OutOfRangeError

coords = st.floats(-3, 3, allow_nan=False)
times = st.floats(0.2, 4.0)


@pytest.mark.parametrize(
    "m, dx, T, expected",
    [(1.0, [0.0], 1.0, [0.0]), (1.0, [1.0], 2.0, [0.5]), (3.0, [1, 2, 2], 1.0, [3, 6, 6])],
)
def test_classical_momentum(m, dx, T, expected):
    cfg = PhysicsConfig(mass=m, dim=len(dx))
    b = BoundaryData(np.zeros(len(dx)), dx, T)
    np.testing.assert_allclose(classical_momentum(b, cfg), expected)


@pytest.mark.parametrize("T", [0.0, -1.0, float("inf")])
def test_boundary_rejects_bad_time(T):
    with pytest.raises(InvalidTimeError):
        BoundaryData([0.0], [1.0], T)


def test_trajectory_end_points_and_midpoint():
    b = BoundaryData([0.3, -1.1], [2.7, 0.9], 1.7)
    np.testing.assert_array_equal(classical_trajectory(b, 0.0), b.x0)
    np.testing.assert_array_equal(classical_trajectory(b, b.T), b.x)
    np.testing.assert_allclose(classical_trajectory(b, b.T / 2), (b.x + b.x0) / 2)
    np.testing.assert_allclose(classical_trajectory(BoundaryData([0.0], [4.0], 2.0), 0.5), [1.0])
    with pytest.raises(OutOfRangeError):
        classical_trajectory(b, 1.8)
    with pytest.raises(OutOfRangeError):
        classical_trajectory(b, -0.1)


@pytest.mark.parametrize(
    "m, x0, x, T, expected",
    [(1.0, [1.0], [1.0], 1.0, 0.0), (2.0, [0.0], [1.0], 1.0, 1.0), (1.0, [0, 0, 0], [1, 2, 2], 2.0, 2.25)],
)
def test_free_action_values(m, x0, x, T, expected):
    cfg = PhysicsConfig(mass=m, dim=len(x))
    assert classical_action_free(BoundaryData(x0, x, T), cfg) == pytest.approx(expected, abs=1e-15)


@given(t1=st.floats(0, 1), t2=st.floats(0, 1), x0=coords, x=coords, T=times)
@settings(max_examples=50, deadline=None)
def test_momentum_constant_along_path(t1, t2, x0, x, T):
    t1, t2 = sorted((t1 * T, t2 * T))
    if t2 - t1 < 1e-3 * T:
        return
    b = BoundaryData([x0], [x], T)
    sub = (classical_trajectory(b, t2) - classical_trajectory(b, t1)) / (t2 - t1)
    p = classical_momentum(b, PhysicsConfig())
    np.testing.assert_allclose(sub, p, rtol=1e-10, atol=1e-10)


@given(x0=coords, x=coords, T=times)
@settings(max_examples=50, deadline=None)
def test_free_action_is_kinetic_integral_and_symmetric(x0, x, T):
    cfg = PhysicsConfig(mass=1.5)
    b = BoundaryData([x0], [x], T)
    t = np.linspace(0, T, 101)
    path = np.array([classical_trajectory(b, ti) for ti in t])
    vel = np.gradient(path[:, 0], t)
    kinetic = np.trapezoid(0.5 * cfg.mass * vel**2, t)
    S = classical_action_free(b, cfg)
    assert kinetic == pytest.approx(S, rel=1e-12, abs=1e-13)
    assert classical_action_free(BoundaryData([x], [x0], T), cfg) == S


def test_energy_is_hamiltonian_on_momentum():
    cfg = PhysicsConfig(mass=2.0, dim=2)
    b = BoundaryData([0, 0], [2, 4], 2.0)
    assert classical_energy(b, cfg) == pytest.approx((1 + 4) * 4 / (2 * 2.0))


# -- linear potential ------------------------------------------------------

def test_linear_action_free_limits():
    cfg = PhysicsConfig(mass=1.3, dim=2)
    b = BoundaryData([0.1, -0.4], [1.2, 0.5], 0.8)
    assert classical_action_linear(b, LinearPotentialSpec(), cfg) == classical_action_free(b, cfg)
    shifted = classical_action_linear(b, LinearPotentialSpec(V0=0.7), cfg)
    assert shifted == pytest.approx(classical_action_free(b, cfg) - 0.7 * 0.8, abs=1e-15)


def test_linear_action_frozen_oracle():
    # x = x0, T = 1, m = F = 1: the extremal discretized path gives -1/24
    cfg = PhysicsConfig()
    b = BoundaryData([0.0], [0.0], 1.0)
    v = LinearPotentialSpec(F=1.0)
    assert numerical_action_linear(b, v, cfg, segments=2000) == pytest.approx(-1 / 24, abs=1e-12)
    assert classical_action_linear(b, v, cfg) == pytest.approx(-1 / 24, abs=1e-15)


@pytest.mark.parametrize(
    "x0, x, T, V0, F, m",
    [
        ([0.0], [1.0], 1.0, 0.0, 1.0, 1.0),
        ([0.5], [-1.0], 2.0, 0.3, -0.7, 2.0),
        ([0.2, -0.3], [1.0, 0.4], 0.7, -1.0, [0.5, 1.5], 0.5),
        ([0.0, 0.0, 0.0], [1.0, -1.0, 0.5], 1.5, 0.0, [1.0, 2.0, -1.0], 1.0),
    ],
)
def test_linear_action_matches_numerical_extremal(x0, x, T, V0, F, m):
    cfg = PhysicsConfig(mass=m, dim=len(x))
    b = BoundaryData(x0, x, T)
    v = LinearPotentialSpec(V0, F)
    assert classical_action_linear(b, v, cfg) == pytest.approx(
        numerical_action_linear(b, v, cfg, segments=1000), abs=1e-10
    )


def test_linear_action_with_explicit_reference():
    cfg = PhysicsConfig()
    b = BoundaryData([0.4], [1.0], 1.2)
    v = LinearPotentialSpec(0.0, 0.8, x_ref=[-0.5])
    assert classical_action_linear(b, v, cfg) == pytest.approx(
        numerical_action_linear(b, v, cfg), abs=1e-10
    )


def test_linear_trajectory_boundary_and_equation_of_motion():
    cfg = PhysicsConfig(mass=2.0)
    b = BoundaryData([0.5], [1.5], 2.0)
    v = LinearPotentialSpec(F=0.8)
    np.testing.assert_allclose(linear_trajectory(b, v, cfg, 0.0), b.x0)
    np.testing.assert_allclose(linear_trajectory(b, v, cfg, b.T), b.x, atol=1e-15)
    t = np.array([0.3, 0.6, 0.9])
    h = 1e-3
    acc = (linear_trajectory(b, v, cfg, t + h) - 2 * linear_trajectory(b, v, cfg, t)
           + linear_trajectory(b, v, cfg, t - h)) / h**2
    np.testing.assert_allclose(acc[:, 0], 0.8 / 2.0, rtol=1e-6)


def test_discrete_action_of_straight_line_is_exact():
    cfg = PhysicsConfig()
    nodes = np.linspace(0, 2, 11)[:, None]
    assert discrete_action(nodes, 1.0, None, cfg) == pytest.approx(2.0)


# -- Hamilton-Jacobi -------------------------------------------------------

@given(
    x0=st.lists(coords, min_size=1, max_size=3),
    dx=st.lists(coords, min_size=3, max_size=3),
    T=times,
)
@settings(max_examples=50, deadline=None)
def test_hj_exact_zero(x0, dx, T):
    cfg = PhysicsConfig(mass=1.7, dim=len(x0))
    x = np.array(x0) + np.array(dx[: len(x0)])
    res = hamilton_jacobi_residual(None, BoundaryData(x0, x, T), cfg, derivatives=free_action_derivatives)
    assert isinstance(res, Fraction) and res == 0


def test_hj_finite_difference():
    cfg = PhysicsConfig()
    b = BoundaryData([0.0], [1.0], 1.0)
    assert hamilton_jacobi_residual(free_action_function(b.x0, cfg), b, cfg, h=1e-5) < 1e-8


def test_hj_detects_perturbation():
    cfg = PhysicsConfig()
    b = BoundaryData([0.0], [1.0], 1.0)
    S = free_action_function(b.x0, cfg)
    res = hamilton_jacobi_residual(lambda x, T: S(x, T) + 0.1 * T, b, cfg)
    assert res == pytest.approx(0.1, abs=1e-8)


def test_hj_linear_action_with_potential():
    cfg = PhysicsConfig(dim=2)
    b = BoundaryData([0.1, 0.2], [0.9, -0.4], 1.3)
    v = LinearPotentialSpec(0.4, [0.7, -0.2])
    res = hamilton_jacobi_residual(linear_action_function(b.x0, v, cfg), b, cfg, potential=v)
    assert res < 1e-8
    # dropping the potential term must leave a visible residual
    assert hamilton_jacobi_residual(linear_action_function(b.x0, v, cfg), b, cfg) > 1e-2


def test_hj_rejects_non_finite_action():
    cfg = PhysicsConfig()
    b = BoundaryData([0.0], [1.0], 1.0)
    with pytest.raises(EvaluationFailure):
        hamilton_jacobi_residual(lambda x, T: float("nan"), b, cfg)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_free_laplacian_exact(dim):
    cfg = PhysicsConfig(mass=1.5, dim=dim)
    b = BoundaryData(np.full(dim, 0.25), np.full(dim, -0.5), 0.75)
    assert free_action_laplacian(b, cfg) == Fraction(3, 2) * dim / Fraction(3, 4)
