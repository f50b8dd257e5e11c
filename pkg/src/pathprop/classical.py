"""Classical paths and actions for the free particle and the linear potential,
plus a Hamilton-Jacobi residual for arbitrary action functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .core import PhysicsConfig, as_vector
from .errors import (
    EvaluationFailure,
    InvalidParameterError,
    InvalidTimeError,
    OutOfRangeError,
)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """End points ``y(0) = x0`` and ``y(T) = x`` of a path."""

    x0: np.ndarray
    x: np.ndarray
    T: float

    def __post_init__(self):
        x0 = as_vector(self.x0)
        x = as_vector(self.x)
        if x0.shape != x.shape:
            raise InvalidParameterError(f"x0 and x differ in length: {x0.shape} vs {x.shape}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidTimeError(f"T must be positive, got {self.T}")
        x0.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "T", float(self.T))

    @property
    def displacement(self) -> np.ndarray:
        return self.x - self.x0

    @property
    def dim(self) -> int:
        return self.x.size

    def with_endpoint(self, x=None, T=None) -> "BoundaryData":
        return BoundaryData(self.x0, self.x if x is None else x, self.T if T is None else T)


@dataclass(frozen=True, eq=False)
class LinearPotentialSpec:
    """``V(y) = V0 - F.(y - x_ref)``: first-order Taylor expansion of a
    potential about ``x_ref``.

    ``x_ref=None`` means "expand about the start point of whatever amplitude
    is being computed", which is how the short-distance kernel is defined.
    Field evolution needs one fixed potential and uses the origin instead.
    """

    V0: float = 0.0
    F: np.ndarray = 0.0
    x_ref: np.ndarray | None = None

    def __post_init__(self):
        F = as_vector(self.F)
        if not (math.isfinite(self.V0) and np.all(np.isfinite(F))):
            raise InvalidParameterError("V0 and F must be finite")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "V0", float(self.V0))
        if self.x_ref is not None:
            r = as_vector(self.x_ref)
            r.setflags(write=False)
            object.__setattr__(self, "x_ref", r)

    def force(self, dim: int) -> np.ndarray:
        if self.F.size == 1 and dim > 1:
            return np.full(dim, float(self.F[0]))
        if self.F.size != dim:
            raise InvalidParameterError(f"force has {self.F.size} components, expected {dim}")
        return self.F

    def reference(self, default) -> np.ndarray:
        return as_vector(default) if self.x_ref is None else self.x_ref

    def resolved(self, default) -> "LinearPotentialSpec":
        return LinearPotentialSpec(self.V0, self.F, self.reference(default))

    def value(self, y, default_ref) -> np.ndarray:
        """Potential at points ``y`` (last axis = components)."""
        y = np.asarray(y, dtype=float)
        F = self.force(y.shape[-1])
        return self.V0 - (y - self.reference(default_ref)) @ F

    @property
    def is_zero(self) -> bool:
        return self.V0 == 0.0 and not np.any(self.F)


def classical_momentum(b: BoundaryData, cfg: PhysicsConfig) -> np.ndarray:
    """Constant momentum ``m (x - x0) / T`` of the free classical path."""
    return cfg.mass * b.displacement / b.T


def classical_trajectory(b: BoundaryData, t: float) -> np.ndarray:
    if not 0 <= t <= b.T:
        raise OutOfRangeError(f"t={t} outside [0, {b.T}]")
    if t == b.T:
        return b.x.copy()
    return b.displacement * (t / b.T) + b.x0


def classical_energy(b: BoundaryData, cfg: PhysicsConfig) -> float:
    q = classical_momentum(b, cfg)
    return float(q @ q) / (2 * cfg.mass)


def classical_action_free(b: BoundaryData, cfg: PhysicsConfig) -> float:
    d = b.displacement
    return cfg.mass * float(d @ d) / (2 * b.T)


def linear_trajectory(b: BoundaryData, v: LinearPotentialSpec, cfg: PhysicsConfig, t):
    """Parabolic classical path under the constant force ``F``."""
    t = np.asarray(t, dtype=float)
    F = v.force(b.dim)
    vel = b.displacement / b.T - F * b.T / (2 * cfg.mass)
    return b.x0 + np.multiply.outer(t, vel) + np.multiply.outer(t**2, F / (2 * cfg.mass))


def classical_action_linear(b: BoundaryData, v: LinearPotentialSpec, cfg: PhysicsConfig) -> float:
    """Action of the classical path for ``L = m|y'|^2/2 - V0 + F.(y - x_ref)``.

    Closed form, obtained by integrating the Lagrangian along the parabola
    ``y(t) = x0 + u t + F t^2/(2m)`` with ``y(T) = x``::

        S = m|x-x0|^2/(2T) + T F.(x+x0)/2 - T F.x_ref - |F|^2 T^3/(24 m) - V0 T

    :func:`numerical_action_linear` provides an independent check.
    """
    m, T = cfg.mass, b.T
    F = v.force(b.dim)
    r = v.reference(b.x0)
    s = classical_action_free(b, cfg)
    s += T * float(F @ (b.x + b.x0)) / 2 - T * float(F @ r)
    s += -float(F @ F) * T**3 / (24 * m)
    s += -v.V0 * T
    return s


def discrete_action(nodes: np.ndarray, T: float, v: LinearPotentialSpec | None,
                    cfg: PhysicsConfig) -> float:
    """Action of the piecewise-linear path through ``nodes`` (shape ``(n+1, D)``).

    The linear potential is integrated exactly along every segment.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    n = nodes.shape[0] - 1
    dt = T / n
    steps = np.diff(nodes, axis=0)
    s = cfg.mass * float(np.sum(steps**2)) / (2 * dt)
    if v is not None:
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        s -= dt * float(np.sum(v.value(mids, nodes[0])))
    return s


def numerical_action_linear(b: BoundaryData, v: LinearPotentialSpec, cfg: PhysicsConfig,
                            segments: int = 2000) -> float:
    """Action of the extremal piecewise-linear path, Richardson-extrapolated.

    Solves the discrete Euler-Lagrange system (tridiagonal, one per axis) for
    ``segments`` and ``2*segments`` pieces and removes the ``1/n^2`` error.
    Uses no closed-form knowledge of the continuum path.
    """

    def extremal(n):
        dt = b.T / n
        F = v.force(b.dim)
        nodes = np.empty((n + 1, b.dim))
        nodes[0], nodes[-1] = b.x0, b.x
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = -1.0
        ab[1, :] = 2.0
        ab[2, :-1] = -1.0
        for a in range(b.dim):
            rhs = np.full(n - 1, -dt * dt * F[a] / cfg.mass)
            rhs[0] += b.x0[a]
            rhs[-1] += b.x[a]
            nodes[1:-1, a] = solve_banded((1, 1), ab, rhs)
        return discrete_action(nodes, b.T, v.resolved(b.x0), cfg)

    if segments < 2:
        raise InvalidParameterError("need at least 2 segments")
    coarse, fine = extremal(segments), extremal(2 * segments)
    return (4 * fine - coarse) / 3


def free_action_function(x0, cfg: PhysicsConfig) -> Callable:
    x0 = as_vector(x0)
    return lambda x, T: classical_action_free(BoundaryData(x0, x, T), cfg)


def linear_action_function(x0, v: LinearPotentialSpec, cfg: PhysicsConfig) -> Callable:
    x0 = as_vector(x0)
    v = v.resolved(x0)
    return lambda x, T: classical_action_linear(BoundaryData(x0, x, T), v, cfg)


def free_action_derivatives(b: BoundaryData, cfg: PhysicsConfig):
    """Exact ``(dS/dT, grad S)`` of the free action in rational arithmetic.

    Inputs are converted to :class:`fractions.Fraction` without rounding, so
    any identity between the derivatives holds exactly.
    """
    m = Fraction(cfg.mass)
    T = Fraction(b.T)
    d = [Fraction(float(xi)) - Fraction(float(x0i)) for xi, x0i in zip(b.x, b.x0)]
    d2 = sum(di * di for di in d)
    dS_dT = -m * d2 / (2 * T * T)
    grad = [m * di / T for di in d]
    return dS_dT, grad


def free_action_laplacian(b: BoundaryData, cfg: PhysicsConfig) -> Fraction:
    """Exact Laplacian of the free action via rational second differences.

    The action is quadratic in ``x`` so central second differences with any
    step are exact in rational arithmetic; this evaluates ``sum_k d_k d_k S``
    without assuming its value.
    """
    m = Fraction(cfg.mass)
    T = Fraction(b.T)
    x0 = [Fraction(float(v)) for v in b.x0]
    x = [Fraction(float(v)) for v in b.x]
    h = Fraction(1, 1024)

    def S(pt):
        return m * sum((p - q) ** 2 for p, q in zip(pt, x0)) / (2 * T)

    total = Fraction(0)
    for k in range(len(x)):
        up = list(x)
        dn = list(x)
        up[k] += h
        dn[k] -= h
        total += (S(up) - 2 * S(x) + S(dn)) / (h * h)
    return total


def hamilton_jacobi_residual(action: Callable, b: BoundaryData, cfg: PhysicsConfig,
                             h: float = 1e-5, derivatives: Callable | None = None,
                             potential: LinearPotentialSpec | None = None):
    """``|dS/dT + |grad S|^2/(2m) + V(x)|`` at ``(b.x, b.T)``.

    ``action(x, T)`` is differentiated with central differences of step ``h``
    unless ``derivatives(b, cfg)`` is given, returning ``(dS/dT, grad)``
    exactly; the arithmetic then follows the type of those values (pass
    Fractions to get an exact zero).  ``V`` is zero unless ``potential`` is
    given, in which case it is expanded about ``b.x0`` by default.
    """
    if derivatives is not None:
        dS_dT, grad = derivatives(b, cfg)
        m = Fraction(cfg.mass) if isinstance(dS_dT, Fraction) else cfg.mass
        res = dS_dT + sum(g * g for g in grad) / (2 * m)
        if potential is not None:
            res += float(potential.value(b.x, b.x0))
        return abs(res) if isinstance(res, Fraction) else float(abs(res))

    if not h > 0:
        raise InvalidParameterError(f"h must be positive, got {h}")
    if b.T - h <= 0:
        raise InvalidTimeError(f"T - h must stay positive (T={b.T}, h={h})")
    x, T = b.x, b.T
    try:
        dS_dT = (action(x, T + h) - action(x, T - h)) / (2 * h)
        grad = np.empty(x.size)
        for k in range(x.size):
            e = np.zeros(x.size)
            e[k] = h
            grad[k] = (action(x + e, T) - action(x - e, T)) / (2 * h)
    except (OverflowError, ZeroDivisionError) as exc:
        raise EvaluationFailure(f"action evaluation failed: {exc}") from exc
    if not (np.isfinite(dS_dT) and np.all(np.isfinite(grad))):
        raise EvaluationFailure("non-finite action values in the stencil")
    res = dS_dT + float(grad @ grad) / (2 * cfg.mass)
    if potential is not None:
        res += float(potential.value(x, b.x0))
    return abs(float(res))
