"""Closed-form propagators and their defining checks.

The free kernel is ``(m/(2 pi i hbar T))^(D/2) exp(i S_cl/hbar)`` with the
branch ``(1/i)^(D/2) = exp(-i D pi/4)``.  The linear-potential kernel keeps the
same prefactor and swaps in the classical action of the parabolic path.

Both kernels factorise over Cartesian axes, and so does the tensor
trapezoid rule on a rectangular grid.  :func:`apply_kernel` uses this to
evaluate grid convolutions one axis at a time with FFT-based linear
convolution (the sum is the same as the direct double loop).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .classical import (
    BoundaryData,
    LinearPotentialSpec,
    classical_action_free,
    classical_action_linear,
)
from .core import DEFAULT_TAPER, PhysicsConfig, SpatialGrid, Wavefunction, cosine_taper
from .errors import InvalidParameterError, InvalidTimeError, ResolutionError
from .report import ResidualReport, fit_order

__all__ = [
    "KernelSpec", "KernelSample", "LinearPotentialSpec", "FREE",
    "free_kernel", "linear_potential_kernel", "kernel", "prefactor_modulus",
    "axis_kernel", "apply_kernel", "check_alias_resolution",
    "delta_limit_check", "semigroup_check", "composition_integral",
]


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Which Hamiltonian a kernel belongs to: free (``potential is None``) or
    free plus a linear potential."""

    potential: LinearPotentialSpec | None = None

    @property
    def is_free(self) -> bool:
        return self.potential is None

    @property
    def name(self) -> str:
        return "free" if self.is_free else "linear"

    @classmethod
    def linear(cls, V0=0.0, F=0.0, x_ref=None) -> "KernelSpec":
        return cls(LinearPotentialSpec(V0, F, x_ref))

    def describe(self) -> dict:
        if self.is_free:
            return {"variant": "free"}
        p = self.potential
        return {
            "variant": "linear",
            "V0": p.V0,
            "F": p.F.tolist(),
            "x_ref": None if p.x_ref is None else p.x_ref.tolist(),
        }


FREE = KernelSpec()


@dataclass(frozen=True, eq=False)
class KernelSample:
    value: complex
    b: BoundaryData
    spec: KernelSpec

    @property
    def modulus(self) -> float:
        return abs(self.value)

    @property
    def phase(self) -> float:
        return math.atan2(self.value.imag, self.value.real)


def prefactor_modulus(T: float, cfg: PhysicsConfig, dim: int | None = None) -> float:
    D = cfg.dim if dim is None else dim
    return (cfg.mass / (2 * math.pi * cfg.hbar * T)) ** (D / 2)


def _assemble(action: float, b: BoundaryData, cfg: PhysicsConfig) -> complex:
    D = b.dim
    phase = action / cfg.hbar - D * math.pi / 4
    return prefactor_modulus(b.T, cfg, D) * complex(math.cos(phase), math.sin(phase))


def free_kernel(b: BoundaryData, cfg: PhysicsConfig) -> KernelSample:
    """Free-particle propagator from ``b.x0`` to ``b.x`` in time ``b.T``."""
    return KernelSample(_assemble(classical_action_free(b, cfg), b, cfg), b, FREE)


def linear_potential_kernel(b: BoundaryData, v: LinearPotentialSpec,
                            cfg: PhysicsConfig) -> KernelSample:
    """Propagator for ``H = p^2/2m + V0 - F.(y - x_ref)``.

    Exact for the linear potential (the Lagrangian is quadratic); reduces to
    :func:`free_kernel` bit for bit when ``V0 = F = 0``.
    """
    return KernelSample(_assemble(classical_action_linear(b, v, cfg), b, cfg), b, KernelSpec(v))


def kernel(b: BoundaryData, spec: KernelSpec, cfg: PhysicsConfig) -> KernelSample:
    if spec.is_free:
        return free_kernel(b, cfg)
    return linear_potential_kernel(b, spec.potential, cfg)


# -- array kernels and grid convolution ------------------------------------

def _free_factor(d, T, cfg):
    m, hb = cfg.mass, cfg.hbar
    return math.sqrt(m / (2 * math.pi * hb * T)) * np.exp(1j * (m * d * d / (2 * hb * T) - math.pi / 4))


def axis_kernel(x_out, x_in, T: float, cfg: PhysicsConfig, force: float = 0.0,
                ref: float = 0.0, exact: bool = True) -> np.ndarray:
    """One Cartesian factor of the kernel, broadcast over ``x_out``, ``x_in``.

    With ``exact=True`` this is the linear-potential kernel factor (free when
    ``force = 0``).  With ``exact=False`` it is the midpoint short-time
    amplitude, which lacks the ``-F^2 T^3/(24 m)`` piece of the action.  The
    ``V0`` phase is not included.
    """
    x_out = np.asarray(x_out, dtype=float)
    x_in = np.asarray(x_in, dtype=float)
    out = _free_factor(x_out - x_in, T, cfg)
    if force:
        hb = cfg.hbar
        phase = T * force * (0.5 * (x_out + x_in) - ref) / hb
        if exact:
            phase = phase - force * force * T**3 / (24 * cfg.mass * hb)
        out = out * np.exp(1j * phase)
    return out


def _global_phase(spec: KernelSpec, T: float, cfg: PhysicsConfig) -> complex:
    if spec.is_free or spec.potential.V0 == 0.0:
        return 1.0
    return complex(np.exp(-1j * spec.potential.V0 * T / cfg.hbar))


def _convolve_axis(u, axis, coords, h, T, cfg, force, ref, exact):
    n = coords.size
    lags = h * np.arange(-(n - 1), n)
    f = _free_factor(lags, T, cfg)
    shape = [1] * u.ndim
    shape[axis] = f.size
    if force:
        hb = cfg.hbar
        half = np.exp(0.5j * T * force * coords / hb)
        bshape = [1] * u.ndim
        bshape[axis] = n
        half = half.reshape(bshape)
        const = -T * force * ref / hb
        if exact:
            const -= force * force * T**3 / (24 * cfg.mass * hb)
        u = u * half
    out = fftconvolve(u, f.reshape(shape), axes=axis)
    out = np.take(out, np.arange(n - 1, 2 * n - 1), axis=axis)
    if force:
        out = out * half * np.exp(1j * const)
    return out


def apply_kernel(values: np.ndarray, grid: SpatialGrid, T: float, cfg: PhysicsConfig,
                 spec: KernelSpec = FREE, weights: np.ndarray | None = None,
                 exact: bool = True, ref=None) -> np.ndarray:
    """``out(x) = sum_{x'} K(x, x'; T) weights(x') values(x')`` over the grid.

    ``weights`` defaults to the trapezoid weights.  For a linear potential the
    expansion point is ``ref`` (or ``spec.potential.x_ref``, or the origin).
    ``exact=False`` uses the midpoint short-time amplitude instead of the
    exact kernel.
    """
    if not T > 0:
        raise InvalidTimeError(f"T must be positive, got {T}")
    u = np.asarray(values, dtype=complex).reshape(grid.shape)
    w = grid.trapezoid_weights() if weights is None else weights
    u = u * w
    if spec.is_free:
        F = np.zeros(grid.dim)
        r = np.zeros(grid.dim)
    else:
        F = spec.potential.force(grid.dim)
        if ref is None:
            ref = np.zeros(grid.dim) if spec.potential.x_ref is None else spec.potential.x_ref
        r = np.broadcast_to(np.asarray(ref, dtype=float), (grid.dim,))
    for a in range(grid.dim):
        u = _convolve_axis(u, a, grid.axis(a), grid.spacing[a], T, cfg,
                           float(F[a]), float(r[a]), exact)
    return u * _global_phase(spec, T, cfg)


def significant_support(values: np.ndarray, rel_tol: float = 1e-6) -> np.ndarray:
    a = np.abs(values)
    peak = float(np.max(a)) if a.size else 0.0
    return a > rel_tol * peak if peak > 0 else np.zeros(a.shape, bool)


def check_alias_resolution(grid: SpatialGrid, T: float, cfg: PhysicsConfig,
                           source_mask: np.ndarray, output_mask: np.ndarray, what: str = ""):
    """Raise :class:`ResolutionError` if trapezoidal aliasing can reach the
    output region.

    For a chirp kernel the trapezoid sum at output ``x`` picks up a spurious
    copy of the source shifted by ``2 pi hbar T/(m h)`` per axis.  The grid is
    adequate when that shift exceeds every distance between an output point
    and a significant source point, i.e. the kernel phase advances by less
    than ``2 pi`` per grid step across the region that matters.
    """
    for a in range(grid.dim):
        coords = grid.axis(a)
        other = tuple(i for i in range(grid.dim) if i != a)
        src = coords[np.any(source_mask, axis=other)] if other else coords[source_mask]
        out = coords[np.any(output_mask, axis=other)] if other else coords[output_mask]
        if src.size == 0 or out.size == 0:
            continue
        reach = max(abs(out.max() - src.min()), abs(src.max() - out.min()))
        h = grid.spacing[a]
        step_phase = cfg.mass * reach * h / (cfg.hbar * T)
        if step_phase >= 2 * math.pi:
            need = 2 * math.pi * cfg.hbar * T / (cfg.mass * reach)
            raise ResolutionError(
                f"{what}kernel phase advances {step_phase:.3g} rad per grid step at T={T:.6g} "
                f"on axis {a}; spacing must be below {need:.6g}",
                required_spacing=need,
            )


def delta_limit_check(psi0: Wavefunction, spec: KernelSpec, cfg: PhysicsConfig,
                      T_ladder, taper: float = DEFAULT_TAPER,
                      min_order: float = 0.9) -> ResidualReport:
    """Evolve ``psi0`` for each small ``T`` and measure ``max |K*psi0 - psi0|``
    over the untapered interior.  The deviation should vanish like ``T``.
    """
    T_ladder = [float(t) for t in T_ladder]
    if len(T_ladder) < 3:
        raise InvalidParameterError("T_ladder needs at least 3 entries")
    if any(t <= 0 for t in T_ladder) or any(a <= b for a, b in zip(T_ladder, T_ladder[1:])):
        raise InvalidParameterError("T_ladder must be positive and strictly decreasing")
    grid = psi0.grid
    window = grid.taper(taper)
    interior = window == 1.0
    weights = grid.trapezoid_weights() * window
    src = significant_support(psi0.values * window)
    psi = psi0.values
    boundary = bool(np.max(np.abs(psi[~interior]), initial=0.0) > 1e-6 * np.max(np.abs(psi)))
    residuals = []
    for T in T_ladder:
        check_alias_resolution(grid, T, cfg, src, interior, "delta limit: ")
        out = apply_kernel(psi, grid, T, cfg, spec, weights)
        residuals.append(float(np.max(np.abs(out - psi)[interior])))
    order = fit_order(T_ladder, residuals) if all(r > 0 for r in residuals) else None
    passed = order is not None and order >= min_order and not boundary
    return ResidualReport(
        check="delta_limit",
        params={
            "T_ladder": T_ladder,
            "spacing": list(grid.spacing),
            "origin": list(grid.origin),
            "counts": list(grid.counts),
            "taper": taper,
            "kernel": spec.describe(),
            "boundary_truncation": boundary,
            "min_order": min_order,
            "mass": cfg.mass, "hbar": cfg.hbar,
        },
        residuals=residuals,
        fitted_order=order,
        passed=passed,
    )


def composition_integral(b: BoundaryData, T1: float, T2: float, grid: SpatialGrid,
                         cfg: PhysicsConfig, taper: float = DEFAULT_TAPER) -> complex:
    """Windowed grid quadrature of ``int K(x - y; T2) K(y - x0; T1) d^D y``."""
    total = 1.0 + 0j
    for a in range(grid.dim):
        y = grid.axis(a)
        w = grid.axis_weights(a) * cosine_taper(y, taper)
        f = _free_factor(b.x[a] - y, T2, cfg) * _free_factor(y - b.x0[a], T1, cfg)
        total *= complex(np.sum(w * f))
    return total


def semigroup_check(b: BoundaryData, T1: float, T2: float, grid: SpatialGrid,
                    cfg: PhysicsConfig, taper: float = DEFAULT_TAPER,
                    alt_taper: float = 0.3, tol: float = 1e-4) -> ResidualReport:
    """Compose two free kernels over the grid and compare with the direct one.

    Residuals are ``[relative deviation, window sensitivity]``, the latter
    being the relative change when the taper fraction is switched to
    ``alt_taper``.
    """
    if not (T1 > 0 and T2 > 0):
        raise InvalidTimeError("T1 and T2 must be positive")
    if abs(T1 + T2 - b.T) > 1e-12 * b.T:
        raise InvalidParameterError(f"T1 + T2 = {T1 + T2} differs from T = {b.T}")
    if grid.dim != b.dim:
        raise InvalidParameterError("grid and boundary data differ in dimension")
    m, hb = cfg.mass, cfg.hbar
    star = b.x0 + (T1 / b.T) * b.displacement
    sigma = math.sqrt(hb * T1 * T2 / (m * b.T))
    lo, hi = grid.interior_bounds(max(taper, alt_taper))
    if np.any(star - 6 * sigma < lo) or np.any(star + 6 * sigma > hi):
        raise ResolutionError(
            f"untapered grid region [{lo}, {hi}] does not cover the stationary point "
            f"{star} with a 6 sigma = {6 * sigma:.4g} margin"
        )
    for a in range(grid.dim):
        y = grid.axis(a)
        freq = m / hb * np.max(np.abs((y - b.x[a]) / T2 + (y - b.x0[a]) / T1))
        if freq * grid.spacing[a] > math.pi:
            need = math.pi / freq
            raise ResolutionError(
                f"semigroup integrand under-resolved on axis {a}; spacing must be below {need:.6g}",
                required_spacing=need,
            )
    ref = free_kernel(b, cfg).value
    comp = composition_integral(b, T1, T2, grid, cfg, taper)
    comp_alt = composition_integral(b, T1, T2, grid, cfg, alt_taper)
    dev = abs(comp / ref - 1)
    window = abs(comp - comp_alt) / abs(ref)
    return ResidualReport(
        check="semigroup",
        params={
            "x0": b.x0.tolist(), "x": b.x.tolist(), "T1": T1, "T2": T2,
            "spacing": list(grid.spacing), "origin": list(grid.origin),
            "counts": list(grid.counts), "taper": taper, "alt_taper": alt_taper,
            "composed": comp, "direct": ref, "tol": tol,
            "mass": m, "hbar": hb,
        },
        residuals=[dev, window],
        fitted_order=None,
        passed=dev < tol and window < tol,
    )
