"""The verification battery: one function per check, each returning a
:class:`~pathprop.report.ResidualReport`.

Grid-based checks are set up in natural units: lengths in
``ell = sqrt(hbar * 1/m)`` and times in units of 1, so the same battery runs
unchanged for any mass and hbar.  ``spacing`` overrides are given in those
length units.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .classical import (
    BoundaryData,
    LinearPotentialSpec,
    free_action_derivatives,
    free_action_function,
    hamilton_jacobi_residual,
)
from .core import PhysicsConfig, Wavefunction, centered_grid, gaussian_packet, norm
from .errors import PathPropError
from .evolve import (
    ansatz_inversion_check,
    evolve_wavefunction,
    kernel_field,
    mean_wavenumber,
    packet_width,
    schrodinger_residual,
    spreading_width,
)
from .kernels import FREE, KernelSpec, delta_limit_check, free_kernel, linear_potential_kernel, semigroup_check
from .lattice import SliceConfig, convergence_study, sliced_propagator
from .quadrature import GaussianForm, brute_force_gaussian, gaussian_closed_form, momentum_kernel_integral
from .report import ResidualReport, fit_order

#: Standard battery for kernel comparisons (D = 1, x0 = 0).
BATTERY_T = (0.5, 1.0, 2.0)
BATTERY_DX = (0.0, 1.0, 3.0)


def _one_d(cfg: PhysicsConfig) -> PhysicsConfig:
    return PhysicsConfig(mass=cfg.mass, hbar=cfg.hbar, dim=1)


def _ell(cfg: PhysicsConfig) -> float:
    return math.sqrt(cfg.hbar / cfg.mass)


def battery(cfg: PhysicsConfig):
    """``BoundaryData`` for the standard battery, lengths in units of ``ell``."""
    ell = _ell(cfg)
    return [BoundaryData([0.0], [dx * ell], T) for T in BATTERY_T for dx in BATTERY_DX]


def _random_points(rng, n, dim, xr=1.0, T_range=(0.5, 2.0)):
    for _ in range(n):
        yield rng.uniform(-xr, xr, dim), rng.uniform(-xr, xr, dim), float(rng.uniform(*T_range))


# -- checks -----------------------------------------------------------------

def check_hj(cfg: PhysicsConfig, seed: int = 0, n: int = 100, h: float = 1e-5,
             tol: float = 1e-8, **_) -> ResidualReport:
    """Free action against the Hamilton-Jacobi equation: exact rational
    derivatives must give exactly zero, central differences less than ``tol``."""
    rng = np.random.default_rng(seed)
    ell = _ell(cfg)
    exact, fd = [], []
    for x0, x, T in _random_points(rng, n, cfg.dim):
        b = BoundaryData(x0 * ell, x * ell, T)
        exact.append(hamilton_jacobi_residual(None, b, cfg, derivatives=free_action_derivatives))
        fd.append(hamilton_jacobi_residual(free_action_function(b.x0, cfg), b, cfg, h=h))
    # the HJ residual scales like the action, i.e. like hbar
    fd_scaled = max(fd) / cfg.hbar
    return ResidualReport(
        check="hj",
        params={"seed": seed, "points": n, "h": h, "tol": tol, "dim": cfg.dim,
                "mass": cfg.mass, "hbar": cfg.hbar,
                "exact_all_zero": all(e == 0 for e in exact)},
        residuals=[float(max(exact)), fd_scaled],
        passed=all(e == 0 for e in exact) and fd_scaled < tol,
    )


def _bad_prefactor_field(x0, cfg):
    """Negative control: prefactor ``T^-1`` instead of ``T^(-D/2)`` (D = 1)."""
    good = kernel_field(x0, cfg)
    return lambda x, T: good(x, T) * T ** (-1.0 + cfg.dim / 2)


def check_schrodinger(cfg: PhysicsConfig, seed: int = 0, n: int = 20, h: float = 1e-4,
                      tol: float = 1e-6, steps=(4e-2, 2e-2, 1e-2, 5e-3),
                      neg_min: float = 1e-2, **_) -> ResidualReport:
    """Free kernel against the Schrödinger equation at random points.

    Passes when every residual at ``h = dt`` is below ``tol`` (relative to
    ``hbar/T`` times the kernel scale), every stencil-refinement order is
    ``2 +- 0.3``, and the wrong-prefactor control exceeds ``neg_min``.
    """
    cfg1 = _one_d(cfg) if cfg.dim != 1 else cfg
    rng = np.random.default_rng(seed)
    ell = _ell(cfg1)
    res, orders, neg = [], [], []
    for x0, x, T in _random_points(rng, n, 1):
        x0, x = x0 * ell, x * ell
        f = kernel_field(x0, cfg1)
        # residual in units where m = hbar = 1: divide by hbar * ell^-1
        unit = cfg1.hbar / math.sqrt(ell)
        res.append(abs(schrodinger_residual(f, x, T, cfg1, h * ell, h)) / unit)
        ladder = [abs(schrodinger_residual(f, x, T, cfg1, s * ell, s)) for s in steps]
        orders.append(fit_order(steps, ladder))
        bad = _bad_prefactor_field(x0, cfg1)
        neg.append(abs(schrodinger_residual(bad, x, T, cfg1, h * ell, h)) / unit)
    passed = max(res) < tol and all(abs(o - 2) <= 0.3 for o in orders) and min(neg) > neg_min
    return ResidualReport(
        check="schrodinger",
        params={"seed": seed, "points": n, "h": h, "dt": h, "tol": tol,
                "refinement_steps": list(steps), "orders": orders,
                "min_order": min(orders), "max_order": max(orders),
                "negative_control_min": min(neg), "negative_control_threshold": neg_min,
                "dim": 1, "mass": cfg.mass, "hbar": cfg.hbar},
        residuals=res,
        fitted_order=float(np.median(orders)),
        passed=passed,
    )


def check_delta_limit(cfg: PhysicsConfig, spacing: float = 0.015, half_width: float = 10.0,
                      T_ladder=(0.2, 0.1, 0.05), **_) -> ResidualReport:
    """Gaussian packet (sigma0 = 1) evolved over a small-T ladder."""
    cfg1 = _one_d(cfg)
    ell = _ell(cfg1)
    grid = centered_grid(half_width * ell, spacing * ell, 1)
    psi0 = gaussian_packet(grid, 0.0, ell, cfg=cfg1)
    rep = delta_limit_check(psi0, FREE, cfg1, T_ladder)
    rep.params["sigma0"] = ell
    return rep


def check_semigroup(cfg: PhysicsConfig, spacing: float = 0.01, half_width: float = 20.0,
                    tol: float = 1e-4, **_) -> ResidualReport:
    """Half-time composition over the standard battery."""
    cfg1 = _one_d(cfg)
    ell = _ell(cfg1)
    grid = centered_grid(half_width * ell, spacing * ell, 1)
    devs, windows, items = [], [], []
    for b in battery(cfg1):
        r = semigroup_check(b, b.T / 2, b.T / 2, grid, cfg1, tol=tol)
        devs.append(r.residuals[0])
        windows.append(r.residuals[1])
        items.append({"T": b.T, "dx": float(b.x[0])})
    return ResidualReport(
        check="semigroup",
        params={"battery": items, "window_sensitivity": windows, "spacing": spacing * ell,
                "half_width": half_width * ell, "tol": tol, "taper": 0.2, "alt_taper": 0.3,
                "mass": cfg.mass, "hbar": cfg.hbar},
        residuals=devs,
        passed=max(devs) < tol and max(windows) < tol,
    )


def check_three_way(cfg: PhysicsConfig, N: int = 4, tol: float = 1e-4, **_) -> ResidualReport:
    """Closed form, extrapolated momentum integral and sliced lattice."""
    cfg1 = _one_d(cfg)
    worst, items = [], []
    for b in battery(cfg1):
        closed = free_kernel(b, cfg1).value
        mom = momentum_kernel_integral(b, cfg1)
        lat = sliced_propagator(b, SliceConfig(N), FREE, cfg1).value
        scale = abs(closed)
        d = {
            "closed_vs_momentum": abs(mom - closed) / scale,
            "closed_vs_lattice": abs(lat - closed) / scale,
            "momentum_vs_lattice": abs(lat - mom) / scale,
        }
        worst.append(max(d.values()))
        items.append({"T": b.T, "dx": float(b.x[0]), **d})
    return ResidualReport(
        check="three_way",
        params={"N": N, "battery": items, "tol": tol, "mass": cfg.mass, "hbar": cfg.hbar},
        residuals=worst,
        passed=max(worst) < tol,
    )


def check_ansatz(cfg: PhysicsConfig, dims=(1, 2, 3), tol: float = 1e-10, **_) -> ResidualReport:
    """Ansatz inversion at every dimension in ``dims``."""
    per_dim, residuals, ok = {}, [], True
    for D in dims:
        r = ansatz_inversion_check(PhysicsConfig(cfg.mass, cfg.hbar, D), tol=tol)
        per_dim[str(D)] = {"slope": r.params["slope"], "residuals": r.residuals, "pass": r.passed}
        residuals.extend(r.residuals)
        ok = ok and r.passed
    return ResidualReport(
        check="ansatz_inversion",
        params={"dims": list(dims), "per_dim": per_dim, "tol": tol,
                "mass": cfg.mass, "hbar": cfg.hbar},
        residuals=residuals,
        passed=ok,
    )


def random_gaussian_form(rng, dim: int) -> GaussianForm:
    """Symmetric complex ``A`` with eigenvalues of ``Re A`` in [0.5, 2], and a
    complex ``B`` of modest size."""
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    R = Q @ np.diag(rng.uniform(0.5, 2.0, dim)) @ Q.T
    S = rng.normal(scale=0.5, size=(dim, dim))
    S = 0.5 * (S + S.T)
    B = rng.uniform(-1, 1, dim) + 1j * rng.uniform(-1, 1, dim)
    return GaussianForm(R + 1j * S, B)


def _wrong_exponent(g: GaussianForm) -> complex:
    # quadratic term with the opposite sign on B.A^-1.B, for the control
    quad = complex(g.B @ np.linalg.solve(g.A, g.B))
    return gaussian_closed_form(g) * complex(np.exp(-quad))


def check_gaussian(cfg: PhysicsConfig | None = None, seed: int = 0, n: int = 20,
                   tol: float = 1e-8, **_) -> ResidualReport:
    """Closed-form Gaussian integral against brute-force quadrature, half the
    forms in D = 1 and half in D = 2."""
    rng = np.random.default_rng(seed)
    devs, ctrl, dims = [], [], []
    for i in range(n):
        D = 1 if i < n // 2 else 2
        g = random_gaussian_form(rng, D)
        brute = brute_force_gaussian(g, cutoff=12.0, samples=20001 if D == 1 else 1201)
        closed = gaussian_closed_form(g)
        devs.append(abs(closed - brute) / abs(brute))
        ctrl.append(abs(_wrong_exponent(g) - brute) / abs(brute))
        dims.append(D)
        # det(A)^(+1/2) would be off by |det A|, checked below per form
        ctrl[-1] = max(ctrl[-1], abs(closed * np.linalg.det(g.A) - brute) / abs(brute))
    return ResidualReport(
        check="gaussian_formula",
        params={"seed": seed, "forms": n, "dims": dims, "tol": tol, "det_exponent": -0.5,
                "cutoff": 12.0, "wrong_variant_min_dev": min(ctrl)},
        residuals=devs,
        passed=max(devs) < tol,
    )


def check_linear_potential(cfg: PhysicsConfig, seed: int = 0, n: int = 10, F: float = 1.0,
                           V0: float = 0.5, h: float = 1e-4, tol: float = 1e-6,
                           N_list=(2, 4, 8, 16), **_) -> ResidualReport:
    """Linear-potential kernel: reduction to the free kernel, Schrödinger
    residual with ``V = V0 - F.(x - x0)``, and midpoint-lattice order."""
    cfg1 = _one_d(cfg)
    ell = _ell(cfg1)
    zero = LinearPotentialSpec(0.0, 0.0)
    identical = all(
        linear_potential_kernel(b, zero, cfg1).value == free_kernel(b, cfg1).value
        for b in battery(cfg1)
    )
    rng = np.random.default_rng(seed)
    force = F * cfg1.hbar / ell  # F in units of hbar/ell
    spec = KernelSpec.linear(V0 * cfg1.hbar, force)
    res = []
    unit = cfg1.hbar / math.sqrt(ell)
    for x0, x, T in _random_points(rng, n, 1):
        x0, x = x0 * ell, x * ell
        r = schrodinger_residual(kernel_field(x0, cfg1, spec), x, T, cfg1, h * ell, h,
                                 potential=spec.potential, x0=x0)
        res.append(abs(r) / unit)
    b = BoundaryData([0.0], [ell], 1.0)
    study = convergence_study(b, N_list, spec, cfg1)
    order = study.fitted_order
    passed = identical and max(res) < tol and order is not None and abs(order - 2) <= 0.3
    return ResidualReport(
        check="linear_potential",
        params={"bitwise_free_reduction": identical, "F": force, "V0": V0 * cfg1.hbar,
                "schrodinger_points": n, "h": h, "tol": tol, "seed": seed,
                "N_list": list(N_list), "lattice_residuals": study.residuals,
                "order_variable": "N+1", "mass": cfg.mass, "hbar": cfg.hbar},
        residuals=res,
        fitted_order=order,
        passed=passed,
    )


def check_spreading(cfg: PhysicsConfig, spacing: float = 0.05, half_width: float = 12.0,
                    T: float = 2.0, width_tol: float = 1e-3, norm_tol: float = 1e-4,
                    lin_tol: float = 1e-10, k_tol: float = 1e-4, **_) -> ResidualReport:
    """Free spreading of a sigma0 = 1 packet, norm, linearity and mean momentum."""
    cfg1 = _one_d(cfg)
    ell = _ell(cfg1)
    grid = centered_grid(half_width * ell, spacing * ell, 1)
    psi0 = gaussian_packet(grid, 0.0, ell, cfg=cfg1)
    out = evolve_wavefunction(psi0, T, FREE, cfg1)
    width_err = abs(packet_width(out) - spreading_width(ell, T, cfg1)) / ell
    norm_err = abs(norm(out) - 1)

    p1 = gaussian_packet(grid, -1.0 * ell, ell, k0=1.0 / ell, cfg=cfg1)
    p2 = gaussian_packet(grid, 1.5 * ell, 0.8 * ell, cfg=cfg1)
    a, c = 0.3 + 0.4j, -1.1 + 0.2j
    lhs = evolve_wavefunction(a * p1 + c * p2, T, FREE, cfg1).values
    rhs = a * evolve_wavefunction(p1, T, FREE, cfg1).values + c * evolve_wavefunction(p2, T, FREE, cfg1).values
    lin_err = float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))

    moving = gaussian_packet(grid, -1.0 * ell, ell, k0=0.5 / ell, cfg=cfg1)
    k0 = mean_wavenumber(moving)
    k_err = abs(mean_wavenumber(evolve_wavefunction(moving, T, FREE, cfg1)) - k0) * ell
    return ResidualReport(
        check="spreading",
        params={"sigma0": ell, "T": T, "spacing": spacing * ell, "half_width": half_width * ell,
                "expected_width": spreading_width(ell, T, cfg1), "width": packet_width(out),
                "norm": norm(out), "tolerances": [width_tol, norm_tol, lin_tol, k_tol],
                "residual_names": ["width", "norm", "linearity", "mean_wavenumber"],
                "mass": cfg.mass, "hbar": cfg.hbar},
        residuals=[width_err, norm_err, lin_err, k_err],
        passed=width_err <= width_tol and norm_err <= norm_tol and lin_err <= lin_tol and k_err <= k_tol,
    )


CHECKS: dict[str, Callable[..., ResidualReport]] = {
    "hj": check_hj,
    "schrodinger": check_schrodinger,
    "delta_limit": check_delta_limit,
    "semigroup": check_semigroup,
    "three_way": check_three_way,
    "ansatz": check_ansatz,
    "gaussian": check_gaussian,
    "linear_potential": check_linear_potential,
    "spreading": check_spreading,
}

#: Checks whose grid spacing may be overridden from the command line.
GRID_CHECKS = ("delta_limit", "semigroup", "spreading")


def run_check(name: str, cfg: PhysicsConfig, seed: int = 0, **opts) -> ResidualReport:
    """Run one registered check; library errors become a failing report
    carrying the diagnostics."""
    fn = CHECKS[name]
    kwargs = dict(opts)
    if name in ("hj", "schrodinger", "gaussian", "linear_potential"):
        kwargs["seed"] = seed
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    try:
        return fn(cfg, **kwargs)
    except PathPropError as exc:
        params = {"error": type(exc).__name__, "message": str(exc), **{k: v for k, v in kwargs.items()}}
        spacing = getattr(exc, "required_spacing", None)
        if spacing is not None:
            params["required_spacing"] = spacing
        return ResidualReport(check=name, params=params, residuals=[], passed=False)
