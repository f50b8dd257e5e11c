"""Gaussian and Fresnel-type integrals.

* :func:`gaussian_closed_form` -- the D-dimensional complex Gaussian integral
  with the square-root branch fixed by continuity.
* :func:`brute_force_gaussian` -- trapezoidal cube quadrature, used as an
  oracle for the closed form on absolutely convergent forms.
* :func:`delta_gaussian` -- nascent delta function.
* :func:`momentum_kernel_integral` -- the constant-momentum integral that
  produces the free propagator, evaluated numerically with a Gaussian
  regulator and Richardson extrapolation to zero regulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classical import BoundaryData
from .core import PhysicsConfig, as_vector
from .errors import (
    ConvergenceFailure,
    InvalidParameterError,
    OracleDomainError,
    SingularFormError,
)


@dataclass(frozen=True, eq=False)
class GaussianForm:
    """Exponent ``-1/2 X.A.X + B.X`` of a D-dimensional Gaussian integrand."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = np.atleast_1d(np.asarray(self.B, dtype=complex))
        if A.shape[0] != A.shape[1] or B.shape != (A.shape[0],):
            raise InvalidParameterError(f"incompatible shapes A{A.shape}, B{B.shape}")
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.max(np.abs(A - A.T)) > 1e-14 * scale:
            raise InvalidParameterError("A must be symmetric")
        re_min = float(np.min(np.linalg.eigvalsh(A.real)))
        if re_min < -1e-12 * scale:
            raise InvalidParameterError(
                "Re(A) must be positive semi-definite (or A purely imaginary)"
            )
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.B.size


def inverse_sqrt_det(A) -> complex:
    """``det(A)^(-1/2)`` on the branch continuous along ``A + eps*I``, ``eps``
    decreasing from +infinity to 0.

    Every eigenvalue of a complex symmetric ``A`` with positive
    semi-definite real part lies in the closed right half-plane, and so does
    each shifted eigenvalue along the path; the principal square root is
    continuous there, so the product of principal roots is the continued
    branch.  Purely imaginary ``A = i a`` gives ``exp(-i pi/4)/sqrt(a)`` per
    eigenvalue.
    """
    lam = np.linalg.eigvals(np.atleast_2d(np.asarray(A, dtype=complex)))
    scale = float(np.max(np.abs(lam)))
    if scale == 0 or float(np.min(np.abs(lam))) <= 1e-14 * scale:
        raise SingularFormError("quadratic form is singular")
    return complex(np.prod(1.0 / np.sqrt(lam)))


def gaussian_closed_form(g: GaussianForm) -> complex:
    """``int d^D X exp(-1/2 X.A.X + B.X) = (2 pi)^(D/2) det(A)^(-1/2) exp(B.A^-1.B / 2)``."""
    pref = (2 * math.pi) ** (g.dim / 2) * inverse_sqrt_det(g.A)
    quad = complex(g.B @ np.linalg.solve(g.A, g.B))
    return pref * complex(np.exp(0.5 * quad))


def brute_force_gaussian(g: GaussianForm, cutoff: float = 30.0, samples: int = 1_000_000,
                         chunk: int = 1 << 20) -> complex:
    """Tensor trapezoid rule over the cube ``|X_i| <= cutoff``.

    Only defined for forms whose real part is positive definite; the sum is
    accumulated in chunks along the first axis to bound memory.
    """
    if float(np.min(np.linalg.eigvalsh(g.A.real))) <= 0:
        raise OracleDomainError("brute force needs a positive-definite real part")
    if samples < 2 or not cutoff > 0:
        raise InvalidParameterError("need samples >= 2 and cutoff > 0")
    x = np.linspace(-cutoff, cutoff, samples)
    w = np.full(samples, x[1] - x[0])
    w[0] = w[-1] = 0.5 * (x[1] - x[0])
    A, B = g.A, g.B
    D = g.dim
    if D == 1:
        total = 0j
        for s in range(0, samples, chunk):
            xs = x[s:s + chunk]
            total += np.sum(w[s:s + chunk] * np.exp(-0.5 * A[0, 0] * xs * xs + B[0] * xs))
        return complex(total)

    rest = np.stack([m.ravel() for m in np.meshgrid(*([x] * (D - 1)), indexing="ij")], axis=-1)
    w_rest = np.ones(rest.shape[0])
    for m in np.meshgrid(*([w] * (D - 1)), indexing="ij"):
        w_rest = w_rest * m.ravel()
    Arr, A1r = A[1:, 1:], A[0, 1:]
    q_rest = -0.5 * np.einsum("ni,ij,nj->n", rest, Arr, rest) + rest @ B[1:]
    lin = rest @ A1r
    base = np.exp(q_rest) * w_rest
    rows = max(1, chunk // rest.shape[0])
    total = 0j
    for s in range(0, samples, rows):
        xs = x[s:s + rows, None]
        expo = -0.5 * A[0, 0] * xs * xs + B[0] * xs - xs * lin[None, :]
        total += np.sum(w[s:s + rows, None] * np.exp(expo) * base[None, :])
    return complex(total)


def delta_gaussian(x, eps: float) -> float:
    """``(1/(pi eps))^(D/2) exp(-|x|^2/eps)``, a nascent Dirac delta."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    x = as_vector(x)
    return (1.0 / (math.pi * eps)) ** (x.size / 2) * math.exp(-float(x @ x) / eps)


# -- regulated momentum integral -------------------------------------------

DEFAULT_EPS_LADDER = (0.02, 0.01, 0.005, 0.0025, 0.00125)


@dataclass(frozen=True)
class OscillatoryQuadratureConfig:
    """Regulator ladder and momentum grid for the Fresnel momentum integral.

    ``eps_ladder`` is in units of ``T/(m hbar)`` so that ``eps*q^2`` is
    dimensionless.  The expansion of the regulated integral in ``eps`` runs
    in powers of ``eps * S/hbar``, so with ``adaptive=True`` the ladder is
    shrunk by ``1/max(1, S/(4 hbar))`` (``S`` the largest per-axis classical
    action) and ``samples`` is raised as needed to keep the grid below the
    Nyquist limit; ``samples`` is then a floor.  ``cutoff=None`` picks the
    momentum cutoff where the smallest regulator has damped the integrand to
    ``exp(-36)``.
    """

    eps_ladder: tuple[float, ...] = DEFAULT_EPS_LADDER
    cutoff: float | None = None
    samples: int = 1 << 15
    adaptive: bool = True

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_ladder)
        if len(eps) < 3:
            raise InvalidParameterError("need at least 3 regulator values")
        if any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise InvalidParameterError("regulators must be positive and strictly decreasing")
        if self.samples < 64:
            raise InvalidParameterError("need at least 64 samples per axis")
        if self.cutoff is not None and not self.cutoff > 0:
            raise InvalidParameterError("cutoff must be positive")
        object.__setattr__(self, "eps_ladder", eps)


@dataclass
class MomentumLadderResult:
    """Extrapolated value together with the raw ladder (for reports)."""

    value: complex
    eps: list[float]
    raw: list[complex]
    differences: list[float]
    extrapolants: list[complex]
    cutoff: float
    samples: int
    nyquist_ok: bool
    params: dict = field(default_factory=dict)


def richardson_to_zero(eps, values) -> list[complex]:
    """Neville tableau extrapolating ``I(eps)`` to ``eps = 0``.

    Returns the top entry of each column: column ``k`` has removed the terms
    ``eps, ..., eps^k``.  Column one is the pairwise elimination of the linear
    term.
    """
    eps = [float(e) for e in eps]
    P = [complex(v) for v in values]
    out = [P[-1]]
    n = len(P)
    for k in range(1, n):
        P = [(eps[i + k] * P[i] - eps[i] * P[i + 1]) / (eps[i + k] - eps[i]) for i in range(n - k)]
        out.append(P[-1])
    return out


def _axis_integral(q, w, disp, T, eps, cfg):
    hb, m = cfg.hbar, cfg.mass
    phase = q * (disp / hb) - q * q * (T / (2 * m * hb))
    return complex(np.sum(w * np.exp(1j * phase - eps * q * q)))


def momentum_kernel_ladder(b: BoundaryData, cfg: PhysicsConfig,
                           q: OscillatoryQuadratureConfig | None = None) -> MomentumLadderResult:
    """Evaluate ``(2 pi hbar)^-D int d^D q exp[i q.dx/hbar - i q^2 T/(2 m hbar) - eps q^2]``
    for every regulator on the ladder and extrapolate to ``eps -> 0``.

    The integrand factorises over axes, so the tensor trapezoid rule on the
    momentum cube is evaluated as a product of one-dimensional sums.

    Raises :class:`ConvergenceFailure` unless successive ladder differences
    shrink strictly.
    """
    q = q or OscillatoryQuadratureConfig()
    m, hb, T = cfg.mass, cfg.hbar, b.T
    disp = b.displacement
    unit = T / (m * hb)
    scale = 1.0
    if q.adaptive:
        s_axis = m * float(np.max(disp * disp)) / (2 * T * hb)
        scale = 1.0 / max(1.0, s_axis / 4.0)
    eps = [e * unit * scale for e in q.eps_ladder]
    cutoff = q.cutoff if q.cutoff is not None else math.sqrt(36.0 / eps[-1])
    max_freq = float(np.max(np.abs(disp))) / hb + cutoff * T / (m * hb)
    samples = q.samples
    if q.adaptive:
        # h * max_freq < pi with h = 2 cutoff/(samples - 1)
        samples = max(samples, int(math.ceil(2 * cutoff * max_freq / math.pi)) + 2)
    grid = np.linspace(-cutoff, cutoff, samples)
    h = grid[1] - grid[0]
    w = np.full(samples, h)
    w[0] = w[-1] = 0.5 * h
    norm = (2 * math.pi * hb) ** (-b.dim)

    raw = []
    for e in eps:
        cache = {}
        val = norm
        for d in disp:
            key = float(d)
            if key not in cache:
                cache[key] = _axis_integral(grid, w, key, T, e, cfg)
            val *= cache[key]
        raw.append(complex(val))

    diffs = [abs(a - c) for a, c in zip(raw, raw[1:])]
    nyquist_ok = h * max_freq < math.pi
    tableau = richardson_to_zero(eps, raw)
    result = MomentumLadderResult(
        value=tableau[-1], eps=eps, raw=raw, differences=diffs, extrapolants=tableau,
        cutoff=cutoff, samples=samples, nyquist_ok=nyquist_ok,
        params={"eps_ladder_rel": list(q.eps_ladder), "ladder_scale": scale,
                "cutoff": cutoff, "samples": samples},
    )
    if any(d2 >= d1 for d1, d2 in zip(diffs, diffs[1:])):
        raise ConvergenceFailure(
            "regulated integrals do not converge monotonically along the ladder",
            diagnostics={"eps": eps, "raw": raw, "differences": diffs},
        )
    return result


def momentum_kernel_integral(b: BoundaryData, cfg: PhysicsConfig,
                             q: OscillatoryQuadratureConfig | None = None) -> complex:
    """Extrapolated constant-momentum integral; equals the free propagator."""
    return momentum_kernel_ladder(b, cfg, q).value


def regulated_momentum_closed_form(b: BoundaryData, cfg: PhysicsConfig, eps: float) -> complex:
    """The regulated integral at one ``eps``, via :func:`gaussian_closed_form`.

    ``eps = 0`` is allowed: the form is then purely imaginary (Fresnel) and
    the continuity branch applies.
    """
    m, hb, T = cfg.mass, cfg.hbar, b.T
    D = b.dim
    a = 2 * eps + 1j * T / (m * hb)
    g = GaussianForm(a * np.eye(D), 1j * b.displacement / hb)
    return (2 * math.pi * hb) ** (-D) * gaussian_closed_form(g)
