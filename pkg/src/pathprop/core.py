"""Physical configuration, uniform grids and complex fields on them.

Everything here is immutable; arrays held by the dataclasses are marked
read-only on construction.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    IncompatibleGridsError,
    InvalidGridError,
    InvalidParameterError,
)

#: Fraction of each half-axis covered by the cosine taper used by every
#: windowed quadrature in the package.
DEFAULT_TAPER = 0.2


class GridCoverageWarning(UserWarning):
    """A packet or path is too close to the edge of its grid."""


@dataclass(frozen=True)
class PhysicsConfig:
    """Mass, reduced Planck constant and spatial dimension.

    Defaults are the dimensionless choice ``mass = hbar = 1`` in one dimension.
    """

    mass: float = 1.0
    hbar: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise InvalidParameterError(f"mass must be positive, got {self.mass}")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise InvalidParameterError(f"hbar must be positive, got {self.hbar}")
        if self.dim not in (1, 2, 3):
            raise InvalidParameterError(f"dim must be 1, 2 or 3, got {self.dim}")

    def vector(self, value, name="vector") -> np.ndarray:
        """Coerce ``value`` to a float vector of length ``dim``.

        Scalars are broadcast to every component.
        """
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size == 1 and self.dim > 1:
            arr = np.full(self.dim, float(arr[0]))
        if arr.shape != (self.dim,):
            raise InvalidParameterError(
                f"{name} must have {self.dim} components, got shape {arr.shape}"
            )
        return arr


def as_vector(value) -> np.ndarray:
    return np.atleast_1d(np.asarray(value, dtype=float))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpatialGrid:
    """Rectangular uniform grid; axis ``i`` has points ``origin[i] + k*spacing[i]``."""

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.origin) == len(self.spacing) == len(self.counts)):
            raise InvalidGridError("origin, spacing and counts must have equal length")
        if not 1 <= len(self.counts) <= 3:
            raise InvalidGridError("grids have 1 to 3 axes")
        for h in self.spacing:
            if not (h > 0 and math.isfinite(h)):
                raise InvalidGridError(f"spacing must be positive, got {h}")
        for n in self.counts:
            if n < 2:
                raise InvalidGridError(f"each axis needs at least 2 points, got {n}")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.counts[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.dim)]

    def lower(self) -> np.ndarray:
        return np.array(self.origin)

    def upper(self) -> np.ndarray:
        return np.array([self.axis(i)[-1] for i in range(self.dim)])

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower() + self.upper())

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``(size, dim)`` in C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def axis_weights(self, i: int) -> np.ndarray:
        w = np.full(self.counts[i], self.spacing[i])
        w[0] = w[-1] = 0.5 * self.spacing[i]
        return w

    def trapezoid_weights(self) -> np.ndarray:
        return outer_product([self.axis_weights(i) for i in range(self.dim)])

    def axis_taper(self, i: int, fraction: float = DEFAULT_TAPER) -> np.ndarray:
        return cosine_taper(self.axis(i), fraction)

    def taper(self, fraction: float = DEFAULT_TAPER) -> np.ndarray:
        return outer_product([self.axis_taper(i, fraction) for i in range(self.dim)])

    def interior_mask(self, fraction: float = DEFAULT_TAPER) -> np.ndarray:
        """Points where the taper of the given fraction is exactly one."""
        return self.taper(fraction) == 1.0

    def interior_bounds(self, fraction: float = DEFAULT_TAPER):
        lo, hi = self.lower(), self.upper()
        width = fraction * 0.5 * (hi - lo)
        return lo + width, hi - width

    def same_as(self, other: "SpatialGrid") -> bool:
        return (
            self.counts == other.counts
            and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12)
            and np.allclose(self.spacing, other.spacing, rtol=1e-14, atol=0)
        )


def outer_product(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(factors[0])
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def cosine_taper(coords: np.ndarray, fraction: float = DEFAULT_TAPER) -> np.ndarray:
    """Raised-cosine window falling from 1 to 0 over the outer ``fraction`` of
    each half of ``coords``."""
    if not 0 <= fraction < 1:
        raise InvalidParameterError(f"taper fraction must be in [0, 1), got {fraction}")
    coords = np.asarray(coords, dtype=float)
    w = np.ones_like(coords)
    if fraction == 0:
        return w
    a, b = coords[0], coords[-1]
    width = fraction * 0.5 * (b - a)
    lo = coords < a + width
    hi = coords > b - width
    w[lo] = 0.5 * (1.0 - np.cos(np.pi * (coords[lo] - a) / width))
    w[hi] = 0.5 * (1.0 - np.cos(np.pi * (b - coords[hi]) / width))
    return w


def build_grid(origin, spacing, counts) -> SpatialGrid:
    """Build a uniform grid.

    ``spacing`` may be one number (shared by all axes) or one per axis.

    >>> build_grid(0.0, 0.5, 3).axis(0)
    array([0. , 0.5, 1. ])
    """
    origin = tuple(float(v) for v in as_vector(origin))
    counts = tuple(int(n) for n in np.atleast_1d(counts))
    spacing_arr = as_vector(spacing)
    if spacing_arr.size == 1:
        spacing_arr = np.full(len(counts), spacing_arr[0])
    if len(origin) == 1 and len(counts) > 1:
        origin = origin * len(counts)
    return SpatialGrid(origin, tuple(float(h) for h in spacing_arr), counts)


def centered_grid(half_width, spacing, dim=1, center=0.0) -> SpatialGrid:
    """Grid spanning ``center +- half_width`` on every axis (end points included
    when ``half_width`` is a multiple of ``spacing``)."""
    half = as_vector(half_width)
    if half.size == 1:
        half = np.full(dim, half[0])
    c = as_vector(center)
    if c.size == 1:
        c = np.full(dim, c[0])
    h = as_vector(spacing)
    if h.size == 1:
        h = np.full(dim, h[0])
    counts = [int(round(2 * hw / hs)) + 1 for hw, hs in zip(half, h)]
    if any(hw <= 0 for hw in half):
        raise InvalidGridError("half_width must be positive")
    return build_grid(c - half, h, counts)


@dataclass(frozen=True, eq=False)
class Wavefunction:
    """Complex field sampled on a :class:`SpatialGrid`."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.size != self.grid.size:
            raise InvalidGridError(
                f"{vals.size} values for a grid of {self.grid.size} points"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("wavefunction values must be finite")
        object.__setattr__(self, "values", _readonly(vals))

    def with_values(self, values) -> "Wavefunction":
        return Wavefunction(self.grid, values)

    def __mul__(self, c):
        return Wavefunction(self.grid, complex(c) * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "Wavefunction"):
        _check_grids(self, other)
        return Wavefunction(self.grid, self.values + other.values)

    def __sub__(self, other: "Wavefunction"):
        _check_grids(self, other)
        return Wavefunction(self.grid, self.values - other.values)


def _check_grids(a: Wavefunction, b: Wavefunction):
    if not a.grid.same_as(b.grid):
        raise IncompatibleGridsError("wavefunctions live on different grids")


def inner_product(a: Wavefunction, b: Wavefunction) -> complex:
    """Trapezoidal ``<a|b>``, conjugate-linear in ``a``."""
    _check_grids(a, b)
    w = a.grid.trapezoid_weights()
    return complex(np.sum(w * np.conj(a.values) * b.values))


def norm(psi: Wavefunction) -> float:
    return math.sqrt(max(inner_product(psi, psi).real, 0.0))


def gaussian_packet(grid: SpatialGrid, center, sigma0: float, k0=0.0,
                    cfg: PhysicsConfig | None = None) -> Wavefunction:
    """Minimum-uncertainty packet ``exp(-|x-c|^2/(4 sigma0^2) + i k0.(x-c))``,
    normalised to unit trapezoidal norm.

    ``k0`` is a wave vector (momentum over hbar).  Emits
    :class:`GridCoverageWarning` when the grid does not extend at least
    ``5*sigma0`` beyond the centre on every axis.
    """
    if not sigma0 > 0:
        raise InvalidParameterError(f"sigma0 must be positive, got {sigma0}")
    cfg = cfg or PhysicsConfig(dim=grid.dim)
    if cfg.dim != grid.dim:
        raise InvalidGridError(f"grid has {grid.dim} axes but config dim is {cfg.dim}")
    c = cfg.vector(center, "center")
    k = cfg.vector(k0, "k0")
    if np.any(c - 5 * sigma0 < grid.lower()) or np.any(c + 5 * sigma0 > grid.upper()):
        warnings.warn(
            "grid extends less than 5 sigma0 beyond the packet centre",
            GridCoverageWarning,
            stacklevel=2,
        )
    mesh = grid.mesh()
    r2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
    phase = sum(ki * (m - ci) for m, ki, ci in zip(mesh, k, c))
    vals = np.exp(-r2 / (4 * sigma0**2) + 1j * phase)
    psi = Wavefunction(grid, vals)
    return psi * (1.0 / norm(psi))


# -- CSV serialisation ------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def field_to_csv(psi: Wavefunction, cfg: PhysicsConfig) -> str:
    """Render a field as CSV text.

    The first line is a ``#`` comment carrying units, config and grid; the
    second names the columns ``index0.., coord0.., re, im``.
    """
    g = psi.grid
    buf = io.StringIO()
    buf.write(
        "# units=natural(length,mass,hbar) "
        f"mass={_fmt(cfg.mass)} hbar={_fmt(cfg.hbar)} dim={cfg.dim} "
        f"origin={';'.join(map(_fmt, g.origin))} "
        f"spacing={';'.join(map(_fmt, g.spacing))} "
        f"counts={';'.join(map(str, g.counts))}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [f"index{i}" for i in range(g.dim)] + [f"coord{i}" for i in range(g.dim)] + ["re", "im"]
    )
    axes = g.axes()
    flat = psi.values.ravel()
    for flat_i, idx in enumerate(np.ndindex(*g.shape)):
        v = flat[flat_i]
        writer.writerow(
            [str(j) for j in idx]
            + [_fmt(axes[a][j]) for a, j in enumerate(idx)]
            + [_fmt(v.real), _fmt(v.imag)]
        )
    return buf.getvalue()


def write_field_csv(path, psi: Wavefunction, cfg: PhysicsConfig) -> Path:
    path = Path(path)
    path.write_text(field_to_csv(psi, cfg))
    return path


def read_field_csv(path) -> tuple[Wavefunction, PhysicsConfig]:
    """Inverse of :func:`write_field_csv`."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise InvalidParameterError("missing field CSV header comment")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    cfg = PhysicsConfig(float(meta["mass"]), float(meta["hbar"]), int(meta["dim"]))
    grid = SpatialGrid(
        tuple(float(v) for v in meta["origin"].split(";")),
        tuple(float(v) for v in meta["spacing"].split(";")),
        tuple(int(v) for v in meta["counts"].split(";")),
    )
    rows = list(csv.reader(lines[2:]))
    values = np.empty(grid.shape, dtype=complex)
    for row in rows:
        idx = tuple(int(v) for v in row[: grid.dim])
        values[idx] = complex(float(row[-2]), float(row[-1]))
    return Wavefunction(grid, values), cfg
