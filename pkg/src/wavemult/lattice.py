"""Periodic sampling of R^n and the discrete Fourier calculus on it.

Conventions follow the continuum transform pair

    f^(xi) = int e^{-i xi.x} f(x) dx,      g^v(x) = (2 pi)^{-n} int e^{i xi.x} g(xi) dxi,

approximated by periodized trapezoid sums. Physical samples are stored with
the origin at index ``N // 2`` along every axis; frequency samples are stored
in FFT order (zero frequency at index 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.fft as sfft

from .errors import AliasingError, GridMismatchError, ValidationError

#: Frequency-side supports must stay below this fraction of the Nyquist frequency.
NYQUIST_GUARD = 15.0 / 16.0

Side = Literal["physical", "frequency"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``N`` samples per axis on a box of side ``L``."""

    n: int
    N: int
    L: float

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def nyquist(self) -> float:
        return np.pi * self.N / self.L

    @property
    def guard(self) -> float:
        """Largest admissible frequency radius for spectral constructions."""
        return NYQUIST_GUARD * self.nyquist

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell(self) -> float:
        return self.dx**self.n

    @property
    def freq_cell(self) -> float:
        return self.dxi**self.n

    def x_axis(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.dx

    def xi_axis(self) -> np.ndarray:
        return sfft.fftfreq(self.N, d=self.dx) * 2.0 * np.pi

    def coords(self) -> tuple[np.ndarray, ...]:
        axes = [self.x_axis()] * self.n
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def freqs(self) -> tuple[np.ndarray, ...]:
        axes = [self.xi_axis()] * self.n
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def radius(self) -> np.ndarray:
        return _norm(self.coords())

    def freq_radius(self) -> np.ndarray:
        return _norm(self.freqs())


def _norm(parts):
    total = 0.0
    for p in parts:
        total = total + p * p
    return np.sqrt(total)


def make_grid(n: int, N: int, L: float) -> GridSpec:
    """Validate and build a :class:`GridSpec`."""
    if n not in (1, 2):
        raise ValidationError(f"dimension n={n} not in {{1, 2}}")
    if int(N) != N or N < 16 or (int(N) & (int(N) - 1)) != 0:
        raise ValidationError(f"N={N} must be a power of two >= 16")
    if not np.isfinite(L) or L <= 0:
        raise ValidationError(f"box length L={L} must be positive")
    return GridSpec(int(n), int(N), float(L))


@dataclass(frozen=True)
class RadialProfile:
    """Scalar function of the frequency radius with a known support interval."""

    func: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]

    def __call__(self, rho):
        return self.func(np.asarray(rho, dtype=float))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of a function on a grid, on one side of the transform.

    ``band`` is an optional annulus ``(rho_min, rho_max)`` certifying where the
    spectrum lives. The array is stored read-only.
    """

    grid: GridSpec
    side: Side
    data: np.ndarray
    band: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if self.side not in ("physical", "frequency"):
            raise ValidationError(f"unknown side {self.side!r}")
        arr = np.array(self.data, dtype=complex)
        if arr.shape != self.grid.shape:
            raise ValidationError(f"data shape {arr.shape} != grid shape {self.grid.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.band is not None:
            lo, hi = self.band
            object.__setattr__(self, "band", (float(lo), float(hi)))

    def replace(self, data=None, band="keep", side=None) -> "Field":
        return Field(
            self.grid,
            self.side if side is None else side,
            self.data if data is None else data,
            self.band if band == "keep" else band,
        )

    def __mul__(self, c):
        return self.replace(self.data * c)

    __rmul__ = __mul__

    def spectral_mass_outside(self, band=None) -> float:
        """Relative l2 mass of the spectrum outside ``band`` (default: own band)."""
        band = self.band if band is None else band
        if band is None:
            return 0.0
        spec = self.data if self.side == "frequency" else fourier_transform(self).data
        rho = self.grid.freq_radius()
        tol = 1e-9 * max(1.0, band[1])
        outside = (rho < band[0] - tol) | (rho > band[1] + tol)
        total = np.sum(np.abs(spec) ** 2)
        if total == 0:
            return 0.0
        return float(np.sum(np.abs(np.where(outside, spec, 0)) ** 2) / total)


def check_same_grid(*fields: Field) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {f.grid} vs {grid}")
    return grid


def _require_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise ValidationError("field contains NaN or Inf samples")


def fourier_transform(f: Field) -> Field:
    """Quadrature of ``int e^{-i xi.x} f(x) dx`` at the lattice frequencies."""
    if f.side != "physical":
        raise ValidationError("fourier_transform expects a physical-side field")
    _require_finite(f.data)
    spec = sfft.fftn(sfft.ifftshift(f.data)) * f.grid.cell
    return Field(f.grid, "frequency", spec, f.band)


def inverse_fourier_transform(F: Field) -> Field:
    """Quadrature of ``(2 pi)^{-n} int e^{i xi.x} F(xi) dxi`` at the grid points."""
    if F.side != "frequency":
        raise ValidationError("inverse_fourier_transform expects a frequency-side field")
    _require_finite(F.data)
    phys = sfft.fftshift(sfft.ifftn(F.data)) / F.grid.cell
    return Field(F.grid, "physical", phys, F.band)


def estimate_support(profile, rho_max: float, samples: int = 1 << 16) -> tuple[float, float] | None:
    """Support of a bare radial callable, by dense sampling on ``[0, rho_max]``."""
    rho = np.linspace(0.0, rho_max, samples)
    vals = np.asarray(profile(rho))
    nz = np.nonzero(vals != 0)[0]
    if nz.size == 0:
        return None
    step = rho[1] - rho[0]
    return (max(0.0, rho[nz[0]] - step), rho[nz[-1]] + step)


def check_band(grid: GridSpec, support) -> None:
    if support is not None and support[1] > grid.guard:
        raise AliasingError(
            f"spectral support reaches {support[1]:.6g} > guard {grid.guard:.6g} "
            f"(15/16 of Nyquist {grid.nyquist:.6g})"
        )


def synthesize_radial(profile, grid: GridSpec) -> Field:
    """Physical-side field whose spectrum is ``profile(|xi|)``.

    ``profile`` is a :class:`RadialProfile` (support taken from it) or a bare
    callable, whose support is then estimated by sampling.
    """
    if isinstance(profile, RadialProfile):
        support = profile.support
    else:
        support = estimate_support(profile, grid.nyquist * np.sqrt(grid.n) * 1.01)
    check_band(grid, support)
    spec = np.asarray(profile(grid.freq_radius()), dtype=complex)
    spec = np.broadcast_to(spec, grid.shape)
    band = None if support is None else (float(support[0]), float(support[1]))
    return inverse_fourier_transform(Field(grid, "frequency", spec, band))


def physical_field(grid: GridSpec, values, band=None) -> Field:
    return Field(grid, "physical", np.broadcast_to(values, grid.shape), band)
