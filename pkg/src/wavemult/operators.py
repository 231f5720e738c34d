"""Linear and bilinear Fourier multipliers on grid fields.

A bilinear symbol is applied through a finite sum of separable terms
``sigma(xi, eta) = sum_r u_r(xi) v_r(eta)``, which turns the double Fourier
integral into ``sum_r (u_r(D) f) (v_r(D) g)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .errors import AliasingError, ConvergenceError, ValidationError
from .lattice import Field, GridSpec, RadialProfile, check_same_grid
from .symbols import SymbolFamily, WavePhase, theta

#: Size limits of the dense double-sum oracle (samples per axis).
DENSE_LIMIT = {1: 64, 2: 32}


def radial(func, support=None) -> RadialProfile:
    """Wrap a function of ``|xi|`` so multiplier routines treat it as radial."""
    return RadialProfile(func, support if support is not None else (0.0, np.inf))


def sample_multiplier(theta_, grid: GridSpec) -> np.ndarray:
    """Sample a linear multiplier on the frequency lattice (FFT order).

    Accepts a :class:`RadialProfile` (evaluated at ``|xi|``), a
    :class:`WavePhase` (giving ``e^{i phi(xi)}``), an array of grid shape, a
    scalar, or a callable taking the tuple of frequency components.
    """
    if isinstance(theta_, RadialProfile):
        vals = theta_(grid.freq_radius())
    elif isinstance(theta_, WavePhase):
        vals = np.exp(1j * theta_(grid.freqs()))
    elif callable(theta_):
        vals = theta_(grid.freqs())
    else:
        vals = theta_
    vals = np.broadcast_to(np.asarray(vals, dtype=complex), grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("multiplier is not finite on the lattice")
    return vals


def _band_of(theta_):
    if isinstance(theta_, RadialProfile) and np.isfinite(theta_.support[1]):
        return theta_.support
    return None


def _intersect(a, b):
    if a is None:
        return b
    if b is None:
        return a
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, max(lo, hi))


def _physical(f: Field) -> Field:
    if f.side != "physical":
        raise ValidationError("operators act on physical-side fields")
    if not np.all(np.isfinite(f.data)):
        raise ValidationError("field contains NaN or Inf samples")
    return f


def _apply_array(mult: np.ndarray, data: np.ndarray) -> np.ndarray:
    # the centring shift commutes with the pointwise multiplier up to a phase,
    # so apply it on the shifted array to keep x = 0 at index N // 2
    spec = sfft.fftn(sfft.ifftshift(data))
    return sfft.fftshift(sfft.ifftn(spec * mult))


def linear_multiplier_apply(theta_, f: Field) -> Field:
    """Return ``(theta(xi) f^(xi))^v`` for a sampled multiplier ``theta``."""
    f = _physical(f)
    mult = sample_multiplier(theta_, f.grid)
    band = _intersect(f.band, _band_of(theta_))
    return Field(f.grid, "physical", _apply_array(mult, f.data), band)


def wave_multiplier(phase: WavePhase, profile=None, m: float = 0.0):
    """Sampler of ``e^{i phi(xi)} (1 + |xi|^2)^{m/2} profile(|xi|)``."""

    def mult(freqs):
        rho2 = sum(c * c for c in freqs)
        out = np.exp(1j * phase(freqs)) * (1.0 + rho2) ** (m / 2.0)
        if profile is not None:
            out = out * profile(np.sqrt(rho2))
        return out

    return mult


# -- bilinear symbols -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BilinearSymbol:
    """Evaluator of ``sigma(xi, eta)`` plus an optional separable representation.

    ``terms`` is a tuple of pairs ``(u, v)`` of callables on frequency
    component tuples with ``sigma = sum u(xi) v(eta)`` up to ``tail_bound`` in
    sup-norm.
    """

    n: int
    evaluate: Callable | None = None
    terms: tuple | None = None
    tail_bound: float = 0.0

    @property
    def separable(self) -> bool:
        return self.terms is not None and len(self.terms) == 1

    def __call__(self, xi, eta):
        if self.evaluate is not None:
            return self.evaluate(xi, eta)
        total = 0.0
        for u, v in self.terms:
            total = total + np.asarray(u(xi)) * np.asarray(v(eta))
        return total


def _radial_factor(func):
    return lambda comps: func(np.sqrt(sum(c * c for c in comps)))


def _components(x, n):
    if isinstance(x, (tuple, list)):
        return tuple(x)
    x = np.asarray(x)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return (x,)
    return tuple(x[..., k] for k in range(n))


def as_bilinear_symbol(sigma, n: int | None = None) -> BilinearSymbol:
    """Coerce constants, symbol families and expansions to :class:`BilinearSymbol`."""
    if isinstance(sigma, BilinearSymbol):
        return sigma
    if isinstance(sigma, SymbolFamily):
        fam = sigma
        ev = lambda xi, eta: fam(_components(xi, fam.n), _components(eta, fam.n))  # noqa: E731
        terms = None
        if fam.factors is not None:
            terms = ((_radial_factor(fam.factors[0]), _radial_factor(fam.factors[1])),)
        return BilinearSymbol(fam.n, ev, terms)
    if hasattr(sigma, "separable_terms"):
        terms = tuple(sigma.separable_terms())
        return BilinearSymbol(sigma.n, None, terms, float(sigma.tail_bound))
    if np.isscalar(sigma):
        c = complex(sigma)
        cst = lambda comps: np.full(np.broadcast(*comps).shape, c)  # noqa: E731
        one = lambda comps: np.ones(np.broadcast(*comps).shape)  # noqa: E731
        return BilinearSymbol(n or 1, None, ((cst, one),))
    if callable(sigma):
        return BilinearSymbol(n or 1, sigma, None)
    raise ValidationError(f"cannot interpret {type(sigma).__name__} as a bilinear symbol")


def separable_symbol(u, v, n: int) -> BilinearSymbol:
    """``u(xi) v(eta)`` with ``u``, ``v`` callables on component tuples."""
    return BilinearSymbol(n, lambda xi, eta: u(_components(xi, n)) * v(_components(eta, n)), ((u, v),))


def _sumset(a, b):
    if a is None or b is None:
        return None
    lo = max(0.0, a[0] - b[1], b[0] - a[1])
    return (lo, a[1] + b[1])


def bilinear_multiplier_apply(sigma, f: Field, g: Field, tol: float | None = None) -> Field:
    """Discrete ``T_sigma(f, g)``.

    Separable representations are applied termwise in index order. Symbols
    without one fall back to the dense double sum when the grid is small
    enough; otherwise a :class:`ValidationError` asks for an expansion.
    ``tol`` bounds the admissible truncation error of the representation.
    """
    _physical(f), _physical(g)
    grid = check_same_grid(f, g)
    sig = as_bilinear_symbol(sigma, grid.n)
    if tol is not None and sig.tail_bound > tol:
        raise ConvergenceError(
            "separable representation truncated above tolerance",
            {"tail_bound": sig.tail_bound, "tol": tol},
        )
    band = _sumset(f.band, g.band)
    if band is not None and band[1] > grid.guard:
        raise AliasingError(f"product band reaches {band[1]:.6g} > guard {grid.guard:.6g}")
    if sig.terms is None:
        if grid.N > DENSE_LIMIT[grid.n]:
            raise ValidationError("symbol has no separable representation; expand it first")
        return dense_bilinear_oracle(sig, f, g)
    freqs = grid.freqs()
    fh = sfft.fftn(sfft.ifftshift(f.data))
    gh = sfft.fftn(sfft.ifftshift(g.data))
    out = np.zeros(grid.shape, dtype=complex)
    for u, v in sig.terms:
        uf = sfft.ifftn(fh * np.broadcast_to(u(freqs), grid.shape))
        vg = sfft.ifftn(gh * np.broadcast_to(v(freqs), grid.shape))
        out += uf * vg
    return Field(grid, "physical", sfft.fftshift(out), band)


def dense_bilinear_oracle(sigma, f: Field, g: Field) -> Field:
    """Full ``(xi, eta)`` double sum; slow reference for small grids."""
    grid = check_same_grid(f, g)
    if grid.N > DENSE_LIMIT[grid.n]:
        raise ValidationError(f"dense oracle limited to N <= {DENSE_LIMIT[grid.n]} for n={grid.n}")
    sig = as_bilinear_symbol(sigma, grid.n)
    x = np.stack([c.ravel() for c in np.meshgrid(*([grid.x_axis()] * grid.n), indexing="ij")], axis=1)
    xi = np.stack([c.ravel() for c in np.meshgrid(*([grid.xi_axis()] * grid.n), indexing="ij")], axis=1)
    fh = (sfft.fftn(sfft.ifftshift(f.data)) * grid.cell).ravel()
    gh = (sfft.fftn(sfft.ifftshift(g.data)) * grid.cell).ravel()
    if sig.evaluate is None:
        # a separable representation samples to sum_r u_r(xi) v_r(eta)
        comps = tuple(xi.T)
        S = sum(np.multiply.outer(np.broadcast_to(u(comps), len(xi)), np.broadcast_to(v(comps), len(xi))) for u, v in sig.terms)
    else:
        XI = np.repeat(xi, len(xi), axis=0)
        ETA = np.tile(xi, (len(xi), 1))
        S = np.asarray(sig(tuple(XI.T), tuple(ETA.T)), dtype=complex).reshape(len(xi), len(xi))
    M = S * fh[:, None] * gh[None, :]
    E = np.exp(1j * (x @ xi.T))
    vals = np.einsum("xk,xk->x", E @ M, E) * (grid.freq_cell / (2 * np.pi) ** grid.n) ** 2
    return Field(grid, "physical", vals.reshape(grid.shape), _sumset(f.band, g.band))


def wave_bilinear_apply(phi1: WavePhase, phi2: WavePhase, sigma, f: Field, g: Field, tol=None) -> Field:
    """``T`` with symbol ``e^{i(phi1(xi) + phi2(eta))} sigma(xi, eta)``.

    The phase factor is itself separable, so it is absorbed into the inputs:
    the result equals ``T_sigma(e^{i phi1(D)} f, e^{i phi2(D)} g)`` exactly.
    """
    return bilinear_multiplier_apply(
        sigma, linear_multiplier_apply(phi1, f), linear_multiplier_apply(phi2, g), tol=tol
    )


def sj_apply(j: int, f: Field, profile=theta) -> Field:
    """Half-wave propagator localized at scale ``2^j``: ``(e^{i|xi|} theta(2^-j xi) f^)^v``."""
    f = _physical(f)
    if 2.0 ** (j + 2) > f.grid.guard:
        raise ValidationError(f"scale j={j} not resolvable: 2^(j+2) > guard {f.grid.guard:.6g}")
    scale = 2.0**-j

    def mult(freqs):
        rho = np.sqrt(sum(c * c for c in freqs))
        return np.exp(1j * rho) * profile(rho * scale)

    out = _apply_array(sample_multiplier(mult, f.grid), f.data)
    band = _intersect(f.band, (2.0**j / 3.0, 3.0 * 2.0**j))
    return Field(f.grid, "physical", out, band)
