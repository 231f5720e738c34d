"""Lebesgue, dyadic BMO and maximal-function Hardy surrogates on grid fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import ValidationError
from .lattice import Field, GridSpec


@dataclass(frozen=True)
class NormReport:
    """Value of a norm functional with the grid it was measured on.

    ``flags`` carries caveats: ``surrogate`` marks functionals equivalent to the
    true norm only up to unknown constants, ``boundary_mass`` the fraction of
    ``|f|`` in the outer tenth of the box (periodization risk).
    """

    value: float
    space: str
    grid: GridSpec
    p: float | None = None
    flags: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def _check(f: Field) -> np.ndarray:
    if f.side != "physical":
        raise ValidationError("norms are taken of physical-side fields")
    if not np.all(np.isfinite(f.data)):
        raise ValidationError("field contains NaN or Inf samples")
    return f.data


def boundary_mass(f: Field) -> float:
    a = np.abs(f.data)
    total = a.sum()
    if total == 0:
        return 0.0
    r = np.max(np.abs(np.stack(np.broadcast_arrays(*f.grid.coords()))), axis=0)
    return float(a[r > 0.4 * f.grid.L].sum() / total)


def lp_norm(f: Field, p: float) -> NormReport:
    """``(sum |f|^p dx^n)^{1/p}``, the sup for ``p = inf``; a quasi-norm for ``p < 1``."""
    data = _check(f)
    if not p > 0:
        raise ValidationError(f"exponent p={p} must be positive")
    a = np.abs(data)
    if np.isinf(p):
        val = float(a.max())
    else:
        m = a.max()
        val = 0.0 if m == 0 else float(m * (np.sum((a / m) ** p) * f.grid.cell) ** (1.0 / p))
    return NormReport(val, f"L{p:g}", f.grid, float(p), {"boundary_mass": boundary_mass(f)})


def _block_view(data: np.ndarray, n: int, blocks: int) -> np.ndarray:
    N = data.shape[0]
    s = N // blocks
    if n == 1:
        return data.reshape(blocks, s)
    return data.reshape(blocks, s, blocks, s).transpose(0, 2, 1, 3).reshape(blocks, blocks, s * s)


def mean_oscillations(f: Field, depth: int) -> np.ndarray:
    """``(1/|Q|) int_Q |f - f_Q|`` for every dyadic cube of the box at one depth."""
    data = _check(f)
    v = _block_view(data, f.grid.n, 2**depth)
    mean = v.mean(axis=-1, keepdims=True)
    return np.abs(v - mean).mean(axis=-1)


def bmo_norm(f: Field, max_depth: int | None = None) -> NormReport:
    """Dyadic BMO surrogate: sup of mean oscillations over cubes of depth <= ``max_depth``.

    Cubes are the dyadic subdivisions of the periodic box, down to side
    ``N / 2^max_depth`` samples (default: cubes of 4 samples per axis).
    """
    levels = int(np.log2(f.grid.N))
    if max_depth is None:
        max_depth = levels - 2
    if not 0 <= max_depth <= levels:
        raise ValidationError(f"max_depth={max_depth} outside [0, log2 N = {levels}]")
    best, where = 0.0, 0
    for d in range(max_depth + 1):
        osc = float(mean_oscillations(f, d).max())
        if osc > best:
            best, where = osc, d
    return NormReport(best, "BMO", f.grid, None, {"surrogate": True, "depth": where, "max_depth": max_depth})


def h1_scales(grid: GridSpec) -> np.ndarray:
    """Half-octave scales from ``dx`` to ``L / 4``."""
    k = np.arange(0, int(np.floor(2 * np.log2(grid.N / 4))) + 1)
    return grid.dx * 2.0 ** (k / 2.0)


def h1_norm(f: Field) -> NormReport:
    """L1 norm of ``sup_t |Phi_t * f|`` with ``Phi`` the unit-mass Gaussian.

    A band-limited surrogate for the Hardy norm: scales ``t`` run over
    :func:`h1_scales`; equivalence constants are unknown.
    """
    data = _check(f)
    grid = f.grid
    spec = sfft.fftn(sfft.ifftshift(data))
    rho2 = grid.freq_radius() ** 2
    best = np.zeros(grid.shape)
    for t in h1_scales(grid):
        conv = sfft.ifftn(spec * np.exp(-0.5 * t * t * rho2))
        np.maximum(best, np.abs(conv), out=best)
    val = float(best.sum() * grid.cell)
    return NormReport(val, "H1", grid, 1.0, {"surrogate": True, "boundary_mass": boundary_mass(f)})


def holder_exponent(p: float, q: float) -> float:
    """``r`` with ``1/r = 1/p + 1/q`` (``inf`` when both are infinite)."""
    inv = (0.0 if np.isinf(p) else 1.0 / p) + (0.0 if np.isinf(q) else 1.0 / q)
    return np.inf if inv == 0 else 1.0 / inv


def input_norm(f: Field, s: float, endpoint: str = "linf") -> float:
    """Norm of an input in the ``H^s`` slot; ``L^s`` for band-limited data.

    ``endpoint`` selects ``linf`` or ``bmo`` for ``s = inf``.
    """
    if np.isinf(s) and endpoint == "bmo":
        return bmo_norm(f).value
    return lp_norm(f, s).value


def target_norm(out: Field, r: float) -> float:
    """``X_r`` norm: ``L^r`` for finite ``r``, dyadic BMO for ``r = inf``."""
    return bmo_norm(out).value if np.isinf(r) else lp_norm(out, r).value


def operator_ratio(out: Field, f: Field, g: Field, p: float, q: float, r=None, endpoint="linf") -> float:
    """``||out||_{X_r} / (||f||_{p} ||g||_{q})``."""
    r_expected = holder_exponent(p, q)
    if r is None:
        r = r_expected
    elif not np.isclose(1.0 / r if not np.isinf(r) else 0.0, 1.0 / r_expected if not np.isinf(r_expected) else 0.0):
        raise ValidationError(f"exponents violate 1/p + 1/q = 1/r: p={p}, q={q}, r={r}")
    den = input_norm(f, p, endpoint) * input_norm(g, q, endpoint)
    if den == 0:
        raise ValidationError("zero input norm in operator ratio")
    return target_norm(out, r) / den
