"""Cutoffs, wave phases, symbol families and sampled symbol-class seminorms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ValidationError
from .lattice import RadialProfile


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_cutoff(rho, inner: float = 1.0, outer: float = 2.0):
    """C-infinity step: 1 for ``rho <= inner``, 0 for ``rho >= outer``."""
    rho = np.asarray(rho, dtype=float)
    w = outer - inner
    a = _h((outer - rho) / w)
    b = _h((rho - inner) / w)
    s = a + b
    mid = a / np.where(s > 0, s, 1.0)
    return np.where(rho <= inner, 1.0, np.where(rho >= outer, 0.0, mid))


def annular_bump(rho, plateau=(0.5, 2.0), support=(1.0 / 3.0, 3.0)):
    """Smooth bump equal to 1 on ``plateau`` and vanishing outside ``support``."""
    rise = 1.0 - smooth_cutoff(rho, support[0], plateau[0])
    fall = smooth_cutoff(rho, plateau[1], support[1])
    return rise * fall


def theta(rho):
    """Enlarged annular cutoff: 1 on [1/2, 2], supported in [1/3, 3]."""
    return annular_bump(rho)


def theta_low(rho):
    """Enlarged low-pass cutoff: 1 on [0, 2], supported in [0, 3]."""
    return smooth_cutoff(rho, 2.0, 3.0)


@dataclass(frozen=True)
class DyadicPartition:
    """Radial dyadic partition ``psi``, low-pass ``phi_low`` and high-pass ``zeta``.

    ``psi(rho) = g(rho) - g(2 rho)`` with ``g`` the smooth step on [1, 2], so
    ``sum_{j<=k} psi(2^-j rho) = g(2^-k rho)`` telescopes exactly.
    """

    inner: float = 1.0
    outer: float = 2.0

    def g(self, rho):
        return smooth_cutoff(rho, self.inner, self.outer)

    def psi(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.g(rho) - self.g(2.0 * rho)

    def phi_low(self, rho):
        return self.g(rho)

    def zeta(self, rho):
        return 1.0 - self.g(rho)

    def psi_j(self, rho, j: int):
        return self.psi(np.asarray(rho, dtype=float) * 2.0 ** (-j))

    def block(self, rho, j: int):
        """Block ``j`` of the partition, with ``phi_low`` as block 0."""
        if j == 0:
            return self.phi_low(rho)
        return self.psi_j(rho, j)

    def block_tilde(self, rho, j: int):
        """Enlarged cutoff equal to 1 on the support of :meth:`block`."""
        rho = np.asarray(rho, dtype=float)
        if j == 0:
            return theta_low(rho)
        return theta(rho * 2.0 ** (-j))

    def profile(self, j: int) -> RadialProfile:
        return RadialProfile(lambda r, j=j: self.psi_j(r, j), (2.0 ** (j - 1), 2.0 ** (j + 1)))


def make_dyadic_partition() -> DyadicPartition:
    return DyadicPartition()


# -- wave phases ---------------------------------------------------------------


def _components(xi):
    if isinstance(xi, (tuple, list)):
        return [np.asarray(c, dtype=float) for c in xi]
    xi = np.asarray(xi, dtype=float)
    return [xi[..., k] for k in range(xi.shape[-1])]


@dataclass(frozen=True, eq=False)
class WavePhase:
    """Real, degree-one homogeneous phase, smooth away from the origin.

    Evaluated on a sequence of component arrays ``(xi_1, ..., xi_n)`` or on an
    array whose last axis holds the components.
    """

    kind: str
    n: int
    matrix: np.ndarray | None = None
    vector: np.ndarray | None = None
    R: float = field(default=float("nan"))

    def __call__(self, xi):
        c = _components(xi)
        if self.kind == "euclidean":
            return np.sqrt(sum(ci * ci for ci in c))
        if self.kind == "ellipse":
            A = self.matrix
            q = sum(A[a, b] * c[a] * c[b] for a in range(self.n) for b in range(self.n))
            return np.sqrt(np.maximum(q, 0.0))
        if self.kind == "linear":
            return sum(self.vector[a] * c[a] for a in range(self.n))
        if self.kind == "zero":
            return np.zeros(np.broadcast(*c).shape)
        raise ValidationError(f"unknown phase kind {self.kind!r}")

    def gradient(self, xi):
        c = _components(xi)
        if self.kind == "euclidean":
            r = np.sqrt(sum(ci * ci for ci in c))
            r = np.where(r > 0, r, 1.0)
            return [ci / r for ci in c]
        if self.kind == "ellipse":
            A = self.matrix
            phi = self(c)
            phi = np.where(phi > 0, phi, 1.0)
            return [sum(A[a, b] * c[b] for b in range(self.n)) / phi for a in range(self.n)]
        if self.kind == "linear":
            shape = np.broadcast(*c).shape
            return [np.full(shape, self.vector[a]) for a in range(self.n)]
        shape = np.broadcast(*c).shape
        return [np.zeros(shape) for _ in range(self.n)]


def _gradient_sup(phase: WavePhase) -> float:
    if phase.n == 1:
        g = phase.gradient([np.array([1.0, -1.0])])[0]
        return float(np.max(np.abs(g)))

    def speed(t):
        g = phase.gradient([np.cos(t), np.sin(t)])
        return float(np.hypot(g[0], g[1]))

    ts = np.linspace(0.0, 2 * np.pi, 512, endpoint=False)
    g = phase.gradient([np.cos(ts), np.sin(ts)])
    vals = np.hypot(g[0], g[1])
    k = int(np.argmax(vals))
    h = ts[1] - ts[0]
    try:
        res = minimize_scalar(
            lambda t: -speed(t),
            bracket=(ts[k] - h, ts[k], ts[k] + h),
            method="golden",
            tol=1e-12,
        )
    except ValueError:
        # flat maximum (e.g. constant gradient): the mesh value is exact
        return float(vals[k])
    return max(float(vals[k]), -float(res.fun))


def make_wave_phase(kind: str = "euclidean", n: int = 2, matrix=None, vector=None) -> WavePhase:
    """Build a phase of kind ``euclidean``, ``ellipse`` (SPD matrix), ``linear`` or ``zero``."""
    if n not in (1, 2):
        raise ValidationError(f"dimension n={n} not in {{1, 2}}")
    A = v = None
    if kind == "ellipse":
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        if A.shape != (n, n) or not np.allclose(A, A.T):
            raise ValidationError("ellipse matrix must be symmetric n x n")
        if np.min(np.linalg.eigvalsh(A)) <= 0:
            raise ValidationError("ellipse matrix is not positive definite")
    elif kind == "linear":
        v = np.asarray(vector, dtype=float).reshape(-1)
        if v.shape != (n,) or not np.any(v):
            raise ValidationError("linear phase needs a nonzero vector of length n")
    elif kind not in ("euclidean", "zero"):
        raise ValidationError(f"unknown phase kind {kind!r}")
    phase = WavePhase(kind, n, A, v)
    object.__setattr__(phase, "R", _gradient_sup(phase))
    return phase


# -- bilinear symbol families ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymbolFamily:
    """A bilinear symbol ``sigma(xi, eta)`` on R^n x R^n with its nominal order.

    ``factors`` is set when the symbol is a product ``u(xi) v(eta)`` of radial
    factors; operators use it for the fast path.
    """

    kind: str
    n: int
    m: float
    j: int | None = None
    sampler: Callable | None = None
    factors: tuple[Callable, Callable] | None = None

    def __call__(self, xi, eta):
        cx, ce = _components(xi), _components(eta)
        if self.kind == "power":
            q = 1.0 + sum(c * c for c in cx) + sum(c * c for c in ce)
            return q ** (self.m / 2.0)
        if self.factors is not None:
            rx = np.sqrt(sum(c * c for c in cx))
            re = np.sqrt(sum(c * c for c in ce))
            return self.factors[0](rx) * self.factors[1](re)
        return self.sampler(cx, ce)


def power_symbol(m: float, n: int = 2) -> SymbolFamily:
    """``(1 + |xi|^2 + |eta|^2)^{m/2}``."""
    return SymbolFamily("power", n, float(m))


def sigma_j_symbol(m: float, j: int, n: int = 2, profile=theta) -> SymbolFamily:
    """``2^{jm} theta(2^-j xi) theta(2^-j eta)``, the dyadic test multiplier."""
    scale = 2.0 ** (j * m)
    u = lambda r: scale * profile(np.asarray(r) * 2.0 ** (-j))  # noqa: E731
    v = lambda r: profile(np.asarray(r) * 2.0 ** (-j))  # noqa: E731
    return SymbolFamily("sigma_j", n, float(m), int(j), factors=(u, v))


def custom_symbol(sampler, m: float, n: int = 2, factors=None) -> SymbolFamily:
    return SymbolFamily("custom", n, float(m), sampler=sampler, factors=factors)


# -- seminorm probing -----------------------------------------------------------

_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def multi_indices(dim: int, max_order: int):
    for order in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(dim), order):
            gamma = [0] * dim
            for c in combo:
                gamma[c] += 1
            yield tuple(gamma)


def central_derivative(func, points, gamma, h):
    """Tensor-product central difference of ``func`` at ``points`` (K x d).

    ``h`` is a per-point step (K,). Second-order accurate in ``h``.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    axes = [_STENCILS[g] for g in gamma]
    total = np.zeros(points.shape[0], dtype=complex)
    for combo in itertools.product(*[range(len(a[0])) for a in axes]):
        w = 1.0
        shift = np.zeros(d)
        for ax, idx in enumerate(combo):
            off, wts = axes[ax]
            w *= wts[idx]
            shift[ax] = off[idx]
        if w == 0:
            continue
        total += w * func(points + h[:, None] * shift[None, :])
    return total / h ** sum(gamma)


def richardson_derivative(func, points, gamma, h):
    d1 = central_derivative(func, points, gamma, h)
    d2 = central_derivative(func, points, gamma, h / 2)
    return (4.0 * d2 - d1) / 3.0


def probe_points(n: int, radii=None, angles: int = 16):
    """Log-spaced radii (half-octave steps) times fixed directions in R^{2n}."""
    if radii is None:
        radii = 2.0 ** (np.arange(-2, 30) / 2.0)
    radii = np.asarray(radii, dtype=float)
    om = (np.arange(angles) + 0.5) * 2 * np.pi / angles
    if n == 1:
        dirs = np.stack([np.cos(om), np.sin(om)], axis=1)
    else:
        b1, b2 = 0.3, 1.1
        dirs = np.stack(
            [np.cos(om) * np.cos(b1), np.cos(om) * np.sin(b1), np.sin(om) * np.cos(b2), np.sin(om) * np.sin(b2)],
            axis=1,
        )
    pts = radii[:, None, None] * dirs[None, :, :]
    return radii, pts.reshape(-1, 2 * n)


@dataclass
class SeminormReport:
    m: float
    max_order: int
    ratios: dict  # multi-index -> sampled sup of weighted derivative
    order_sup: dict  # order -> sup over multi-indices of that order
    growth: dict  # order -> fitted log-log slope of per-radius sup on the outer radii
    unstable: list
    in_class: bool

    def as_dict(self):
        return {
            "m": self.m,
            "max_order": self.max_order,
            "order_sup": {str(k): v for k, v in self.order_sup.items()},
            "growth": {str(k): v for k, v in self.growth.items()},
            "unstable": [list(g) for g in self.unstable],
            "in_class": self.in_class,
        }


def symbol_seminorm(
    sigma,
    m: float,
    max_order: int = 2,
    n: int | None = None,
    radii=None,
    angles: int = 16,
    step: float = 1.0 / 512.0,
    growth_tol: float = 0.25,
    stability_tol: float = 1e-2,
) -> SeminormReport:
    """Sampled ``S^m_{1,0}`` seminorms of ``sigma`` up to ``max_order``.

    For each multi-index the supremum over the probe set of
    ``|d^gamma sigma| (1 + |xi| + |eta|)^{-m + |gamma|}`` is recorded. The
    verdict is in-class when no order grows with the radius (log-log slope of
    the per-radius supremum above ``growth_tol``) and every derivative estimate
    is stable under halving of the Richardson step.
    """
    if max_order > 4:
        raise ValidationError("max_order must be <= 4")
    n = n if n is not None else getattr(sigma, "n", 1)
    radii, pts = probe_points(n, radii, angles)
    weight = 1.0 + np.linalg.norm(pts[:, :n], axis=1) + np.linalg.norm(pts[:, n:], axis=1)
    h = step * weight

    def f(p):
        return np.asarray(sigma(p[:, :n], p[:, n:]), dtype=complex)

    ratios, order_sup, growth, unstable = {}, {}, {}, []
    per_radius = {}
    for gamma in multi_indices(2 * n, max_order):
        k = sum(gamma)
        if k == 0:
            d = f(pts)
            d_ref = d
        else:
            d = richardson_derivative(f, pts, gamma, h)
            d_ref = richardson_derivative(f, pts, gamma, h / 2)
        scale = np.maximum(np.abs(d), np.abs(d_ref))
        # roundoff level of a k-th difference quotient
        floor = 1e3 * np.finfo(float).eps * np.max(np.abs(f(pts))) / h**k
        bad = np.abs(d - d_ref) > stability_tol * scale + floor
        if np.any(bad & (scale > floor)):
            unstable.append(gamma)
        r = np.abs(d) * weight ** (-m + k)
        ratios[gamma] = float(np.max(r))
        order_sup[k] = max(order_sup.get(k, 0.0), ratios[gamma])
        pr = r.reshape(len(radii), -1).max(axis=1)
        per_radius[k] = np.maximum(per_radius.get(k, 0.0), pr)
    for k, pr in per_radius.items():
        half = len(radii) // 2
        rr, vv = radii[half:], pr[half:]
        ok = vv > 1e-300
        # a symbol vanishing at the outermost probes is compactly supported there
        if ok[-1] and ok.sum() >= 3:
            growth[k] = float(np.polyfit(np.log2(rr[ok]), np.log2(vv[ok]), 1)[0])
        else:
            growth[k] = 0.0
    finite = all(np.isfinite(v) for v in ratios.values())
    in_class = finite and not unstable and all(g <= growth_tol for g in growth.values())
    return SeminormReport(float(m), max_order, ratios, order_sup, growth, unstable, in_class)
