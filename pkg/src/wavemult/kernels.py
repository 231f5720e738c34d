"""Radial wave kernels ``h_j = (e^{-i|xi|} psi(2^-j |xi|))^v`` and their certificates.

The kernel is evaluated through its one-dimensional Bessel representation

    h_j(r) = (2 pi)^{-n/2} int J_nu(r t) (r t)^{-nu} psi(2^-j t) e^{-it} t^{n-1} dt,

with ``nu = (n - 2) / 2``, by Gauss-Legendre panels about one oscillation
wavelength wide. Panel doubling is the convergence criterion.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma as _gamma

from .bessel import bessel_scaled, hankel_pq
from .errors import ConvergenceError, ValidationError
from .lattice import GridSpec, fourier_transform, inverse_fourier_transform, make_grid, Field, check_band
from .symbols import WavePhase, make_dyadic_partition, theta

NODES_PER_PANEL = 12
DELTA_GRID = (1.0, 0.5, 0.25, 0.1, 0.05)


def plateau_phase(n: int) -> float:
    """Phase ``(n - 2) pi / 4 + pi / 4`` aligning the kernel with the plateau constant."""
    return (n - 2) * np.pi / 4 + np.pi / 4


@dataclass
class KernelProfile:
    """Radial samples of a wave kernel at scale ``2^j``."""

    j: int
    n: int
    radii: np.ndarray
    values: np.ndarray
    c0: float | None = None
    delta: float | None = None
    j0: int | None = None
    envelope_L: float = 2.0
    envelope_C: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.radii.shape != self.values.shape:
            raise ValidationError("radii and values differ in shape")
        if np.any(np.diff(self.radii) <= 0):
            raise ValidationError("radii must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("kernel values are not finite")

    @property
    def normalized(self) -> np.ndarray:
        """``e^{i omega} 2^{-j(n+1)/2} h_j`` with the plateau phase ``omega``."""
        return np.exp(1j * plateau_phase(self.n)) * 2.0 ** (-self.j * (self.n + 1) / 2) * self.values

    def envelope(self, L=None, C=1.0) -> np.ndarray:
        L = self.envelope_L if L is None else L
        return C * 2.0 ** (self.j * (self.n + 1) / 2) * (1 + 2.0**self.j * np.abs(1 - self.radii)) ** (-L)

    def to_csv(self, path) -> None:
        env = self.envelope(C=self.envelope_C or 1.0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius", "re", "im", "envelope"])
            for r, v, e in zip(self.radii, self.values, env):
                w.writerow([repr(float(r)), repr(float(v.real)), repr(float(v.imag)), repr(float(e))])


def _panels(a: float, b: float, rate: float, count: int | None = None):
    if count is None:
        count = int(np.ceil((b - a) * rate / (2 * np.pi))) + 1
    x, w = np.polynomial.legendre.leggauss(NODES_PER_PANEL)
    edges = np.linspace(a, b, count + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt, count


def _radial_integral(radii, t, wt, weight, n, chunk=1 << 22):
    nu = (n - 2) / 2.0
    out = np.empty(len(radii), dtype=complex)
    step = max(1, chunk // len(t))
    for i in range(0, len(radii), step):
        r = radii[i : i + step, None]
        out[i : i + step] = (bessel_scaled(nu, r * t[None, :]) * weight[None, :]) @ wt
    return out * (2 * np.pi) ** (-n / 2)


def radial_transform(profile, support, n: int, radii, phase_sign: float = -1.0, tol: float = 1e-6,
                     max_doublings: int = 6):
    """``((e^{i s |xi|} profile(|xi|))^v`` at ``radii`` by panel quadrature.

    ``s = phase_sign``; ``profile`` is a function of the frequency radius
    supported in ``support``. Raises :class:`ConvergenceError` when doubling the
    panel count ``max_doublings`` times in a row still moves some value by more
    than ``tol`` relative to the largest.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise ValidationError("radii must be nonnegative")
    a, b = support
    rate = float(np.max(radii)) + abs(phase_sign)
    nu = (n - 2) / 2.0
    jmax = np.sqrt(2 / np.pi) if nu < 0 else 2.0**-nu / _gamma(nu + 1)

    def integral(count):
        t, wt, count = _panels(a, b, rate, count)
        weight = profile(t) * np.exp(1j * phase_sign * t) * t ** (n - 1)
        mass = (2 * np.pi) ** (-n / 2) * jmax * float(np.sum(np.abs(weight) * wt))
        return _radial_integral(radii, t, wt, weight, n), count, len(t), mass

    coarse, count, _, _ = integral(None)
    for _ in range(max_doublings):
        fine, count, nodes, mass = integral(2 * count)
        # differences below the rounding level of the quadrature sum are not
        # evidence of non-convergence; Bessel phases at argument s carry an
        # absolute error ~ s * eps
        floor = 64 * np.finfo(float).eps * (1.0 + rate * b) * mass
        scale = max(float(np.max(np.abs(fine))), floor, np.finfo(float).tiny)
        change = float(np.max(np.abs(fine - coarse))) / scale
        diag = {"panels": count, "nodes": nodes, "doubling_change": change, "rounding_floor": floor}
        if change <= tol:
            break
        coarse = fine
    else:
        raise ConvergenceError("panel doubling changed the kernel beyond tolerance", diag)
    return fine, diag


def radial_wave_kernel(j: int, n: int, radii, psi=None, tol: float = 1e-6) -> KernelProfile:
    """Sample ``h_j`` at ``radii`` from the Bessel representation."""
    if j < 1:
        raise ValidationError("kernel scale j must be >= 1")
    if n < 1:
        raise ValidationError("dimension must be positive")
    psi = psi if psi is not None else make_dyadic_partition().psi
    scale = 2.0**-j
    vals, diag = radial_transform(lambda t: psi(t * scale), (2.0 ** (j - 1), 2.0 ** (j + 1)), n, radii, -1.0, tol)
    return KernelProfile(j, n, radii, vals, diagnostics=diag)


def window_radii(j: int, half_width: float = 40.0, step: float = 0.05) -> np.ndarray:
    """Radii ``1 - s 2^-j`` for ``s`` in ``[-half_width, half_width]`` (kept positive)."""
    s = np.arange(-half_width, half_width + step / 2, step)
    r = 1.0 + s * 2.0**-j
    return r[r > 0]


# -- asymptotic split ---------------------------------------------------------


def split_coefficients(n: int):
    """``b^+`` and ``b^-`` of the leading Hankel terms."""
    w = plateau_phase(n)
    c = (2 * np.pi) ** (-(n + 1) / 2)
    return c * np.exp(-1j * w), c * np.exp(1j * w)


def asymptotic_split(j: int, n: int, radii, psi=None, terms: int = 6) -> dict:
    """The main terms ``I^+, I^-`` and remainders ``K^+, K^-`` of ``h_j``.

    ``I^{+-}(r) = b^{+-} r^{(1-n)/2} int e^{+-irt} e^{-it} psi(2^-j t) t^{(n-1)/2} dt``;
    ``K^{+-}`` carries the factor ``(P +- iQ)(rt) - 1`` with the Hankel sum
    truncated at ``terms`` terms. Valid where ``r 2^{j-1}`` is large.
    """
    psi = psi if psi is not None else make_dyadic_partition().psi
    nu = (n - 2) / 2.0
    radii = np.asarray(radii, dtype=float)
    a, b = 2.0 ** (j - 1), 2.0 ** (j + 1)
    t, wt, _ = _panels(a, b, float(np.max(radii)) + 1.0)
    t, wt = t, wt
    base = psi(t * 2.0**-j) * t ** ((n - 1) / 2) * np.exp(-1j * t)
    bp, bm = split_coefficients(n)
    out = {k: np.empty(len(radii), dtype=complex) for k in ("I+", "I-", "K+", "K-")}
    for i, r in enumerate(radii):
        pre = r ** ((1 - n) / 2)
        ep = np.exp(1j * r * t)
        pq = hankel_pq(nu, r * t, terms=terms) - 1.0
        out["I+"][i] = bp * pre * np.sum(wt * ep * base)
        out["I-"][i] = bm * pre * np.sum(wt * np.conj(ep) * base)
        out["K+"][i] = bp * pre * np.sum(wt * ep * pq * base)
        out["K-"][i] = bm * pre * np.sum(wt * np.conj(ep) * np.conj(pq) * base)
    return out


# -- plateau -----------------------------------------------------------------


def plateau_constant(psi=None, n: int = 2) -> float:
    """``(2 pi)^{-(n+1)/2} int psi(t) t^{(n-1)/2} dt`` by adaptive quadrature."""
    psi = psi if psi is not None else make_dyadic_partition().psi
    val, _ = integrate.quad(lambda t: float(psi(np.array(t))) * t ** ((n - 1) / 2), 0.5, 2.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return (2 * np.pi) ** (-(n + 1) / 2) * val


@dataclass
class PlateauCertificate:
    delta: float
    j0: int
    c0: float
    phase: float
    deviations: dict  # j -> max |normalized - c0| on the window
    center_deviation: dict  # j -> |normalized(1) - c0|


def plateau_profiles(js, n: int = 2, psi=None, points: int = 41) -> list[KernelProfile]:
    """Kernel samples on ``|1 - r| <= 2^-j`` for each scale in ``js``."""
    s = np.linspace(-1.0, 1.0, points)
    return [radial_wave_kernel(j, n, 1.0 + s * 2.0**-j, psi) for j in js]


def certify_plateau(profiles, c0: float, delta_grid=DELTA_GRID, phase: float | None = None) -> PlateauCertificate:
    """Largest ``delta`` and smallest ``j0`` with a 10% plateau for all tested ``j > j0``.

    Each profile must sample ``|1 - r| < delta 2^-j`` (see :func:`plateau_profiles`).
    Raises :class:`ConvergenceError` when no pair certifies.
    """
    profiles = sorted(profiles, key=lambda p: p.j)
    js = [p.j for p in profiles]
    if any(b - a != 1 for a, b in zip(js, js[1:])):
        raise ValidationError("plateau certification needs a contiguous range of scales")
    n = profiles[0].n
    phase = plateau_phase(n) if phase is None else phase
    tried = {}
    for delta in sorted(delta_grid, reverse=True):
        dev = {}
        for p in profiles:
            s = (p.radii - 1.0) * 2.0**p.j
            win = np.abs(s) < delta
            if not win.any():
                raise ValidationError(f"profile j={p.j} has no samples within delta={delta}")
            normalized = np.exp(1j * phase) * 2.0 ** (-p.j * (n + 1) / 2) * p.values[win]
            dev[p.j] = float(np.max(np.abs(normalized - c0)))
        tried[delta] = dev
        ok = [dev[j] <= c0 / 10 for j in js]
        if ok[-1]:
            k = len(js) - 1
            while k > 0 and ok[k - 1]:
                k -= 1
            j0 = js[k] - 1
            centre = {}
            for p in profiles:
                i = int(np.argmin(np.abs(p.radii - 1.0)))
                centre[p.j] = float(abs(np.exp(1j * phase) * 2.0 ** (-p.j * (n + 1) / 2) * p.values[i] - c0))
            for prof in profiles:
                prof.c0, prof.delta, prof.j0 = c0, delta, j0
            return PlateauCertificate(delta, j0, c0, phase, dev, centre)
    raise ConvergenceError("no (delta, j0) certifies the plateau", {"deviations": tried, "c0": c0})


# -- envelopes and norms -------------------------------------------------------


@dataclass
class EnvelopeReport:
    L: float
    C: float
    per_scale: dict  # j -> minimal constant at that scale


def envelope_fit(profiles, L: float = 2.0, cap: float = 1e6) -> EnvelopeReport:
    """Smallest ``C`` with ``|h_j| <= C 2^{j(n+1)/2} (1 + 2^j |1 - r|)^{-L}`` on all samples."""
    if len(profiles) < 4:
        raise ValidationError("envelope fit needs profiles at >= 4 scales")
    per = {}
    for p in profiles:
        per[p.j] = float(np.max(np.abs(p.values) / p.envelope(L=L)))
    C = max(per.values())
    if not np.isfinite(C) or C > cap:
        raise ConvergenceError("no envelope constant below cap", {"per_scale": per, "cap": cap})
    for p in profiles:
        p.envelope_L, p.envelope_C = L, C
    return EnvelopeReport(float(L), C, per)


def radial_lp_norm(profile: KernelProfile, p: float) -> float:
    """``L^p(R^n)`` norm of a radial profile by trapezoid integration over its radii."""
    a = np.abs(profile.values)
    if np.isinf(p):
        return float(a.max())
    area = {1: 2.0, 2: 2 * np.pi}.get(profile.n)
    if area is None:
        raise ValidationError("radial norms implemented for n in {1, 2}")
    jac = area * profile.radii ** (profile.n - 1)
    return float(np.trapezoid(a**p * jac, profile.radii) ** (1.0 / p))


def norm_profile(j: int, n: int = 2, half_width: float = 32.0, step: float = 0.1, psi=None) -> KernelProfile:
    """Kernel samples dense enough around the unit sphere for norm integration."""
    return radial_wave_kernel(j, n, window_radii(j, half_width, step), psi)


# -- grid cross-check ------------------------------------------------------------


def grid_kernel(j: int, grid: GridSpec, psi=None, sign: float = -1.0) -> Field:
    """``(e^{i sign |xi|} psi(2^-j |xi|))^v`` sampled on a grid by the FFT."""
    psi = psi if psi is not None else make_dyadic_partition().psi
    check_band(grid, (2.0 ** (j - 1), 2.0 ** (j + 1)))
    rho = grid.freq_radius()
    spec = np.exp(1j * sign * rho) * psi(rho * 2.0**-j)
    return inverse_fourier_transform(Field(grid, "frequency", np.broadcast_to(spec, grid.shape), (2.0 ** (j - 1), 2.0 ** (j + 1))))


# -- L1 scaling probes ------------------------------------------------------------


@dataclass
class L1ProbeReport:
    variant: str
    n: int
    js: list
    values: list
    slope: float
    bound: float | None = None
    reference: float | None = None


def l1_probe_grid(j: int, n: int, variant: str = "highpass") -> GridSpec:
    """Grid used by :func:`l1_scaling_probe` at scale ``j``."""
    if variant == "highpass":
        L = 4.0 if n == 2 else 16.0
        N = max(64, 2 ** (j + 3)) if n == 2 else max(1024, 2 ** (j + 6))
        return make_grid(n, N, L)
    L = 2.0 ** (3 - j) * 32 if n == 2 else 2.0 ** (3 - j) * 128
    N = 1024 if n == 2 else 8192
    return make_grid(n, N, L)


def l1_of_multiplier(mult, grid: GridSpec) -> float:
    spec = np.broadcast_to(mult(grid.freqs()), grid.shape)
    phys = inverse_fourier_transform(Field(grid, "frequency", spec)).data
    return float(np.sum(np.abs(phys)) * grid.cell)


def l1_scaling_probe(phase: WavePhase, js, variant: str = "highpass", profile=theta, grids=None) -> L1ProbeReport:
    """L1 norms of wave-multiplier kernels across scales, with a log2 slope fit.

    ``highpass``: ``(e^{i phi} zeta(xi) profile(2^-j xi))^v``, expected growth
    ``2^{j(n-1)/2}``. ``lowpass``: ``(e^{i phi} phi_low(xi) profile(2^-j xi))^v``
    for ``j <= 1``, bounded uniformly. ``bound`` is the measured uniform
    constant (largest value) and ``reference`` the L1 norm of ``(e^{i phi} phi_low)^v``.
    """
    part = make_dyadic_partition()
    n = phase.n
    js = list(js)
    if variant not in ("highpass", "lowpass"):
        raise ValidationError(f"unknown variant {variant!r}")
    if variant == "lowpass" and max(js) > 1:
        raise ValidationError("lowpass probe scales must satisfy j <= 1")
    values = []
    for j in js:
        grid = grids[j] if grids is not None else l1_probe_grid(j, n, variant)
        top = 3.0 * 2.0**j if variant == "highpass" else min(2.0, 3.0 * 2.0**j)
        check_band(grid, (0.0, top))
        cut = part.zeta if variant == "highpass" else part.phi_low

        def mult(freqs, j=j, cut=cut):
            rho = np.sqrt(sum(c * c for c in freqs))
            return np.exp(1j * phase(freqs)) * cut(rho) * profile(rho * 2.0**-j)

        values.append(l1_of_multiplier(mult, grid))
    slope = float(np.polyfit(js, np.log2(values), 1)[0])
    bound = reference = None
    if variant == "lowpass":
        bound = max(values)
        grid = l1_probe_grid(1, n, variant)
        reference = l1_of_multiplier(lambda fr: np.exp(1j * phase(fr)) * part.phi_low(np.sqrt(sum(c * c for c in fr))), grid)
    return L1ProbeReport(variant, n, js, values, slope, bound, reference)
