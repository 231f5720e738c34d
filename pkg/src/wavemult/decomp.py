"""Flag splits, the angular frame on the circle, and separable Fourier expansions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import ConvergenceError, ValidationError
from .lattice import Field, GridSpec, inverse_fourier_transform, make_grid
from .operators import BilinearSymbol, as_bilinear_symbol
from .symbols import DyadicPartition, WavePhase, make_dyadic_partition, theta, theta_low


def _norm(comps):
    return np.sqrt(sum(c * c for c in comps))


def _split_args(xi, eta, n):
    from .operators import _components

    return _components(xi, n), _components(eta, n)


# -- flag split -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlagPiece(BilinearSymbol):
    """One of the three flag regions; ``region`` is ``I``, ``II`` or ``III``."""

    region: str = ""
    jmax: int = 0


def flag_split(sigma, partition: DyadicPartition | None = None, jmax: int = 8, n: int | None = None):
    """Split ``sigma = sigma_I + sigma_II + sigma_III`` along ``sum_{j>k} + sum_{j=k} + sum_{j<k}``.

    Blocks ``psi_j(xi) psi_k(eta)`` with ``0 <= j, k <= jmax`` (``psi_0 = phi_low``)
    are grouped by the sign of ``j - k``; the pieces sum to ``sigma`` wherever
    ``|xi|, |eta| <= 2^jmax``.
    """
    part = partition or make_dyadic_partition()
    sig = as_bilinear_symbol(sigma, n)
    n = sig.n
    if jmax < 1:
        raise ValidationError("flag split needs jmax >= 1")

    def blocks(r):
        return [part.block(r, j) for j in range(jmax + 1)]

    def lows(r):
        # sum_{k' <= k} psi_k' = phi_low(2^-k r); index k -> that sum
        return [part.phi_low(r * 2.0**-k) for k in range(jmax + 1)]

    def region_weight(region, rx, re):
        bx, be = blocks(rx), blocks(re)
        if region == "II":
            return sum(bx[j] * be[j] for j in range(jmax + 1))
        if region == "I":
            le = lows(re)
            return sum(bx[j] * le[j - 1] for j in range(1, jmax + 1))
        lx = lows(rx)
        return sum(be[k] * lx[k - 1] for k in range(1, jmax + 1))

    def make(region):
        def ev(xi, eta):
            cx, ce = _split_args(xi, eta, n)
            return sig(cx, ce) * region_weight(region, _norm(cx), _norm(ce))

        return FlagPiece(n, ev, None, 0.0, region, jmax)

    return make("I"), make("II"), make("III")


# -- angular frame ---------------------------------------------------------------


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class AngularFrame:
    """Directions ``xi_j^nu`` on the circle and a 0-homogeneous partition of unity.

    ``chi_nu(xi) = b((arg xi - theta_nu) / gap) / sum_mu b((arg xi - theta_mu) / gap)``
    with ``b`` the standard bump on (-1, 1).
    """

    j: int
    count: int
    gap: float

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.count) * self.gap

    @property
    def centers(self) -> np.ndarray:
        a = self.angles
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    def _offset(self, ang, nu):
        d = np.asarray(ang) - nu * self.gap
        return (d + np.pi) % (2 * np.pi) - np.pi

    def _denominator(self, ang):
        k = np.floor(np.asarray(ang) / self.gap).astype(int)
        total = np.zeros(np.shape(ang))
        for shift in (-1, 0, 1, 2):
            total = total + _bump(self._offset(ang, (k + shift) % self.count) / self.gap)
        return total

    def chi_angle(self, nu: int, ang) -> np.ndarray:
        ang = np.mod(np.asarray(ang, dtype=float), 2 * np.pi)
        return _bump(self._offset(ang, nu) / self.gap) / self._denominator(ang)

    def chi(self, nu: int, freqs) -> np.ndarray:
        """Cutoff ``chi_nu`` on a tuple ``(xi_1, xi_2)``; the value at 0 is 0."""
        x, y = np.broadcast_arrays(*freqs)
        out = self.chi_angle(nu, np.arctan2(y, x))
        return np.where((x == 0) & (y == 0), 0.0, out)

    def partition_sum(self, freqs) -> np.ndarray:
        x, y = np.broadcast_arrays(*freqs)
        ang = np.mod(np.arctan2(y, x), 2 * np.pi)
        return sum(self.chi_angle(nu, ang) for nu in range(self.count))

    def to_dict(self) -> dict:
        return {"j": self.j, "count": self.count, "gap": self.gap, "angles": self.angles.tolist()}


def angular_frame(j: int, n: int = 2) -> AngularFrame:
    """Frame of ``ceil(2 pi 2^{j/2})`` equally spaced directions."""
    if n != 2:
        raise ValidationError("angular frame is implemented on the circle only (n = 2)")
    if j < 2:
        raise ValidationError("angular frame needs j >= 2")
    count = int(np.ceil(2 * np.pi * 2 ** (j / 2)))
    return AngularFrame(int(j), count, 2 * np.pi / count)


def chi_derivative_sup(frame: AngularFrame, order: int, samples: int = 4096, h: float | None = None) -> float:
    """Largest Cartesian derivative of ``chi_0`` of the given order on the unit circle."""
    h = frame.gap / 200 if h is None else h
    ang = np.linspace(-frame.gap, frame.gap, samples)
    px, py = np.cos(ang), np.sin(ang)

    def f(dx, dy):
        return frame.chi(0, (px + dx, py + dy))

    if order == 0:
        return float(np.max(np.abs(f(0, 0))))
    if order == 1:
        gx = (f(h, 0) - f(-h, 0)) / (2 * h)
        gy = (f(0, h) - f(0, -h)) / (2 * h)
        return float(max(np.max(np.abs(gx)), np.max(np.abs(gy))))
    if order == 2:
        c = f(0, 0)
        dxx = (f(h, 0) - 2 * c + f(-h, 0)) / h**2
        dyy = (f(0, h) - 2 * c + f(0, -h)) / h**2
        dxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
        return float(max(np.max(np.abs(dxx)), np.max(np.abs(dyy)), np.max(np.abs(dxy))))
    raise ValidationError("derivative order must be 0, 1 or 2")


def sector_measure(frame: AngularFrame, nu: int = 0, partition=None, per_axis: int = 512) -> float:
    """Sampled Lebesgue measure of ``supp psi(2^-j .) chi_nu``."""
    part = partition or make_dyadic_partition()
    j = frame.j
    a0 = nu * frame.gap
    # bounding box of the sector in rotated coordinates
    r = np.linspace(0, 2.0 ** (j + 1), per_axis)
    t = np.linspace(-2.0 ** (j + 1) * np.sin(min(frame.gap, np.pi / 2)) - 1, 2.0 ** (j + 1) * np.sin(min(frame.gap, np.pi / 2)) + 1, per_axis)
    R, T = np.meshgrid(r, t, indexing="ij")
    x = R * np.cos(a0) - T * np.sin(a0)
    y = R * np.sin(a0) + T * np.cos(a0)
    vals = part.psi_j(np.hypot(x, y), j) * frame.chi(nu, (x, y))
    return float(np.count_nonzero(vals > 0) * (r[1] - r[0]) * (t[1] - t[0]))


@dataclass
class AngularPieceReport:
    j: int
    count: int
    sampled: list
    l1: dict  # nu -> ||f_j^nu||_1
    peak_offset: dict  # nu -> |argmax |f| - grad phi(xi_nu)|
    envelope_transverse: float
    envelope_longitudinal: float
    total_l1: float

    @property
    def mean_l1(self) -> float:
        return float(np.mean(list(self.l1.values())))


def angular_grid(j: int) -> GridSpec:
    return make_grid(2, 2 ** (j + 2), 4.0)


def angular_piece(frame: AngularFrame, nu: int, phase: WavePhase, grid: GridSpec, partition=None) -> Field:
    """``f_j^nu = (e^{-i phi} psi(2^-j xi) chi_nu(xi))^v`` on ``grid``."""
    part = partition or make_dyadic_partition()
    j = frame.j
    if 2.0 ** (j + 1) > grid.guard:
        raise ValidationError(f"grid does not resolve scale j={j}")
    freqs = grid.freqs()
    rho = _norm(freqs)
    spec = np.exp(-1j * phase(freqs)) * part.psi_j(rho, j) * frame.chi(nu, freqs)
    return inverse_fourier_transform(Field(grid, "frequency", np.broadcast_to(spec, grid.shape), (2.0 ** (j - 1), 2.0 ** (j + 1))))


def angular_piece_bounds(frame: AngularFrame, phase: WavePhase, j: int | None = None, sample: int = 8, decay: float = 2.0, grid=None) -> AngularPieceReport:
    """L1 norms, peak locations and anisotropic envelope constants of sampled pieces.

    ``sample`` pieces spread evenly over the frame are synthesized; the total
    L1 mass is estimated as ``count * mean``. Envelope constants are the least
    ``C`` with ``|f| <= C 2^{3j/2} (1 + 2^{j/2} |x - x_nu|)^{-decay}`` and
    ``|f| <= C 2^{3j/2} (1 + 2^j |xi_nu . (x - x_nu)|)^{-decay}``,
    ``x_nu = grad phi(xi_nu)``.
    """
    j = frame.j if j is None else j
    if j != frame.j:
        raise ValidationError("frame scale does not match j")
    grid = grid or angular_grid(j)
    nus = sorted({int(round(k * frame.count / sample)) % frame.count for k in range(sample)})
    x, y = grid.coords()
    l1, peak, c_t, c_l = {}, {}, 0.0, 0.0
    amp = 2.0 ** (1.5 * j)
    for nu in nus:
        f = np.abs(angular_piece(frame, nu, phase, grid).data)
        l1[nu] = float(f.sum() * grid.cell)
        c = frame.centers[nu]
        gx, gy = (float(g[0]) for g in phase.gradient([np.array([c[0]]), np.array([c[1]])]))
        i = np.unravel_index(np.argmax(f), f.shape)
        peak[nu] = float(np.hypot(x[i[0], 0] - gx, y[0, i[1]] - gy))
        dx, dy = x - gx, y - gy
        env_t = amp * (1 + 2 ** (j / 2) * np.hypot(dx, dy)) ** (-decay)
        env_l = amp * (1 + 2.0**j * np.abs(c[0] * dx + c[1] * dy)) ** (-decay)
        c_t = max(c_t, float(np.max(f / env_t)))
        c_l = max(c_l, float(np.max(f / env_l)))
    total = frame.count * float(np.mean(list(l1.values())))
    return AngularPieceReport(j, frame.count, nus, l1, peak, c_t, c_l, total)


# -- separable Fourier expansion ------------------------------------------------------


@dataclass(eq=False)
class SeparableExpansion:
    """Fourier-series expansion of one dyadic block of a bilinear symbol.

    On the rescaled cell ``|xi|, |eta| < pi`` the block
    ``sigma(2^j xi, 2^k eta) psi_j(2^j xi) psi_k(2^k eta)`` equals
    ``sum_{a,b} c^{(a,b)} e^{i a.xi} e^{i b.eta}`` times the enlarged cutoffs;
    the retained modes satisfy ``|a|_inf, |b|_inf <= radius``. The
    coefficient matrix (a-modes by b-modes) is compressed by an SVD.
    """

    n: int
    j: int
    k: int
    radius: int
    samples: int
    coeffs: np.ndarray  # shape (2R+1)^n x (2R+1)^n, a-modes flattened first
    tail_bound: float
    fourier_tail: float
    svd_tail: float
    decay_exponent: float
    constants: dict  # L -> fitted C
    U: np.ndarray = field(repr=False, default=None)
    s: np.ndarray = field(repr=False, default=None)
    Vh: np.ndarray = field(repr=False, default=None)

    @property
    def rank(self) -> int:
        return len(self.s)

    @property
    def modes(self) -> np.ndarray:
        r = np.arange(-self.radius, self.radius + 1)
        grids = np.meshgrid(*([r] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def _cutoff(self, scale_j):
        return theta_low if scale_j == 0 else theta

    def _mode_matrix(self, comps, scale_j):
        """``e^{i a . 2^-j xi} tilde_psi(2^-j xi)`` for every retained mode ``a``."""
        s = 2.0**-scale_j
        rc = [np.asarray(c, dtype=float) * s for c in comps]
        shape = np.broadcast(*rc).shape
        rc = [np.broadcast_to(c, shape).ravel() for c in rc]
        phase = sum(np.outer(rc[d], self.modes[:, d]) for d in range(self.n))
        cut = self._cutoff(scale_j)(np.sqrt(sum(c * c for c in rc)))
        return np.exp(1j * phase) * cut[:, None], shape

    def evaluate(self, xi, eta, rank: int | None = None):
        """Reconstructed block at original coordinates from the retained terms."""
        from .operators import _components

        cx, ce = _components(xi, self.n), _components(eta, self.n)
        shape = np.broadcast(*cx, *ce).shape
        cx = [np.broadcast_to(c, shape).ravel() for c in cx]
        ce = [np.broadcast_to(c, shape).ravel() for c in ce]
        r = self.rank if rank is None else rank
        out = np.empty(len(cx[0]), dtype=complex)
        step = 1 << 14
        for i in range(0, len(out), step):
            A, _ = self._mode_matrix([c[i : i + step] for c in cx], self.j)
            B, _ = self._mode_matrix([c[i : i + step] for c in ce], self.k)
            left = A @ (self.U[:, :r] * self.s[:r])
            right = B @ self.Vh[:r, :].T
            out[i : i + step] = np.sum(left * right, axis=1)
        return out.reshape(shape)

    def _factor(self, scale_j, vec):
        R, n = self.radius, self.n
        coef = vec.reshape((2 * R + 1,) * n)
        cut = self._cutoff(scale_j)
        s = 2.0**-scale_j
        modes = np.arange(-R, R + 1)

        def u(comps):
            rc = [np.asarray(c, dtype=float) * s for c in comps]
            e = [np.exp(1j * np.multiply.outer(c, modes)) for c in rc]
            if n == 1:
                val = e[0] @ coef
            else:
                # separable in the two components: sum_{a1,a2} c e^{i a1 x} e^{i a2 y}
                val = np.einsum("...p,pq,...q->...", e[0], coef, e[1])
            return val * cut(np.sqrt(sum(c * c for c in rc)))

        return u

    def separable_terms(self):
        """Rank-one terms ``(u_r, v_r)`` in index order, for the bilinear operators."""
        return [(self._factor(self.j, self.U[:, r] * self.s[r]), self._factor(self.k, self.Vh[r, :])) for r in range(self.rank)]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "block": [self.j, self.k],
                "radius": self.radius,
                "samples": self.samples,
                "rank": self.rank,
                "tail_bound": self.tail_bound,
                "fourier_tail": self.fourier_tail,
                "svd_tail": self.svd_tail,
                "decay_exponent": self.decay_exponent,
                "constants": {str(k): v for k, v in self.constants.items()},
                "coeffs_re": self.coeffs.real.tolist(),
                "coeffs_im": self.coeffs.imag.tolist(),
            }
        )


def block_symbol(sigma, j: int, k: int, n: int, partition=None):
    """``sigma(xi, eta) psi_j(xi) psi_k(eta)`` in original coordinates."""
    part = partition or make_dyadic_partition()
    sig = as_bilinear_symbol(sigma, n)

    def ev(xi, eta):
        cx, ce = _split_args(xi, eta, n)
        return sig(cx, ce) * part.block(_norm(cx), j) * part.block(_norm(ce), k)

    return ev


def fourier_symbol_expansion(
    sigma,
    j: int,
    k: int,
    n: int | None = None,
    radius: int | None = None,
    samples: int | None = None,
    L_probe=(1, 2, 3, 4),
    svd_tol: float = 1e-12,
    partition=None,
) -> SeparableExpansion:
    """Expand the ``(j, k)`` block of ``sigma`` into separable Fourier modes.

    The block is sampled on ``samples`` points per axis of ``[-pi, pi)^{2n}``
    after rescaling ``xi -> 2^j xi``, ``eta -> 2^k eta``; coefficients come from
    the DFT. The tail bound adds the l1 mass of discarded modes, the mass of
    the outer half-shell of the sampled box (a proxy for the aliased tail)
    and the discarded SVD weight ``sum s_r ||U_r||_1 ||V_r||_1``.
    """
    sig = as_bilinear_symbol(sigma, n)
    n = sig.n
    if radius is None:
        radius = 32 if n == 1 else 8
    if samples is None:
        samples = 4 * radius + 4 if n == 2 else 8 * radius
    if 2 * radius + 1 > samples // 2:
        raise ValidationError("radius too large for the sampling density")
    M = samples
    axis = -np.pi + 2 * np.pi * np.arange(M) / M
    grids = np.meshgrid(*([axis] * (2 * n)), indexing="ij", sparse=True)
    sx = [g * 2.0**j for g in grids[:n]]
    se = [g * 2.0**k for g in grids[n:]]
    vals = np.asarray(block_symbol(sig, j, k, n, partition)(tuple(sx), tuple(se)), dtype=complex)
    vals = np.broadcast_to(vals, (M,) * (2 * n))
    if not np.all(np.isfinite(vals)):
        raise ValidationError("block symbol not finite on its cell")
    # c_m = M^{-2n} sum f(x) e^{-i m.x}; the grid starts at -pi
    c = sfft.fftn(vals) / M ** (2 * n)
    mm = sfft.fftfreq(M, 1.0 / M)
    shift = np.exp(1j * np.pi * mm)
    for ax in range(2 * n):
        sh = [1] * (2 * n)
        sh[ax] = M
        c = c * shift.reshape(sh)
    c = sfft.fftshift(c)
    centre = M // 2
    absc = np.abs(c)
    sl = tuple(slice(centre - radius, centre + radius + 1) for _ in range(2 * n))
    kept = c[sl]
    fourier_tail = float(absc.sum() - np.abs(kept).sum())
    idx = np.abs(np.arange(M) - centre)
    inf_norm = idx.reshape((M,) + (1,) * (2 * n - 1))
    for ax in range(1, 2 * n):
        inf_norm = np.maximum(inf_norm, idx.reshape((1,) * ax + (M,) + (1,) * (2 * n - ax - 1)))
    outer = float(absc[inf_norm >= M // 4].sum())

    side = (2 * radius + 1) ** n
    mat = kept.reshape(side, side)
    U, s, Vh = np.linalg.svd(mat)
    weights = s * np.abs(U).sum(axis=0) * np.abs(Vh).sum(axis=1)
    total = weights.sum()
    keep = len(s)
    while keep > 1 and weights[keep - 1 :].sum() <= svd_tol * max(total, 1e-300):
        keep -= 1
    svd_tail = float(weights[keep:].sum())

    # decay: largest coefficient on each sup-norm shell of a and of b
    a_norm = np.abs(np.arange(-radius, radius + 1))
    a_inf = a_norm
    for _ in range(n - 1):
        a_inf = np.maximum.outer(a_inf, a_norm).ravel()
    shells = np.arange(1, radius + 1)
    amat = np.abs(mat)
    top_a = np.array([amat[a_inf == sh, :].max() for sh in shells])
    top_b = np.array([amat[:, a_inf == sh].max() for sh in shells])
    decay = []
    for top in (top_a, top_b):
        # monotone envelope: largest coefficient at or beyond each shell
        top = np.maximum.accumulate(top[::-1])[::-1]
        ok = top > 1e-15 * amat.max()
        if ok.sum() >= 3:
            decay.append(-np.polyfit(np.log(1 + shells[ok]), np.log(top[ok]), 1)[0])
        else:
            decay.append(np.inf)
    exponent = float(min(decay))
    if exponent < 1:
        raise ConvergenceError("coefficient decay slower than (1+|a|)^-1: symbol too rough", {"exponent": exponent})
    wa = (1 + a_inf)[:, None].astype(float)
    wb = (1 + a_inf)[None, :].astype(float)
    constants = {L: float(np.max(amat * wa**L * wb**L)) for L in L_probe}

    return SeparableExpansion(
        n, j, k, radius, M, mat, fourier_tail + outer + svd_tail, fourier_tail, svd_tail, exponent, constants,
        U[:, :keep], s[:keep], Vh[:keep, :],
    )


@dataclass(eq=False)
class ExpandedSymbol:
    """Sum of block expansions; usable wherever a bilinear symbol is expected."""

    n: int
    blocks: list

    @property
    def tail_bound(self) -> float:
        return float(sum(b.tail_bound for b in self.blocks))

    def separable_terms(self):
        terms = []
        for b in sorted(self.blocks, key=lambda e: (e.j, e.k)):
            terms.extend(b.separable_terms())
        return terms

    def __call__(self, xi, eta):
        return sum(b.evaluate(xi, eta) for b in self.blocks)


def expand_symbol(sigma, jmax: int, n: int | None = None, **kw) -> ExpandedSymbol:
    """Expand all blocks ``0 <= j, k <= jmax`` of ``sigma``."""
    sig = as_bilinear_symbol(sigma, n)
    blocks = [fourier_symbol_expansion(sig, j, k, sig.n, **kw) for j in range(jmax + 1) for k in range(jmax + 1)]
    return ExpandedSymbol(sig.n, blocks)


def truncated_symbol(sigma, jmax: int, n: int | None = None, partition=None):
    """``sum_{j,k <= jmax} sigma psi_j psi_k``, i.e. ``sigma phi_low(2^-jmax xi) phi_low(2^-jmax eta)``."""
    part = partition or make_dyadic_partition()
    sig = as_bilinear_symbol(sigma, n)

    def ev(xi, eta):
        cx, ce = _split_args(xi, eta, sig.n)
        return sig(cx, ce) * part.phi_low(_norm(cx) * 2.0**-jmax) * part.phi_low(_norm(ce) * 2.0**-jmax)

    return BilinearSymbol(sig.n, ev, None)
