import numpy as np
import pytest
import sympy as sp

from wavemult.errors import ValidationError
from wavemult.symbols import (
    make_wave_phase,
    multi_indices,
    power_symbol,
    probe_points,
    sigma_j_symbol,
    smooth_cutoff,
    symbol_seminorm,
    theta,
)


def test_telescoping_at_one(partition):
    assert partition.psi(0.5) + partition.psi(1.0) + partition.psi(2.0) == pytest.approx(1.0, abs=1e-15)


def test_psi_support(partition):
    assert partition.psi(3.0) == 0.0
    rho = np.linspace(0, 10, 100001)
    outside = (rho < 0.5) | (rho > 2.0)
    assert not np.any(partition.psi(rho)[outside])


def test_low_and_high_pass(partition):
    assert partition.phi_low(0.5) == 1.0
    assert partition.zeta(4.0) == 1.0
    assert partition.phi_low(2.0) == 0.0


@pytest.mark.parametrize("J", [4, 8, 12])
def test_partition_exactness(partition, J):
    rho = np.geomspace(2.0 ** (-J + 1), 2.0 ** (J - 1), 20001)
    total = sum(partition.psi_j(rho, j) for j in range(-J, J + 1))
    assert np.max(np.abs(total - 1.0)) <= 1e-12


@pytest.mark.parametrize("k", [0, 1, 3, 6])
def test_low_pass_is_partial_sum(partition, k):
    rho = np.linspace(0, 2.0 ** (k + 2), 50001)
    partial = partition.phi_low(rho) + sum(partition.psi_j(rho, j) for j in range(1, k + 1))
    assert np.max(np.abs(partial - partition.phi_low(rho * 2.0**-k))) <= 1e-12


def test_theta_plateau_and_support():
    rho = np.linspace(0, 4, 40001)
    t = theta(rho)
    assert np.all(t[(rho >= 0.5) & (rho <= 2.0)] == 1.0)
    assert not np.any(t[(rho <= 1 / 3) | (rho >= 3.0)])


def test_cutoff_is_smooth_step():
    rho = np.linspace(0, 3, 3001)
    g = smooth_cutoff(rho)
    assert np.all(np.diff(g) <= 0)
    assert g[0] == 1.0 and g[-1] == 0.0


@pytest.mark.parametrize(
    "kind, kwargs, R",
    [
        ("euclidean", {}, 1.0),
        ("linear", {"vector": (3.0, 4.0)}, 5.0),
        ("ellipse", {"matrix": np.diag([1.0, 4.0])}, 2.0),
    ],
)
def test_gradient_sup(kind, kwargs, R):
    assert make_wave_phase(kind, 2, **kwargs).R == pytest.approx(R, abs=1e-6)


def test_ellipse_gradient_against_mesh_oracle():
    A = np.array([[2.0, 0.7], [0.7, 1.0]])
    ph = make_wave_phase("ellipse", 2, matrix=A)
    t = np.linspace(0, 2 * np.pi, 200001)
    xi = np.stack([np.cos(t), np.sin(t)], axis=1)
    grad = xi @ A / np.sqrt(np.einsum("ij,jk,ik->i", xi, A, xi))[:, None]
    assert ph.R == pytest.approx(np.max(np.linalg.norm(grad, axis=1)), abs=1e-6)


@pytest.mark.parametrize("bad", [np.diag([1.0, -1.0]), np.array([[1.0, 2.0], [0.0, 1.0]])])
def test_ellipse_rejects(bad):
    with pytest.raises(ValidationError):
        make_wave_phase("ellipse", 2, matrix=bad)


def test_linear_rejects_zero():
    with pytest.raises(ValidationError):
        make_wave_phase("linear", 2, vector=(0.0, 0.0))


@pytest.mark.parametrize(
    "phase",
    [
        make_wave_phase("euclidean", 2),
        make_wave_phase("ellipse", 2, matrix=np.diag([1.0, 4.0])),
        make_wave_phase("linear", 2, vector=(3.0, -4.0)),
    ],
    ids=["euclidean", "ellipse", "linear"],
)
def test_phase_homogeneity(phase, rng):
    xi = rng.uniform(-50, 50, (1000, 2))
    a, b = phase(2 * xi), 2 * phase(xi)
    assert np.all(np.abs(a - b) <= 1e-12 * np.maximum(np.abs(a), 1e-300))
    assert np.isrealobj(a)


def test_power_symbol_values(rng):
    s = power_symbol(-1.0, 2)
    xi, eta = rng.standard_normal((2, 50, 2))
    ref = (1 + np.sum(xi**2, 1) + np.sum(eta**2, 1)) ** -0.5
    assert np.allclose(s(xi, eta), ref, rtol=1e-15)


def test_sigma_j_support(rng):
    s = sigma_j_symbol(-1.0, 5, 2)
    r = rng.uniform(0, 200, 20000)
    xi = np.stack([r, np.zeros_like(r)], 1)
    eta = np.tile([[64.0, 0.0]], (len(r), 1))
    vals = s(xi, eta)
    assert not np.any(vals[(r < 32 / 3) | (r > 96)])
    assert np.allclose(vals[(r >= 16) & (r <= 64)], 2.0**-5)


def _analytic_ratios(m, n, max_order, pts):
    """Weighted derivative suprema of the power symbol from sympy derivatives."""
    z = sp.symbols(f"z0:{2 * n}", real=True)
    expr = (1 + sum(v**2 for v in z)) ** (sp.Rational(m).limit_denominator(8) / 2)
    weight = 1 + np.linalg.norm(pts[:, :n], axis=1) + np.linalg.norm(pts[:, n:], axis=1)
    out = {}
    for gamma in multi_indices(2 * n, max_order):
        d = expr
        for var, k in zip(z, gamma):
            if k:
                d = sp.diff(d, var, k)
        f = sp.lambdify(z, d, "numpy")
        vals = np.broadcast_to(f(*pts.T), len(pts))
        out[gamma] = float(np.max(np.abs(vals) * weight ** (-m + sum(gamma))))
    return out


@pytest.mark.parametrize("n", [1, 2])
def test_power_seminorm_matches_analytic_oracle(n):
    rep = symbol_seminorm(power_symbol(-1.0, n), -1.0, 2, n=n)
    _, pts = probe_points(n)
    ref = _analytic_ratios(-1.0, n, 2, pts)
    for gamma, val in ref.items():
        assert rep.ratios[gamma] == pytest.approx(val, rel=1e-4, abs=1e-12), gamma
    assert rep.in_class
    assert not rep.unstable


def test_order_mismatch_is_out_of_class():
    rep = symbol_seminorm(power_symbol(0.0, 2), -1.0, 2, n=2)
    assert not rep.in_class
    assert rep.growth[0] == pytest.approx(1.0, abs=0.05)


def test_sigma_j_constants_uniform_in_j():
    sups = [symbol_seminorm(sigma_j_symbol(-1.0, j, 2), -1.0, 2, n=2) for j in range(3, 9)]
    assert all(r.in_class for r in sups)
    for order in (0, 1, 2):
        vals = [r.order_sup[order] for r in sups]
        assert max(vals) / min(vals) <= 2.0


def test_seminorm_order_limit():
    with pytest.raises(ValidationError):
        symbol_seminorm(power_symbol(0.0, 1), 0.0, 5, n=1)


def test_oscillating_symbol_out_of_class():
    # bounded, but each derivative gains a factor |xi|
    wiggle = lambda xi, eta: np.sin(np.sum(np.asarray(xi) ** 2, -1) + np.sum(np.asarray(eta) ** 2, -1))  # noqa: E731
    rep = symbol_seminorm(wiggle, 0.0, 1, n=1)
    assert not rep.in_class
