import numpy as np
import pytest

from wavemult.decomp import fourier_symbol_expansion
from wavemult.errors import ConvergenceError, GridMismatchError, ValidationError
from wavemult.kernels import radial_wave_kernel
from wavemult.lattice import make_grid, physical_field, synthesize_radial
from wavemult.norms import lp_norm
from wavemult.operators import (
    bilinear_multiplier_apply,
    dense_bilinear_oracle,
    linear_multiplier_apply,
    radial,
    separable_symbol,
    sj_apply,
    wave_bilinear_apply,
    wave_multiplier,
)
from wavemult.symbols import make_wave_phase, power_symbol, sigma_j_symbol, theta

from conftest import rel_l2


def _random(grid, rng, band_fraction=None):
    a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    f = physical_field(grid, a)
    if band_fraction is None:
        return f
    top = band_fraction * grid.guard
    return linear_multiplier_apply(radial(lambda r: (r < top).astype(float), (0.0, top)), f)


def test_identity_multiplier(rng):
    f = _random(make_grid(2, 64, 8.0), rng)
    assert rel_l2(linear_multiplier_apply(1.0, f).data, f.data) < 1e-12


def test_phase_semigroup(rng):
    f = _random(make_grid(2, 64, 8.0), rng)
    once = make_wave_phase("euclidean", 2)
    twice = make_wave_phase("ellipse", 2, matrix=4 * np.eye(2))  # 2|xi|
    a = linear_multiplier_apply(once, linear_multiplier_apply(once, f))
    b = linear_multiplier_apply(twice, f)
    assert rel_l2(a.data, b.data) < 1e-12


def test_wave_multiplier_sampler(rng):
    f = _random(make_grid(1, 128, 10.0), rng)
    mult = wave_multiplier(make_wave_phase("euclidean", 1), m=-1.0)
    a = linear_multiplier_apply(mult, f)
    b = linear_multiplier_apply(lambda fr: np.exp(1j * np.abs(fr[0])) / np.sqrt(1 + fr[0] ** 2), f)
    assert rel_l2(a.data, b.data) < 1e-14


def test_multiplier_band(partition, rng):
    f = _random(make_grid(2, 128, 8.0), rng)
    out = linear_multiplier_apply(partition.profile(3), f)
    assert out.band == (4.0, 16.0)
    assert out.spectral_mass_outside() < 1e-10


@pytest.mark.parametrize("n, N", [(1, 256), (2, 64)])
def test_product_identity(n, N, rng):
    grid = make_grid(n, N, 2 * np.pi)
    f, g = _random(grid, rng, 0.45), _random(grid, rng, 0.45)
    out = bilinear_multiplier_apply(1.0, f, g)
    assert np.max(np.abs(out.data - f.data * g.data)) <= 1e-12 * np.max(np.abs(f.data * g.data))


def test_separable_in_one_variable(rng):
    grid = make_grid(2, 64, 8.0)
    f, g = _random(grid, rng, 0.4), _random(grid, rng, 0.4)
    u = lambda fr: np.exp(-0.1 * (fr[0] ** 2 + fr[1] ** 2)) * (1 + 1j * fr[0])  # noqa: E731
    one = lambda fr: np.ones(np.broadcast(*fr).shape)  # noqa: E731
    out = bilinear_multiplier_apply(separable_symbol(u, one, 2), f, g)
    ref = linear_multiplier_apply(u, f).data * g.data
    assert rel_l2(out.data, ref) < 1e-12


@pytest.mark.parametrize("n, N", [(1, 32), (2, 32)])
def test_fast_path_matches_dense(n, N, rng):
    grid = make_grid(n, N, 4 * np.pi)
    c = rng.standard_normal(4)
    u = lambda fr: np.cos(c[0] * fr[0]) + c[1] * np.sin(sum(fr))  # noqa: E731
    v = lambda fr: np.exp(-c[2] ** 2 * sum(x * x for x in fr) / 50) + 1j * c[3]  # noqa: E731
    sig = separable_symbol(u, v, n)
    f, g = _random(grid, rng), _random(grid, rng)
    fast = bilinear_multiplier_apply(sig, f, g).data
    dense = dense_bilinear_oracle(sig, f, g).data
    assert rel_l2(fast, dense) < 1e-10


def test_expansion_fast_matches_dense(rng):
    E = fourier_symbol_expansion(power_symbol(-1.0, 1), 2, 2, 1)
    grid = make_grid(1, 32, 4 * np.pi)
    f, g = _random(grid, rng), _random(grid, rng)
    fast = bilinear_multiplier_apply(E, f, g).data
    assert rel_l2(fast, dense_bilinear_oracle(E, f, g).data) < 1e-8


def test_non_separable_symbol_uses_dense(rng):
    grid = make_grid(1, 32, 4 * np.pi)
    f, g = _random(grid, rng), _random(grid, rng)
    sig = power_symbol(-1.0, 1)
    assert rel_l2(bilinear_multiplier_apply(sig, f, g).data, dense_bilinear_oracle(sig, f, g).data) < 1e-14
    big = make_grid(1, 128, 4 * np.pi)
    with pytest.raises(ValidationError):
        bilinear_multiplier_apply(sig, _random(big, rng), _random(big, rng))


def test_dense_oracle_size_limit(rng):
    grid = make_grid(2, 64, 8.0)
    with pytest.raises(ValidationError):
        dense_bilinear_oracle(1.0, _random(grid, rng), _random(grid, rng))


def test_wave_apply_factorizes(rng):
    grid = make_grid(2, 64, 8.0)
    f, g = _random(grid, rng, 0.4), _random(grid, rng, 0.4)
    ph = make_wave_phase("euclidean", 2)
    out = wave_bilinear_apply(ph, ph, 1.0, f, g).data
    ref = linear_multiplier_apply(ph, f).data * linear_multiplier_apply(ph, g).data
    assert rel_l2(out, ref) < 1e-12


def test_zero_phase_reduces(rng):
    grid = make_grid(2, 64, 8.0)
    f, g = _random(grid, rng, 0.4), _random(grid, rng, 0.4)
    zero = make_wave_phase("zero", 2)
    sig = sigma_j_symbol(-1.0, 2, 2)
    a = wave_bilinear_apply(zero, zero, sig, f, g).data
    assert rel_l2(a, bilinear_multiplier_apply(sig, f, g).data) < 1e-14


def test_linear_phase_translates():
    grid = make_grid(1, 256, 32.0)
    x = grid.x_axis()
    v = 1.3
    f = physical_field(grid, np.exp(-x**2 / 2))
    g = physical_field(grid, np.exp(-((x - 0.5) ** 2)) * np.cos(x))
    ph = make_wave_phase("linear", 1, vector=(v,))
    out = wave_bilinear_apply(ph, ph, 1.0, f, g).data
    y = x + v
    ref = np.exp(-y**2 / 2) * np.exp(-((y - 0.5) ** 2)) * np.cos(y)
    assert np.max(np.abs(out - ref)) < 1e-10


def test_bilinearity(rng):
    grid = make_grid(2, 64, 8.0)
    f1, f2, g = (_random(grid, rng, 0.4) for _ in range(3))
    a, b = 0.3 - 1j, 2.0
    sig = sigma_j_symbol(0.5, 2, 2)
    lhs = bilinear_multiplier_apply(sig, physical_field(grid, a * f1.data + b * f2.data), g).data
    rhs = a * bilinear_multiplier_apply(sig, f1, g).data + b * bilinear_multiplier_apply(sig, f2, g).data
    assert rel_l2(lhs, rhs) < 1e-12


def test_sumset_band(partition, rng):
    grid = make_grid(2, 128, 8.0)
    f = synthesize_radial(partition.profile(1), grid)
    g = linear_multiplier_apply(partition.profile(4), _random(grid, rng))
    out = bilinear_multiplier_apply(sigma_j_symbol(0.0, 3, 2), f, g)
    assert out.band == (4.0, 36.0)
    assert out.spectral_mass_outside() < 1e-10


def test_sumset_beyond_guard(partition, rng):
    grid = make_grid(2, 64, 8.0)
    f = synthesize_radial(partition.profile(3), grid)
    with pytest.raises(ValidationError):
        bilinear_multiplier_apply(1.0, f, f)


def test_truncation_tolerance(rng):
    E = fourier_symbol_expansion(power_symbol(-1.0, 1), 2, 2, 1)
    grid = make_grid(1, 32, 4 * np.pi)
    f, g = _random(grid, rng), _random(grid, rng)
    with pytest.raises(ConvergenceError):
        bilinear_multiplier_apply(E, f, g, tol=E.tail_bound / 10)
    bilinear_multiplier_apply(E, f, g, tol=E.tail_bound * 10)


def test_grid_mismatch(rng):
    f = _random(make_grid(1, 32, 1.0), rng)
    g = _random(make_grid(1, 32, 2.0), rng)
    with pytest.raises(GridMismatchError):
        bilinear_multiplier_apply(1.0, f, g)


def test_sj_preserves_l2(rng):
    grid = make_grid(2, 256, 8.0)
    f = _random(grid, rng)
    a = lp_norm(sj_apply(4, f), 2).value
    b = lp_norm(linear_multiplier_apply(lambda fr: theta(np.sqrt(fr[0] ** 2 + fr[1] ** 2) / 16), f), 2).value
    assert a == pytest.approx(b, rel=1e-12)


def test_sj_against_bessel_quadrature(partition):
    j, grid = 5, make_grid(2, 1024, 16.0)
    s = sj_apply(j, synthesize_radial(partition.profile(j), grid)).data
    x = grid.x_axis()
    sel = (x > 0.25) & (x < 2.0)
    row = s[sel, grid.N // 2]
    # S_j f_j has the conjugate phase of the tabulated kernel
    ref = np.conj(radial_wave_kernel(j, 2, x[sel]).values)
    assert np.max(np.abs(row - ref)) / np.max(np.abs(ref)) <= 1e-3


def test_sj_scale_out_of_range(rng):
    with pytest.raises(ValidationError):
        sj_apply(6, _random(make_grid(2, 64, 8.0), rng))
