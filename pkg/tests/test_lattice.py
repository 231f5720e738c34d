import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemult.errors import AliasingError, GridMismatchError, ValidationError
from wavemult.lattice import (
    Field,
    check_same_grid,
    fourier_transform,
    inverse_fourier_transform,
    make_grid,
    physical_field,
    synthesize_radial,
)
from wavemult.norms import lp_norm
from wavemult.operators import linear_multiplier_apply
from wavemult.symbols import make_dyadic_partition

from conftest import rel_l2


def test_grid_arithmetic():
    g = make_grid(2, 256, 64)
    assert g.dx == 0.25
    assert g.dxi == pytest.approx(2 * np.pi / 64)
    assert g.nyquist == pytest.approx(4 * np.pi)
    assert g.dx * g.dxi * g.N == pytest.approx(2 * np.pi, rel=1e-15)


def test_unit_frequency_spacing():
    assert make_grid(1, 16, 2 * np.pi).dxi == 1.0


@pytest.mark.parametrize("args", [(2, 100, 64), (3, 64, 1.0), (1, 8, 1.0), (1, 64, -1.0)])
def test_make_grid_rejects(args):
    with pytest.raises(ValidationError):
        make_grid(*args)


def test_gaussian_self_transform():
    g = make_grid(1, 1024, 64)
    x = g.x_axis()
    F = fourier_transform(physical_field(g, np.exp(-x**2 / 2)))
    xi = g.freqs()[0]
    assert np.max(np.abs(F.data - np.sqrt(2 * np.pi) * np.exp(-xi**2 / 2))) < 1e-8


def test_gaussian_inverse():
    g = make_grid(1, 1024, 64)
    xi = g.freqs()[0]
    f = inverse_fourier_transform(Field(g, "frequency", np.sqrt(2 * np.pi) * np.exp(-xi**2 / 2)))
    assert np.max(np.abs(f.data - np.exp(-g.x_axis() ** 2 / 2))) < 1e-8


def test_zero_transforms_to_zero():
    g = make_grid(2, 32, 4.0)
    assert not np.any(fourier_transform(physical_field(g, 0.0)).data)


def test_constant_spectrum_is_delta():
    g = make_grid(1, 64, 8.0)
    f = inverse_fourier_transform(Field(g, "frequency", np.ones(g.shape)))
    expected = np.zeros(g.N)
    expected[g.N // 2] = 1 / g.dx
    assert np.allclose(f.data, expected, atol=1e-12)
    assert np.sum(f.data).real * g.dx == pytest.approx(1.0)


@pytest.mark.parametrize("n, N", [(1, 256), (2, 64)])
def test_round_trip_and_parseval(n, N, rng):
    g = make_grid(n, N, 10.0)
    worst_rt = worst_pv = 0.0
    for _ in range(100):
        a = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        F = fourier_transform(physical_field(g, a))
        worst_rt = max(worst_rt, rel_l2(inverse_fourier_transform(F).data, a))
        lhs = np.sum(np.abs(a) ** 2) * g.cell
        rhs = np.sum(np.abs(F.data) ** 2) * g.freq_cell / (2 * np.pi) ** n
        worst_pv = max(worst_pv, abs(lhs - rhs) / lhs)
    assert worst_rt < 1e-12
    assert worst_pv < 1e-10


def test_inverse_is_linear(rng):
    g = make_grid(2, 32, 4.0)
    F, G = (Field(g, "frequency", rng.standard_normal(g.shape)) for _ in range(2))
    a, b = 1.5 - 2j, -0.25
    lhs = inverse_fourier_transform(Field(g, "frequency", a * F.data + b * G.data)).data
    rhs = a * inverse_fourier_transform(F).data + b * inverse_fourier_transform(G).data
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))


def test_rejects_non_finite():
    g = make_grid(1, 16, 1.0)
    a = np.zeros(16)
    a[3] = np.nan
    with pytest.raises(ValidationError):
        fourier_transform(physical_field(g, a))


def test_wrong_side_rejected():
    g = make_grid(1, 16, 1.0)
    with pytest.raises(ValidationError):
        inverse_fourier_transform(physical_field(g, 1.0))


def test_band_certificate(partition):
    # L = 128 would put Nyquist (4 pi) below the band; L = 32 resolves it
    g = make_grid(2, 512, 32)
    f = synthesize_radial(partition.profile(4), g)
    assert f.band == (8.0, 32.0)
    assert f.spectral_mass_outside() < 1e-10


def test_bare_callable_band_is_estimated(partition):
    g = make_grid(2, 512, 32)
    f = synthesize_radial(lambda r: partition.psi_j(r, 4), g)
    # the cutoff underflows to exact zeros near its edges, so the estimate
    # may sit inside [8, 32]; it must still contain every nonzero sample
    lo, hi = f.band
    assert 8.0 <= lo + 0.1 and hi <= 32.1
    assert f.spectral_mass_outside() < 1e-10


def test_zero_profile():
    g = make_grid(2, 64, 8.0)
    f = synthesize_radial(lambda r: np.zeros_like(r), g)
    assert f.band is None and not np.any(f.data)


def test_aliasing_guard(partition):
    with pytest.raises(AliasingError):
        synthesize_radial(partition.profile(4), make_grid(2, 512, 128))


def test_l1_grid_refinement(partition):
    # same box, twice the samples: the L1 quadrature is already converged
    coarse = synthesize_radial(partition.profile(4), make_grid(2, 512, 32))
    fine = synthesize_radial(partition.profile(4), make_grid(2, 1024, 32))
    ratio = lp_norm(coarse, 1).value / lp_norm(fine, 1).value
    assert 0.999 <= ratio <= 1.001


def test_dilation_covariance(partition):
    # f_j(x) = 2^{jn} f_0(2^j x); sample f_0 on the box scaled by 2^j
    j, N = 3, 256
    gj = make_grid(2, N, 16.0)
    g0 = make_grid(2, N, 16.0 * 2**j)
    fj = synthesize_radial(partition.profile(j), gj).data
    f0 = synthesize_radial(partition.profile(0), g0).data
    assert np.max(np.abs(fj - 2 ** (2 * j) * f0)) < 1e-8 * np.max(np.abs(fj))


def test_field_is_read_only():
    f = physical_field(make_grid(1, 16, 1.0), np.arange(16.0))
    with pytest.raises(ValueError):
        f.data[0] = 1.0


def test_field_shape_checked():
    with pytest.raises(ValidationError):
        Field(make_grid(1, 16, 1.0), "physical", np.zeros(8))


def test_grid_mismatch():
    a = physical_field(make_grid(1, 16, 1.0), 1.0)
    b = physical_field(make_grid(1, 16, 2.0), 1.0)
    with pytest.raises(GridMismatchError):
        check_same_grid(a, b)


def test_multiplier_keeps_band(partition):
    g = make_grid(2, 256, 16.0)
    f = physical_field(g, np.random.default_rng(1).standard_normal(g.shape))
    out = linear_multiplier_apply(partition.profile(3), f)
    assert out.band == (4.0, 16.0)
    assert out.spectral_mass_outside() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([1, 2]), st.floats(0.5, 100.0))
def test_round_trip_property(seed, n, L):
    g = make_grid(n, 32 if n == 2 else 128, L)
    a = np.random.default_rng(seed).standard_normal(g.shape)
    back = inverse_fourier_transform(fourier_transform(physical_field(g, a))).data
    assert rel_l2(back, a) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-5.0, 5.0), st.integers(min_value=0, max_value=1000))
def test_transform_homogeneous(c, seed):
    g = make_grid(1, 64, 3.0)
    a = np.random.default_rng(seed).standard_normal(g.shape)
    F1 = fourier_transform(physical_field(g, c * a)).data
    F2 = c * fourier_transform(physical_field(g, a)).data
    assert np.allclose(F1, F2, rtol=0, atol=1e-12 * (1 + np.max(np.abs(F2))))
