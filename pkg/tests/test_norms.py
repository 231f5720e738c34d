import numpy as np
import pytest

from wavemult.errors import ValidationError
from wavemult.lattice import make_grid, physical_field, synthesize_radial
from wavemult.norms import bmo_norm, h1_norm, holder_exponent, input_norm, lp_norm, operator_ratio, target_norm
from wavemult.sharpness import fit_slope


def _bmo_brute_force(values):
    """Mean oscillation over every dyadic interval of a 1-D periodic sample."""
    N = len(values)
    best = 0.0
    size = N
    while size >= 4:
        for start in range(0, N, size):
            seg = values[start:start + size]
            best = max(best, float(np.mean(np.abs(seg - np.mean(seg)))))
        size //= 2
    return best


def test_lp_of_plateau_bump():
    g = make_grid(1, 4096, 64.0)
    x = g.x_axis()
    # unit height on [-2, 2] with steep smooth edges, measure ~ 4
    bump = 0.5 * (np.tanh(100 * (x + 2)) - np.tanh(100 * (x - 2)))
    f = physical_field(g, bump)
    for p in (0.5, 1.0, 2.0, 4.0):
        assert lp_norm(f, p).value == pytest.approx(4.0 ** (1 / p), rel=1e-2)
    assert lp_norm(f, np.inf).value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_f_j_norm_slope(partition, p):
    js = [3, 4, 5, 6]
    vals = [lp_norm(synthesize_radial(partition.profile(j), make_grid(2, 2 ** (j + 3), 4.0)), p).value for j in js]
    assert fit_slope(js, vals).slope == pytest.approx(2 - 2 / p, abs=0.05)


def test_constant_has_zero_bmo():
    assert bmo_norm(physical_field(make_grid(2, 64, 4.0), 3.0 - 1j)).value == 0.0


def test_smooth_step_bmo_against_oracle():
    g = make_grid(1, 256, 8.0)
    x = g.x_axis()
    step = np.tanh(8 * x)
    val = bmo_norm(physical_field(g, step)).value
    assert val == pytest.approx(_bmo_brute_force(step), rel=1e-12)
    assert 0.5 <= val <= 1.0


def test_bmo_at_most_twice_sup(rng):
    g = make_grid(2, 64, 4.0)
    f = physical_field(g, rng.standard_normal(g.shape))
    assert bmo_norm(f).value <= 2 * lp_norm(f, np.inf).value


def test_bmo_depth_validated():
    with pytest.raises(ValidationError):
        bmo_norm(physical_field(make_grid(1, 64, 1.0), 1.0), max_depth=7)


def test_bmo_shift_tolerance(partition):
    g = make_grid(2, 256, 8.0)
    f = synthesize_radial(partition.profile(3), g)
    a = bmo_norm(f).value
    b = bmo_norm(physical_field(g, np.roll(f.data, 1, axis=0))).value
    assert abs(a - b) <= 0.05 * a


def _bumps(L, centres):
    g = make_grid(2, int(8 * L), L)
    x, y = g.coords()
    return physical_field(g, sum(s * np.exp(-4 * ((x - cx) ** 2 + y**2)) for s, cx in centres))


def test_h1_dipole_stable_under_box_doubling():
    a = h1_norm(_bumps(32.0, [(1, 0.5), (-1, -0.5)])).value
    b = h1_norm(_bumps(64.0, [(1, 0.5), (-1, -0.5)])).value
    assert np.isfinite(a) and abs(b - a) <= 0.05 * a


def test_h1_positive_bump_grows():
    a = h1_norm(_bumps(32.0, [(1, 0.0)])).value
    b = h1_norm(_bumps(64.0, [(1, 0.0)])).value
    assert b >= 1.1 * a


def test_h1_band_limited_comparable_to_l1(partition):
    ratios = []
    for j in (3, 4, 5):
        f = synthesize_radial(partition.profile(j), make_grid(2, 2 ** (j + 3), 4.0))
        ratios.append(h1_norm(f).value / lp_norm(f, 1).value)
    # equivalence constant is about 0.91 here, the same at every scale
    assert 0.5 <= min(ratios) and max(ratios) <= 2.0
    assert max(ratios) / min(ratios) < 1.05


@pytest.mark.parametrize("norm", [lambda f: lp_norm(f, 0.5), lambda f: lp_norm(f, 1), lambda f: lp_norm(f, np.inf),
                                  bmo_norm, h1_norm], ids=["L0.5", "L1", "Linf", "BMO", "H1"])
def test_homogeneity(norm, rng):
    g = make_grid(2, 64, 4.0)
    f = physical_field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    c = -2.5 + 1.5j
    assert norm(f * c).value == pytest.approx(abs(c) * norm(f).value, rel=1e-12)


def test_p_monotone_on_probability_box(rng):
    g = make_grid(2, 64, 1.0)  # box of measure 1
    f = physical_field(g, rng.standard_normal(g.shape))
    vals = [lp_norm(f, p).value for p in (0.5, 1, 2, 4, np.inf)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_zero_norms():
    f = physical_field(make_grid(1, 32, 1.0), 0.0)
    assert lp_norm(f, 1).value == 0.0 and h1_norm(f).value == 0.0


def test_holder_exponent():
    assert holder_exponent(1, 1) == 0.5
    assert holder_exponent(2, 2) == 1.0
    assert holder_exponent(1, np.inf) == 1.0
    assert np.isinf(holder_exponent(np.inf, np.inf))


def test_cauchy_schwarz_ratio(rng):
    g = make_grid(2, 64, 4.0)
    for _ in range(20):
        f = physical_field(g, rng.standard_normal(g.shape))
        h = physical_field(g, rng.standard_normal(g.shape))
        assert operator_ratio(physical_field(g, f.data * h.data), f, h, 2, 2) <= 1.0 + 1e-12


def test_ratio_exponent_violation(rng):
    g = make_grid(1, 32, 1.0)
    f = physical_field(g, 1.0)
    with pytest.raises(ValidationError):
        operator_ratio(f, f, f, 2, 2, r=2)


def test_ratio_zero_denominator():
    g = make_grid(1, 32, 1.0)
    with pytest.raises(ValidationError):
        operator_ratio(physical_field(g, 1.0), physical_field(g, 0.0), physical_field(g, 1.0), 2, 2)


def test_endpoint_norms(rng):
    g = make_grid(1, 64, 4.0)
    f = physical_field(g, rng.standard_normal(g.shape))
    assert input_norm(f, np.inf) == lp_norm(f, np.inf).value
    assert input_norm(f, np.inf, "bmo") == bmo_norm(f).value
    assert target_norm(f, np.inf) == bmo_norm(f).value


def test_negative_exponent_rejected():
    with pytest.raises(ValidationError):
        lp_norm(physical_field(make_grid(1, 32, 1.0), 1.0), 0)
