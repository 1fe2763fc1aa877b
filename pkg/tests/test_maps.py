import math

import numpy as np
import pytest

from hetero import maps
from hetero.errors import GeometryError

P = maps.PAPER_PARAMS


# --- sigma_bar -------------------------------------------------------------

def test_sigma_bar_paper_value():
    # direct arithmetic: (1 - 0.669) * 1.64^2 * 2.7e-5
    assert maps.sigma_bar(P) == pytest.approx(2.40369552e-5, rel=1e-9)


def test_sigma_bar_omega_one_vanishes():
    assert maps.sigma_bar(P.replace(omega=1.0)) == 0.0


def test_alpha_zero_rejected_by_invariant():
    # the alpha^2 factor would send sigma_bar to 0, but alpha > 0 is a
    # constructor invariant, so the degenerate case is unreachable
    with pytest.raises(ValueError):
        P.replace(alpha=0.0)


# --- V, F, A, B ------------------------------------------------------------

def test_V_at_origin_collapses():
    want = (P.omega + maps.sigma_bar(P)) ** -0.5
    assert maps.eval_V(0.0, 0.0, P) == pytest.approx(want, abs=1e-15)


def test_V_highprecision_oracle():
    # 40-digit evaluation of the closed form at (0.5, 0), c = 0.3
    got = maps.eval_V(0.5, 0.0, P.replace(c=0.3))
    assert got == pytest.approx(12.820439130361788581, rel=1e-14)


def test_V_vanishes_at_pole_approach():
    # V ~ eps / sqrt(sigma_bar) as v -> (1-u)- with gap eps
    u = 0.3
    assert maps.eval_V(u, 1.0 - u - 1e-9, P) < 1e-6


def test_V_pole_raises():
    with pytest.raises(ValueError):
        maps.eval_V(0.4, 0.6, P)


def test_F_zero_when_V_is_one():
    # engineer V = 1 at u = 0: (1 - v)^2 = sigma_bar / (1 - omega)
    v = 1.0 - math.sqrt(maps.sigma_bar(P) / (1.0 - P.omega))
    assert abs(maps.eval_F(0.0, v, P)) < 1e-12


def test_F_at_origin_closed_form():
    V0 = (P.omega + maps.sigma_bar(P)) ** -0.5
    want = (V0 - 1.0) / (P.gamma0 + P.c * V0)
    assert maps.eval_F(0.0, 0.0, P) == pytest.approx(want, abs=1e-15)


def test_F_highprecision_oracle():
    got = maps.eval_F(0.38, 0.01, P.replace(c=0.3))
    assert got == pytest.approx(0.46191229052964207, rel=1e-13)


def test_A_at_origin():
    want = (P.omega + maps.sigma_bar(P)) ** -0.5
    assert maps.eval_A(0.0, P) == pytest.approx(want, abs=1e-15)


def test_A_is_zero_noise_slice_of_V(rng):
    for u in rng.uniform(0.0, 0.95, 20):
        assert maps.eval_A(u, P) == pytest.approx(
            maps.eval_V(u, 0.0, P), rel=1e-12)


def test_A_vanishes_toward_one():
    assert maps.eval_A(1.0 - 1e-9, P) < 1e-4


# --- T and its derivative ---------------------------------------------------

def test_T_at_zero_closed_form():
    s = math.sqrt(P.omega + maps.sigma_bar(P))
    want = (1.0 - s) / (P.gamma0 * s + P.c)
    assert abs(maps.eval_T(0.0, P) - want) < 1e-12


def test_T_unclipped_limit_minus_inverse_gamma0():
    got = maps.eval_T(1.0 - 1e-8, P)
    assert abs(got - (-1.0 / P.gamma0)) < 1e-6


def test_T_zero_at_b(geometry):
    assert abs(maps.eval_T(geometry.b, P)) < 1e-10


def test_T_prime_zero_at_crit(geometry):
    assert abs(maps.eval_T_prime(geometry.crit, P)) < 1e-8


def test_T_prime_matches_central_differences(geometry, rng):
    h = 1e-6
    for phi in rng.uniform(geometry.core_lo, geometry.core_hi, 100):
        fd = (maps.eval_T(phi + h, P) - maps.eval_T(phi - h, P)) / (2 * h)
        assert abs(maps.eval_T_prime(phi, P) - fd) <= 1e-6


def test_T_prime_sign_pattern(geometry):
    left = np.linspace(1e-6, geometry.crit - 1e-6, 200)
    right = np.linspace(geometry.crit + 1e-6, geometry.b - 1e-9, 200)
    assert np.all(maps.eval_T_prime(left, P) > 0)
    assert np.all(maps.eval_T_prime(right, P) < 0)


# --- sigma_n ---------------------------------------------------------------

def test_sigma_n_shrinks_with_n():
    phis = np.linspace(-0.05, 0.9, 50)
    small = maps.eval_sigma_n(phis, P, 1e12)
    assert np.all(np.abs(small) < 1e-4)
    assert np.allclose(maps.eval_sigma_n(phis, P, 4000),
                       0.5 * maps.eval_sigma_n(phis, P, 1000), rtol=1e-12)


def test_sigma_n_highprecision_oracle():
    got = maps.eval_sigma_n(0.38, P, 1000)
    assert got == pytest.approx(7.267402051361084e-4, rel=1e-13)


def test_sigma_n_mode_ratio():
    params = P.replace(c=0.3)
    for phi in (0.1, 0.38, 0.7):
        paper_amp = maps.eval_sigma_n(phi, params, 1000, mode="paper")
        first = maps.eval_sigma_n(phi, params, 1000, mode="first-order")
        denom = params.gamma0 + params.c * maps.eval_A(phi, params)
        assert first * denom == pytest.approx(paper_amp, rel=1e-12)


def test_sigma_n_exact_F_mode_has_no_closed_form():
    with pytest.raises(ValueError):
        maps.eval_sigma_n(0.3, P, 1000, mode="exact-F")


def test_sigma_n_domain():
    with pytest.raises(ValueError):
        maps.eval_sigma_n(1.0, P, 1000)


# --- geometry ---------------------------------------------------------------

def test_geometry_against_dense_grid_scan(geometry):
    # independent oracle: 1e6-point scan locating the maximum and the sign
    # change, compared to the bisection output
    grid = np.linspace(1e-9, 1.0 - 1e-9, 1_000_001)
    tv = maps.eval_T(grid, P)
    i_max = int(np.argmax(tv))
    spacing = grid[1] - grid[0]
    assert abs(grid[i_max] - geometry.crit) <= 2 * spacing
    assert abs(tv[i_max] - geometry.delta) <= 1e-8
    sign_change = np.nonzero((tv[:-1] > 0) & (tv[1:] <= 0)
                             & (grid[:-1] > geometry.crit))[0]
    assert len(sign_change) == 1
    assert abs(grid[sign_change[0]] - geometry.b) <= 2 * spacing
    assert geometry.delta < geometry.b < 1.0


def test_geometry_small_gamma0_fails_loudly():
    with pytest.raises(GeometryError):
        maps.find_geometry(P.replace(gamma0=2.0))
    # grid oracle: the maximum exceeds the zero crossing's ceiling
    grid = np.linspace(1e-9, 1.0 - 1e-9, 100_001)
    assert np.max(maps.eval_T(grid, P.replace(gamma0=2.0))) > 1.0


def test_geometry_core_ordering(geometry):
    assert geometry.core_lo < geometry.crit < geometry.delta
    assert geometry.core_contained


def test_geometry_periodic_regime_recorded_not_fatal():
    geo = maps.find_geometry(P.replace(c=0.8))
    assert not geo.core_contained
    assert geo.delta < geo.b < 1.0


# --- extension ---------------------------------------------------------------

def test_extension_below_delta(ext, geometry):
    assert ext(geometry.domain_lo) < geometry.delta


def test_extension_continuous_at_zero(ext):
    assert abs(ext(-1e-15) - ext(0.0)) < 1e-10


def test_extension_decreasing_and_positive(ext, geometry):
    grid = np.linspace(geometry.domain_lo, -1e-12, 100)
    vals = ext(grid)
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals > 0)


def test_extension_matches_raw_map_on_the_right(ext, geometry, rng):
    phis = rng.uniform(0.0, geometry.b, 50)
    assert np.array_equal(ext(phis), np.asarray(maps.eval_T(phis, P)))


def test_extension_domain_error(ext, geometry):
    with pytest.raises(ValueError):
        ext(geometry.b + 1e-6)
    with pytest.raises(ValueError):
        ext(geometry.domain_lo - 1e-6)


# --- Schwarzian -------------------------------------------------------------

def test_schwarzian_negative_on_core(geometry):
    phis = np.linspace(geometry.core_lo, geometry.core_hi, 1000)
    vals = np.asarray(maps.schwarzian(phis, P))
    finite = vals[~np.isnan(vals)]
    assert finite.size > 990
    assert np.all(finite < 0)


def test_schwarzian_sentinel_at_crit(geometry):
    assert math.isnan(maps.schwarzian(geometry.crit, P))


def test_schwarzian_annihilates_moebius():
    # V replaced by the identity turns T into a Moebius map of A
    f = lambda x: (x - 1.0) / (P.gamma0 + 0.3 * x)
    vals = maps.schwarzian_fn(f, np.linspace(0.1, 0.9, 20))
    assert np.all(np.abs(vals) < 1e-3)


# --- module invariants -------------------------------------------------------

def test_invariant_T_below_delta(geometry):
    grid = np.linspace(0.0, geometry.b, 10_000)
    vals = np.asarray(maps.eval_T(grid, P))
    assert np.all(vals <= geometry.delta + 1e-12)


def test_invariant_orbit_trapping(geometry):
    # [0, delta] up to the root-finder tolerance of b (|T'(b)| * 1e-12)
    phis = np.linspace(geometry.delta, geometry.b, 1000)
    img = np.asarray(maps.eval_T(phis, P))
    assert np.all(img >= -1e-11)
    assert np.all(img <= geometry.delta + 1e-12)


def test_invariant_max_T_below_one():
    grid = np.linspace(0.0, 1.0 - 1e-9, 100_001)
    assert np.max(np.abs(maps.eval_T(grid, P))) < 1.0


def test_iterate_raw_matches_eval_T():
    out = maps.iterate_raw(0.38, 50, P)
    x = 0.38
    for t in range(50):
        x = maps.eval_T(x, P)
        assert out[t] == x
