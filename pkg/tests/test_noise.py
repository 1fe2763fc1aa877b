import math

import numpy as np
import pytest
from scipy import integrate, stats

from hetero import maps, noise
from hetero.errors import NoiseError

P = maps.PAPER_PARAMS


def simpson_mass(spec, lo, hi, npts=40_001):
    """Independent quadrature oracle for the noise density."""
    ys = np.linspace(lo, hi, npts)
    return integrate.simpson(noise.density(ys, spec), x=ys)


# --- bump functions -----------------------------------------------------------

@pytest.mark.parametrize("kind", noise.BUMP_KINDS)
def test_bump_endpoints(kind):
    assert noise.bump_chi(0.0, 2.0, kind) == 1.0
    assert noise.bump_chi(2.0, 2.0, kind) == 0.0
    assert noise.bump_chi(-2.0, 2.0, kind) == 0.0
    assert noise.bump_chi(2.5, 2.0, kind) == 0.0


def test_mollifier_closed_form_at_half():
    got = noise.bump_chi(1.0, 2.0, "mollifier")
    assert got == pytest.approx(math.exp(-1.0 / 3.0), rel=1e-14)


def test_plateau_flat_inner_half():
    ys = np.linspace(-0.5, 0.5, 21)
    assert np.all(noise.bump_chi(ys, 1.0, "plateau") == 1.0)
    mid = noise.bump_chi(0.75, 1.0, "plateau")
    assert 0.0 < mid < 1.0


@pytest.mark.parametrize("kind", noise.BUMP_KINDS)
def test_bump_symmetry(kind, rng):
    ys = rng.uniform(-3.0, 3.0, 100)
    assert np.allclose(noise.bump_chi(ys, 3.0, kind),
                       noise.bump_chi(-ys, 3.0, kind), rtol=0, atol=0)


# --- normalizer ----------------------------------------------------------------

@pytest.mark.parametrize("kind", noise.BUMP_KINDS)
def test_density_integrates_to_one(kind):
    spec = noise.NoiseSpec(a=0.7, n=1000, bump=kind)
    assert simpson_mass(spec, -spec.a, spec.a) == pytest.approx(1.0, abs=1e-10)


def test_normalizer_small_a_scaling():
    # a * c_a -> 1 / integral of the unit mollifier = 1/1.2069003224...
    limit = 1.0 / 1.2069003224378762
    vals = [a * noise.normalizer(a, "mollifier") for a in (1e-2, 1e-3, 1e-4)]
    errs = [abs(v - limit) for v in vals]
    assert errs[0] > errs[1] > errs[2]
    assert vals[2] == pytest.approx(limit, rel=1e-7)


def test_normalizer_plateau_reference_value():
    # 40-digit quadrature oracle at a = 1
    assert noise.normalizer(1.0, "plateau") == pytest.approx(
        0.7316955786543053, rel=1e-9)


# --- sampler --------------------------------------------------------------------

def test_sampler_moments_and_support(spec1000, rng):
    draws, rate = noise.sample_noise(spec1000, rng, size=1_000_000,
                                     return_rate=True)
    assert np.all(np.abs(draws) <= spec1000.a)
    assert abs(draws.mean()) < 3.0 * draws.std() / 1e3
    assert 0.0 < rate <= 1.0


def test_sampler_ks_against_quadrature_cdf(spec1000, rng):
    draws = noise.sample_noise(spec1000, rng, size=1_000_000)
    draws.sort()
    cdf = noise.cdf(draws, spec1000)
    n = draws.size
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    assert max(upper, lower) < 0.002


def test_sampler_chi_square_gof(spec1000, rng):
    draws = noise.sample_noise(spec1000, rng, size=1_000_000)
    edges = np.linspace(-spec1000.a, spec1000.a, 51)
    counts, _ = np.histogram(draws, bins=edges)
    probs = np.diff(noise.cdf(edges, spec1000))
    expected = probs * draws.size
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert stats.chi2.sf(chi2, 49) > 0.01


def test_sampler_pathological_rejection():
    # a bump that is (numerically) zero almost everywhere would reject all
    # candidates; the sampler must abort with diagnostics, not spin
    spec = noise.NoiseSpec(a=0.5, n=10, c_a=1.0)
    object.__setattr__(spec, "bump", "mollifier")
    rng = np.random.Generator(np.random.PCG64(1))
    import hetero.noise as nz
    orig = nz.bump_chi
    try:
        nz.bump_chi = lambda y, a, kind: np.zeros_like(np.asarray(y, float))
        with pytest.raises(NoiseError):
            nz.sample_noise(spec, rng, size=10)
    finally:
        nz.bump_chi = orig


# --- admissible bound -------------------------------------------------------------

def test_admissible_bound_sigma_scaling(paper, geometry):
    # quartering sigma_max (n -> 4n) doubles the admissible half-width
    b1 = noise.admissible_a(paper, geometry, 1000)
    b4 = noise.admissible_a(paper, geometry, 4000)
    assert b4 == pytest.approx(2.0 * b1, rel=1e-9)


def test_admissible_bound_paper_value(paper, geometry):
    # grid-max oracle on an independent, finer grid
    grid = np.linspace(geometry.domain_lo, geometry.domain_hi, 100_000)
    sigma_max = np.max(np.abs(maps.eval_sigma_n(grid, paper, 1000)))
    q = maps.eval_T(0.0, paper)
    x_ref = 1.0 - geometry.gamma_gap / 2.0
    want = min(geometry.gamma_gap / 2, q / 2,
               maps.eval_T(x_ref, paper) / 2) / sigma_max
    got = noise.admissible_a(paper, geometry, 1000)
    assert got == pytest.approx(want, rel=1e-3)
    assert got == pytest.approx(0.7113251381253602, rel=1e-6)


def test_admissible_bound_min_term_identity(paper, geometry):
    # bound * sigma_max equals the smallest of the three interval terms,
    # so the bound inherits their degeneracies (Gamma -> 0 sends it to 0)
    grid = np.linspace(geometry.domain_lo, geometry.domain_hi, 10_000)
    sigma_max = float(np.max(np.abs(maps.eval_sigma_n(grid, paper, 1000))))
    q = maps.eval_T(0.0, paper)
    x_ref = 1.0 - geometry.gamma_gap / 2.0
    terms = (geometry.gamma_gap / 2, q / 2, maps.eval_T(x_ref, paper) / 2)
    got = noise.admissible_a(paper, geometry, 1000)
    assert got * sigma_max == pytest.approx(min(terms), rel=1e-9)


def test_oversized_a_refused(paper, geometry):
    bound = noise.admissible_a(paper, geometry, 1000)
    with pytest.raises(NoiseError):
        noise.NoiseSpec.admissible(paper, geometry, 1000, a=bound * 1.01)
    spec = noise.NoiseSpec.admissible(paper, geometry, 1000, a=bound * 0.5)
    assert spec.a == pytest.approx(bound * 0.5)


# --- transition kernel ---------------------------------------------------------------

def test_kernel_normalization_over_igamma(paper, geometry, spec1000, rng):
    lo = 0.5 * maps.eval_T(1.0 - geometry.gamma_gap / 2.0, paper)
    hi = 1.0 - geometry.gamma_gap / 2.0
    for x in rng.uniform(lo, hi, 50):
        s_lo, s_hi = noise.kernel_support(x, paper, spec1000)
        ys = np.linspace(s_lo, s_hi, 4001)
        mass = integrate.simpson(noise.kernel_density(x, ys, paper, spec1000),
                                 x=ys)
        assert mass == pytest.approx(1.0, abs=1e-8)


def test_kernel_support_and_peak(paper, spec1000):
    x = 0.5
    s_lo, s_hi = noise.kernel_support(x, paper, spec1000)
    assert noise.kernel_density(x, s_lo - 1e-9, paper, spec1000) == 0.0
    assert noise.kernel_density(x, s_hi + 1e-9, paper, spec1000) == 0.0
    zs = np.linspace(s_lo, s_hi, 2001)
    dens = noise.kernel_density(x, zs, paper, spec1000)
    peak = zs[np.argmax(dens)]
    assert abs(peak - maps.eval_T(x, paper)) <= (s_hi - s_lo) / 2000 + 1e-12


def test_kernel_dirac_case_signals(paper, spec1000, monkeypatch):
    monkeypatch.setattr(maps, "eval_sigma_n",
                        lambda *a, **k: 0.0)
    with pytest.raises(NoiseError):
        noise.kernel_density(0.5, 0.5, paper, spec1000)


def test_one_step_support_containment(paper, geometry, spec1000, rng):
    # one chain step from the stationary support lands inside I_Gamma
    from hetero.orbits import Chain, step
    chain = Chain(params=paper, spec=spec1000)
    lo, hi = chain.support()
    xs = rng.uniform(geometry.core_lo, geometry.core_hi, 1000)
    etas = noise.sample_noise(spec1000, rng, size=1000)
    for x, eta in zip(xs, etas):
        y = step(x, eta, "random-paper", paper, spec1000, geometry=geometry)
        assert lo <= y <= hi
