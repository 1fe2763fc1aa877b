"""Bump-truncated Gaussian noise law, its sampler and the transition kernel.

The i.i.d. innovations eta are drawn from

    g_a(y) = c_a * chi_a(y) * exp(-y^2 / 2),   supp g_a = [-a, a],

where chi_a is a smooth bump on [-a, a] and c_a normalizes the integral to
one.  The one-step transition density of the chain is obtained by the change
of variable z = T(x) + sigma_n(x) * y:

    p_n(x, z) = g_a((z - T(x)) / sigma_n(x)) / sigma_n(x),

supported on [T(x) - a*sigma_n(x), T(x) + a*sigma_n(x)].  The exponent keeps
the Gaussian 1/2 factor of g_a, which the substitution requires.

The truncation half-width a is admissible when

    a <= (1 / sigma_max) * min{Gamma/2, q/2, T(1 - Gamma/2)/2},

with q = T(0) and sigma_max the maximum noise amplitude over the extended
domain; this keeps the chain inside the invariant interval I_Gamma.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from . import maps
from .errors import GeometryError, NoiseError

BUMP_KINDS = ("mollifier", "plateau")

#: grid resolution used for the cached CDF of g_a
_CDF_POINTS = 32_769


def bump_chi(y, a: float, kind: str = "mollifier"):
    """C-infinity bump on [-a, a]; 1 at the origin, 0 outside.

    mollifier: exp(1 - 1/(1 - (y/a)^2))
    plateau:   identically 1 on [-a/2, a/2], smooth ramp to 0 at +-a
    """
    if a <= 0:
        raise ValueError(f"bump half-width must be > 0, got {a}")
    if kind not in BUMP_KINDS:
        raise ValueError(f"unknown bump kind {kind!r}")
    y = np.asarray(y, dtype=float)
    s = np.abs(y) / a
    inside = s < 1.0
    out = np.zeros_like(s)
    if kind == "mollifier":
        with np.errstate(divide="ignore", over="ignore"):
            val = np.exp(1.0 - 1.0 / (1.0 - np.where(inside, s, 0.0) ** 2))
        out = np.where(inside, val, 0.0)
    else:
        # smooth transition psi(t) = f(t)/(f(t)+f(1-t)), f(t) = exp(-1/t)
        t = np.clip(2.0 * (1.0 - s), 0.0, 1.0)  # 0 at |y|=a, 1 at |y|=a/2
        with np.errstate(divide="ignore", over="ignore"):
            f1 = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
            t2 = 1.0 - t
            f2 = np.where(t2 > 0.0, np.exp(-1.0 / np.where(t2 > 0.0, t2, 1.0)), 0.0)
        out = np.where(inside, f1 / (f1 + f2), 0.0)
        out = np.where(s <= 0.5, 1.0, out)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=256)
def normalizer(a: float, kind: str = "mollifier") -> float:
    """c_a = 1 / integral of chi_a(y) exp(-y^2/2) dy, cached per (a, kind).

    The integrand underflows beyond |y| ~ 39, so very wide truncations are
    integrated on the clipped range (the bump is 1 to machine precision
    there and the tail contributes nothing representable).
    """
    lim = min(a, 40.0)
    val, err = integrate.quad(
        lambda y: bump_chi(y, a, kind) * math.exp(-0.5 * y * y),
        -lim, lim, epsabs=0.0, epsrel=1e-12, limit=200)
    if not val > 0.0 or err > 1e-10 * val:
        raise NoiseError(f"normalizer quadrature failed: value={val}, err={err}")
    return 1.0 / val


@dataclass(frozen=True)
class NoiseSpec:
    """Noise law parameters: half-width a, intensity index n, bump kind."""

    a: float
    n: float
    bump: str = "mollifier"
    c_a: float = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be > 0, got {self.a}")
        if not self.n >= 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.bump not in BUMP_KINDS:
            raise ValueError(f"unknown bump kind {self.bump!r}")
        if self.c_a is None:
            object.__setattr__(self, "c_a", normalizer(self.a, self.bump))

    @classmethod
    def admissible(cls, params: maps.MapParams, geometry: maps.MapGeometry,
                   n, a: float = None, bump: str = "mollifier",
                   mode: str = "paper") -> "NoiseSpec":
        """Construct a spec whose a respects the admissible bound.

        With a omitted, a sits exactly at the bound.  A larger a is refused:
        the chain could then leave the invariant interval.
        """
        bound = admissible_a(params, geometry, n, mode=mode)
        if a is None:
            a = bound
        elif a > bound * (1.0 + 1e-12):
            raise NoiseError(
                f"a={a} exceeds the admissible bound {bound} at n={n}")
        return cls(a=float(a), n=float(n), bump=bump)


def density(y, spec: NoiseSpec):
    """g_a(y) = c_a * chi_a(y) * exp(-y^2/2)."""
    y = np.asarray(y, dtype=float)
    out = spec.c_a * np.asarray(bump_chi(y, spec.a, spec.bump)) * np.exp(-0.5 * y * y)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def _cdf_table(a: float, kind: str):
    lim = min(a, 40.0)  # density underflows beyond; table stays resolved
    ys = np.linspace(-lim, lim, _CDF_POINTS)
    pdf = normalizer(a, kind) * np.asarray(bump_chi(ys, a, kind)) * np.exp(-0.5 * ys * ys)
    cum = integrate.cumulative_trapezoid(pdf, ys, initial=0.0)
    cum /= cum[-1]
    return ys, cum


def cdf(y, spec: NoiseSpec):
    """CDF of g_a by dense trapezoidal quadrature (renormalized table)."""
    ys, cum = _cdf_table(spec.a, spec.bump)
    out = np.interp(np.asarray(y, dtype=float), ys, cum, left=0.0, right=1.0)
    return float(out) if np.ndim(y) == 0 else out


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, size=None,
                 return_rate: bool = False):
    """Draw from g_a by rejection with a truncated-Gaussian proposal.

    The proposal is the standard normal restricted to [-a, a] (inverse-CDF
    sampling); a candidate y is accepted with probability chi_a(y), which
    makes the envelope constant exactly c_a.  Aborts with diagnostics when
    10^4 candidates in a row are rejected.
    """
    n_out = 1 if size is None else int(size)
    lo, hi = ndtr(-spec.a), ndtr(spec.a)
    out = np.empty(n_out)
    filled = 0
    proposed = 0
    accepted = 0
    while filled < n_out:
        m = max(64, int(1.6 * (n_out - filled)))
        u = rng.random(m)
        y = ndtri(lo + u * (hi - lo))
        keep = rng.random(m) < np.asarray(bump_chi(y, spec.a, spec.bump))
        got = y[keep]
        proposed += m
        accepted += got.size
        if accepted == 0 and proposed >= 10_000:
            raise NoiseError(
                f"pathological rejection sampling: 0/{proposed} accepted "
                f"(a={spec.a}, bump={spec.bump})")
        take = min(got.size, n_out - filled)
        out[filled:filled + take] = got[:take]
        filled += take
    rate = accepted / proposed if proposed else float("nan")
    result = float(out[0]) if size is None else out
    if return_rate:
        return result, rate
    return result


def admissible_a(params: maps.MapParams, geometry: maps.MapGeometry, n,
                 mode: str = "paper", grid_points: int = 10_000) -> float:
    """Largest admissible truncation half-width at intensity n.

    Returns (1/sigma_max) * min{Gamma/2, q/2, T(1 - Gamma/2)/2} with
    q = T(0) and sigma_max the maximum |sigma_n| over a dense grid of the
    extended domain.  The bound scales like sqrt(n): weaker noise admits a
    wider truncation.
    """
    g = geometry
    x_ref = 1.0 - g.gamma_gap / 2.0
    if not g.delta < x_ref <= g.b:
        raise GeometryError("igamma-outside-domain",
                            f"1 - Gamma/2 = {x_ref!r} not in (delta, b]")
    grid = np.linspace(g.domain_lo, g.domain_hi, grid_points)
    sig = np.abs(maps.eval_sigma_n(grid, params, n, mode=mode))
    sigma_max = float(np.max(sig))
    if not sigma_max > 0.0:
        raise NoiseError("sigma_n vanishes identically; no admissible a")
    q = maps.eval_T(0.0, params)
    t_ref = maps.eval_T(x_ref, params)
    bound = min(g.gamma_gap / 2.0, q / 2.0, t_ref / 2.0) / sigma_max
    if not bound > 0.0:
        raise GeometryError("degenerate-bound",
                            f"admissible bound {bound!r} is nonpositive")
    return bound


def kernel_support(x, params: maps.MapParams, spec: NoiseSpec,
                   tmap: maps.ExtendedMap = None):
    """Support endpoints [s_-, s_+] = T(x) -+ a*sigma_n(x) of p_n(x, .)."""
    tx = tmap(x) if tmap is not None else maps.eval_T(x, params)
    half = spec.a * np.abs(np.asarray(maps.eval_sigma_n(x, params, spec.n)))
    return tx - half, tx + half


def kernel_density(x, z, params: maps.MapParams, spec: NoiseSpec,
                   tmap: maps.ExtendedMap = None, mode: str = "paper"):
    """Transition density p_n(x, z) for a single source state x.

    Raises :class:`NoiseError` when sigma_n(x) = 0 -- the transition is then
    the Dirac mass at T(x) and callers must branch.
    """
    sig = maps.eval_sigma_n(x, params, spec.n, mode=mode)
    if sig == 0.0:
        raise NoiseError(f"sigma_n({x}) = 0: transition is a Dirac mass at T(x)")
    sig = abs(sig)
    tx = tmap(x) if tmap is not None else maps.eval_T(x, params)
    z = np.asarray(z, dtype=float)
    out = np.asarray(density((z - tx) / sig, spec)) / sig
    return float(out) if out.ndim == 0 else out
