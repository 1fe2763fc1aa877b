"""Closed-form evaluation of the leverage map family and its geometry.

The slow (daily) dynamics of the scaled leverage phi = (lambda - 1)/gamma
reduces, for weak estimation noise, to a one-dimensional unimodal map

    T(phi) = (A(phi) - 1) / (gamma0 + c * A(phi)),

with amplitude functions

    A(u) = (1 + g0*u) / [w*(1 - c*u)^2 + S*(1 - u)^-2 (1 + g0*u)^2]^(1/2)
    B(u) = S*(1 - u)^-1 (1 + g0*u)^3 / [same bracket]^(3/2)

where g0 = gamma0, w = omega and S = sigma_bar = (1 - omega)*alpha^2*sigma_eps.
The state-dependent noise amplitude is

    sigma_n(phi) = sqrt(1 - phi^2) * (gamma0 + c) * B(phi)
                   / (sqrt(n) * (gamma0 + c*A(phi)))            ["paper" mode]

with a "first-order" variant carrying (gamma0 + c*A(phi))^2 in the
denominator (the amplitude a strict first-order expansion of the exact
one-step function F actually produces), and an "exact-F" mode that skips the
expansion altogether: callers then iterate F directly via :func:`eval_F`.

The map is restricted to [0, b], b the zero crossing right of the maximum,
and extended on the left to [-Gamma, 0) with Gamma = b - delta so the additive
noise cannot push the chain out of the domain.  All evaluators accept scalars
or numpy arrays.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

SIGMA_MODES = ("paper", "first-order", "exact-F")

#: grid size of the bracketing pre-scan used before bisection
_PRESCAN = 10_000


@dataclass(frozen=True)
class MapParams:
    """The five constants of the leverage map family.

    gamma0    liquidity intercept, > 0
    alpha     VaR coefficient, > 0
    sigma_eps exogenous aggregated return variance, > 0
    omega     memory weight in [0, 1]
    c         liquidity-leverage slope, |c| <= 1
    """

    gamma0: float
    alpha: float
    sigma_eps: float
    omega: float
    c: float

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.sigma_eps > 0:
            raise ValueError(f"sigma_eps must be > 0, got {self.sigma_eps}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must be in [0, 1], got {self.omega}")
        if not abs(self.c) <= 1.0:
            raise ValueError(f"|c| must be <= 1, got {self.c}")

    def replace(self, **kw) -> "MapParams":
        fields = dict(gamma0=self.gamma0, alpha=self.alpha,
                      sigma_eps=self.sigma_eps, omega=self.omega, c=self.c)
        fields.update(kw)
        return MapParams(**fields)


#: baseline parameter set used throughout the experiments
#: (gamma0 from bank balance-sheet data, alpha = 5% Gaussian VaR,
#:  sigma_eps the exogenous daily idiosyncratic variance)
PAPER_PARAMS = MapParams(gamma0=15.969, alpha=1.64, sigma_eps=2.7e-5,
                         omega=0.669, c=0.0)


@dataclass(frozen=True)
class MapGeometry:
    """Derived geometry of one parameter set.

    crit       critical point (interior maximum) of T on (0, 1)
    delta      T(crit), the maximum value
    b          zero crossing of T right of the maximum
    gamma_gap  Gamma = b - delta
    core_lo/hi dynamical core [T(delta), delta]
    domain_lo/hi extended domain [-Gamma, b]
    core_contained  whether T(delta) < crit < delta holds; True in the
               chaotic regime, False when an attracting cycle sits left of
               the critical point (the map is then of periodic type)
    """

    crit: float
    delta: float
    b: float
    gamma_gap: float
    core_lo: float
    core_hi: float
    domain_lo: float
    domain_hi: float
    core_contained: bool = True


def sigma_bar(params: MapParams) -> float:
    """(1 - omega) * alpha^2 * sigma_eps, the rescaled exogenous variance."""
    return (1.0 - params.omega) * params.alpha**2 * params.sigma_eps


def _bracket(u, params, sb):
    """w*(1-c*u)^2 + S*(1-u)^-2*(1+g0*u)^2, the common radicand of A and B."""
    one_m = 1.0 - u
    g1 = 1.0 + params.gamma0 * u
    return params.omega * (1.0 - params.c * u) ** 2 + sb * (g1 / one_m) ** 2


def eval_V(u, v, params: MapParams):
    """Exact one-step amplitude V(u, v); positive where defined.

    V(u,v) = [w*(1-c*u)^2/(1+g0*u)^2 + S/(1-(u+v))^2]^(-1/2)
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    sb = sigma_bar(params)
    g1 = 1.0 + params.gamma0 * u
    pole = 1.0 - (u + v)
    if np.any(pole == 0.0):
        raise ValueError("V undefined: u + v = 1 (pole)")
    if np.any(g1 == 0.0):
        raise ValueError("V undefined: 1 + gamma0*u = 0")
    inner = params.omega * (1.0 - params.c * u) ** 2 / g1**2 + sb / pole**2
    if np.any(inner <= 0.0):
        raise ValueError("V undefined: nonpositive radicand")
    out = 1.0 / np.sqrt(inner)
    return float(out) if out.ndim == 0 else out


def eval_F(phi, eta, params: MapParams):
    """Exact one-step map F(phi, eta) = (V - 1) / (gamma0 + c*V)."""
    V = eval_V(phi, eta, params)
    denom = params.gamma0 + params.c * np.asarray(V)
    if np.any(denom == 0.0):
        raise ValueError("F undefined: gamma0 + c*V = 0")
    out = (np.asarray(V) - 1.0) / denom
    return float(out) if out.ndim == 0 else out


def eval_A(u, params: MapParams):
    """First-order amplitude A(u); equals V(u, 0). Defined for u != 1."""
    u = np.asarray(u, dtype=float)
    if np.any(u == 1.0):
        raise ValueError("A undefined at u = 1")
    sb = sigma_bar(params)
    br = _bracket(u, params, sb)
    if np.any(br <= 0.0):
        raise ValueError("A undefined: nonpositive radicand")
    out = (1.0 + params.gamma0 * u) / np.sqrt(br)
    return float(out) if out.ndim == 0 else out


def eval_B(u, params: MapParams):
    """First-order noise gain B(u). Defined for u != 1."""
    u = np.asarray(u, dtype=float)
    if np.any(u == 1.0):
        raise ValueError("B undefined at u = 1")
    sb = sigma_bar(params)
    br = _bracket(u, params, sb)
    g1 = 1.0 + params.gamma0 * u
    out = sb * (g1 * g1 * g1) / ((1.0 - u) * br * np.sqrt(br))
    return float(out) if out.ndim == 0 else out


def eval_T(phi, params: MapParams):
    """Deterministic map value, raw formula (A-1)/(gamma0 + c*A) on [0, 1).

    This is the unclipped branch: no geometry restriction is applied, so the
    value tends to -1/gamma0 as phi -> 1-.  Use :func:`extend_map` for the
    domain-restricted evaluator on [-Gamma, b].
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0.0) or np.any(phi >= 1.0):
        raise ValueError("raw T formula is evaluated on [0, 1); "
                         "use extend_map() for the left extension")
    A = np.asarray(eval_A(phi, params))
    out = (A - 1.0) / (params.gamma0 + params.c * A)
    return float(out) if out.ndim == 0 else out


def eval_T_prime(phi, params: MapParams):
    """Closed-form derivative of the raw map on [0, 1).

    T'(u) = A'(u) * (gamma0 + c) / (gamma0 + c*A(u))^2 with
    A' = g0/sqrt(D) - (1+g0*u)*D'/(2*D^(3/2)), D the common radicand.
    """
    u = np.asarray(phi, dtype=float)
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise ValueError("raw T' formula is evaluated on [0, 1)")
    p = params
    sb = sigma_bar(p)
    one_m = 1.0 - u
    g1 = 1.0 + p.gamma0 * u
    D = p.omega * (1.0 - p.c * u) ** 2 + sb * (g1 / one_m) ** 2
    Dp = (-2.0 * p.c * p.omega * (1.0 - p.c * u)
          + sb * (2.0 * p.gamma0 * g1 / one_m**2 + 2.0 * g1**2 / one_m**3))
    sqD = np.sqrt(D)
    Ap = p.gamma0 / sqD - g1 * Dp / (2.0 * D * sqD)
    A = g1 / sqD
    out = Ap * (p.gamma0 + p.c) / (p.gamma0 + p.c * A) ** 2
    return float(out) if out.ndim == 0 else out


def eval_sigma_n(phi, params: MapParams, n, mode: str = "paper"):
    """State-dependent noise amplitude sigma_n(phi) for |phi| < 1.

    mode "paper"        sqrt(1-phi^2)*(g0+c)*B(phi) / (sqrt(n)*(g0+c*A(phi)))
    mode "first-order"  same with the denominator squared
    mode "exact-F"      no closed amplitude exists; iterate eval_F instead
    """
    if mode not in SIGMA_MODES:
        raise ValueError(f"unknown sigma mode {mode!r}")
    if mode == "exact-F":
        raise ValueError("exact-F mode has no closed sigma_n; use eval_F")
    phi = np.asarray(phi, dtype=float)
    if np.any(np.abs(phi) >= 1.0):
        raise ValueError("sigma_n requires |phi| < 1")
    A = np.asarray(eval_A(phi, params))
    B = np.asarray(eval_B(phi, params))
    denom = params.gamma0 + params.c * A
    out = np.sqrt(1.0 - phi**2) * (params.gamma0 + params.c) * B \
        / (math.sqrt(n) * denom)
    if mode == "first-order":
        out = out / denom
    return float(out) if out.ndim == 0 else out


def _bisect(f, lo, hi, tol):
    """Plain bisection on a sign change; assumes f(lo) and f(hi) differ in sign."""
    flo = f(lo)
    for _ in range(200):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (flo < 0.0) == (fm < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_geometry(params: MapParams, tol: float = 1e-12) -> MapGeometry:
    """Locate the critical point, its image and the zero crossing b.

    A 10^4-point pre-scan brackets the single sign change of T' (the map must
    be unimodal) and the sign change of T right of the maximum; both are then
    polished by bisection down to ``tol``.  Raises :class:`GeometryError`
    naming the violated invariant when the construction fails; locating b is
    the numerically delicate step and fails loudly rather than silently.
    """
    grid = np.linspace(1e-9, 1.0 - 1e-9, _PRESCAN + 1)
    tp = eval_T_prime(grid, params)
    flips = np.nonzero((tp[:-1] > 0.0) & (tp[1:] <= 0.0))[0]
    if len(flips) == 0:
        raise GeometryError("no-critical-point", "T' never changes sign on (0,1)")
    if len(flips) > 1 or np.any((tp[:-1] < 0.0) & (tp[1:] >= 0.0)):
        raise GeometryError("not-unimodal",
                            f"T' changes sign {len(flips)} times on (0,1)")
    i = flips[0]
    crit = _bisect(lambda u: eval_T_prime(u, params), grid[i], grid[i + 1], tol)
    delta = eval_T(crit, params)

    tgrid = np.linspace(crit, 1.0 - 1e-9, _PRESCAN + 1)
    tv = eval_T(tgrid, params)
    cross = np.nonzero((tv[:-1] > 0.0) & (tv[1:] <= 0.0))[0]
    if len(cross) == 0:
        raise GeometryError("no-zero-crossing",
                            "T has no zero right of the maximum below 1")
    j = cross[0]
    b = _bisect(lambda u: eval_T(u, params), tgrid[j], tgrid[j + 1], tol)

    if not delta < b:
        raise GeometryError("delta>=b", f"delta={delta!r} b={b!r}")
    if not b < 1.0:
        raise GeometryError("b>=1", f"b={b!r}")
    core_lo = eval_T(delta, params)
    gap = b - delta
    return MapGeometry(crit=crit, delta=delta, b=b, gamma_gap=gap,
                       core_lo=core_lo, core_hi=delta,
                       domain_lo=-gap, domain_hi=b,
                       core_contained=bool(core_lo < crit < delta))


def iterate_raw(x0: float, steps: int, params: MapParams,
                guard: float = 2.0) -> np.ndarray:
    """Iterate the raw formula with no domain restriction or extension.

    Bifurcation diagrams sweep parameter ranges where the restricted
    geometry need not exist (the maximum may exceed 1); the published
    diagrams iterate the bare formula, which this reproduces.  Raises
    ValueError when the orbit reaches the pole at 1 or leaves
    [-guard, guard].
    """
    p = params
    sb = sigma_bar(p)
    u = float(x0)
    out = np.empty(steps)
    for t in range(steps):
        if abs(1.0 - u) < 1e-9 or abs(u) > guard:
            raise ValueError(
                f"raw orbit left the tractable range at step {t} (phi={u!r})")
        one_m = 1.0 - u
        g1 = 1.0 + p.gamma0 * u
        tmc = 1.0 - p.c * u
        ratio = g1 / one_m
        br = p.omega * (tmc * tmc) + sb * (ratio * ratio)
        a = g1 / math.sqrt(br)
        den = p.gamma0 + p.c * a
        if abs(den) < 1e-12:
            raise ValueError(f"denominator pole at step {t} (phi={u!r})")
        u = (a - 1.0) / den
        out[t] = u
    return out


class ExtendedMap:
    """Domain-restricted map on [-Gamma, b] with the left extension.

    On [0, b] this is the raw formula.  On [-Gamma, 0) a quadratic arc

        q(phi) = T(0) + k * T'(0+) * phi * (phi/Gamma - 1)

    is attached: continuous at 0, decreasing, positive, with q(-Gamma) <
    delta.  The slope magnitude at 0- matches T'(0+) when k = 1; k is shrunk
    only if the arc would overshoot delta at -Gamma.  A reflected linear
    profile is kept as fallback when no admissible k exists.
    """

    def __init__(self, params: MapParams, geometry: MapGeometry):
        self.params = params
        self.geometry = geometry
        self.t0 = eval_T(0.0, params)
        self.tp0 = eval_T_prime(0.0, params)
        if self.tp0 <= 0.0:
            raise GeometryError("nonincreasing-at-0", f"T'(0+)={self.tp0!r}")
        gap = geometry.gamma_gap
        headroom = geometry.delta - self.t0
        if headroom <= 0.0:
            raise GeometryError("extension", "T(0) >= delta, no room to extend")
        k = min(1.0, 0.9 * headroom / (2.0 * gap * self.tp0))
        self.kind = "quadratic"
        self.k = k
        if not self._left(-gap) < geometry.delta:
            # linear reflected profile as fallback
            self.kind = "linear"
            self.k = 1.0
            if not self.t0 + gap * self.tp0 < geometry.delta:
                raise GeometryError("extension", "no admissible left extension")

    def _left(self, phi):
        if self.kind == "quadratic":
            return self.t0 + self.k * self.tp0 * phi * (phi / self.geometry.gamma_gap - 1.0)
        return self.t0 - self.tp0 * phi

    def _left_prime(self, phi):
        if self.kind == "quadratic":
            return self.k * self.tp0 * (2.0 * phi / self.geometry.gamma_gap - 1.0)
        return -self.tp0 * np.ones_like(np.asarray(phi, dtype=float))

    def _check_domain(self, phi):
        g = self.geometry
        if np.any(phi < g.domain_lo) or np.any(phi > g.domain_hi):
            raise ValueError(f"phi outside extended domain "
                             f"[{g.domain_lo!r}, {g.domain_hi!r}]")

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        self._check_domain(phi)
        right = eval_T(np.where(phi >= 0.0, phi, 0.0), self.params)
        left = self._left(phi)
        out = np.where(phi >= 0.0, right, left)
        return float(out) if out.ndim == 0 else out

    def derivative(self, phi):
        """dT/dphi; at the junction 0 the right derivative is returned."""
        phi = np.asarray(phi, dtype=float)
        self._check_domain(phi)
        right = eval_T_prime(np.where(phi >= 0.0, phi, 0.0), self.params)
        left = self._left_prime(phi)
        out = np.where(phi >= 0.0, right, left)
        return float(out) if out.ndim == 0 else out


def extend_map(params: MapParams, geometry: MapGeometry) -> ExtendedMap:
    """Build the extended evaluator on [-Gamma, b]."""
    return ExtendedMap(params, geometry)


def schwarzian_fn(f, x, h: float = 1e-4, tiny: float = 1e-12):
    """Schwarzian derivative f'''/f' - 1.5*(f''/f')^2 by 5-point stencils.

    Returns NaN where |f'| < tiny (the critical point); diagnostic use only.
    """
    x = np.asarray(x, dtype=float)
    fm2, fm1 = f(x - 2 * h), f(x - h)
    f0 = f(x)
    fp1, fp2 = f(x + h), f(x + 2 * h)
    d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)
    d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h)
    d3 = (-fm2 + 2.0 * fm1 - 2.0 * fp1 + fp2) / (2.0 * h**3)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.abs(d1) < tiny, np.nan,
                       d3 / d1 - 1.5 * (d2 / d1) ** 2)
    return float(out) if out.ndim == 0 else out


def schwarzian(phi, params: MapParams, h: float = 1e-4):
    """Schwarzian derivative of the raw map; NaN at the critical point."""
    return schwarzian_fn(lambda u: eval_T(u, params), phi, h=h)
