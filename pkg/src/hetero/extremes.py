"""Extreme-value experiments: boundary levels, block maxima, extremal index.

Boundary levels u_t solve  mu(B(z, e^{-u_t})) = tau / t  on an interpolated
cumulative histogram of the stationary measure.  Block maxima of the
observable  phi(x) = -log dist(x, z)  over disjoint segments of one long
stationary orbit estimate P(M_t <= u_t), whose limit is exp(-tau) with
extremal index one: the state-dependent noise breaks any periodicity of the
target, so returns to the rare set do not cluster.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import maps, noise
from .errors import HeteroError
from .orbits import DensityEstimate

DEFAULT_K_MAX = 20


class EvtError(HeteroError):
    """Rare-set calibration failed (resolution or positivity)."""


@dataclass(frozen=True)
class EvtConfig:
    """Target point, tail mass parameter, horizons and the density handle."""

    z: float
    tau: float
    t_grid: tuple
    n: float
    seed: int
    density: DensityEstimate
    params: maps.MapParams
    spec: noise.NoiseSpec
    geometry: maps.MapGeometry = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if len(self.t_grid) == 0:
            raise ValueError("empty t grid")
        g = self.geometry or maps.find_geometry(self.params)
        object.__setattr__(self, "geometry", g)
        if not g.core_lo <= self.z <= g.core_hi:
            raise ValueError(
                f"target z={self.z} outside the dynamical core "
                f"[{g.core_lo!r}, {g.core_hi!r}]")


def _cumulative(density: DensityEstimate):
    cum = np.concatenate(([0.0], np.cumsum(density.masses)))
    return density.edges, cum


def ball_mass(density: DensityEstimate, z: float, radius: float) -> float:
    """mu(B(z, radius)) by piecewise-linear interpolation of the cumulative."""
    edges, cum = _cumulative(density)
    hi = float(np.interp(z + radius, edges, cum))
    lo = float(np.interp(z - radius, edges, cum))
    return hi - lo


def boundary_levels(cfg: EvtConfig) -> np.ndarray:
    """u_t with mu(B(z, e^{-u_t})) = tau / t for every t in the grid.

    Solved by monotone bisection on the radius.  Refuses when the histogram
    cannot resolve the smallest target mass (bin width above the smallest
    radius), stating the bin count that would be needed; also enforces the
    positivity of the density on every emitted rare set.
    """
    density = cfg.density
    edges = density.edges
    bin_w = float(edges[1] - edges[0])
    span = float(edges[-1] - edges[0])
    out = np.empty(len(cfg.t_grid))
    for i, t in enumerate(cfg.t_grid):
        target = cfg.tau / t
        lo, hi = 0.0, span
        if ball_mass(density, cfg.z, hi) < target:
            raise EvtError(f"target mass {target:.3e} exceeds total mass "
                           f"around z={cfg.z}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if ball_mass(density, cfg.z, mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16 * span:
                break
        radius = 0.5 * (lo + hi)
        if radius < bin_w:
            need = math.ceil(span / radius)
            raise EvtError(
                f"bin width {bin_w:.2e} exceeds the radius {radius:.2e} "
                f"needed at t={t}; rebuild the density with >= {need} bins")
        # (E1): the density must stay bounded away from zero on the rare set
        touch = (edges[1:] > cfg.z - radius) & (edges[:-1] < cfg.z + radius)
        if np.any(density.masses[touch] <= 0.0):
            raise EvtError(f"density vanishes on B(z, {radius:.2e}) at t={t}; "
                           "(E1) fails for this target")
        out[i] = -math.log(radius)
    if np.any(np.diff(out) <= 0):
        raise EvtError("boundary levels are not increasing in t")
    return out


@dataclass(frozen=True)
class BlockMaximaRow:
    t: int
    u_t: float
    p_hat: float
    stderr: float
    blocks: int


def block_maxima_prob(cfg: EvtConfig, states: np.ndarray,
                      u: np.ndarray = None) -> list:
    """P(M_t <= u_t) per horizon from disjoint blocks of one long orbit.

    The event is evaluated both through the observable maxima and through
    ball visits; the two indicator vectors must be identical, and the
    binomial standard error of the block fraction is attached.
    """
    if u is None:
        u = boundary_levels(cfg)
    states = np.asarray(states, dtype=float)
    dist = np.abs(states - cfg.z)
    rows = []
    for t, u_t in zip(cfg.t_grid, u):
        nb = states.size // t
        if nb == 0:
            raise EvtError(f"orbit too short for blocks of length t={t}")
        dmin = dist[:nb * t].reshape(nb, t).min(axis=1)
        via_phi = -np.log(dmin) <= u_t
        via_ball = dmin >= math.exp(-u_t)
        if not np.array_equal(via_phi, via_ball):
            raise EvtError("observable-maxima and ball-visit indicators "
                           "disagree; inconsistent thresholding")
        p = float(np.mean(via_ball))
        se = math.sqrt(max(p * (1.0 - p), 1e-300) / nb)
        rows.append(BlockMaximaRow(t=int(t), u_t=float(u_t), p_hat=p,
                                   stderr=se, blocks=nb))
    return rows


@dataclass(frozen=True)
class ExtremalIndexResult:
    theta: float
    q_hat: np.ndarray
    visits: int
    t: int
    radius: float


def extremal_index(cfg: EvtConfig, states: np.ndarray,
                   k_max: int = DEFAULT_K_MAX, t: int = None,
                   u: np.ndarray = None) -> ExtremalIndexResult:
    """q_hat_{k,t} return-time table and theta = 1 - sum_k q_hat_k.

    q_hat_k is the fraction of rare-set visits whose next visit happens
    exactly k+1 steps later; with gaps between consecutive visit positions
    this is the count of gaps equal to k+1 over the visit count.
    """
    if t is None:
        t = max(cfg.t_grid)
    if u is None:
        u = boundary_levels(cfg)
    u_t = float(u[list(cfg.t_grid).index(t)])
    radius = math.exp(-u_t)
    states = np.asarray(states, dtype=float)
    pos = np.flatnonzero(np.abs(states - cfg.z) < radius)
    if pos.size < 2:
        raise EvtError(f"only {pos.size} rare-set visits at t={t}; "
                       "orbit too short for the extremal index")
    gaps = np.diff(pos)
    q_hat = np.array([
        float(np.count_nonzero(gaps == k + 1)) / pos.size
        for k in range(k_max + 1)
    ])
    return ExtremalIndexResult(theta=float(1.0 - q_hat.sum()), q_hat=q_hat,
                               visits=int(pos.size), t=int(t), radius=radius)


@dataclass(frozen=True)
class PoissonRow:
    s: float
    window: int
    counts: np.ndarray        # empirical pmf over k = 0..len-1
    poisson_pmf: np.ndarray
    chi2: float
    mean: float
    windows: int


def poisson_counts(cfg: EvtConfig, s_list, states: np.ndarray,
                   t: int = None, u: np.ndarray = None) -> list:
    """Visit-count distributions over windows of floor(s / mu(B_t)) steps.

    Compared against the Poisson(s) pmf s^k e^{-s} / k!; windows of zero
    length (s below the ball mass) are excluded as degenerate.
    """
    if t is None:
        t = max(cfg.t_grid)
    if u is None:
        u = boundary_levels(cfg)
    u_t = float(u[list(cfg.t_grid).index(t)])
    radius = math.exp(-u_t)
    mass = ball_mass(cfg.density, cfg.z, radius)
    states = np.asarray(states, dtype=float)
    visit = (np.abs(states - cfg.z) < radius).astype(np.int64)
    rows = []
    for s in s_list:
        w = int(s / mass)
        if w < 1:
            continue  # degenerate window, N identically zero
        nw = states.size // w
        if nw < 10:
            raise EvtError(f"orbit supports only {nw} windows at s={s}")
        counts = visit[:nw * w].reshape(nw, w).sum(axis=1)
        k_hi = int(counts.max()) + 1
        emp = np.bincount(counts, minlength=k_hi) / nw
        ks = np.arange(k_hi)
        pmf = np.exp(ks * math.log(s) - s
                     - np.array([math.lgamma(k + 1.0) for k in ks]))
        rel = pmf > 1e-12
        chi2 = float(np.sum((emp[rel] - pmf[rel]) ** 2 / pmf[rel]))
        rows.append(PoissonRow(s=float(s), window=w, counts=emp,
                               poisson_pmf=pmf, chi2=chi2,
                               mean=float(counts.mean()), windows=int(nw)))
    if not rows:
        raise EvtError("all requested s values give zero-length windows")
    return rows
