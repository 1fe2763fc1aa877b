"""Deterministic and random orbits, ensembles, and empirical measures.

Owner of seeding: every orbit gets an independent PCG64 stream whose seed is
derived from the master seed and the orbit index by a published splitmix64
mix (:func:`hetero._kernels.orbit_seed`).  Per-orbit streams are consumed in
a fixed layout -- one uniform for the initial condition when the x0 rule is
random, then the noise draws in time order -- so results never depend on
worker count or scheduling.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import maps, noise
from ._backend import threads
from ._kernels import MODE_IDS, _orbit_scalar, iterate_ensemble, orbit_seed
from .errors import DomainEscape

MODES = tuple(MODE_IDS)

DEFAULT_BURN_IN = 1_000
DEFAULT_BINS = 1_000


@dataclass(frozen=True)
class Chain:
    """A fully specified chain: map, geometry, extension, noise, mode."""

    params: maps.MapParams
    spec: noise.NoiseSpec
    mode: str = "random-paper"
    geometry: maps.MapGeometry = None
    ext: maps.ExtendedMap = None

    def __post_init__(self):
        if self.mode not in MODE_IDS:
            raise ValueError(f"unknown mode {self.mode!r}; pick from {MODES}")
        if self.geometry is None:
            object.__setattr__(self, "geometry", maps.find_geometry(self.params))
        if self.ext is None:
            object.__setattr__(self, "ext",
                               maps.extend_map(self.params, self.geometry))

    def kernel_args(self):
        p, g, e = self.params, self.geometry, self.ext
        return (p.gamma0, p.c, p.omega, maps.sigma_bar(p),
                np.sqrt(self.spec.n), MODE_IDS[self.mode],
                e.t0, e.tp0, e.k * e.tp0, g.gamma_gap,
                1 if e.kind == "linear" else 0,
                g.domain_lo, g.domain_hi)

    def support(self):
        """Stationary support interval I_Gamma = [T(1-Gamma/2)/2, 1-Gamma/2]."""
        g = self.geometry
        x_ref = 1.0 - g.gamma_gap / 2.0
        return 0.5 * maps.eval_T(x_ref, self.params), x_ref


@dataclass(frozen=True)
class Trajectory:
    """A seeded finite orbit; states[0] is the initial condition."""

    states: np.ndarray
    seed: int
    mode: str
    params: maps.MapParams
    spec: noise.NoiseSpec
    orbit_index: int = 0


@dataclass(frozen=True)
class DensityEstimate:
    """Binned probability masses over a uniform grid; masses sum to one."""

    edges: np.ndarray
    masses: np.ndarray
    count: int
    note: str = ""
    outside: int = 0

    def __post_init__(self):
        if len(self.masses) != len(self.edges) - 1:
            raise ValueError("edges/masses length mismatch")

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self):
        return np.diff(self.edges)

    def mean_of(self, fn):
        """Integral of fn against the estimate (midpoint rule)."""
        return float(np.sum(fn(self.centers) * self.masses))

    def l1_distance(self, other: "DensityEstimate") -> float:
        """L1 distance of the two binned measures on a common grid."""
        if len(self.edges) != len(other.edges) or \
                not np.allclose(self.edges, other.edges):
            raise ValueError("density estimates live on different grids")
        return float(np.sum(np.abs(self.masses - other.masses)))


def _draws_for(chain: Chain, rng: np.random.Generator, length: int):
    if chain.mode == "deterministic":
        return np.zeros(length)
    return noise.sample_noise(chain.spec, rng, size=length)


def _resolve_x0(x0_rule, chain: Chain, rng: np.random.Generator) -> float:
    if isinstance(x0_rule, str):
        if x0_rule != "uniform-core":
            raise ValueError(f"unknown x0 rule {x0_rule!r}")
        g = chain.geometry
        return g.core_lo + (g.core_hi - g.core_lo) * rng.random()
    x0 = float(x0_rule)
    g = chain.geometry
    if not g.domain_lo <= x0 <= g.domain_hi:
        raise ValueError(f"x0={x0} outside extended domain")
    return x0


def _escape_state(chain: Chain, x0: float, draws: np.ndarray, step_idx: int):
    # replay without bounds to recover the offending value
    out = np.empty((1, step_idx + 1))
    args = chain.kernel_args()
    _orbit_scalar(out, np.array([x0]), draws[None, :step_idx + 1],
                  *args[:-2], -np.inf, np.inf)
    return float(out[0, step_idx])


def step(phi: float, eta: float, mode: str, params: maps.MapParams,
         spec: noise.NoiseSpec, geometry: maps.MapGeometry = None) -> float:
    """One chain transition with an explicit innovation eta.

    paper / first-order modes: T(phi) + sigma_n(phi) * eta.
    exact-F mode: F(phi, eta * sqrt((1 - phi^2) / n)).
    Raises :class:`DomainEscape` when the image leaves [-Gamma, b].
    """
    chain = Chain(params=params, spec=spec, mode=mode, geometry=geometry)
    out = np.empty((1, 1))
    esc = iterate_ensemble(out, np.array([float(phi)]),
                           np.array([[float(eta)]]), *chain.kernel_args())
    if esc[0] >= 0:
        bad = _escape_state(chain, float(phi), np.array([float(eta)]), 0)
        raise DomainEscape(bad, 0)
    return float(out[0, 0])


def random_orbit(x0, length: int, seed: int, mode: str,
                 params: maps.MapParams, spec: noise.NoiseSpec,
                 geometry: maps.MapGeometry = None,
                 orbit_index: int = 0) -> Trajectory:
    """Iterate the chain ``length`` times from x0 with fresh i.i.d. draws.

    Burn-in is the caller's business.  The per-run stream is
    PCG64(orbit_seed(seed, orbit_index)); identical inputs give bitwise
    identical trajectories.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    chain = Chain(params=params, spec=spec, mode=mode, geometry=geometry)
    rng = np.random.Generator(np.random.PCG64(orbit_seed(seed, orbit_index)))
    x0 = _resolve_x0(x0, chain, rng)
    draws = _draws_for(chain, rng, length)
    out = np.empty((1, length))
    esc = iterate_ensemble(out, np.array([x0]), draws[None, :],
                           *chain.kernel_args())
    if esc[0] >= 0:
        bad = _escape_state(chain, x0, draws, esc[1])
        raise DomainEscape(bad, esc[1])
    states = np.concatenate(([x0], out[0]))
    return Trajectory(states=states, seed=seed, mode=mode, params=params,
                      spec=spec, orbit_index=orbit_index)


def _run_chunk(chain: Chain, x0_rule, master_seed: int, i0: int,
               n_orbits: int, length: int):
    x0s = np.empty(n_orbits)
    draws = np.empty((n_orbits, length))
    for j in range(n_orbits):
        rng = np.random.Generator(
            np.random.PCG64(orbit_seed(master_seed, i0 + j)))
        x0s[j] = _resolve_x0(x0_rule, chain, rng)
        draws[j] = _draws_for(chain, rng, length)
    out = np.empty((n_orbits, length))
    esc = iterate_ensemble(out, x0s, draws, *chain.kernel_args())
    if esc[0] >= 0:
        bad = _escape_state(chain, x0s[esc[0]], draws[esc[0]], esc[1])
        raise DomainEscape(bad, esc[1])
    return x0s, out


def iter_ensemble(x0_rule, count: int, length: int, master_seed: int,
                  mode: str, params: maps.MapParams, spec: noise.NoiseSpec,
                  geometry: maps.MapGeometry = None, chunk_orbits: int = None):
    """Yield (first_index, x0s, states) chunks of an ensemble in index order.

    The reduction any consumer performs over chunks sees orbits in a fixed
    order regardless of HETERO_THREADS, so pooled statistics are bitwise
    stable.  Chunk size defaults to roughly 32 MB of states.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    chain = Chain(params=params, spec=spec, mode=mode, geometry=geometry)
    if chunk_orbits is None:
        chunk_orbits = max(1, min(count, int(4_000_000 / max(length, 1))))
    starts = list(range(0, count, chunk_orbits))
    n_workers = threads()
    if n_workers == 1 or len(starts) == 1:
        for i0 in starts:
            n = min(chunk_orbits, count - i0)
            x0s, out = _run_chunk(chain, x0_rule, master_seed, i0, n, length)
            yield i0, x0s, out
        return
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [
            pool.submit(_run_chunk, chain, x0_rule, master_seed, i0,
                        min(chunk_orbits, count - i0), length)
            for i0 in starts
        ]
        for i0, fut in zip(starts, futures):
            x0s, out = fut.result()
            yield i0, x0s, out


def ensemble(x0_rule, count: int, length: int, master_seed: int, mode: str,
             params: maps.MapParams, spec: noise.NoiseSpec,
             geometry: maps.MapGeometry = None) -> list:
    """Materialized ensemble as a list of Trajectory (modest sizes only)."""
    result = []
    for i0, x0s, out in iter_ensemble(x0_rule, count, length, master_seed,
                                      mode, params, spec, geometry):
        for j in range(out.shape[0]):
            states = np.concatenate(([x0s[j]], out[j]))
            result.append(Trajectory(states=states, seed=master_seed,
                                     mode=mode, params=params, spec=spec,
                                     orbit_index=i0 + j))
    return result


def stream_orbit(x0, total: int, seed: int, mode: str,
                 params: maps.MapParams, spec: noise.NoiseSpec,
                 geometry: maps.MapGeometry = None, chunk: int = 1_000_000,
                 orbit_index: int = 0):
    """Yield successive state chunks of one long orbit (constant memory).

    Draw consumption is identical to :func:`random_orbit` with the same
    total length, so the concatenated chunks reproduce it bitwise.
    """
    chain = Chain(params=params, spec=spec, mode=mode, geometry=geometry)
    rng = np.random.Generator(np.random.PCG64(orbit_seed(seed, orbit_index)))
    x = _resolve_x0(x0, chain, rng)
    done = 0
    out = np.empty((1, chunk))
    while done < total:
        n = min(chunk, total - done)
        draws = _draws_for(chain, rng, n)
        view = out[:, :n]
        esc = iterate_ensemble(view, np.array([x]), draws[None, :],
                               *chain.kernel_args())
        if esc[0] >= 0:
            bad = _escape_state(chain, x, draws, esc[1])
            raise DomainEscape(bad, done + esc[1])
        yield view[0, :n]
        x = float(view[0, n - 1])
        done += n


def _states_of(source) -> np.ndarray:
    if isinstance(source, Trajectory):
        return source.states
    if isinstance(source, np.ndarray):
        return source
    # ensemble: list of trajectories
    return np.concatenate([_states_of(t)[1:] for t in source])


def empirical_density(source, bins: int = DEFAULT_BINS,
                      burn_in: int = DEFAULT_BURN_IN,
                      interval=None) -> DensityEstimate:
    """Normalized histogram of post-burn-in states.

    ``source`` is a Trajectory, a raw state array, or a list of trajectories
    (burn-in is applied per orbit).  The default interval is the stationary
    support I_Gamma of the source's chain when available.
    """
    if isinstance(source, list):
        data = np.concatenate([t.states[burn_in:] for t in source])
        ref = source[0]
    else:
        ref = source if isinstance(source, Trajectory) else None
        data = _states_of(source)[burn_in:]
    if data.size == 0:
        raise ValueError("no samples left after burn-in")
    if data.size < bins:
        raise ValueError(f"need at least {bins} post-burn-in samples")
    if interval is None:
        if ref is None:
            raise ValueError("interval required for raw state arrays")
        chain = Chain(params=ref.params, spec=ref.spec, mode=ref.mode)
        interval = chain.support()
    lo, hi = float(interval[0]), float(interval[1])
    inside = (data >= lo) & (data <= hi)
    outside = int(data.size - np.count_nonzero(inside))
    counts, edges = np.histogram(data[inside], bins=bins, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        raise ValueError("all samples fall outside the stated interval")
    return DensityEstimate(edges=edges, masses=counts / total,
                           count=int(total),
                           note=f"uniform bins on [{lo!r}, {hi!r}]",
                           outside=outside)
