"""Lyapunov indicators, parameter scans and bifurcation diagrams.

The deterministic indicator is the finite-time Birkhoff average of
log|T'| along an orbit of T; the average exponent of the noisy chain is the
same average along a random orbit (ergodic theorem), cross-checkable against
the quadrature form  integral of log|T'| against the Ulam stationary density.
"""

from dataclasses import dataclass

import numpy as np

from . import maps, noise
from .errors import GeometryError
from .orbits import Chain, DensityEstimate, iter_ensemble, random_orbit

#: samples with |T'| below this threshold are excluded (and counted) --
#: exact critical hits are a measure-zero event but would poison the mean
DERIV_FLOOR = 1e-300

BATCHES = 100


@dataclass(frozen=True)
class LyapunovResult:
    estimate: float
    orbit_length: int
    burn_in: int
    stderr: float
    mode: str
    n: float
    excluded: int
    seed: int = None
    x0: float = None


def _log_deriv(states: np.ndarray, chain: Chain):
    vals = np.abs(chain.ext.derivative(states))
    keep = vals > DERIV_FLOOR
    return np.log(vals[keep]), int(states.size - np.count_nonzero(keep))


def _batch_stderr(samples: np.ndarray, batches: int = BATCHES) -> float:
    if samples.size < 2 * batches:
        return float(np.std(samples, ddof=1) / np.sqrt(samples.size))
    usable = (samples.size // batches) * batches
    means = samples[:usable].reshape(batches, -1).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(batches))


def _orbit_lyapunov(chain: Chain, x0, t: int, burn_in: int,
                    seed: int) -> LyapunovResult:
    tr = random_orbit(x0, burn_in + t, seed, chain.mode, chain.params,
                      chain.spec, geometry=chain.geometry)
    logs, excluded = _log_deriv(tr.states[burn_in + 1:], chain)
    return LyapunovResult(estimate=float(logs.mean()),
                          orbit_length=t, burn_in=burn_in,
                          stderr=_batch_stderr(logs), mode=chain.mode,
                          n=chain.spec.n, excluded=excluded, seed=seed,
                          x0=(float(x0) if not isinstance(x0, str) else None))


def deterministic_lyapunov(x0: float, t: int, params: maps.MapParams,
                           geometry: maps.MapGeometry = None,
                           burn_in: int = 1_000,
                           spec: noise.NoiseSpec = None) -> LyapunovResult:
    """Finite-time Birkhoff average of log|T'| along the deterministic orbit."""
    spec = spec or noise.NoiseSpec(a=1.0, n=1)
    chain = Chain(params=params, spec=spec, mode="deterministic",
                  geometry=geometry)
    return _orbit_lyapunov(chain, x0, t, burn_in, seed=0)


def lyapunov_indicator(x0_grid, t: int, params: maps.MapParams,
                       geometry: maps.MapGeometry = None,
                       burn_in: int = 0) -> np.ndarray:
    """Deterministic indicator over a grid of initial conditions."""
    return np.array([
        deterministic_lyapunov(float(x0), t, params, geometry=geometry,
                               burn_in=burn_in).estimate
        for x0 in np.asarray(x0_grid, dtype=float)
    ])


def average_lyapunov(params: maps.MapParams, spec: noise.NoiseSpec, t: int,
                     seed: int, mode: str = "random-paper", x0=0.38,
                     geometry: maps.MapGeometry = None,
                     burn_in: int = 1_000) -> LyapunovResult:
    """Time average of log|T'| along one random orbit of length t."""
    chain = Chain(params=params, spec=spec, mode=mode, geometry=geometry)
    return _orbit_lyapunov(chain, x0, t, burn_in, seed=seed)


def lyapunov_from_density(density: DensityEstimate, params: maps.MapParams,
                          geometry: maps.MapGeometry = None) -> float:
    """Quadrature form: sum of log|T'| at cell centers against the masses."""
    if geometry is None:
        geometry = maps.find_geometry(params)
    ext = maps.extend_map(params, geometry)
    vals = np.abs(ext.derivative(density.centers))
    keep = (vals > DERIV_FLOOR) & (density.masses > 0)
    return float(np.sum(np.log(vals[keep]) * density.masses[keep])
                 / density.masses[keep].sum())


def lyapunov_scan(c_grid, n_list, base_params: maps.MapParams, t: int,
                  seed: int, x0=0.38, burn_in: int = 1_000,
                  mode: str = "random-paper") -> list:
    """(c, n) -> exponent table; n = None rows are the deterministic map.

    Geometry failures are recorded as flagged gaps and the scan continues,
    mirroring the missing cells of the published scans.  One noise spec per
    c is built at the smallest finite n so the same truncation stays
    admissible across the whole n column and the noise genuinely shrinks
    as n grows.
    """
    rows = []
    finite_n = [n for n in n_list if n is not None]
    for ci, c in enumerate(np.asarray(c_grid, dtype=float)):
        params = base_params.replace(c=float(c))
        try:
            geometry = maps.find_geometry(params)
            spec_a = noise.admissible_a(params, geometry, min(finite_n)) \
                if finite_n else None
        except (GeometryError, noise.NoiseError) as exc:
            for n in n_list:
                rows.append(dict(c=float(c), n=n, estimate=np.nan,
                                 stderr=np.nan, flag=f"geometry:{exc}"))
            continue
        for n in n_list:
            try:
                if n is None:
                    res = deterministic_lyapunov(x0, t, params,
                                                 geometry=geometry,
                                                 burn_in=burn_in)
                else:
                    spec = noise.NoiseSpec(a=spec_a, n=float(n))
                    res = average_lyapunov(params, spec, t,
                                           seed=seed + 7919 * ci, mode=mode,
                                           x0=x0, geometry=geometry,
                                           burn_in=burn_in)
                rows.append(dict(c=float(c), n=n, estimate=res.estimate,
                                 stderr=res.stderr, flag=""))
            except (GeometryError, noise.NoiseError) as exc:
                rows.append(dict(c=float(c), n=n, estimate=np.nan,
                                 stderr=np.nan, flag=f"cell:{exc}"))
    return rows


def bifurcation_diagram(c_grid, base_params: maps.MapParams,
                        transient: int = 1_000, keep: int = 1_000,
                        x0: float = 0.38) -> list:
    """Asymptotic deterministic states per c, as (c, states, flag) rows.

    Iterates the raw formula: the sweep crosses regimes where the
    restricted geometry does not exist (negative-leverage fixed points with
    the maximum above 1) yet the published diagram still shows the
    asymptotic orbit.  Orbits that blow up or hit the pole are flagged gaps.
    """
    rows = []
    for c in np.asarray(c_grid, dtype=float):
        params = base_params.replace(c=float(c))
        flag = ""
        states = None
        # basins can exclude the default start in the negative-leverage
        # regime; retry from a short list before emitting a gap
        for start in (x0, 0.1, 0.6, -0.2, -1.0):
            try:
                states = maps.iterate_raw(start, transient + keep, params)
            except ValueError as exc:
                flag = f"orbit:{exc}"
                continue
            if start != x0:
                flag = f"x0-fallback:{start}"
            else:
                flag = ""
            break
        if states is None:
            rows.append(dict(c=float(c), states=np.empty(0), flag=flag))
        else:
            rows.append(dict(c=float(c), states=states[transient:],
                             flag=flag))
    return rows
