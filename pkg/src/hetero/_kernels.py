"""Hot chain-iteration kernels: numba-compiled loops plus a numpy fallback.

Both implementations execute the same float64 operation sequence, so the
produced trajectories are bitwise identical whichever backend is active.
The fallback uses a plain scalar loop for single orbits and lane-vectorized
numpy stepping for ensembles; per-lane arithmetic matches the scalar loop.

Kernel arguments are plain floats/ints so the numba signatures stay simple:

    mode        0 deterministic, 1 paper, 2 first-order, 3 exact-F
    ext_linear  1 when the left extension is the reflected linear profile
    lo, hi      extended-domain bounds; stepping outside aborts with the
                offending (orbit, step) pair
"""

import math

import numpy as np

from ._backend import NUMBA_ENABLED

MODE_IDS = {
    "deterministic": 0,
    "random-paper": 1,
    "random-first-order": 2,
    "random-exact-F": 3,
}


def _ensemble_numpy(out, phi0s, draws, gamma0, c, omega, sigbar, sqrt_n,
                    mode, t0, tp0, ktp0, gam, ext_linear, lo, hi):
    count, length = out.shape
    if count == 1:
        return _orbit_scalar(out, phi0s, draws, gamma0, c, omega, sigbar,
                             sqrt_n, mode, t0, tp0, ktp0, gam, ext_linear,
                             lo, hi)
    u = phi0s.astype(float).copy()
    for t in range(length):
        one_m = 1.0 - u
        g1 = 1.0 + gamma0 * u
        tmc = 1.0 - c * u
        if mode == 3:
            eta = draws[:, t] * np.sqrt(1.0 - u * u) / sqrt_n
            pole = 1.0 - (u + eta)
            inner = omega * (tmc * tmc) / (g1 * g1) + sigbar / (pole * pole)
            v = 1.0 / np.sqrt(inner)
            nxt = (v - 1.0) / (gamma0 + c * v)
        else:
            ratio = g1 / one_m
            br = omega * (tmc * tmc) + sigbar * (ratio * ratio)
            sq = np.sqrt(br)
            a = g1 / sq
            tfor = (a - 1.0) / (gamma0 + c * a)
            if ext_linear:
                text = t0 - tp0 * u
            else:
                text = t0 + ktp0 * u * (u / gam - 1.0)
            tval = np.where(u >= 0.0, tfor, text)
            if mode == 0:
                nxt = tval
            else:
                bb = sigbar * (g1 * g1 * g1) / (one_m * br * sq)
                den = gamma0 + c * a
                s = np.sqrt(1.0 - u * u) * (gamma0 + c) * bb / (sqrt_n * den)
                if mode == 2:
                    s = s / den
                nxt = tval + s * draws[:, t]
        bad = (nxt < lo) | (nxt > hi)
        if bad.any():
            return int(np.argmax(bad)), t
        out[:, t] = nxt
        u = nxt
    return -1, -1


def _orbit_scalar(out, phi0s, draws, gamma0, c, omega, sigbar, sqrt_n,
                  mode, t0, tp0, ktp0, gam, ext_linear, lo, hi):
    length = out.shape[1]
    u = float(phi0s[0])
    row = out[0]
    d = draws[0]
    for t in range(length):
        one_m = 1.0 - u
        g1 = 1.0 + gamma0 * u
        tmc = 1.0 - c * u
        if mode == 3:
            eta = d[t] * math.sqrt(1.0 - u * u) / sqrt_n
            pole = 1.0 - (u + eta)
            inner = omega * (tmc * tmc) / (g1 * g1) + sigbar / (pole * pole)
            v = 1.0 / math.sqrt(inner)
            nxt = (v - 1.0) / (gamma0 + c * v)
        else:
            ratio = g1 / one_m
            br = omega * (tmc * tmc) + sigbar * (ratio * ratio)
            sq = math.sqrt(br)
            a = g1 / sq
            if u >= 0.0:
                tval = (a - 1.0) / (gamma0 + c * a)
            elif ext_linear:
                tval = t0 - tp0 * u
            else:
                tval = t0 + ktp0 * u * (u / gam - 1.0)
            if mode == 0:
                nxt = tval
            else:
                bb = sigbar * (g1 * g1 * g1) / (one_m * br * sq)
                den = gamma0 + c * a
                s = math.sqrt(1.0 - u * u) * (gamma0 + c) * bb / (sqrt_n * den)
                if mode == 2:
                    s = s / den
                nxt = tval + s * d[t]
        if not (lo <= nxt <= hi):
            return 0, t
        row[t] = nxt
        u = nxt
    return -1, -1


if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _ensemble_numba(out, phi0s, draws, gamma0, c, omega, sigbar, sqrt_n,
                        mode, t0, tp0, ktp0, gam, ext_linear, lo, hi):
        count, length = out.shape
        for i in range(count):
            u = phi0s[i]
            for t in range(length):
                one_m = 1.0 - u
                g1 = 1.0 + gamma0 * u
                tmc = 1.0 - c * u
                if mode == 3:
                    eta = draws[i, t] * math.sqrt(1.0 - u * u) / sqrt_n
                    pole = 1.0 - (u + eta)
                    inner = omega * (tmc * tmc) / (g1 * g1) \
                        + sigbar / (pole * pole)
                    v = 1.0 / math.sqrt(inner)
                    nxt = (v - 1.0) / (gamma0 + c * v)
                else:
                    ratio = g1 / one_m
                    br = omega * (tmc * tmc) + sigbar * (ratio * ratio)
                    sq = math.sqrt(br)
                    a = g1 / sq
                    if u >= 0.0:
                        tval = (a - 1.0) / (gamma0 + c * a)
                    elif ext_linear:
                        tval = t0 - tp0 * u
                    else:
                        tval = t0 + ktp0 * u * (u / gam - 1.0)
                    if mode == 0:
                        nxt = tval
                    else:
                        bb = sigbar * (g1 * g1 * g1) / (one_m * br * sq)
                        den = gamma0 + c * a
                        s = math.sqrt(1.0 - u * u) * (gamma0 + c) * bb \
                            / (sqrt_n * den)
                        if mode == 2:
                            s = s / den
                        nxt = tval + s * draws[i, t]
                if not (lo <= nxt <= hi):
                    return i, t
                out[i, t] = nxt
                u = nxt
        return -1, -1

    iterate_ensemble = _ensemble_numba
else:
    iterate_ensemble = _ensemble_numpy


def splitmix64(x: int) -> int:
    """One splitmix64 mixing step; the published per-orbit seed derivation."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def orbit_seed(master_seed: int, orbit_index: int) -> int:
    """64-bit per-orbit seed: splitmix64(splitmix64(master) ^ index-mix).

    Deterministic in (master_seed, orbit_index) only, so results cannot
    depend on worker scheduling and streams are never reused.
    """
    mixed = splitmix64(master_seed & 0xFFFFFFFFFFFFFFFF)
    return splitmix64(mixed ^ splitmix64(orbit_index & 0xFFFFFFFFFFFFFFFF))
