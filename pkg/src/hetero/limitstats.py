"""Birkhoff sums, CLT variance, normality tests, Berry-Esseen, LDP tables.

The three normality tests are implemented natively (no external stats
call): Shapiro-Wilk in Royston's polynomial formulation (valid up to 5000
points; larger samples are sub-sampled with a fixed seed and flagged),
the D'Agostino-Pearson K^2 omnibus test, and Jarque-Bera with the chi^2(2)
tail.  All statistics on a fixed sample are deterministic.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import maps, noise
from .orbits import DensityEstimate, iter_ensemble
from .ulam import UlamOperator, stationary_density

SHAPIRO_MAX_N = 5000


@dataclass(frozen=True)
class Observable:
    """g(x) = sin(x) - m with the centering constant m recorded."""

    m: float
    variant: str

    def __call__(self, x):
        return np.sin(x) - self.m


def make_observable_g(mu_estimate: DensityEstimate,
                      variant: str = "stationary") -> Observable:
    """Centered sine observable.

    variant "stationary": m = integral of sin against the supplied density
    estimate, so the observable is mean-zero under the chain's stationary
    measure (the hypothesis the limit theorems actually need).
    variant "lebesgue": m is the Lebesgue average of sin over the estimate's
    interval, the compatibility choice.
    """
    if variant == "stationary":
        m = mu_estimate.mean_of(np.sin)
    elif variant == "lebesgue":
        lo, hi = mu_estimate.edges[0], mu_estimate.edges[-1]
        m = (np.cos(lo) - np.cos(hi)) / (hi - lo)
    else:
        raise ValueError(f"unknown centering variant {variant!r}")
    return Observable(m=float(m), variant=variant)


@dataclass(frozen=True)
class CltSample:
    """Values of S_t / sqrt(t) over an ensemble at fixed t."""

    values: np.ndarray
    t: int
    count: int
    observable: str
    centering: float
    seed: int

    def __post_init__(self):
        if self.count != len(self.values):
            raise ValueError("count does not match number of values")


def birkhoff_ensemble(g: Observable, t_list, count: int, seed: int,
                      mode: str, params: maps.MapParams,
                      spec: noise.NoiseSpec, x0=0.38,
                      burn_in: int = 1_000,
                      geometry: maps.MapGeometry = None) -> dict:
    """S_t / sqrt(t) samples for every t in t_list over one seeded ensemble.

    Each orbit is burnt in, then partial sums of g along the stationary
    stretch are snapshotted at the requested horizons.  Chunked so the
    20000-orbit pipeline never materializes all states at once.
    """
    t_list = sorted(int(t) for t in t_list)
    if t_list[0] < 1:
        raise ValueError("horizons must be >= 1")
    length = burn_in + t_list[-1]
    out = {t: np.empty(count) for t in t_list}
    for i0, x0s, states in iter_ensemble(x0, count, length, seed, mode,
                                         params, spec, geometry=geometry):
        # W_0 = g(X_0) with X_0 the first post-burn-in state
        gv = g(states[:, burn_in - 1:]) if burn_in > 0 else \
            np.concatenate((g(x0s)[:, None], g(states)), axis=1)
        cs = np.cumsum(gv, axis=1)
        for t in t_list:
            out[t][i0:i0 + states.shape[0]] = cs[:, t - 1] / math.sqrt(t)
    return {
        t: CltSample(values=out[t], t=t, count=count,
                     observable=f"sin-centered[{g.variant}]",
                     centering=g.m, seed=seed)
        for t in t_list
    }


def iota_squared(g: Observable, op: UlamOperator, t_max: int = 400,
                 term_tol: float = 1e-12):
    """Green-Kubo variance from the Ulam adjoint action.

    iota^2 = <g^2>_mu + 2 * sum_t <g * U^t g>_mu, truncated when the terms
    fall below ``term_tol`` or at ``t_max``.  Returns (iota2, info); a
    negative truncation artifact is clipped to zero and reported in info.
    Aborts when the terms stop decaying (no usable spectral gap).
    """
    pi = stationary_density(op, restarts=0).density.masses
    gv = g(op.centers)
    gv = gv - float(np.dot(gv, pi))  # enforce mean zero on the grid measure
    total = float(np.dot(pi, gv * gv))
    w = gv.copy()
    terms = []
    for t in range(1, t_max + 1):
        w = op.matrix @ w
        term = float(np.dot(pi, gv * w))
        terms.append(term)
        if abs(term) < term_tol:
            break
        if t >= 50 and abs(term) > max(abs(x) for x in terms[:10]):
            raise ValueError("correlation terms are not decaying; "
                             "no spectral gap at these parameters")
    value = total + 2.0 * sum(terms)
    info = {"terms_used": len(terms), "last_term": terms[-1] if terms else 0.0,
            "negative_clipped": value < 0.0}
    return (max(value, 0.0), info)


# ---------------------------------------------------------------------------
# normality tests

def shapiro_wilk(x, subsample_seed: int = 0):
    """Shapiro-Wilk W and upper-tail p (Royston's approximation).

    Valid for 3 <= n <= 5000; larger samples are sub-sampled to 5000 with a
    fixed seed and the result carries flag="subsampled".
    """
    x = np.sort(np.asarray(x, dtype=float))
    flag = ""
    if x.size > SHAPIRO_MAX_N:
        rng = np.random.Generator(np.random.PCG64(subsample_seed))
        x = np.sort(rng.choice(x, size=SHAPIRO_MAX_N, replace=False))
        flag = "subsampled"
    n = x.size
    if n < 3:
        raise ValueError("shapiro_wilk needs at least 3 points")
    if x[0] == x[-1]:
        raise ValueError("degenerate sample: all values equal")

    mtilde = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ss = float(np.dot(mtilde, mtilde))
    rsn = 1.0 / math.sqrt(n)
    w = np.zeros(n)
    a_n = (-2.706056 * rsn**5 + 4.434685 * rsn**4 - 2.071190 * rsn**3
           - 0.147981 * rsn**2 + 0.221157 * rsn + mtilde[-1] / math.sqrt(ss))
    if n > 5:
        a_nm1 = (-3.582633 * rsn**5 + 5.682633 * rsn**4 - 1.752461 * rsn**3
                 - 0.293762 * rsn**2 + 0.042981 * rsn
                 + mtilde[-2] / math.sqrt(ss))
        phi = (ss - 2.0 * mtilde[-1]**2 - 2.0 * mtilde[-2]**2) \
            / (1.0 - 2.0 * a_n**2 - 2.0 * a_nm1**2)
        w[2:-2] = mtilde[2:-2] / math.sqrt(phi)
        w[-1], w[-2] = a_n, a_nm1
        w[0], w[1] = -a_n, -a_nm1
    else:
        phi = (ss - 2.0 * mtilde[-1]**2) / (1.0 - 2.0 * a_n**2)
        if n > 3:
            w[1:-1] = mtilde[1:-1] / math.sqrt(phi)
        w[-1] = a_n
        w[0] = -a_n

    xc = x - x.mean()
    stat = float(np.dot(w, x))**2 / float(np.dot(xc, xc))
    stat = min(stat, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(stat))
                             - math.asin(math.sqrt(0.75)))
        p = max(min(p, 1.0), 0.0)
    elif n <= 11:
        gamma = -2.273 + 0.459 * n
        mu = 0.5440 - 0.39978 * n + 0.025054 * n**2 - 0.0006714 * n**3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n**2
                         - 0.0020322 * n**3)
        z = (-math.log(gamma - math.log1p(-stat)) - mu) / sigma
        p = float(ndtr(-z))
    else:
        ln = math.log(n)
        mu = 0.0038915 * ln**3 - 0.083751 * ln**2 - 0.31082 * ln - 1.5861
        sigma = math.exp(0.0030302 * ln**2 - 0.082676 * ln - 0.4803)
        z = (math.log1p(-stat) - mu) / sigma
        p = float(ndtr(-z))
    return stat, p, flag


def _skew_kurt(x):
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d * d)
    m3 = np.mean(d * d * d)
    m4 = np.mean(d * d * d * d)
    return m3 / m2**1.5, m4 / m2**2


def dagostino_k2(x):
    """D'Agostino-Pearson omnibus K^2 with the chi^2(2) p-value."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 20:
        raise ValueError("dagostino_k2 needs at least 20 points")
    b1, b2 = _skew_kurt(x)

    # skewness transform (D'Agostino 1970)
    y = b1 * math.sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)))
    beta2 = 3.0 * (n**2 + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) \
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0))
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    z1 = delta * math.asinh(y / alpha)

    # kurtosis transform (Anscombe-Glynn 1983)
    eb2 = 3.0 * (n - 1.0) / (n + 1.0)
    vb2 = 24.0 * n * (n - 2.0) * (n - 3.0) \
        / ((n + 1.0)**2 * (n + 3.0) * (n + 5.0))
    xx = (b2 - eb2) / math.sqrt(vb2)
    beta1 = 6.0 * (n**2 - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) \
        * math.sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)))
    aa = 6.0 + 8.0 / beta1 * (2.0 / beta1
                              + math.sqrt(1.0 + 4.0 / beta1**2))
    z2 = ((1.0 - 2.0 / (9.0 * aa))
          - np.cbrt((1.0 - 2.0 / aa) / (1.0 + xx * math.sqrt(2.0 / (aa - 4.0))))) \
        / math.sqrt(2.0 / (9.0 * aa))

    k2 = z1 * z1 + z2 * z2
    return float(k2), float(math.exp(-0.5 * k2))


def jarque_bera(x):
    """Jarque-Bera statistic with the chi^2(2) p-value."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("jarque_bera needs at least 4 points")
    s, k = _skew_kurt(x)
    jb = n / 6.0 * (s * s + 0.25 * (k - 3.0)**2)
    return float(jb), float(math.exp(-0.5 * jb))


def normality_battery(sample) -> dict:
    """All three tests on one sample: name -> (statistic, p-value).

    Requires at least 100 points; smaller samples make none of the
    asymptotic p-values trustworthy.
    """
    values = sample.values if isinstance(sample, CltSample) else \
        np.asarray(sample, dtype=float)
    if values.size < 100:
        raise ValueError("normality_battery needs at least 100 points")
    w, p_w, flag = shapiro_wilk(values)
    k2, p_k2 = dagostino_k2(values)
    jb, p_jb = jarque_bera(values)
    out = {
        "shapiro": (w, p_w),
        "dagostino": (k2, p_k2),
        "jarque_bera": (jb, p_jb),
    }
    if flag:
        out["shapiro_flag"] = flag
    return out


def berry_esseen_distance(sample, iota: float) -> float:
    """sup_r |ECDF(S_t/sqrt(t)) - Normal(0, iota^2) CDF| (one-sample KS)."""
    if not iota > 0:
        raise ValueError("iota must be positive")
    values = np.sort(sample.values if isinstance(sample, CltSample)
                     else np.asarray(sample, dtype=float))
    n = values.size
    cdf = ndtr(values / iota)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))


def ldp_decay(samples: dict, eps_list) -> list:
    """Empirical large-deviation table from CLT samples.

    rows of (eps, t, loghat) with loghat = (1/t) log P(S_t > t*eps);
    cells with zero exceedances carry loghat None (censored).
    """
    rows = []
    for eps in eps_list:
        for t, sample in sorted(samples.items()):
            s_t = sample.values * math.sqrt(t)
            p_hat = float(np.mean(s_t > t * eps))
            loghat = math.log(p_hat) / t if p_hat > 0.0 else None
            rows.append(dict(eps=float(eps), t=int(t), loghat=loghat,
                             censored=p_hat == 0.0))
    return rows
