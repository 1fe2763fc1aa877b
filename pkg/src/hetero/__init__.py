"""Simulation laboratory for unimodal maps with heteroscedastic noise.

The flagship model is the leverage-cycle map: a VaR-constrained bank whose
scaled leverage follows a unimodal map perturbed by state-dependent
estimation noise.  The package simulates the chain, estimates stationary
measures (Monte Carlo and Ulam), Lyapunov exponents, CLT/Berry-Esseen/LDP
statistics, generalized-dimension spectra and extreme-value laws, and
cross-validates the reduced map against the underlying slow-fast
micro-simulation.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, NUMBA_ENABLED
from .maps import (MapParams, MapGeometry, PAPER_PARAMS, find_geometry,
                   extend_map, sigma_bar, eval_T, eval_T_prime, eval_V,
                   eval_F, eval_A, eval_B, eval_sigma_n, schwarzian)
from .noise import NoiseSpec, bump_chi, normalizer, sample_noise, \
    admissible_a, kernel_density
from .orbits import Chain, Trajectory, DensityEstimate, step, random_orbit, \
    ensemble, empirical_density, stream_orbit
from .ulam import UlamOperator, build_ulam, stationary_density, \
    correlation_sequence, spectral_gap
from .lyapunov import LyapunovResult, deterministic_lyapunov, \
    average_lyapunov, lyapunov_scan, bifurcation_diagram
from .limitstats import CltSample, make_observable_g, birkhoff_ensemble, \
    iota_squared, normality_battery, berry_esseen_distance, ldp_decay
from .multifractal import DqSpectrum, partition_sums, extended_occupation, \
    dq_spectrum, dq_reference
from .extremes import EvtConfig, boundary_levels, block_maxima_prob, \
    extremal_index, poisson_counts
from .micro import MicroState, simulate_fast_returns, mle_ar1, \
    aggregated_variance, micro_step, compare_micro_reduced
from .config import ExperimentConfig
from .errors import (HeteroError, GeometryError, NoiseError, DomainEscape,
                     ModelBreakdown)
