"""Command-line surface: ``hetero run | validate | version``.

``run`` executes one experiment per invocation, writes metadata-stamped CSV
or JSON artifacts plus a gnuplot script reproducing the corresponding
figure layout, and exits 0 on success, 2 on validation failure, 3 on
numeric breakdown.  ``validate`` prints a human-readable report of the
runtime-checkable model assumptions and never writes files.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import __version__, artifacts, maps, noise
from . import extremes, limitstats, lyapunov, micro, multifractal, orbits, ulam
from .config import EXPERIMENTS, ExperimentConfig
from .errors import DomainEscape, GeometryError, HeteroError, ModelBreakdown

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _setup(cfg: ExperimentConfig):
    """Geometry + admissible noise spec; raises on invalid configuration."""
    params = cfg.params()
    geometry = maps.find_geometry(params)
    spec = noise.NoiseSpec.admissible(params, geometry, cfg.n, a=cfg.a,
                                      bump=cfg.bump)
    return params, geometry, spec


# ---------------------------------------------------------------------------
# experiment drivers

def _run_orbit(cfg, outdir):
    params, geometry, spec = _setup(cfg)
    tr = orbits.random_orbit(cfg.knob_float("x0"), cfg.knob_int("length"),
                             cfg.seed, cfg.mode, params, spec,
                             geometry=geometry)
    path = os.path.join(outdir, "trajectory.csv")
    artifacts.write_csv(path, cfg, ["t", "phi"],
                        ((t, v) for t, v in enumerate(tr.states)))
    artifacts.write_plot_script(
        os.path.join(outdir, "trajectory.gp"), cfg,
        "set xlabel 't'\nset ylabel 'phi'\n"
        "plot 'trajectory.csv' using 1:2 with lines notitle\n")
    return {"steps": len(tr.states) - 1}


def _run_stationary(cfg, outdir):
    params, geometry, spec = _setup(cfg)
    m = cfg.knob_int("m")
    op = ulam.build_ulam(params, spec, m, geometry=geometry, mode=cfg.mode)
    res = ulam.stationary_density(op)
    tr_hist = None
    length = cfg.knob_int("orbit_length")
    burn = cfg.knob_int("burn_in")
    counts = np.zeros(m, dtype=np.int64)
    lo, hi = op.edges[0], op.edges[-1]
    seen = 0
    for chunk in orbits.stream_orbit(cfg.knob_float("x0"), length, cfg.seed,
                                     cfg.mode, params, spec,
                                     geometry=geometry):
        take = chunk[max(burn - seen, 0):]
        seen += chunk.size
        if take.size:
            counts += np.histogram(take, bins=m, range=(lo, hi))[0]
    hist = orbits.DensityEstimate(edges=op.edges,
                                  masses=counts / counts.sum(),
                                  count=int(counts.sum()), note="orbit")
    l1 = hist.l1_distance(res.density)
    artifacts.write_csv(
        os.path.join(outdir, "ulam_density.csv"), cfg,
        ["bin_lo", "bin_hi", "mass"],
        zip(op.edges[:-1], op.edges[1:], res.density.masses),
        extra={"fixed-point-residual": res.residual,
               "restart-l1": res.restart_l1, "unique": res.unique})
    artifacts.write_csv(
        os.path.join(outdir, "orbit_density.csv"), cfg,
        ["bin_lo", "bin_hi", "mass"],
        zip(op.edges[:-1], op.edges[1:], hist.masses),
        extra={"l1-vs-ulam": l1})
    ext = maps.extend_map(params, geometry)
    grid = np.linspace(geometry.domain_lo, geometry.domain_hi, 1001)
    artifacts.write_csv(os.path.join(outdir, "map.csv"), cfg,
                        ["phi", "T"], zip(grid, ext(grid)))
    artifacts.write_plot_script(
        os.path.join(outdir, "stationary.gp"), cfg,
        "set multiplot layout 2,1\n"
        "set xlabel 'phi'\nset ylabel 'T(phi)'\n"
        "plot 'map.csv' using 1:2 with lines notitle, x with lines dt 2 notitle\n"
        "set ylabel 'mass'\n"
        "plot 'ulam_density.csv' using (0.5*($1+$2)):3 with lines title 'ulam', "
        "'orbit_density.csv' using (0.5*($1+$2)):3 with points pt 7 ps 0.3 title 'orbit'\n"
        "unset multiplot\n")
    return {"l1": l1, "unique": res.unique}


def _parse_n_list(raw):
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        if tok in ("det", "deterministic", "inf"):
            out.append(None)
        elif tok:
            out.append(float(tok))
    return out


def _run_lyapunov(cfg, outdir):
    params = cfg.params()
    grid = np.linspace(cfg.knob_float("c_min"), cfg.knob_float("c_max"),
                       cfg.knob_int("c_points"))
    rows = lyapunov.lyapunov_scan(grid, _parse_n_list(cfg.knob_str("n_list")),
                                  params, cfg.knob_int("t"), cfg.seed,
                                  x0=cfg.knob_float("x0"),
                                  burn_in=cfg.knob_int("burn_in"),
                                  mode=cfg.mode)
    artifacts.write_csv(
        os.path.join(outdir, "lyapunov.csv"), cfg,
        ["c", "n", "lambda", "stderr", "flag"],
        ((r["c"], "det" if r["n"] is None else r["n"], r["estimate"],
          r["stderr"], r["flag"].replace(",", ";")) for r in rows))
    artifacts.write_plot_script(
        os.path.join(outdir, "lyapunov.gp"), cfg,
        "set xlabel 'c'\nset ylabel 'lambda'\n"
        "plot 'lyapunov.csv' using 1:3 with points pt 7 ps 0.4 notitle, "
        "0 with lines dt 2 notitle\n")
    gaps = sum(1 for r in rows if r["flag"])
    return {"cells": len(rows), "gaps": gaps}


def _run_bifurcation(cfg, outdir):
    params = cfg.params()
    grid = np.linspace(cfg.knob_float("c_min"), cfg.knob_float("c_max"),
                       cfg.knob_int("c_points"))
    rows = lyapunov.bifurcation_diagram(grid, params,
                                        transient=cfg.knob_int("transient"),
                                        keep=cfg.knob_int("keep"),
                                        x0=cfg.knob_float("x0"))

    def emit():
        for r in rows:
            for v in r["states"]:
                yield (r["c"], v)

    artifacts.write_csv(os.path.join(outdir, "bifurcation.csv"), cfg,
                        ["c", "phi"], emit())
    artifacts.write_plot_script(
        os.path.join(outdir, "bifurcation.gp"), cfg,
        "set xlabel 'c'\nset ylabel 'phi'\n"
        "plot 'bifurcation.csv' using 1:2 with dots notitle\n")
    gaps = sum(1 for r in rows if r["flag"].startswith("orbit:"))
    return {"cells": len(rows), "gaps": gaps}


def _run_clt(cfg, outdir):
    params, geometry, spec = _setup(cfg)
    op = ulam.build_ulam(params, spec, cfg.knob_int("m"), geometry=geometry,
                         mode=cfg.mode)
    mu = ulam.stationary_density(op, restarts=0).density
    g = limitstats.make_observable_g(mu, variant=cfg.knob_str("variant"))
    t_list = cfg.knob_list("t_list", int)
    samples = limitstats.birkhoff_ensemble(
        g, t_list, cfg.knob_int("count"), cfg.seed, cfg.mode, params, spec,
        x0=cfg.knob_float("x0"), burn_in=cfg.knob_int("burn_in"),
        geometry=geometry)
    iota2, info = limitstats.iota_squared(g, op)
    iota = math.sqrt(iota2)
    payload = {"iota2": iota2, "iota2_info": info, "centering": g.m,
               "per_t": {}}
    for t, sample in samples.items():
        battery = limitstats.normality_battery(sample)
        payload["per_t"][str(t)] = {
            "shapiro": battery["shapiro"],
            "dagostino": battery["dagostino"],
            "jarque_bera": battery["jarque_bera"],
            "shapiro_flag": battery.get("shapiro_flag", ""),
            "berry_esseen": limitstats.berry_esseen_distance(sample, iota),
            "mean": float(np.mean(sample.values)),
            "var": float(np.var(sample.values)),
        }
    artifacts.write_json(os.path.join(outdir, "clt_results.json"), cfg,
                         payload)
    ldp_rows = limitstats.ldp_decay(samples, cfg.knob_list("eps_list"))
    artifacts.write_csv(
        os.path.join(outdir, "ldp.csv"), cfg, ["eps", "t", "loghat"],
        ((r["eps"], r["t"], "censored" if r["censored"] else r["loghat"])
         for r in ldp_rows))
    t_big = max(t_list)
    vals = np.sort(samples[t_big].values)
    from scipy.special import ndtr
    artifacts.write_csv(
        os.path.join(outdir, "clt_cdf.csv"), cfg,
        ["x", "ecdf", "normal_cdf"],
        ((v, (i + 1) / vals.size, float(ndtr(v / iota)))
         for i, v in enumerate(vals)))
    artifacts.write_plot_script(
        os.path.join(outdir, "clt.gp"), cfg,
        f"set xlabel 'S_t/sqrt(t), t={t_big}'\nset ylabel 'CDF'\n"
        "plot 'clt_cdf.csv' using 1:2 with steps title 'empirical', "
        "'clt_cdf.csv' using 1:3 with lines title 'normal'\n")
    return {"iota2": iota2,
            "p_largest_t": payload["per_t"][str(t_big)]["jarque_bera"][1]}


def _run_dq(cfg, outdir):
    params, geometry, spec = _setup(cfg)
    total = cfg.knob_int("samples")
    burn = cfg.knob_int("burn_in")
    radii_knob = cfg.knob_str("radii")
    if radii_knob == "auto":
        radii = multifractal.default_radii(total)
        if total < multifractal.MIN_SAMPLES_PAPER_RADII:
            print(f"warning: {total} samples cannot support the "
                  "5e-6..1e-5 radii; widening to 1e-4..1e-3",
                  file=sys.stderr)
    else:
        lo, hi = (float(v) for v in radii_knob.split(":"))
        radii = np.linspace(lo, hi, multifractal.N_RADII)
    q_grid = np.arange(cfg.knob_float("q_min"),
                       cfg.knob_float("q_max") + 1e-9,
                       cfg.knob_float("q_step"))

    def stream(skip):
        seen = 0
        for chunk in orbits.stream_orbit(cfg.knob_float("x0"), total + burn,
                                         cfg.seed, cfg.mode, params, spec,
                                         geometry=geometry):
            take = chunk[max(burn - seen, 0):]
            seen += chunk.size
            if take.size:
                yield take

    anchor = min(float(c.min()) for c in stream(burn))
    spectrum = multifractal.dq_spectrum_streamed(stream(burn), q_grid,
                                                 radii, anchor)
    artifacts.write_csv(
        os.path.join(outdir, "dq.csv"), cfg, ["q", "Dq", "R2", "n_radii"],
        zip(spectrum.q, spectrum.dq, spectrum.r2,
            [len(spectrum.radii)] * len(spectrum.q)),
        extra={"flags": "; ".join(spectrum.flags)})
    artifacts.write_csv(
        os.path.join(outdir, "dq_reference.csv"), cfg, ["q", "Dq_ref"],
        ((q, multifractal.dq_reference(q)) for q in spectrum.q))
    artifacts.write_plot_script(
        os.path.join(outdir, "dq.gp"), cfg,
        "set xlabel 'q'\nset ylabel 'D_q'\nset yrange [0:1.2]\n"
        "plot 'dq.csv' using 1:2 with linespoints title 'estimate', "
        "'dq_reference.csv' using 1:2 with lines dt 2 title 'reference'\n")
    return {"dq_min": float(np.min(spectrum.dq)),
            "dq_max": float(np.max(spectrum.dq)),
            "flagged": len(spectrum.flags)}


def _run_evt(cfg, outdir):
    params, geometry, spec = _setup(cfg)
    burn = cfg.knob_int("burn_in")
    chain = orbits.Chain(params=params, spec=spec, mode=cfg.mode,
                         geometry=geometry)
    length = cfg.knob_int("density_orbit")
    density = None
    pooled = []
    for chunk in orbits.stream_orbit(cfg.knob_float("x0"), length + burn,
                                     cfg.seed, cfg.mode, params, spec,
                                     geometry=geometry):
        pooled.append(chunk.copy())
    states = np.concatenate(pooled)[burn:]
    density = orbits.empirical_density(states, bins=cfg.knob_int("bins"),
                                       burn_in=0, interval=chain.support())
    evt_cfg = extremes.EvtConfig(
        z=cfg.knob_float("z"), tau=cfg.knob_float("tau"),
        t_grid=tuple(cfg.knob_list("t_list", int)), n=spec.n, seed=cfg.seed,
        density=density, params=params, spec=spec, geometry=geometry)
    u = extremes.boundary_levels(evt_cfg)
    pooled = []
    for chunk in orbits.stream_orbit(cfg.knob_float("x0"),
                                     cfg.knob_int("blocks_orbit") + burn,
                                     cfg.seed + 1, cfg.mode, params, spec,
                                     geometry=geometry):
        pooled.append(chunk.copy())
    blocks = np.concatenate(pooled)[burn:]
    rows = extremes.block_maxima_prob(evt_cfg, blocks, u=u)
    ei = extremes.extremal_index(evt_cfg, blocks,
                                 k_max=cfg.knob_int("k_max"), u=u)
    artifacts.write_csv(
        os.path.join(outdir, "evt.csv"), cfg,
        ["t", "u_t", "p_hat", "stderr"],
        ((r.t, r.u_t, r.p_hat, r.stderr) for r in rows),
        extra={"theta": ei.theta, "visits": ei.visits,
               "e_minus_tau": math.exp(-evt_cfg.tau)})
    prows = extremes.poisson_counts(evt_cfg, cfg.knob_list("s_list"),
                                    blocks, u=u)

    def pois():
        for r in prows:
            for k in range(len(r.counts)):
                yield (r.s, k, r.counts[k], r.poisson_pmf[k])

    artifacts.write_csv(os.path.join(outdir, "poisson.csv"), cfg,
                        ["s", "k", "p_hat", "poisson_pmf"], pois())
    artifacts.write_plot_script(
        os.path.join(outdir, "evt.gp"), cfg,
        "set multiplot layout 2,1\n"
        "set xlabel 't'\nset ylabel 'u_t'\nset logscale x\n"
        "plot 'evt.csv' using 1:2 with linespoints notitle\n"
        "set ylabel 'P(M_t <= u_t)'\n"
        f"plot 'evt.csv' using 1:3:4 with yerrorlines title 'estimate', "
        f"{math.exp(-evt_cfg.tau)!r} with lines dt 2 title 'exp(-tau)'\n"
        "unset multiplot\n")
    return {"p_final": rows[-1].p_hat, "theta": ei.theta}


def _run_micro_compare(cfg, outdir):
    params = cfg.params()
    n_list = [int(v) for v in cfg.knob_list("n_list", float)]
    rows = micro.compare_micro_reduced(params, n_list,
                                       cfg.knob_int("horizon"), cfg.seed,
                                       phi0=cfg.knob_float("x0"),
                                       burn_in=cfg.knob_int("burn_in"),
                                       mode=cfg.mode)
    artifacts.write_csv(
        os.path.join(outdir, "micro_compare.csv"), cfg, ["n", "ks", "flag"],
        ((r["n"], r["ks"], r["flag"].replace(",", ";")) for r in rows))
    states = micro.run_micro(params, n_list[-1],
                             min(cfg.knob_int("horizon"), 10_000), cfg.seed)
    artifacts.write_csv(
        os.path.join(outdir, "micro_run.csv"), cfg,
        ["t", "lambda", "phi", "sigma2_e", "gamma"],
        ((t, s.lam, s.phi, s.sigma2_e, s.gamma)
         for t, s in enumerate(states)))
    artifacts.write_plot_script(
        os.path.join(outdir, "micro_compare.gp"), cfg,
        "set xlabel 'n'\nset ylabel 'KS distance'\nset logscale x\n"
        "plot 'micro_compare.csv' using 1:2 with linespoints notitle\n")
    return {"ks_final": rows[-1]["ks"]}


DRIVERS = {
    "orbit": _run_orbit,
    "stationary": _run_stationary,
    "lyapunov": _run_lyapunov,
    "bifurcation": _run_bifurcation,
    "clt": _run_clt,
    "dq": _run_dq,
    "evt": _run_evt,
    "micro-compare": _run_micro_compare,
}


# ---------------------------------------------------------------------------
# validate

def validate_report(cfg: ExperimentConfig) -> str:
    """Human-readable assumption report; side-effect-free."""
    lines = [f"hetero validate (version {__version__})"]
    ok = True

    def item(label, passed, detail=""):
        nonlocal ok
        ok = ok and passed
        mark = "PASS" if passed else "FAIL"
        lines.append(f"  [{mark}] {label}" + (f": {detail}" if detail else ""))

    try:
        params = cfg.params()
        item("parameter ranges", True,
             f"gamma0={params.gamma0} alpha={params.alpha} "
             f"omega={params.omega} c={params.c}")
    except ValueError as exc:
        item("parameter ranges", False, str(exc))
        lines.append("report: INVALID")
        return "\n".join(lines)

    sb = maps.sigma_bar(params)
    item("sigma_bar positive", sb > 0,
         f"sigma_bar={sb!r}" + ("" if sb > 0 else
                                " (omega=1 degenerates the noise channel)"))
    try:
        geometry = maps.find_geometry(params)
        item("geometry", True,
             f"crit={geometry.crit:.6f} delta={geometry.delta:.6f} "
             f"b={geometry.b:.6f} Gamma={geometry.gamma_gap:.6f}")
        item("delta < b < 1", geometry.delta < geometry.b < 1.0)
        item("dynamical core containment", geometry.core_contained,
             f"[{geometry.core_lo:.6f}, {geometry.core_hi:.6f}]")
        grid = np.linspace(0.0, 1.0 - 1e-9, 20_001)
        tmax = float(np.max(np.abs(maps.eval_T(grid, params))))
        item("max |T| < 1 on [0,1)", tmax < 1.0, f"max={tmax:.6f}")
        bound = noise.admissible_a(params, geometry, cfg.n)
        a_val = cfg.a if cfg.a is not None else bound
        item("admissible truncation", a_val <= bound * (1 + 1e-12),
             f"a={a_val!r} bound={bound!r} at n={cfg.n}")
        spec = noise.NoiseSpec(a=min(a_val, bound), n=cfg.n, bump=cfg.bump)
        from scipy import integrate
        mass, _ = integrate.quad(lambda y: noise.density(y, spec),
                                 -spec.a, spec.a, epsabs=0, epsrel=1e-10)
        item("noise density normalized", abs(mass - 1.0) < 1e-8,
             f"integral={mass!r}")
        if cfg.experiment == "evt":
            z = cfg.knob_float("z")
            in_core = geometry.core_lo <= z <= geometry.core_hi
            item("EVT target inside the core", in_core, f"z={z}")
            if in_core:
                tr = orbits.random_orbit(cfg.knob_float("x0"), 200_000,
                                         cfg.seed, cfg.mode, params, spec,
                                         geometry=geometry)
                dens = orbits.empirical_density(tr, bins=500)
                idx = np.searchsorted(dens.edges, z) - 1
                near = dens.masses[max(idx - 2, 0):idx + 3]
                item("(E1) density positive near z", bool(np.all(near > 0)),
                     f"neighborhood masses min={near.min():.2e}")
    except (GeometryError, noise.NoiseError, HeteroError) as exc:
        item("geometry/noise construction", False, str(exc))
    lines.append(f"report: {'OK' if ok else 'INVALID'}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# argument parsing

_MODEL_FLAGS = ("gamma0", "alpha", "sigma_eps", "omega", "c")
_KNOB_FLAGS = ("x0", "length", "burn_in", "m", "orbit_length", "c_min",
               "c_max", "c_points", "t", "transient", "keep", "count",
               "samples", "z", "tau", "bins", "horizon", "n_list", "t_list",
               "eps_list", "s_list", "variant", "radii", "q_min", "q_max",
               "q_step", "k_max", "density_orbit", "blocks_orbit")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hetero",
        description="heteroscedastically perturbed unimodal-map laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file path")
        p.add_argument("--experiment", choices=EXPERIMENTS)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--mode")
        p.add_argument("--n", type=float, help="noise intensity index")
        p.add_argument("--a", type=float, help="truncation half-width")
        p.add_argument("--bump", choices=noise.BUMP_KINDS)
        for flag in _MODEL_FLAGS:
            p.add_argument(f"--{flag.replace('_', '-')}", type=float,
                           dest=f"model_{flag}")
        for flag in _KNOB_FLAGS:
            p.add_argument(f"--{flag.replace('_', '-')}", dest=f"knob_{flag}")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="set an experiment knob by name")
    sub.add_parser("version")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig(experiment=args.experiment or "stationary")
    if args.experiment and args.experiment != cfg.experiment:
        cfg = ExperimentConfig(experiment=args.experiment, gamma0=cfg.gamma0,
                               alpha=cfg.alpha, sigma_eps=cfg.sigma_eps,
                               omega=cfg.omega, c=cfg.c, n=cfg.n, a=cfg.a,
                               bump=cfg.bump, mode=cfg.mode, seed=cfg.seed,
                               out=cfg.out)
    for flag in _MODEL_FLAGS:
        val = getattr(args, f"model_{flag}")
        if val is not None:
            setattr(cfg, flag, val)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.mode is not None:
        cfg.mode = args.mode
    if args.n is not None:
        cfg.n = args.n
    if args.a is not None:
        cfg.a = args.a
    if args.bump is not None:
        cfg.bump = args.bump
    for flag in _KNOB_FLAGS:
        val = getattr(args, f"knob_{flag}")
        if val is not None:
            cfg.knobs[flag] = val
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        cfg.knobs[key.strip()] = val.strip()
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "version":
        print(f"hetero {__version__}")
        return EXIT_OK
    try:
        cfg = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "validate":
        report = validate_report(cfg)
        print(report)
        return EXIT_OK

    # run
    try:
        params = cfg.params()
        geometry = maps.find_geometry(params)
        if cfg.experiment not in ("bifurcation", "lyapunov"):
            bound = noise.admissible_a(params, geometry, cfg.n)
            if cfg.a is not None and cfg.a > bound * (1 + 1e-12):
                print(f"validation error: a={cfg.a} exceeds the admissible "
                      f"bound {bound!r} at n={cfg.n}", file=sys.stderr)
                return EXIT_VALIDATION
    except (ValueError, GeometryError, noise.NoiseError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    outdir = cfg.out
    os.makedirs(outdir, exist_ok=True)
    try:
        summary = DRIVERS[cfg.experiment](cfg, outdir)
    except (ValueError, GeometryError, noise.NoiseError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DomainEscape, ModelBreakdown, HeteroError) as exc:
        print(f"numeric breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    parts = " ".join(f"{k}={v}" for k, v in summary.items())
    print(f"{cfg.experiment}: done ({parts}) -> {outdir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
