"""Flat key=value experiment configuration with lossless round-tripping.

The file format is INI-style sections of scalar keys (configparser), no
nesting.  Every run embeds the canonical serialization and its SHA-256 in
the artifact metadata, so an output file always names the exact
configuration that produced it.
"""

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field

from . import maps

EXPERIMENTS = ("orbit", "stationary", "lyapunov", "bifurcation", "clt",
               "dq", "evt", "micro-compare")

#: kind-specific knob defaults; values are strings exactly as they appear
#: in config files (lists are comma-joined)
KNOB_DEFAULTS = {
    "orbit": {"x0": "0.38", "length": "100000", "burn_in": "0"},
    "stationary": {"m": "512", "orbit_length": "10000000",
                   "burn_in": "1000", "x0": "0.38"},
    "lyapunov": {"c_min": "-1.0", "c_max": "1.0", "c_points": "41",
                 "n_list": "10,100,1000,det", "t": "1000000",
                 "burn_in": "1000", "x0": "0.38"},
    "bifurcation": {"c_min": "-1.0", "c_max": "1.0", "c_points": "401",
                    "transient": "1000", "keep": "1000", "x0": "0.38"},
    "clt": {"count": "5000", "t_list": "10,1000,5000,10000",
            "burn_in": "1000", "x0": "0.38", "variant": "stationary",
            "m": "512", "eps_list": "0.05,0.1,0.2"},
    "dq": {"samples": "100000000", "q_min": "-5.0", "q_max": "5.0",
           "q_step": "0.5", "x0": "0.38", "burn_in": "1000",
           "radii": "auto"},
    "evt": {"z": "0.8", "tau": repr(math.log(10.0)),
            "t_list": "100,316,1000,3162,10000",
            "density_orbit": "10000000", "blocks_orbit": "10000000",
            "bins": "10000", "burn_in": "1000", "x0": "0.38",
            "s_list": "0.5,1.0,2.0", "k_max": "20"},
    "micro-compare": {"n_list": "100,1000,10000", "horizon": "20000",
                      "burn_in": "1000", "x0": "0.38"},
}


@dataclass
class ExperimentConfig:
    """One experiment: model constants, noise law, kind-specific knobs."""

    experiment: str = "stationary"
    gamma0: float = 15.969
    alpha: float = 1.64
    sigma_eps: float = 2.7e-5
    omega: float = 0.669
    c: float = 0.0
    n: float = 1000.0
    a: float = None          # None = ride the admissible bound
    bump: str = "mollifier"
    mode: str = "random-paper"
    seed: int = 1
    out: str = "out"
    knobs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"one of {EXPERIMENTS}")
        merged = dict(KNOB_DEFAULTS[self.experiment])
        merged.update({k: str(v) for k, v in self.knobs.items()})
        self.knobs = merged

    def params(self) -> maps.MapParams:
        return maps.MapParams(gamma0=self.gamma0, alpha=self.alpha,
                              sigma_eps=self.sigma_eps, omega=self.omega,
                              c=self.c)

    # knob accessors -------------------------------------------------------
    def knob_float(self, key: str) -> float:
        return float(self.knobs[key])

    def knob_int(self, key: str) -> int:
        return int(float(self.knobs[key]))

    def knob_str(self, key: str) -> str:
        return self.knobs[key]

    def knob_list(self, key: str, cast=float) -> list:
        return [cast(v) for v in self.knobs[key].split(",") if v != ""]

    # serialization --------------------------------------------------------
    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["model"] = {
            "gamma0": repr(self.gamma0), "alpha": repr(self.alpha),
            "sigma_eps": repr(self.sigma_eps), "omega": repr(self.omega),
            "c": repr(self.c),
        }
        cp["noise"] = {
            "n": repr(self.n),
            "a": "auto" if self.a is None else repr(self.a),
            "bump": self.bump,
        }
        cp["run"] = {
            "experiment": self.experiment, "mode": self.mode,
            "seed": str(self.seed), "out": self.out,
        }
        cp["experiment"] = dict(sorted(self.knobs.items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        model = cp["model"] if cp.has_section("model") else {}
        nz = cp["noise"] if cp.has_section("noise") else {}
        run = cp["run"] if cp.has_section("run") else {}
        knobs = dict(cp["experiment"]) if cp.has_section("experiment") else {}
        a_raw = nz.get("a", "auto")
        return cls(
            experiment=run.get("experiment", "stationary"),
            gamma0=float(model.get("gamma0", 15.969)),
            alpha=float(model.get("alpha", 1.64)),
            sigma_eps=float(model.get("sigma_eps", 2.7e-5)),
            omega=float(model.get("omega", 0.669)),
            c=float(model.get("c", 0.0)),
            n=float(nz.get("n", 1000)),
            a=None if a_raw == "auto" else float(a_raw),
            bump=nz.get("bump", "mollifier"),
            mode=run.get("mode", "random-paper"),
            seed=int(run.get("seed", 1)),
            out=run.get("out", "out"),
            knobs=knobs,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()
