"""Artifact writers: metadata-stamped CSV/JSON files and gnuplot scripts.

Every file starts with a commented metadata block carrying the configation
hash, master seed and module versions, followed by the full flat config, so
any artifact can be traced back to the run that wrote it.  CSV bodies use
comma separators, '.' decimals, LF endings and a mandatory header row;
floats are written with shortest round-trip repr for byte-stable output.
"""

import json

import numpy as np
import scipy

from . import __version__
from ._backend import BACKEND
from .config import ExperimentConfig


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def metadata_lines(cfg: ExperimentConfig, extra: dict = None) -> list:
    lines = [
        f"# hetero-version: {__version__}",
        f"# numpy-version: {np.__version__}",
        f"# scipy-version: {scipy.__version__}",
        f"# backend: {BACKEND}",
        f"# seed: {cfg.seed}",
        f"# config-sha256: {cfg.sha256()}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {_fmt(v)}")
    lines.append("# --- config ---")
    for raw in cfg.to_text().splitlines():
        lines.append(f"# {raw}" if raw else "#")
    return lines


def write_csv(path, cfg: ExperimentConfig, header: list, rows,
              extra: dict = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in metadata_lines(cfg, extra):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, cfg: ExperimentConfig, payload: dict,
               extra: dict = None):
    doc = {
        "metadata": {
            "hetero_version": __version__,
            "backend": BACKEND,
            "seed": cfg.seed,
            "config_sha256": cfg.sha256(),
            "config": cfg.to_text(),
            **(extra or {}),
        },
        "results": payload,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_plot_script(path, cfg: ExperimentConfig, body: str):
    """Emit a gnuplot-dialect script next to the data it plots."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in metadata_lines(cfg):
            fh.write(line + "\n")
        fh.write("set datafile separator comma\n")
        fh.write("set datafile commentschars '#'\n")
        fh.write("set key autotitle columnhead\n")
        fh.write(body if body.endswith("\n") else body + "\n")
