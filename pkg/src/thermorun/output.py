"""Deterministic CSV and run-manifest emission.

All floating-point values are written with 17 significant digits through
the locale-independent format machinery, so identical analyses on one build
produce byte-identical files.  The manifest lists every file written along
with the resolved parameters; its wall-time field is the only volatile
entry.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .model import DimensionalParams, ModelParams

OUTDIR_ENV = "THERMORUN_OUTDIR"
MANIFEST_SCHEMA = "thermorun-manifest/1"


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> int:
    """Write rows with fixed formatting; returns the number of data rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
            n += 1
    return n


def resolve_outdir(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get(OUTDIR_ENV)
    if env:
        return Path(env)
    return Path("thermorun_out")


def params_dict(p: ModelParams) -> dict:
    return {"f": p.f, "ell": p.ell, "eps": p.eps, "u_a": p.u_a,
            "sigma": p.sigma, "u_boil": p.u_boil}


def dim_dict(d: DimensionalParams) -> dict:
    return {"V": d.V, "F": d.F, "c_f": d.c_f, "Cbar": d.Cbar, "dH": d.dH,
            "L": d.L, "T_a": d.T_a, "A": d.A, "E": d.E}


class ManifestWriter:
    """Collects outputs and settings for one command run."""

    def __init__(self, command: str, outdir: Path):
        self.command = command
        self.outdir = Path(outdir)
        self.t0 = time.monotonic()
        self.outputs: list[dict] = []
        self.data: dict = {
            "schema": MANIFEST_SCHEMA,
            "tool_version": __version__,
            "command": command,
        }

    def set_params(self, p: ModelParams, dim: DimensionalParams | None = None,
                   temp_scale: float | None = None, preset: str | None = None):
        self.data["resolved_params"] = params_dict(p)
        if dim is not None:
            self.data["dimensional_params"] = dim_dict(dim)
        if temp_scale is not None:
            self.data["temp_scale_K"] = temp_scale
        if preset is not None:
            self.data["preset"] = preset

    def set(self, key: str, value):
        self.data[key] = value

    def add_csv(self, name: str, header: list[str], rows) -> Path:
        path = self.outdir / name
        n = write_csv(path, header, rows)
        self.outputs.append({"file": name, "rows": n})
        return path

    def add_json(self, name: str, payload: dict) -> Path:
        path = self.outdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.outputs.append({"file": name})
        return path

    def finish(self, partial: bool = False) -> Path:
        self.data["outputs"] = self.outputs
        self.data["partial"] = partial
        self.data["wall_time_s"] = time.monotonic() - self.t0
        path = self.outdir / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
