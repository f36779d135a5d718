"""Run configuration: INI-style key/value file plus command-line overrides.

Precedence, lowest first: built-in defaults, the configuration file, flags.
See ``tndp.example.ini`` at the repository root for every key.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from .assignment import AssignmentSettings
from .errors import ValidationError
from .formats import bundled_path
from .lab import MODES, frange
from .pso import PsoSettings, parse_schedule

DEFAULT_BUDGET = 5000.0


def parse_axis(text: str) -> tuple:
    """``"0:4:0.5"`` -> inclusive grid; ``"0.5, 2, 3.5"`` -> explicit values."""
    text = text.strip()
    if text.count(":") == 2:
        start, stop, step = (float(p) for p in text.split(":"))
        return frange(start, stop, step)
    values = tuple(float(p) for p in text.replace(",", " ").split())
    if not values:
        raise ValidationError("empty axis")
    return values


@dataclass
class Config:
    network_path: str = field(default_factory=lambda: bundled_path("network.txt"))
    trips_path: str = field(default_factory=lambda: bundled_path("trips.txt"))
    projects_path: str = field(default_factory=lambda: bundled_path("projects.txt"))
    budget: float = DEFAULT_BUDGET
    assignment: AssignmentSettings = field(default_factory=AssignmentSettings)
    pso: PsoSettings = field(default_factory=PsoSettings)
    sweep: dict = field(default_factory=dict)
    """Sweep overrides: mode, runs, iterations, axes, full_scale, oracle path."""
    output_dir: str = "."
    seed: int = 0
    threads: int = 1

    def validate(self):
        for label, path in (("network", self.network_path), ("trips", self.trips_path),
                            ("projects", self.projects_path)):
            if not os.path.exists(path):
                raise ValidationError(f"{label} file not found: {path}")
        if self.budget < 0:
            raise ValidationError("budget must be nonnegative")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        mode = self.sweep.get("mode")
        if mode is not None and mode not in MODES:
            raise ValidationError(f"sweep mode must be one of {MODES}")


_ASSIGNMENT_KEYS = {"max_iterations": int, "relative_gap_tolerance": float,
                    "line_search_tolerance": float, "direction": str}
_PSO_KEYS = {"swarm_size": int, "c1": float, "c2": float, "inertia": parse_schedule,
             "v_max": float, "iterations": int, "penalty": float}
_SWEEP_KEYS = {"mode": str, "runs": int, "iterations": int, "c1_values": parse_axis,
               "c2_values": parse_axis, "c_values": parse_axis, "w_values": parse_axis,
               "c_fixed": float, "w_fixed": float, "full_scale": None, "oracle": str,
               "swarm_size": int}


def load_config(path: Optional[str]) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path, encoding="utf-8"):
        raise ValidationError(f"cannot read configuration file {path}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    try:
        if parser.has_section("data"):
            d = parser["data"]
            if "network" in d:
                cfg.network_path = resolve(d["network"])
            if "trips" in d:
                cfg.trips_path = resolve(d["trips"])
            if "projects" in d:
                cfg.projects_path = resolve(d["projects"])
            if "budget" in d:
                cfg.budget = d.getfloat("budget")
        if parser.has_section("assignment"):
            kw = {}
            for k, v in parser["assignment"].items():
                if k not in _ASSIGNMENT_KEYS:
                    raise ValidationError(f"unknown [assignment] key {k!r}")
                kw[k] = _ASSIGNMENT_KEYS[k](v)
            cfg.assignment = replace(cfg.assignment, **kw)
        if parser.has_section("pso"):
            kw = {}
            for k, v in parser["pso"].items():
                if k not in _PSO_KEYS:
                    raise ValidationError(f"unknown [pso] key {k!r}")
                if v.strip() == "":
                    continue
                kw["max_iterations" if k == "iterations" else k] = _PSO_KEYS[k](v)
            cfg.pso = replace(cfg.pso, **kw)
        if parser.has_section("sweep"):
            for k, v in parser["sweep"].items():
                if k not in _SWEEP_KEYS:
                    raise ValidationError(f"unknown [sweep] key {k!r}")
                if k == "full_scale":
                    cfg.sweep[k] = parser["sweep"].getboolean(k)
                elif k == "oracle":
                    cfg.sweep[k] = resolve(v)
                else:
                    cfg.sweep[k] = _SWEEP_KEYS[k](v)
        if parser.has_section("run"):
            r = parser["run"]
            cfg.seed = r.getint("seed", cfg.seed)
            cfg.threads = r.getint("threads", cfg.threads)
            if "output_dir" in r:
                cfg.output_dir = resolve(r["output_dir"])
    except (ValueError, configparser.Error) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return cfg
