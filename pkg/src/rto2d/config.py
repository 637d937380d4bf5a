"""Run configuration: JSON files validated against a published schema.

A configuration fully determines a run.  Validation errors are reported as
:class:`ConfigurationError` carrying the line of the offending entry in the
source file.
"""

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigurationError
from .mesh import build_structured_mesh, mirror_map
from .mma import MMAParams
from .optimize import Continuation, OptimizationSettings, Schedule
from .problem import Problem
from .design import Interpolation
from .solver import SolverParams
from .stochastic import (LoadUncertainty, LognormalMarginal, StochasticModel, UniformMarginal,
                         kl_from_mesh)

__all__ = ["SCHEMA", "RunConfig", "load_config", "parse_config", "build_problem", "final_stage"]

_pos = {"type": "number", "exclusiveMinimum": 0}
_len = {"anyOf": [_pos, {"type": "null"}]}
_box = {
    "type": "object",
    "additionalProperties": False,
    "properties": {k: {"type": "number"} for k in ("xmin", "xmax", "ymin", "ymax")},
}
_schedule = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "end"],
    "properties": {
        "start": _pos, "end": _pos, "step": _pos,
        "interval": {"type": "integer", "minimum": 1},
    },
}
_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_field = {
    "n_modes": {"type": "integer", "minimum": 1},
    "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "lcx": _len,
    "lcy": _len,
    "enabled": {"type": "boolean"},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "rto2d run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "scale", "mesh", "material", "load", "design"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "scale": {"enum": ["native", "reduced"]},
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nx", "ny", "lx", "ly", "supports"],
            "properties": {
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
                "lx": _pos,
                "ly": _pos,
                "supports": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["region", "dofs"],
                        "properties": {"region": _box, "dofs": {"enum": ["x", "y", "xy"]}},
                    },
                },
                "passive": {"type": "array", "items": _box},
                "symmetry": {"enum": ["none", "vertical", "quarter"]},
            },
        },
        "material": {
            "type": "object",
            "additionalProperties": False,
            "required": ["E0", "nu", "EL0", "nu_L"],
            "properties": {
                "E0": _pos, "EL0": _pos,
                "nu": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                "nu_L": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
            },
        },
        "load": {
            "type": "object",
            "additionalProperties": False,
            "required": ["point", "mean"],
            "properties": {"point": _vec2, "mean": _vec2},
        },
        "design": {
            "type": "object",
            "additionalProperties": False,
            "required": ["r", "volume_fraction"],
            "properties": {
                "r": _pos,
                "volume_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "alpha": {"type": "number", "minimum": 0},
                "move_limit": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "p": _schedule, "p_l": _schedule, "beta": _schedule,
                "tail": {"type": "integer", "minimum": 0},
                "max_iterations": {"type": "integer", "minimum": 0},
                "c0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "beta0": _pos,
            },
        },
        "uncertainty": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "load": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["cov"],
                    "properties": {
                        "enabled": {"type": "boolean"},
                        "cov": {"type": "array", "minItems": 2, "maxItems": 2, "items": _vec2},
                    },
                },
                "material": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mean", "variance", "lcx", "lcy"],
                    "properties": {"mean": _pos, "variance": _pos, **_field},
                },
                "geometry": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["eta_min", "eta_max", "lcx", "lcy"],
                    "properties": {
                        "eta_min": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "eta_max": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        **_field,
                    },
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": _pos,
                "max_iter": {"type": "integer", "minimum": 1},
                "min_step": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "dc": _pos,
                "c_max": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["deterministic", "robust"]},
                "seed": {"type": "integer", "minimum": 0},
                "output_dir": {"type": "string"},
                "snapshot_interval": {"type": "integer", "minimum": 0},
                "uniform_design": {"type": "number", "minimum": 0, "maximum": 1},
                "mc_samples": {"type": "integer", "minimum": 2},
                "sigma_values": {"type": "array", "items": _pos, "minItems": 1},
                "fd_step": _pos,
            },
        },
    },
}


@dataclass
class RunConfig:
    """A validated configuration plus its source path."""

    data: dict
    path: Path | None = None

    def get(self, *keys, default=None):
        d = self.data
        for k in keys:
            if not isinstance(d, dict) or k not in d:
                return default
            d = d[k]
        return d

    @property
    def name(self):
        return self.data["name"]

    @property
    def mode(self):
        return self.get("run", "mode", default="robust")

    @property
    def seed(self):
        return self.get("run", "seed", default=0)


# ----------------------------------------------------------------------
# loading and validation
# ----------------------------------------------------------------------
def _line_of(text, path):
    """Best-effort line number of the entry addressed by a JSON path."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
            if m is None:
                break
            pos = m.start()
        else:
            # advance to the opening bracket, then over `key` top-level items
            start = text.find("[", pos)
            if start < 0:
                break
            depth, i, count = 0, start, 0
            while i < len(text):
                ch = text[i]
                if ch in "[{":
                    depth += 1
                    if depth == 2 and count == key:
                        pos = i
                        break
                elif ch in "]}":
                    depth -= 1
                    if depth == 0:
                        break
                elif ch == "," and depth == 1:
                    count += 1
                elif depth == 1 and not ch.isspace() and count == key:
                    pos = i
                    break
                i += 1
    return text.count("\n", 0, pos) + 1


def parse_config(text, path=None):
    """Parse and validate configuration text.

    Raises
    ------
    ConfigurationError
        On malformed JSON, schema violations or inconsistent values; the
        error carries the 1-based source line.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON: {exc.msg}", exc.lineno) from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        loc = list(err.absolute_path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            # point at the first unexpected key rather than its parent
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                loc.append(extra[0])
        raise ConfigurationError(f"{where}: {err.message}", _line_of(text, loc))
    _check_consistency(data, text)
    return RunConfig(data, Path(path) if path else None)


def _check_consistency(data, text):
    mesh = data["mesh"]
    for key in ("p", "p_l", "beta"):
        s = data["design"].get(key)
        if s and s["end"] < s["start"]:
            raise ConfigurationError(f"design/{key}: end must not be below start",
                                     _line_of(text, ["design", key]))
    geo = data.get("uncertainty", {}).get("geometry")
    if geo and geo["eta_max"] <= geo["eta_min"]:
        raise ConfigurationError("uncertainty/geometry: eta_max must exceed eta_min",
                                 _line_of(text, ["uncertainty", "geometry", "eta_max"]))
    x, y = data["load"]["point"]
    if not (0 <= x <= mesh["lx"] and 0 <= y <= mesh["ly"]):
        raise ConfigurationError("load/point lies outside the domain",
                                 _line_of(text, ["load", "point"]))


def load_config(path):
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, path)


# ----------------------------------------------------------------------
# problem construction
# ----------------------------------------------------------------------
def _box_args(box):
    return {k: box.get(k, -np.inf if k.endswith("min") else np.inf)
            for k in ("xmin", "xmax", "ymin", "ymax")}


def build_mesh(cfg):
    m = cfg.data["mesh"]
    mesh = build_structured_mesh(m["nx"], m["ny"], m["lx"], m["ly"])
    fixed = []
    for sup in m["supports"]:
        nodes = mesh.nodes_where(**_box_args(sup["region"]))
        if nodes.size == 0:
            raise ConfigurationError("support region contains no node")
        for c, axis in enumerate("xy"):
            if axis in sup["dofs"]:
                fixed.extend(2 * nodes + c)
    passive = []
    for box in m.get("passive", []):
        passive.extend(mesh.elements_where(**_box_args(box)))
    sym = m.get("symmetry", "none")
    maps = None
    if sym == "vertical":
        maps = [mirror_map(mesh, "vertical")]
    elif sym == "quarter":
        maps = [mirror_map(mesh, "vertical"), mirror_map(mesh, "horizontal")]
    load_node = mesh.node_at(*cfg.data["load"]["point"])
    return mesh.with_boundary(fixed_dofs=fixed, load_node=load_node,
                              passive=np.asarray(passive, dtype=int), symmetry=maps)


def _enabled(block):
    return block is not None and block.get("enabled", True)


def build_stochastic(cfg, mesh, sources=None):
    """Stochastic model of the configured (and enabled) sources.

    Parameters
    ----------
    sources : set of str, optional
        Restrict to a subset of {"load", "material", "geometry"}.
    """
    unc = cfg.get("uncertainty", default={}) or {}
    mean = cfg.data["load"]["mean"]
    E0 = cfg.data["material"]["E0"]
    use = lambda k: _enabled(unc.get(k)) and (sources is None or k in sources)  # noqa: E731
    load = LoadUncertainty(mean, np.array(unc["load"]["cov"])) if use("load") else None
    material = geometry = None
    if use("material"):
        b = unc["material"]
        kl = kl_from_mesh(mesh, b["lcx"], b["lcy"], b.get("threshold", 0.9), b.get("n_modes"))
        material = (LognormalMarginal(b["mean"], b["variance"]), kl)
    if use("geometry"):
        b = unc["geometry"]
        kl = kl_from_mesh(mesh, b["lcx"], b["lcy"], b.get("threshold", 0.9), b.get("n_modes"))
        geometry = (UniformMarginal(b["eta_min"], b["eta_max"]), kl)
    return StochasticModel(mesh.n_ele, mean, E0, load, material, geometry)


def continuation(cfg):
    d = cfg.data["design"]

    def sched(key, default):
        s = d.get(key)
        if s is None:
            return default
        return Schedule(s["start"], s["end"], s.get("step", 0.1), s.get("interval", 20))

    base = Continuation()
    return Continuation(sched("p", base.p), sched("p_l", base.pl), sched("beta", base.beta),
                        d.get("tail", 200))


def settings(cfg):
    d = cfg.data["design"]
    return OptimizationSettings(
        volume_fraction=d["volume_fraction"],
        robust=cfg.mode == "robust",
        continuation=continuation(cfg),
        mma=MMAParams(move=d.get("move_limit", 0.2)),
        max_iterations=d.get("max_iterations"),
    )


def build_problem(cfg, sources=None, mesh=None):
    """Problem at the start of the continuation schedule."""
    mesh = mesh or build_mesh(cfg)
    mat, d = cfg.data["material"], cfg.data["design"]
    s = cfg.get("solver", default={}) or {}
    c0 = d.get("c0", 0.1)
    solver = SolverParams(tol=s.get("tol", 1e-6), max_iter=s.get("max_iter", 30),
                          min_step=s.get("min_step", 1.0 / 64.0), c0=c0, dc=s.get("dc", 0.02),
                          c_max=s.get("c_max", 1.0))
    cont = continuation(cfg)
    p, pl, beta = cont.at(0)
    interp = Interpolation(p=p, pl=pl, beta=beta, beta0=d.get("beta0", 120.0), c=c0)
    stoch = build_stochastic(cfg, mesh, sources)
    return Problem.create(mesh, mat["nu"], mat["nu_L"], d["r"], stoch, interp=interp,
                          EL0=mat["EL0"], alpha=d.get("alpha", 1.0), solver=solver)


def final_stage(problem, cfg):
    """``problem`` with the interpolation parameters of the last iteration.

    Saved designs are analysed at the penalties and projection slope they
    were optimized for, not at the start of the schedule.
    """
    cont = settings(cfg).continuation
    p, pl, beta = cont.at(max(cont.n_iterations - 1, 0))
    return problem.with_(interp=replace(problem.interp, p=p, pl=pl, beta=beta))
