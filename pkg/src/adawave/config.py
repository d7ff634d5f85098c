"""Run configuration: defaults, YAML loading, validation, typed builders.

The default configuration is the desk-scale two-inclusion reconstruction
benchmark.  Flags and partial YAML files override individual fields; the
merged dictionary is serialized verbatim into run manifests so every command
can be reproduced from its output directory.
"""

from __future__ import annotations

import copy
import os

import numpy as np
import yaml

from .adjoint import CutoffSpec
from .errors import ConfigError
from .mesh import TriMesh
from .objective import CoefficientBounds, RegularizationPolicy
from .optimize import OptimizeSettings
from .adaptivity import RefineSettings
from .synth import Inclusion, NoiseSpec, Phantom
from .wave import SourcePulse, WaveConfig

DEFAULT_CONFIG = {
    "domain": [-3.0, 3.0, -3.0, 3.0],
    "phantom": {
        "inclusions": [
            {"center": [-1.5, 1.0], "side": 0.5, "value": 4.0},
            {"center": [1.5, 1.0], "side": 0.5, "value": 4.0},
        ],
        "background_amplitude": 0.5,
        "background_scale": 2.875,
    },
    "omega": 0.2,
    "wave": {
        # pulse duration is one period, t1 = 2 pi / angular_frequency;
        # t_final = periods * t1 unless given explicitly
        "amplitude": 0.5,
        "angular_frequency": 3.0,
        "periods": 9.0,
        "t_final": None,
        "dt": None,
        "cfl_safety": 0.5,
        "bc_map": {"top": "source", "bottom": "absorbing",
                   "left": "neumann_zero", "right": "neumann_zero"},
    },
    "noise": {"level": 0.02, "seed": 3, "per_sample": False},
    "regularization": {"delta": 0.02, "mu": 0.2, "alpha_override": 0.02},
    "cutoff": {"zeta": 0.0},
    "c_glob": {"mode": "blur", "sigma": 0.3, "target_max": 3.2,
               "shift": [0.0, 0.0], "shift_inclusion": 0},
    "optimizer": {"method": "lbfgs", "memory": 12, "grad_tol": 1.0e-5,
                  "stagnation_window": 5, "stagnation_rel": 1.0e-3,
                  "max_iters": 80},
    "refine": {"beta1": 0.55, "beta2": 0.6, "use_second": False,
               "refine_region": None, "max_refinements": 4,
               "growth_factor": 1.6, "eta_tie_tol": 0.05,
               "mode": "retrospective"},
    "mesh": {"inversion_h": 0.15, "data_h": 6.0 / 56.0},
    "theory": {"seed": 11, "dim": 20, "instances": 100,
               "chain_dims": [4, 8, 12, 16, 20],
               "delta_grid": [1e-2, 1e-3, 1e-4, 1e-6]},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in out:
            raise ConfigError(f"unknown configuration key '{key}'")
        if isinstance(val, dict) and isinstance(out[key], dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides=None) -> dict:
    """Defaults, overlaid by an optional YAML file, overlaid by `overrides`."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as f:
            user = yaml.safe_load(f) or {}
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def output_root():
    return os.environ.get("ADAWAVE_OUTPUT_ROOT", "")


def resolve_out(path):
    root = output_root()
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


# -- typed builders ---------------------------------------------------------

def build_phantom(cfg) -> Phantom:
    p = cfg["phantom"]
    incs = tuple(Inclusion(tuple(i["center"]), float(i["side"]), float(i["value"]))
                 for i in p["inclusions"])
    if not incs:
        raise ConfigError("phantom.inclusions must not be empty")
    return Phantom(domain=tuple(cfg["domain"]), inclusions=incs,
                   background_amplitude=float(p["background_amplitude"]),
                   background_scale=float(p["background_scale"]))


def build_wave(cfg) -> WaveConfig:
    w = cfg["wave"]
    pulse = SourcePulse(float(w["amplitude"]), float(w["angular_frequency"]))
    t_final = w["t_final"]
    if t_final is None:
        t_final = float(w["periods"]) * pulse.t1
    wc = WaveConfig(t_final=float(t_final), dt=w["dt"],
                    cfl_safety=float(w["cfl_safety"]),
                    source=pulse, bc_map=dict(w["bc_map"]))
    wc.validate()
    return wc


def build_noise(cfg) -> NoiseSpec:
    n = cfg["noise"]
    return NoiseSpec(level=float(n["level"]), seed=int(n["seed"]),
                     per_sample=bool(n["per_sample"]))


def build_policy(cfg) -> RegularizationPolicy:
    r = cfg["regularization"]
    override = r["alpha_override"]
    return RegularizationPolicy(delta=float(r["delta"]), mu=float(r["mu"]),
                                alpha_override=None if override is None else float(override))


def build_cutoff(cfg) -> CutoffSpec:
    return CutoffSpec(zeta=float(cfg["cutoff"]["zeta"]))


def build_optimizer(cfg) -> OptimizeSettings:
    o = cfg["optimizer"]
    s = OptimizeSettings(method=o["method"], memory=int(o["memory"]),
                         grad_tol=float(o["grad_tol"]),
                         stagnation_window=int(o["stagnation_window"]),
                         stagnation_rel=float(o["stagnation_rel"]),
                         max_iters=int(o["max_iters"]))
    s.validate()
    return s


def build_refine(cfg) -> RefineSettings:
    r = cfg["refine"]
    region = r["refine_region"]
    s = RefineSettings(beta1=float(r["beta1"]), beta2=float(r["beta2"]),
                       use_second=bool(r["use_second"]),
                       refine_region=None if region is None else tuple(region),
                       max_refinements=int(r["max_refinements"]),
                       growth_factor=float(r["growth_factor"]),
                       eta_tie_tol=float(r["eta_tie_tol"]),
                       mode=r["mode"])
    s.validate()
    return s


def build_bounds(cfg) -> CoefficientBounds:
    return CoefficientBounds(d=build_phantom(cfg).d, omega=float(cfg["omega"]))


def build_data_mesh(cfg) -> TriMesh:
    return TriMesh.structured(tuple(cfg["domain"]), float(cfg["mesh"]["data_h"]))


def build_inversion_mesh(cfg) -> TriMesh:
    return TriMesh.structured(tuple(cfg["domain"]), float(cfg["mesh"]["inversion_h"]))


def validate_config(cfg) -> None:
    """Build every typed object once so each invariant is checked, naming the
    offending section in the raised error."""
    for section, builder in [("domain/phantom", build_phantom),
                             ("wave", build_wave),
                             ("noise", build_noise),
                             ("regularization", build_policy),
                             ("cutoff", build_cutoff),
                             ("optimizer", build_optimizer),
                             ("refine", build_refine),
                             ("omega", build_bounds)]:
        try:
            builder(cfg)
        except ConfigError as exc:
            raise ConfigError(f"[{section}] {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] malformed value: {exc}") from exc
    for name in ("inversion_h", "data_h"):
        h = cfg["mesh"][name]
        if not (isinstance(h, (int, float)) and h > 0):
            raise ConfigError(f"[mesh.{name}] must be a positive number")
    x0, x1, y0, y1 = cfg["domain"]
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("[domain] rectangle is degenerate")
    w = cfg["wave"]
    if w["t_final"] is None and w["periods"] <= 0:
        raise ConfigError("[wave.periods] must be positive")
    if abs(cfg["mesh"]["data_h"] - cfg["mesh"]["inversion_h"]) < 1e-12:
        raise ConfigError("[mesh] data_h equals inversion_h; "
                          "the grids must differ to avoid the inverse crime")


def manifest_dict(cfg, **extra) -> dict:
    from . import __version__
    out = {"tool": "adawave", "version": __version__,
           "config": copy.deepcopy(cfg)}
    out.update(extra)
    return out


def write_manifest(path, manifest):
    with open(path, "w") as f:
        yaml.safe_dump(_plain(manifest), f, sort_keys=False)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
