"""JSON experiment configuration.

A config file is a single JSON object; keys map one-to-one onto the
constructors of the library (see README for the full schema). Example:

    {
      "name": "flat-limsup",
      "experiment": "limsup",
      "profile": {"kind": "flat", "height": 1.0, "a": 0.0, "b": 1.0},
      "psi": {"kind": "quadratic", "c0": 1.0, "c1": 0.0, "c2": 1.0},
      "well": {"kind": "quartic", "c": 1.0},
      "model": {"lam": 1.0, "mu": 1.0, "t": 0.1},
      "grid": {"a": 0.0, "b": 1.0, "y_min": -0.25, "y_max": 1.5,
               "nx": 200, "ny": 280},
      "adatom_mass": 0.5,
      "schedule": [0.08, 0.04, 0.02],
      "seeds": [0, 1, 2],
      "lateral": "periodic"
    }
"""

from __future__ import annotations

import json

import numpy as np

from .elasticity import DisplacementBC, ElasticModel
from .envelopes import SurfaceDensity
from .geometry import BVProfile
from .grids import StripGrid
from .harness import DEFAULT_SCHEDULE, ExperimentSpec
from .phase_field import DoubleWell


class ConfigError(ValueError):
    pass


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing key {key!r} in {where}")
    return obj[key]


def profile_from_config(cfg: dict) -> BVProfile:
    kind = _need(cfg, "kind", "profile")
    a = float(cfg.get("a", 0.0))
    b = float(cfg.get("b", 1.0))
    if kind == "flat":
        return BVProfile.flat(float(cfg.get("height", 1.0)), a, b)
    if kind == "bump":
        h = float(cfg.get("height", 1.0))
        amp = float(cfg.get("amplitude", 0.15))
        n = int(cfg.get("n", 257))
        return BVProfile.from_callable(
            lambda x: h + amp * np.sin(np.pi * (x - a) / (b - a)) ** 2, a, b, n)
    if kind == "breakpoints":
        jumps = tuple(tuple(map(float, j)) for j in cfg.get("jumps", ()))
        cuts = tuple(tuple(map(float, c)) for c in cfg.get("cuts", ()))
        return BVProfile.from_breakpoints(cfg["xs"], cfg["ys"], jumps, cuts)
    raise ConfigError(f"unknown profile kind {kind!r}")


def psi_from_config(cfg: dict) -> SurfaceDensity:
    kind = _need(cfg, "kind", "psi")
    if kind == "constant":
        return SurfaceDensity.constant(float(cfg.get("value", 1.0)))
    if kind == "affine":
        return SurfaceDensity.affine(float(cfg.get("c0", 1.0)), float(cfg.get("c1", 0.0)))
    if kind == "quadratic":
        return SurfaceDensity.quadratic(float(cfg.get("c0", 1.0)),
                                        float(cfg.get("c1", 0.0)),
                                        float(cfg.get("c2", 1.0)))
    if kind == "samples":
        return SurfaceDensity.from_samples(cfg["s"], cfg["v"], cfg.get("tail_slope"))
    raise ConfigError(f"unknown psi kind {kind!r}")


def well_from_config(cfg: dict) -> DoubleWell:
    kind = cfg.get("kind", "quartic")
    if kind == "quartic":
        return DoubleWell.quartic(float(cfg.get("c", 1.0)))
    if kind == "samples":
        return DoubleWell.from_samples(cfg["t"], cfg["p"])
    raise ConfigError(f"unknown well kind {kind!r}")


def model_from_config(cfg: dict) -> ElasticModel:
    return ElasticModel.isotropic(float(cfg.get("lam", 1.0)),
                                  float(cfg.get("mu", 1.0)),
                                  float(cfg.get("t", 0.0)))


def grid_from_config(cfg: dict) -> StripGrid:
    return StripGrid(float(_need(cfg, "a", "grid")), float(_need(cfg, "b", "grid")),
                     float(_need(cfg, "y_min", "grid")), float(_need(cfg, "y_max", "grid")),
                     int(_need(cfg, "nx", "grid")), int(_need(cfg, "ny", "grid")))


def spec_from_config(cfg: dict) -> ExperimentSpec:
    bc = DisplacementBC(lateral=cfg.get("lateral", "periodic"))
    return ExperimentSpec(
        name=cfg.get("name", "experiment"),
        profile=profile_from_config(_need(cfg, "profile", "config")),
        psi=psi_from_config(_need(cfg, "psi", "config")),
        well=well_from_config(cfg.get("well", {})),
        model=model_from_config(cfg.get("model", {})),
        grid=grid_from_config(_need(cfg, "grid", "config")),
        adatom_mass=float(cfg.get("adatom_mass", 0.0)),
        film_mass=cfg.get("film_mass"),
        schedule=tuple(cfg.get("schedule", DEFAULT_SCHEDULE)),
        seeds=tuple(cfg.get("seeds", (0, 1, 2))),
        bc=bc,
        table_s_max=float(cfg.get("s_max", 16.0)),
        minimize_outer=int(cfg.get("outer", 25)),
    )


def load_config(path: str) -> dict:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg
