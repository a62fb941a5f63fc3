"""Loading and validating analysis configuration files (YAML or JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np
import yaml

from .abstraction import BuildBudget
from .driver import DriverOptions
from .feasibility import Backend, CheckOptions
from .linalg import EIG_TOL
from .petc_model import ModelError, PetcSystem, PlantSpec, RawQ, TabuadaSigma, build_system
from .verifier import PSD_TOL


class ConfigError(ValueError):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("maist").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


DEFAULTS: dict = {
    "name": "",
    "analysis": {"l_max": 50, "candidate_limit": 16, "time_budget": None},
    "tolerances": {"psd_tol": PSD_TOL, "margin_tol": 1e-9, "angle_tol": 1e-6, "eig_tol": EIG_TOL},
    "feasibility": {"backend": "auto", "samples": 10_000, "refine_steps": 50,
                    "solver_cmd": None, "solver_timeout": 60.0},
    "budget": {"max_states": 100_000, "max_checks": 2_000_000},
    "workers": 1,
    "seed": 0,
    "output": {"report": None, "table": None, "trace_csv": None, "abstraction": None},
}


@dataclass
class Config:
    raw: dict
    systems: list = field(default_factory=list)  # (trigger id, PetcSystem)

    @property
    def name(self) -> str:
        return self.raw["name"]

    def driver_options(self) -> DriverOptions:
        a, t, f, b = (self.raw[k] for k in ("analysis", "tolerances", "feasibility", "budget"))
        check = CheckOptions(backend=Backend(f["backend"]), margin_tol=t["margin_tol"],
                             angle_tol=t["angle_tol"], samples=f["samples"],
                             refine_steps=f["refine_steps"], seed=self.raw["seed"],
                             solver_cmd=f["solver_cmd"], solver_timeout=f["solver_timeout"])
        budget = BuildBudget(max_states=b["max_states"], max_checks=b["max_checks"],
                             workers=self.raw["workers"])
        return DriverOptions(l_max=a["l_max"], candidate_limit=a["candidate_limit"],
                             psd_tol=t["psd_tol"], eig_tol=t["eig_tol"],
                             time_budget=a["time_budget"], check=check, budget=budget)

    def settings(self) -> dict:
        """Effective settings, defaults included, for the report."""
        return {k: v for k, v in self.raw.items() if k not in ("plant", "system", "trigger")}

    def select(self, trigger: Optional[str] = None) -> tuple:
        if trigger is None:
            return self.systems[0]
        for tid, sys in self.systems:
            if tid == trigger or tid == f"sigma={trigger}":
                return tid, sys
        raise ConfigError(f"no trigger {trigger!r}; available: {[t for t, _ in self.systems]}")


def _merge(defaults: dict, given: dict) -> dict:
    out = dict(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(defaults.get(k), dict):
            out[k] = _merge(defaults[k], v)
        else:
            out[k] = v
    return out


def _matrix(value, where: str) -> np.ndarray:
    widths = {len(row) for row in value}
    if len(widths) != 1:
        raise ConfigError(f"{where}: ragged rows (row lengths {sorted(widths)})")
    return np.array(value, dtype=float)


def validate(data: Any) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")
    return _merge(DEFAULTS, data)


def _systems(cfg: dict) -> list:
    h, kbar = cfg["h"], cfg["kbar"]
    if "system" in cfg:
        ms = [_matrix(m, f"system.M[{i}]") for i, m in enumerate(cfg["system"]["M"])]
        ns = [_matrix(m, f"system.N[{i}]") for i, m in enumerate(cfg["system"]["N"])]
        return [("raw", PetcSystem(M=tuple(ms), N=tuple(ns), h=h, kbar=kbar, name=cfg["name"]))]

    a = _matrix(cfg["plant"]["A"], "plant.A")
    b = _matrix(cfg["plant"]["B"], "plant.B")
    k = _matrix(cfg["plant"]["K"], "plant.K")
    trig = cfg["trigger"]
    triggers = []
    sigmas = list(trig.get("sigma_list", []))
    if "sigma" in trig:
        sigmas.insert(0, trig["sigma"])
    for s in sigmas:
        triggers.append((f"sigma={s:g}", TabuadaSigma(float(s))))
    if "Q" in trig:
        triggers.append(("Q", RawQ(_matrix(trig["Q"], "trigger.Q"))))
    if not triggers:
        raise ConfigError("trigger: give sigma, a nonempty sigma_list, or Q")
    out = []
    for tid, t in triggers:
        spec = PlantSpec(A=a, B=b, K=k, trigger=t, h=h, kbar=kbar)
        out.append((tid, build_system(spec, name=f"{cfg['name']} {tid}".strip())))
    return out


def parse(data: Any) -> Config:
    cfg = validate(data)
    try:
        systems = _systems(cfg)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    return Config(raw=cfg, systems=systems)


def load(path) -> Config:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from exc
    return parse(data)
