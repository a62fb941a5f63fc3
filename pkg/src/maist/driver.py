"""Refinement loop: build S_l, take its minimum average cycles, try to certify, refine."""

from __future__ import annotations

import dataclasses
import enum
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .abstraction import AbstractionError, BudgetExceeded, BuildBudget, TrafficModel, build, refine
from .cycles import enumerate_min_cycles, max_mean_cycle, min_mean_cycle
from .feasibility import CheckOptions
from .linalg import EIG_TOL
from .petc_model import PetcSystem, PlantSpec, build_system
from .verifier import PSD_TOL, Certificate, certify_cycle

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CERTIFIED = "Certified"
    BOUNDS_ONLY = "BoundsOnly"
    REFUSED = "Refused"


@dataclass(frozen=True)
class DriverOptions:
    l_max: int = 50
    candidate_limit: int = 16
    psd_tol: float = PSD_TOL
    eig_tol: float = EIG_TOL
    time_budget: Optional[float] = None
    check: CheckOptions = CheckOptions()
    budget: BuildBudget = BuildBudget()


@dataclass(frozen=True)
class LevelTrace:
    l: int
    states: int
    edges: int
    lower_bound: float
    upper_bound: float
    min_mean: Fraction
    max_mean: Fraction
    mac_pattern: tuple
    candidates_tried: int
    exact: bool


@dataclass
class MaistReport:
    status: Status
    h: float
    final_l: int
    lower_bound: float
    upper_bound: float
    maist: Optional[float] = None
    mean: Optional[Fraction] = None
    cycle: tuple = ()
    certificate: Optional[Certificate] = None
    exactness_caveats: list = field(default_factory=list)
    per_l_trace: list = field(default_factory=list)
    wall_time: float = 0.0
    model: Optional[TrafficModel] = field(default=None, repr=False)

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound

    def to_dict(self) -> dict:
        cert = None
        if self.certificate is not None:
            c = self.certificate
            cert = {
                "cycle": list(c.cycle),
                "basis": c.subspace.basis.tolist(),
                "eigenvalues": [[v.real, v.imag] for v in c.subspace.eigenvalues],
                "stage_margins": list(c.stage_margins),
            }
        return {
            "status": self.status.value,
            "h": self.h,
            "maist": self.maist,
            "mean": None if self.mean is None else str(self.mean),
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "gap": self.gap,
            "final_l": self.final_l,
            "cycle": list(self.cycle),
            "certificate": cert,
            "exactness_caveats": list(self.exactness_caveats),
            "per_l_trace": [
                {"l": t.l, "states": t.states, "edges": t.edges,
                 "lower_bound": t.lower_bound, "upper_bound": t.upper_bound,
                 "min_mean": str(t.min_mean), "max_mean": str(t.max_mean),
                 "mac_pattern": list(t.mac_pattern), "candidates_tried": t.candidates_tried,
                 "exact": t.exact}
                for t in self.per_l_trace
            ],
            "wall_time": self.wall_time,
        }


def scaled(h: float, mean: Fraction) -> float:
    """``h * mean`` rounded once, with ``h`` read as the decimal it was written as."""
    return float(Fraction(repr(h)) * mean)


def _system(system: Union[PlantSpec, PetcSystem]) -> PetcSystem:
    return build_system(system) if isinstance(system, PlantSpec) else system


def _next_model(model, sys, opts: DriverOptions) -> TrafficModel:
    if model is None:
        return build(sys, 1, opts.check, opts.budget)
    return refine(model, sys, opts.check, opts.budget)


def run(system: Union[PlantSpec, PetcSystem], options: DriverOptions = DriverOptions()) -> MaistReport:
    """Compute the MAIST, or bracket it, by refining up to ``options.l_max``."""
    if options.l_max < 1:
        raise ValueError("l_max must be >= 1")
    t0 = time.perf_counter()
    sys = _system(system)
    model = None
    trace: list[LevelTrace] = []
    caveats: list[str] = []
    last_assumption = False
    best_cycle = ()
    for l in range(1, options.l_max + 1):
        if options.time_budget is not None and l > 1 and time.perf_counter() - t0 > options.time_budget:
            caveats.append(f"time budget of {options.time_budget}s reached before l={l}")
            break
        try:
            model = _next_model(model, sys, options)
        except BudgetExceeded as exc:
            caveats.append(f"abstraction budget exhausted: {exc}")
            break
        lo = min_mean_cycle(model)
        hi = max_mean_cycle(model)
        macs = enumerate_min_cycles(model, options.candidate_limit, value=lo.mean)
        cert = None
        assumption_only = bool(macs)
        for c in macs:
            out = certify_cycle(sys, c.symbols, options.psd_tol, options.eig_tol)
            if out.certificate is not None:
                cert = out.certificate
                break
            if not out.assumption_violated or any("repeated" not in r.reason for r in out.refusals):
                assumption_only = False
        last_assumption = cert is None and assumption_only
        best_cycle = macs[0].symbols if macs else lo.symbols
        if trace and lo.value < trace[-1].lower_bound - 1e-12:
            caveats.append(f"lower bound decreased at l={l}")
        trace.append(LevelTrace(l=l, states=len(model.states), edges=len(model.edges),
                                lower_bound=lo.value, upper_bound=hi.value,
                                min_mean=lo.mean, max_mean=hi.mean, mac_pattern=best_cycle,
                                candidates_tried=len(macs), exact=model.exact))
        log.info("l=%d states=%d lower=%.6g upper=%.6g mac=%s", l, len(model.states),
                 lo.value, hi.value, best_cycle)
        if cert is not None:
            if not model.exact:
                caveats.append("certified modulo backend completeness: "
                               f"{len(model.unknown)} states of S_{l} rest on Unknown verdicts")
            return MaistReport(status=Status.CERTIFIED, h=sys.h, final_l=l,
                               lower_bound=lo.value, upper_bound=hi.value,
                               maist=scaled(sys.h, lo.mean), mean=lo.mean, cycle=cert.cycle,
                               certificate=cert, exactness_caveats=caveats, per_l_trace=trace,
                               wall_time=time.perf_counter() - t0, model=model)
    if not trace:
        raise AbstractionError("no abstraction level completed")
    if model is not None and not model.exact:
        caveats.append(f"S_{trace[-1].l} is over-approximate ({len(model.unknown)} Unknown states)")
    status = Status.REFUSED if last_assumption else Status.BOUNDS_ONLY
    if status is Status.REFUSED:
        caveats.append("every minimum average cycle violates the distinct-eigenvalue assumption")
    last = trace[-1]
    return MaistReport(status=status, h=sys.h, final_l=last.l, lower_bound=last.lower_bound,
                       upper_bound=last.upper_bound, cycle=best_cycle,
                       exactness_caveats=caveats, per_l_trace=trace,
                       wall_time=time.perf_counter() - t0, model=model)


def bounds_at(system: Union[PlantSpec, PetcSystem], l: int,
              options: DriverOptions = DriverOptions()) -> tuple[float, float]:
    """(h * min mean, h * max mean) of S_l."""
    sys = _system(system)
    model = build(sys, l, options.check, options.budget)
    return min_mean_cycle(model).value, max_mean_cycle(model).value


def options_dict(options: DriverOptions) -> dict:
    d = dataclasses.asdict(options)
    d["check"]["backend"] = options.check.backend.value if hasattr(options.check.backend, "value") \
        else str(options.check.backend)
    return d
