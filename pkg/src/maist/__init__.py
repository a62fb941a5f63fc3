"""Minimum average inter-sample time (MAIST) of linear periodic event-triggered control.

Typical use::

    from maist import PlantSpec, TabuadaSigma, run

    spec = PlantSpec(A=[[0, 1], [-2, 3]], B=[[0], [1]], K=[[0, -5]],
                     trigger=TabuadaSigma(0.5), h=0.05, kbar=20)
    report = run(spec)
    report.status, report.maist
"""

__version__ = "0.1.0"

from .abstraction import TrafficModel, build, refine
from .cycles import CycleResult, enumerate_min_cycles, max_mean_cycle, min_mean_cycle
from .driver import DriverOptions, MaistReport, Status, bounds_at, run
from .feasibility import Backend, CheckOptions, ConeConjunction, check, pullback
from .petc_model import PetcSystem, PlantSpec, RawQ, TabuadaSigma, build_system, kappa, region
from .sim_oracle import empirical_aist, pattern_detect, simulate
from .verifier import candidate_subspaces, certify_cycle, cycle_matrix, verify
