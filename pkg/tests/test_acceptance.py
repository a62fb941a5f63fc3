"""Acceptance criteria, one PASS/FAIL line each (shown in the terminal summary)."""

import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, fixture_system, plant_system
from maist.abstraction import build
from maist.cycles import min_mean_cycle
from maist.driver import DriverOptions, Status, run
from maist.sim_oracle import pattern_detect, simulate

TESTS = Path(__file__).resolve().parent


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def table1():
    limits = {0.5: 10, 0.4: 12, 0.3: 50, 0.2: 50, 0.1: 50}
    return {s: run(plant_system(s), DriverOptions(l_max=l)) for s, l in limits.items()}


def simulates_cycle(sys, cert, periods=3, count=100):
    rng = np.random.default_rng(7)
    basis = cert.subspace.basis
    j = len(cert.cycle)
    return all(simulate(sys, basis @ rng.standard_normal(basis.shape[1]), periods * j).symbols
               == cert.cycle * periods for _ in range(count))


def test_criterion_1_table1_core(table1):
    r5, r4 = table1[0.5], table1[0.4]
    ok = (r5.status is Status.CERTIFIED and r5.mean == 6 and r5.maist == 0.3 and r5.final_l <= 10
          and r4.status is Status.CERTIFIED and r4.mean == 5 and r4.maist == 0.25
          and r4.final_l <= 12 and max(r5.wall_time, r4.wall_time) <= 300)
    report(1, ok, f"sigma=0.5: {r5.status.value} {r5.maist} = {r5.mean}h at l={r5.final_l}, "
                  f"{r5.wall_time:.1f}s; sigma=0.4: {r4.status.value} {r4.maist} = {r4.mean}h "
                  f"at l={r4.final_l}, {r4.wall_time:.1f}s")


def test_criterion_2_table1_extended(table1):
    parts, ok = [], True
    for sigma, want, length in ((0.2, 0.137, 27), (0.3, 0.171, 28)):
        rep = table1[sigma]
        if rep.status is Status.CERTIFIED:
            good = (abs(rep.maist - want) <= 0.001 and len(rep.cycle) == length
                    and simulates_cycle(plant_system(sigma), rep.certificate))
            parts.append(f"sigma={sigma}: {rep.maist:.6f} = {rep.mean}h, cycle length "
                         f"{len(rep.cycle)}, l={rep.final_l}")
        else:
            # partial criterion: the bracket holds the published value
            good = rep.lower_bound <= want <= rep.upper_bound
            parts.append(f"sigma={sigma}: {rep.status.value} [{rep.lower_bound:.5f}, "
                         f"{rep.upper_bound:.5f}] at l={rep.final_l}")
        ok &= good
    report(2, ok, "; ".join(parts))


def test_criterion_3_sigma01_bounds(table1):
    rep = table1[0.1]
    lo, hi = rep.lower_bound, rep.upper_bound
    ok = rep.final_l == 50 and lo <= 0.0786 + 0.0005
    # l = 50 completed: full match to the three significant figures published
    ok &= round(lo, 4) == 0.0786 and round(hi, 4) == 0.0798 and hi - lo <= 0.002
    report(3, ok, f"{rep.status.value} at l={rep.final_l}: [{lo:.6f}, {hi:.6f}], gap {hi - lo:.6f}")


def test_criterion_4_fig2_fixture():
    sys = fixture_system("fig2")
    want_states = {
        1: {(1,), (2,)},
        2: {(1, 2), (2, 1), (2, 2)},
        3: {(1, 2, 2), (2, 1, 2), (2, 2, 1), (2, 2, 2)},
    }
    want_edges = {
        1: {((1,), (1,)), ((1,), (2,)), ((2,), (1,)), ((2,), (2,))},
        2: {((1, 2), (2, 1)), ((1, 2), (2, 2)), ((2, 1), (1, 2)), ((2, 2), (2, 1)),
            ((2, 2), (2, 2))},
        3: {((1, 2, 2), (2, 2, 2)), ((1, 2, 2), (2, 2, 1)), ((2, 1, 2), (1, 2, 2)),
            ((2, 2, 1), (2, 1, 2)), ((2, 2, 2), (2, 2, 2)), ((2, 2, 2), (2, 2, 1))},
    }
    ok = True
    means, patterns = [], []
    for l in (1, 2, 3):
        model = build(sys, l)
        ok &= set(model.states) == want_states[l] and set(model.edges) == want_edges[l]
        res = min_mean_cycle(model)
        means.append(res.mean)
        patterns.append(res.symbols)
    ok &= means == [1, Fraction(3, 2), Fraction(5, 3)]
    ok &= patterns == [(1,), (1, 2), (1, 2, 2)]
    rep = run(sys, DriverOptions(l_max=6))
    ok &= rep.status is Status.CERTIFIED and rep.final_l == 3 and rep.mean == Fraction(5, 3)
    report(4, ok, f"S_1..S_3 as drawn, MAC means {', '.join(str(m) for m in means)}, "
                  f"patterns {patterns}, {rep.status.value} at l={rep.final_l}")


def test_criterion_5_rotation_fixture():
    sys = fixture_system("rotation")
    rep = run(sys, DriverOptions(l_max=12))
    traj = simulate(sys, [1.0, 0.3], 1000)
    period = pattern_detect(traj, max_period=100)
    ok = rep.status is Status.BOUNDS_ONLY and rep.final_l == 12 and period is None
    report(5, ok, f"{rep.status.value} at l={rep.final_l} "
                  f"[{rep.lower_bound:.4f}, {rep.upper_bound:.4f}], period <= 100: {period}")


PROPERTY_SUITES = [
    "test_cycles.py::test_karp_matches_exhaustive_search",
    "test_verifier.py::test_definiteness_of_restriction_matches_sampling",
    "test_cycles.py::test_monotone_under_refinement",
    "test_abstraction.py::test_behavioral_inclusion",
    "test_verifier.py::test_certificates_reproduce_their_cycle",
]


def test_criterion_6_property_suites():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(TESTS / s) for s in PROPERTY_SUITES]],
                          cwd=TESTS.parent, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(6, proc.returncode == 0 and elapsed < 60, f"{summary}; {elapsed:.1f}s wall")


def test_criterion_7_wall_time_reported_only(table1):
    ok = all(rep.wall_time > 0 and "wall_time" in rep.to_dict() for rep in table1.values())
    report(7, ok, "wall time recorded in every report, never compared to published CPU times")
