import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import H, KBAR, plant_system
from maist.petc_model import PetcSystem
from maist.sim_oracle import (Trajectory, empirical_aist, empirical_aist_batch, pattern_detect,
                              running_averages, sample_initial_states, simulate, simulate_batch,
                              write_trace)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
# e1 triggers at 1, e2 at 2, and the swap alternates them: (1,2) forever
ALTERNATING = PetcSystem(M=(SWAP, SWAP), N=(np.diag([1.0, -1.0]),), h=0.1, kbar=2)


def test_origin_triggers_at_kbar(sys05):
    assert simulate(sys05, np.zeros(2), 50).symbols == (KBAR,) * 50


def test_scaling_does_not_change_symbols(sys05, rng):
    for x in rng.standard_normal((20, 2)):
        assert simulate(sys05, x, 100).symbols == simulate(sys05, 2 * x, 100).symbols
        assert simulate(sys05, x, 100).symbols == simulate(sys05, -1e-6 * x, 100).symbols


def test_renormalization_does_not_change_symbols(sys05, rng):
    from maist.petc_model import kappa
    x = rng.standard_normal(2)
    raw = []
    x_raw = x.copy()
    for _ in range(40):  # short enough to stay clear of underflow
        k = kappa(sys05, x_raw)
        raw.append(k)
        x_raw = sys05.m(k) @ x_raw
    traj = simulate(sys05, x, 40)
    assert traj.renormalized
    assert traj.symbols == tuple(raw)


def test_constant_trajectory_average(sys05):
    assert empirical_aist(sys05, np.zeros(2), 100) == pytest.approx(H * KBAR)


def test_alternating_pattern_average():
    assert empirical_aist(ALTERNATING, [0.0, 1.0], 1000) == pytest.approx(0.15, abs=1e-15)
    # starting on the short symbol leaves an O(1/steps) dip
    assert abs(empirical_aist(ALTERNATING, [1.0, 0.0], 1000) - 0.15) <= 0.1 / 1000


def test_running_averages():
    assert np.allclose(running_averages(ALTERNATING, (1, 2, 1, 2)), [0.1, 0.15, 4 / 30, 0.15])


def test_pattern_examples():
    assert pattern_detect((1, 2, 2) * 20) == (0, 3)
    assert pattern_detect((4,) * 30) == (0, 1)
    assert pattern_detect((3, 1) + (5, 6) * 20) == (2, 2)
    assert pattern_detect(list(range(1, 41))) is None
    with pytest.raises(ValueError):
        pattern_detect((1, 2, 3))


def test_rotation_trace_has_no_short_period(rotation):
    traj = simulate(rotation, [1.0, 0.3], 1000)
    assert set(traj.symbols) == {1, 2}
    assert pattern_detect(traj, max_period=100) is None


def test_certified_subspace_gives_constant_six(sys05):
    from maist.driver import DriverOptions, run
    rep = run(sys05, DriverOptions(l_max=10))
    v = rep.certificate.subspace.basis[:, 0]
    assert simulate(sys05, v, 200).symbols == (6,) * 200


def test_min_empirical_aist_sigma04():
    sys = plant_system(0.4)
    vals = empirical_aist_batch(sys, sample_initial_states(2, 1000, seed=0), 1000)
    assert abs(vals.min() - 0.25) <= 0.005


def test_batch_matches_single_trajectories(rng):
    sys = plant_system(0.3)
    x0s = rng.standard_normal((25, 2))
    x0s[3] = 0.0
    batch = simulate_batch(sys, x0s, 120)
    for x, row in zip(x0s, batch):
        assert tuple(row) == simulate(sys, x, 120).symbols
    single = [empirical_aist(sys, x, 120) for x in x0s]
    assert np.allclose(empirical_aist_batch(sys, x0s, 120), single, rtol=0, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([0.1, 0.2, 0.3, 0.4, 0.5]), st.floats(-np.pi, np.pi), st.integers(1, 200))
def test_empirical_aist_range(sigma, theta, steps):
    sys = plant_system(sigma)
    v = empirical_aist(sys, [np.cos(theta), np.sin(theta)], steps)
    assert H - 1e-15 <= v <= H * KBAR + 1e-15


def test_sample_initial_states_deterministic():
    a = sample_initial_states(2, 64, seed=3)
    assert np.array_equal(a, sample_initial_states(2, 64, seed=3))
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)


def test_write_trace_csv():
    traj = simulate(ALTERNATING, [0.0, 1.0], 4)
    buf = io.StringIO()
    write_trace(ALTERNATING, traj, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["step", "symbol", "running_average"]
    assert [r[1] for r in rows[1:]] == ["2", "1", "2", "1"]
    assert float(rows[2][2]) == pytest.approx(0.15)


def test_trajectory_fields(sys05):
    t = simulate(sys05, [3.0, 4.0], 5)
    assert isinstance(t, Trajectory)
    assert np.allclose(t.initial, [0.6, 0.8])
    assert all(1 <= k <= KBAR for k in t.symbols)
