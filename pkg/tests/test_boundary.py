import numpy as np
import pytest
from hypothesis import given, strategies as st

from boundarylab.boundary import (BoundaryTrace, boundary_trace,
                                  change_of_variables_check, jump_events,
                                  local_time_inverse, rescale_path,
                                  scaling_check, trace_from_contacts,
                                  wrap_separation)
from boundarylab.conductivity import constant_field
from boundarylab.geometry import UnitDisk
from boundarylab.simulate import PathSample, sample_path

from conftest import make_rng

DISK = UnitDisk()
F_BM = constant_field(0.5)


def make_step_record(jump_times, jump_sizes, t_end):
    """Synthetic PathSample with local-time atoms at given clock times."""
    times = [0.0]
    L = [0.0]
    flags = [False]
    thetas = [np.nan]
    acc = 0.0
    for tj, dl in zip(jump_times, jump_sizes):
        times.append(tj)
        acc += dl
        L.append(acc)
        flags.append(True)
        thetas.append(0.1 * tj)
    if t_end > times[-1]:
        times.append(t_end)
        L.append(acc)
        flags.append(False)
        thetas.append(np.nan)
    pts = np.zeros((len(times), 2))
    pts[:, 0] = 0.5
    return PathSample(np.array(times), pts, np.array(L),
                      np.array(flags), np.array(thetas))


def random_record(seed, n=12):
    r = np.random.default_rng(seed)
    jt = np.sort(r.uniform(0.1, 5.0, n))
    js = r.uniform(0.01, 0.5, n)
    return make_step_record(jt, js, 6.0)


# -- inverse local time ------------------------------------------------------

def test_inverse_simple_record():
    p = make_step_record([1.0], [1.0], 2.0)
    # L = 0 on [0,1), L = 1 from t=1 on
    assert local_time_inverse(p, 0.5) == 1.0
    assert local_time_inverse(p, 0.0) == 1.0  # sup of {r : L_r <= 0} = [0, 1)
    assert local_time_inverse(p, 1.0) == 2.0  # whole record


def test_inverse_out_of_range():
    p = make_step_record([1.0], [1.0], 2.0)
    with pytest.raises(ValueError):
        local_time_inverse(p, 1.5)
    with pytest.raises(ValueError):
        local_time_inverse(p, -0.1)


def _brute_inverse(path, s):
    # independent brute-force scan of sup{ r : L_r <= s }
    for i in range(len(path.times)):
        if path.local_time[i] > s:
            return path.times[i]
    return path.times[-1]


@given(st.integers(0, 500), st.floats(0, 1))
def test_inverse_matches_brute_force(seed, frac):
    p = random_record(seed)
    s = frac * p.final_local_time
    assert local_time_inverse(p, s) == _brute_inverse(p, s)


@given(st.integers(0, 200), st.floats(0, 1), st.floats(0, 1))
def test_inverse_monotone(seed, f1, f2):
    p = random_record(seed)
    s1, s2 = sorted([f1 * p.final_local_time, f2 * p.final_local_time])
    assert local_time_inverse(p, s1) <= local_time_inverse(p, s2)


@given(st.integers(0, 200), st.floats(0.001, 0.999))
def test_right_inverse_properties(seed, frac):
    p = random_record(seed)
    s = frac * p.final_local_time
    tau = local_time_inverse(p, s)
    j = np.searchsorted(p.times, tau)
    assert p.local_time[j] >= s - 1e-15
    assert p.local_time[j - 1] <= s + 1e-15


# -- traces and jumps --------------------------------------------------------

def test_empty_grid_empty_trace():
    p = random_record(0)
    tr = boundary_trace(p, np.array([]))
    assert len(tr) == 0


def test_trace_values_on_boundary():
    p = sample_path(np.array([0.95, 0.0]), 3.0, 2e-3, F_BM, DISK, make_rng(20))
    assert p.final_local_time > 0
    grid = np.linspace(0, p.final_local_time, 25)
    tr = boundary_trace(p, grid)
    xy = tr.xi_values(DISK)
    assert np.allclose(np.hypot(xy[:, 0], xy[:, 1]), 1.0, atol=1e-12)
    assert np.all(np.diff(tr.source_tau) >= 0)


def test_constant_trace_no_jumps():
    tr = BoundaryTrace(np.array([0.0, 0.5, 1.0]), np.array([0.3, 0.3, 0.3]),
                       np.array([0.0, 1.0, 2.0]))
    assert jump_events(tr, 0.01) == []


def test_jump_above_max_separation_impossible():
    tr = BoundaryTrace(np.array([0.0, 0.5]), np.array([0.0, 3.0]),
                       np.array([0.0, 1.0]))
    assert jump_events(tr, np.pi + 1e-6) == []


def test_jump_count_nonincreasing_in_min_angle():
    p = sample_path(np.array([0.98, 0.0]), 0.8, 5e-4, F_BM, DISK, make_rng(21))
    contacts = p.boundary_flags
    tr = trace_from_contacts(p.times[contacts], p.thetas[contacts],
                             np.concatenate([[0], np.diff(p.local_time[contacts])]))
    counts = [len(jump_events(tr, a)) for a in (0.05, 0.1, 0.3, 1.0)]
    assert all(c1 >= c2 for c1, c2 in zip(counts, counts[1:]))
    ev = jump_events(tr, 0.1)
    for e in ev:
        assert abs(wrap_separation(e.theta_from, e.theta_to)) >= 0.1
        assert e.gap > 0


# -- change of variables -----------------------------------------------------

def test_cvf_constant_function_exact():
    p = random_record(7)
    a, b = 0.25 * p.final_local_time, 0.75 * p.final_local_time
    lhs, rhs = change_of_variables_check(p, lambda t: 1.0, a, b)
    assert lhs == pytest.approx(b - a, abs=1e-14)
    assert rhs == pytest.approx(b - a, abs=1e-14)


def test_cvf_zero_function():
    p = random_record(8)
    lhs, rhs = change_of_variables_check(p, lambda t: 0.0, 0.0, p.final_local_time)
    assert lhs == 0.0 and rhs == 0.0


@given(st.integers(0, 300), st.floats(0, 1), st.floats(0, 1))
def test_cvf_identity_on_step_records(seed, f1, f2):
    p = random_record(seed)
    a, b = sorted([f1 * p.final_local_time, f2 * p.final_local_time])
    for f in (lambda t: t, lambda t: t * t - 3.0, np.cos):
        lhs, rhs = change_of_variables_check(p, f, a, b)
        assert abs(lhs - rhs) < 1e-12


def test_cvf_rejects_reversed_interval():
    p = random_record(1)
    with pytest.raises(ValueError):
        change_of_variables_check(p, lambda t: 1.0, 1.0, 0.5)


# -- scaling laws -------------------------------------------------------------

def test_scaling_identity_R1():
    p = sample_path(np.array([0.9, 0.0]), 0.5, 1e-3, F_BM, DISK, make_rng(22))
    rep = scaling_check(p, 1.0)
    assert rep["L_final_error"] == 0.0
    assert rep["tau_error"] == 0.0
    assert rep["trace_error"] == 0.0


@pytest.mark.parametrize("R", [2.0, 0.5, 3.7])
def test_scaling_laws_exact(R):
    p = sample_path(np.array([0.9, 0.1]), 0.8, 1e-3, F_BM, DISK, make_rng(23))
    rep = scaling_check(p, R)
    assert rep["L_final_error"] < 1e-12
    assert rep["tau_error"] == 0.0
    assert rep["trace_error"] < 1e-12
    scaled = rescale_path(p, R)
    assert scaled.local_time[-1] == pytest.approx(R * p.local_time[-1], rel=1e-15)


# -- contact-stream traces ----------------------------------------------------

def test_trace_from_contacts_level_structure():
    # contacts at t = 1, 2, 3 with increments 0.5, 0.25, 0.25
    tr = trace_from_contacts([1.0, 2.0, 3.0], [0.1, 0.2, 0.3], [0.5, 0.25, 0.25])
    # value on [0, 0.5) is theta of the first contact, etc.
    assert tr.at_s(np.array([0.0]))[0] == pytest.approx(0.1)
    assert tr.at_s(np.array([0.49]))[0] == pytest.approx(0.1)
    assert tr.at_s(np.array([0.5]))[0] == pytest.approx(0.2)
    assert tr.at_s(np.array([0.75]))[0] == pytest.approx(0.3)
    # total accrued local time includes the last contact's increment
    assert tr.s_final == pytest.approx(1.0)
    assert tr.s_values[-1] == pytest.approx(0.75)


def test_default_s_grid_median_spacing():
    p = sample_path(np.array([0.95, 0.0]), 2.0, 2e-3, F_BM, DISK, make_rng(24))
    assert p.final_local_time > 0
    from boundarylab.boundary import default_s_grid

    grid = default_s_grid(p)
    dL = np.diff(p.local_time)
    med = np.median(dL[dL > 0])
    assert np.allclose(np.diff(grid), med)
    assert grid[-1] <= p.final_local_time
    tr = boundary_trace(p)  # default grid
    assert len(tr) == len(grid)
