import numpy as np
import pytest

from boundarylab.conductivity import constant_field
from boundarylab.excursions import (arc_contains, decompose_excursions,
                                    excursion_counting_measure,
                                    excursion_jump_matching,
                                    excursions_from_contacts)
from boundarylab.geometry import UnitDisk
from boundarylab.simulate import PathSample, sample_path, simulate_reflected_ensemble

from conftest import make_rng

DISK = UnitDisk()
F_BM = constant_field(0.5)


def _interior_path():
    times = np.linspace(0, 1, 11)
    pts = np.zeros((11, 2))
    return PathSample(times, pts, np.zeros(11), np.zeros(11, dtype=bool),
                      np.full(11, np.nan))


def test_no_contacts_no_excursions():
    assert decompose_excursions(_interior_path(), 0.0) == []


def test_two_contacts_single_excursion():
    times = np.array([0.0, 0.2, 0.5, 0.9, 1.2])
    pts = np.zeros((5, 2))
    flags = np.array([False, True, False, True, False])
    L = np.array([0.0, 0.1, 0.1, 0.3, 0.3])
    thetas = np.array([np.nan, 0.3, np.nan, 1.1, np.nan])
    p = PathSample(times, pts, L, flags, thetas)
    exc = decompose_excursions(p, 0.0, keep_segments=True)
    assert len(exc) == 1
    e = exc[0]
    assert e.duration == pytest.approx(0.7)
    assert e.theta_start == pytest.approx(0.3)
    assert e.theta_end == pytest.approx(1.1)
    assert e.local_time_stamp == pytest.approx(0.1)
    assert e.segment is not None and len(e.segment) == 3


def test_counting_measure_zero_budget():
    p = sample_path(np.array([0.9, 0.0]), 0.4, 1e-3, F_BM, DISK, make_rng(30))
    exc = decompose_excursions(p, 0.0)
    assert excursion_counting_measure(exc, 0.0, (0, 2 * np.pi), (0, 2 * np.pi)) == 0


def test_counting_measure_full_circle_total():
    p = sample_path(np.array([0.9, 0.0]), 0.4, 1e-3, F_BM, DISK, make_rng(31))
    exc = decompose_excursions(p, 5e-3)
    total = excursion_counting_measure(exc, p.final_local_time + 1.0,
                                       (0, 2 * np.pi), (0, 2 * np.pi))
    above_zero_stamp = [e for e in exc if e.local_time_stamp > 0]
    assert total == len(above_zero_stamp)


def test_counting_measure_additive_over_arcs():
    p = sample_path(np.array([0.9, 0.0]), 0.6, 1e-3, F_BM, DISK, make_rng(32))
    exc = decompose_excursions(p, 5e-3)
    s_max = p.final_local_time
    full = excursion_counting_measure(exc, s_max, (0, 2 * np.pi), (0, 2 * np.pi))
    half1 = excursion_counting_measure(exc, s_max, (0, np.pi), (0, 2 * np.pi))
    half2 = excursion_counting_measure(exc, s_max, (np.pi, 2 * np.pi), (0, 2 * np.pi))
    assert half1 + half2 == full


def test_jump_excursion_bijection_exact():
    for seed in (33, 34, 35):
        p = sample_path(np.array([0.95, 0.1]), 2.0, 2e-3, F_BM, DISK, make_rng(seed))
        ne, nj, nm = excursion_jump_matching(p, 2e-2)
        assert ne == nj == nm
        assert ne > 0


def test_min_duration_monotone():
    p = sample_path(np.array([0.9, 0.0]), 0.8, 1e-3, F_BM, DISK, make_rng(36))
    counts = [len(decompose_excursions(p, md)) for md in (0.0, 1e-2, 5e-2)]
    assert counts[0] >= counts[1] >= counts[2]


def test_arc_contains_wraps():
    assert arc_contains(np.array([0.0]), -np.pi / 8, np.pi / 8)[0]
    assert arc_contains(np.array([2 * np.pi - 0.1]), -np.pi / 8, np.pi / 8)[0]
    assert not arc_contains(np.array([np.pi]), -np.pi / 8, np.pi / 8)[0]
    assert arc_contains(np.array([np.pi]), 7 * np.pi / 8, 9 * np.pi / 8)[0]


def test_excursions_from_contacts_pools_paths():
    n = 40
    rng = make_rng(37)
    th0 = DISK.sample_boundary_theta(n, rng)
    res = simulate_reflected_ensemble(DISK.boundary_xy(th0), F_BM, DISK, rng, 1e-3,
                                      s_budget=0.3, collect_contacts=True,
                                      start_on_boundary_theta=th0)
    th_s, th_e, dur, st = excursions_from_contacts(res.contacts, 1e-2)
    assert len(th_s) == len(th_e) == len(dur) == len(st)
    assert np.all(dur >= 1e-2)
    assert len(th_s) > 0


def test_duration_survival_tail_exponent():
    # excursion durations of the reflecting Brownian path: the number
    # surviving past t scales like t^(-1/2) between the step resolution
    # and the domain scale
    dt = 2e-4
    n = 160
    rng = make_rng(38)
    th0 = DISK.sample_boundary_theta(n, rng)
    res = simulate_reflected_ensemble(DISK.boundary_xy(th0), F_BM, DISK, rng, dt,
                                      s_budget=0.5, collect_contacts=True,
                                      start_on_boundary_theta=th0)
    _, _, dur, _ = excursions_from_contacts(res.contacts, 10 * dt)
    lo, hi = 20 * dt, 0.05
    grid = np.geomspace(lo, hi, 10)
    surv = np.array([(dur >= g).sum() for g in grid], dtype=float)
    assert surv[0] > 200
    slope = np.polyfit(np.log(grid), np.log(surv), 1)[0]
    assert abs(slope + 0.5) < 0.1


def test_long_excursions_reach_farther():
    # endpoint separation grows with excursion duration: long excursions
    # concentrate at large angular separation (the far field of the kernel)
    from boundarylab.boundary import wrap_separation
    from boundarylab.simulate import simulate_reflected_ensemble

    rng = make_rng(39)
    n = 3000
    th0 = DISK.sample_boundary_theta(n, rng)
    res = simulate_reflected_ensemble(DISK.boundary_xy(th0), F_BM, DISK, rng, 1e-4,
                                      s_budget=0.4, collect_contacts=True,
                                      start_on_boundary_theta=th0)
    th_s, th_e, dur, _ = excursions_from_contacts(res.contacts, 1e-3)
    sep = np.abs(wrap_separation(th_s, th_e))
    long_sel = dur >= np.quantile(dur, 0.9)
    assert np.median(sep[long_sel]) > 3.0 * np.median(sep[~long_sel])
