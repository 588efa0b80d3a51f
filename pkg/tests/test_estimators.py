import numpy as np
import pytest

import boundarylab.estimators as est
import boundarylab.reference as ref
from boundarylab.boundary import BoundaryTrace
from boundarylab.conductivity import constant_field, radial_poly_field
from boundarylab.geometry import UnitDisk

from conftest import make_rng

DISK = UnitDisk()
F_BM = constant_field(0.5)
F_ONE = constant_field(1.0)


def test_hitting_uniform_smoke():
    law = est.estimate_hitting_law(np.zeros(2), F_ONE, DISK, make_rng(40),
                                   20_000, 8, 1e-3, reference="uniform")
    assert np.allclose(law.freq.sum(), 1.0)
    assert np.max(np.abs(law.freq - 0.125)) < 5 * np.max(law.stderr)


def test_hitting_mirror_symmetry_radial_field():
    # radial conductivity, start on the x-axis: the exit law is symmetric
    # under reflection across that axis
    f = radial_poly_field([1.0, 1.0])
    law = est.estimate_hitting_law(np.array([0.5, 0.0]), f, DISK, make_rng(41),
                                   30_000, 12, 1e-3, reference="none")
    assert np.isnan(law.sup_rel_dev)
    asym = np.abs(law.freq - law.freq[::-1])
    assert np.max(asym) < 5 * np.max(law.stderr)


def test_fk_dirichlet_constant_datum_zero_variance():
    e = est.feynman_kac_dirichlet(np.array([0.2, 0.1]),
                                  lambda th: np.full_like(th, 4.2),
                                  F_ONE, DISK, make_rng(42), 500, 1e-3)
    assert e.value == pytest.approx(4.2, abs=1e-14)
    assert e.stderr == pytest.approx(0.0, abs=1e-14)


def test_fk_neumann_rejects_unconserved_current():
    with pytest.raises(ValueError, match="conserved"):
        est.feynman_kac_neumann(np.array([0.3, 0.0]),
                                lambda th: np.ones_like(th),
                                F_ONE, DISK, make_rng(43), 1.0, 100, 1e-3)


def test_revuz_resolution_guard():
    with pytest.raises(ValueError, match="resolution"):
        est.revuz_check(F_BM, DISK, np.cos, 5e-3, 100, make_rng(44), 1e-3)


def test_revuz_odd_datum_near_zero():
    lhs, rhs = est.revuz_check(F_BM, DISK, np.cos, 0.2, 20_000, make_rng(45), 1e-3)
    assert rhs == pytest.approx(0.0, abs=1e-12)
    assert abs(lhs.value) < 4 * lhs.stderr


def test_revuz_indicator_half_circle():
    phi = lambda th: (np.mod(th, 2 * np.pi) < np.pi).astype(float)
    lhs, rhs = est.revuz_check(F_BM, DISK, phi, 0.2, 25_000, make_rng(46), 1e-3)
    assert rhs == pytest.approx(np.pi, rel=1e-9)
    assert abs(lhs.value - rhs) < max(4 * lhs.stderr, 0.05 * rhs)


def _synthetic_trace(jumps, s_final, t_scale=0.1):
    """Trace holding theta = 0, then jumping by the given displacements."""
    th = np.concatenate([[0.0], np.cumsum(jumps)])
    s = np.linspace(0.0, s_final, len(th))
    tau = t_scale * np.arange(len(th))
    return BoundaryTrace(s, th, tau)


def test_jump_kernel_normalization_deterministic():
    # jumps at local-time stamps 2/3, 4/3, 2 (sizes pi/2, pi/2, pi);
    # five identical traces: density = count / (2 * total_s * width)
    tr = _synthetic_trace([np.pi / 2, -np.pi / 2, np.pi], 2.0)
    traces = [tr] * 5
    edges = np.array([np.pi / 4, 3 * np.pi / 4, np.pi])
    ke = est.estimate_jump_kernel(traces, 2.0, edges, np.pi / 4)
    total_s = 10.0
    assert ke.total_s == pytest.approx(total_s)
    assert ke.counts[0] == 10  # two pi/2 jumps per trace
    assert ke.counts[1] == 5   # pi jumps
    assert ke.density[0] == pytest.approx(10 / (2 * total_s * (np.pi / 2)))
    assert ke.density[1] == pytest.approx(5 / (2 * total_s * (np.pi / 4)))
    assert ke.low_confidence[0] and ke.low_confidence[1]


def test_jump_kernel_resolution_guard():
    tr = _synthetic_trace([np.pi / 2], 1.0)
    with pytest.raises(ValueError, match="resolution"):
        est.estimate_jump_kernel([tr], 1.0, np.array([0.1, 1.0]), 0.5)


def test_generator_probe_constant_trace_zero():
    tr = BoundaryTrace(np.array([0.0, 1.0]), np.array([0.3, 0.3]),
                       np.array([0.0, 1.0]), start_theta=0.3)
    centers, probe, se, n_per = est.generator_probe([tr] * 20, np.cos, 0.5, 4)
    assert np.allclose(probe, 0.0, atol=1e-14)
    assert n_per.sum() == 20


def test_spectral_decay_synthetic_exponential():
    # traces built from an exact jump chain whose mode-1 characteristic
    # function decays at rate lambda = 0.5: increments are Cauchy with
    # scale 0.5 * lag (circular Cauchy char. function e^{-n lambda t})
    rngl = np.random.default_rng(11)
    lam = 0.5
    traces = []
    for _ in range(160):
        s = np.linspace(0, 12.0, 1201)
        incr = lam * np.diff(s) * np.tan(np.pi * (rngl.uniform(size=1200) - 0.5))
        th = np.concatenate([[0.0], np.cumsum(incr)])
        traces.append(BoundaryTrace(s, th, s.copy()))
    e = est.spectral_decay(traces, 1, np.array([0.25, 0.5, 0.75, 1.0]))
    assert e.value == pytest.approx(lam, rel=0.08)
    assert e.stderr < 0.05


def test_levy_identity_overlapping_arcs_rejected():
    op = ref.dtn_eigenvalues_radial(F_BM, 16)
    tr = _synthetic_trace([np.pi], 2.0)
    with pytest.raises(ValueError, match="diagonal"):
        est.levy_identity_check([tr], (0.0, 1.0), (0.5, 1.2), 1.0, op)


def test_levy_identity_counts_synthetic():
    # one A->B jump per trace with stamp 0.8 <= t = 1; a second jump at
    # stamp 1.6 falls outside the window
    a = (-np.pi / 8, np.pi / 8)
    b = (7 * np.pi / 8, 9 * np.pi / 8)
    s = np.array([0.0, 0.3, 0.8, 1.6])
    th = np.array([0.0, 0.0, np.pi, 0.0])
    tau = np.array([0.0, 0.5, 1.0, 1.5])
    tr = BoundaryTrace(s, th, tau, s_total=2.0)
    op = ref.dtn_eigenvalues_radial(F_BM, 32)
    lhs, rhs = est.levy_identity_check([tr] * 7, a, b, 1.0, op)
    assert lhs.value == pytest.approx(1.0)
    assert rhs > 0


def test_kernel_distance_identical_zero():
    op = ref.dtn_eigenvalues_radial(F_BM, 32)
    edges = np.linspace(np.pi / 8, np.pi, 9)
    k1 = est.reference_kernel_estimate(op, edges, np.pi / 8)
    assert est.kernel_distance(k1, k1) == 0.0


def test_kernel_distance_separates_conductivities():
    edges = np.linspace(np.pi / 8, np.pi, 9)
    k_half = est.reference_kernel_estimate(ref.dtn_eigenvalues_radial(F_BM, 32),
                                           edges, np.pi / 8)
    k_one = est.reference_kernel_estimate(ref.dtn_eigenvalues_radial(F_ONE, 32),
                                          edges, np.pi / 8)
    d = est.kernel_distance(k_half, k_one)
    # the kernels differ binwise by a factor 2; the distance dominates the
    # binwise gap implied by the eigenvalue scaling
    gap = np.sqrt(np.sum((k_one.density - k_half.density) ** 2))
    assert d >= gap * 0.999
    assert d > 0


def test_kernel_distance_binning_mismatch():
    op = ref.dtn_eigenvalues_radial(F_BM, 16)
    k1 = est.reference_kernel_estimate(op, np.linspace(np.pi / 8, np.pi, 9), np.pi / 8)
    k2 = est.reference_kernel_estimate(op, np.linspace(np.pi / 8, np.pi, 5), np.pi / 8)
    with pytest.raises(ValueError, match="binning"):
        est.kernel_distance(k1, k2)


def test_calibration_sanity_band():
    corr = est.calibrate_local_time(F_BM, DISK, 1e-3, make_rng(47), n_paths=20_000,
                                    t_window=0.2)
    assert 0.9 < corr < 1.15


def test_jump_symmetry_unfolded():
    # sigma-symmetry of the boundary process: signed jump separations are
    # symmetric within sampling error
    from boundarylab.boundary import wrap_separation

    traces = est.sample_boundary_traces(F_BM, DISK, make_rng(48), 3000, 0.5, 1e-4)
    pos = neg = 0
    for tr in traces:
        th = tr.thetas
        if len(th) < 2:
            continue
        d = wrap_separation(th[:-1], th[1:])
        keep = (np.abs(d) >= np.pi / 8) & (tr.s_values[1:] > 0)
        pos += int(np.count_nonzero(d[keep] > 0))
        neg += int(np.count_nonzero(d[keep] < 0))
    total = pos + neg
    assert total > 200
    # binomial balance within 4 sigma
    assert abs(pos - neg) <= 4.0 * np.sqrt(total)


def test_spectral_constant_rescaling_chain():
    # doubling kappa doubles the decay rate of the boundary process
    tg = np.array([0.25, 0.5, 0.75, 1.0])
    out = {}
    for key, f, sid in (("half", F_BM, 60), ("one", F_ONE, 61)):
        traces = est.sample_boundary_traces(f, DISK, make_rng(sid), 900, 8.0, 1e-4)
        out[key] = est.spectral_decay(traces, 1, tg)
    ratio = out["one"].value / out["half"].value
    se = ratio * np.hypot(out["one"].stderr / out["one"].value,
                          out["half"].stderr / out["half"].value)
    assert abs(ratio - 2.0) <= 3.5 * se


def test_trace_increments_heavy_tailed():
    # boundary-process increments over local-time lag 0.1 for kappa = 1/2:
    # wrapped-Cauchy tails, far heavier than any Gaussian.  The spread
    # ratio q(97.5%) / q(75%) of |increment| is ~12.7 for a Cauchy law
    # and ~2.3 for a Gaussian.
    traces = est.sample_boundary_traces(F_BM, DISK, make_rng(62), 4000, 0.22, 1e-4)
    from boundarylab.boundary import wrap_separation

    lag = 0.1
    incr = []
    for tr in traces:
        if tr.s_total < 0.2:
            continue
        a = tr.at_s(np.array([0.05]))[0]
        b = tr.at_s(np.array([0.05 + lag]))[0]
        incr.append(wrap_separation(a, b))
    incr = np.abs(np.asarray(incr))
    assert incr.size > 3000
    ratio = np.quantile(incr, 0.975) / np.quantile(incr, 0.75)
    assert ratio > 6.0  # unmistakably heavy-tailed
    # scale consistent with the Cauchy benchmark: median |Cauchy(0.05)| = 0.05
    assert 0.03 < np.median(incr) < 0.08


def test_jump_count_rate_positive_and_seed_stable():
    # jumps of size >= c occur at a strictly positive, seed-stable rate
    # per unit local time
    from boundarylab.boundary import jump_arrays

    rates = []
    for sid in (63, 64):
        traces = est.sample_boundary_traces(F_BM, DISK, make_rng(sid), 2500, 0.5, 1e-4)
        count, total_s = 0, 0.0
        for tr in traces:
            s, _, _, _ = jump_arrays(tr, 0.5)
            count += int(np.count_nonzero(s > 0))
            total_s += tr.s_total
        rates.append((count / total_s, np.sqrt(count) / total_s))
    (r1, se1), (r2, se2) = rates
    assert r1 > 0 and r2 > 0
    assert abs(r1 - r2) < 4.0 * np.hypot(se1, se2)
