"""Monte Carlo estimators paired with deterministic cross-checks.

Every estimator returns its statistical uncertainty together with the
value, and the experiment layer compares it against the matching
reference computation (closed-form kernel, spectral eigenvalues, or a
finite-difference solve).  Two-sample comparisons are reported both in
absolute terms and as normalization-free ratios, so local-time
calibration errors can be told apart from shape errors.

Boundary statistics assume a stationary start: the boundary process is
symmetric with respect to the surface measure, so initial positions are
drawn uniformly from it instead of burning in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .boundary import BoundaryTrace, wrap_separation
from .excursions import arc_contains
from .geometry import Domain
from .reference import (DtNOperator, levy_kernel, levy_kernel_arc_integral,
                        poisson_kernel_arc_integral)
from .simulate import simulate_absorbed_ensemble, simulate_reflected_ensemble

__all__ = [
    "MCEstimate",
    "KernelEstimate",
    "HittingLaw",
    "calibrate_local_time",
    "estimate_hitting_law",
    "feynman_kac_dirichlet",
    "feynman_kac_neumann",
    "revuz_check",
    "sample_boundary_traces",
    "estimate_jump_kernel",
    "generator_probe",
    "spectral_decay",
    "levy_identity_check",
    "kernel_distance",
]


@dataclass
class MCEstimate:
    """A Monte Carlo estimate with its standard error and provenance."""

    value: float
    stderr: float
    n_samples: int
    dt: float
    label: str = ""

    def agrees(self, reference: float, tol: float) -> bool:
        return abs(self.value - reference) <= tol


def _mc(values: np.ndarray, dt: float, label: str = "") -> MCEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    return MCEstimate(
        value=float(values.mean()),
        stderr=float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        n_samples=n,
        dt=dt,
        label=label,
    )


# ---------------------------------------------------------------------------
# local-time calibration
# ---------------------------------------------------------------------------


def calibrate_local_time(field, domain: Domain, dt: float, rng,
                         n_paths: int = 100_000, t_window: float = 0.4,
                         t_burn: Optional[float] = None) -> float:
    """Multiplicative correction for the steady-state local-time rate.

    The projection scheme undercounts local time at order sqrt(dt).  The
    undercount splits into a one-off initial-layer deficit (paths starting
    inside the boundary layer) and a stationary rate deficit; long-run
    functionals only see the latter.  The rate is measured from the
    surface-measure identity (|D|/t) E[ L_{t0+t} - L_{t0} ] =
    sigma(boundary) under the uniform (stationary) law, with a burn-in t0
    that lets the discrete chain settle its own boundary layer.
    """
    if t_burn is None:
        t_burn = max(300.0 * dt, 0.1)
    x0 = domain.sample_interior(n_paths, rng)
    ones = lambda th: np.ones_like(np.asarray(th, dtype=float))
    res = simulate_reflected_ensemble(
        x0, field, domain, rng, dt, horizon=t_burn + t_window,
        c_cal=None, l_corr=1.0, f_boundary=ones, checkpoint_times=[t_burn])
    window = res.f_dl - res.checkpoints[:, 0]
    rate = domain.area / t_window * float(window.mean())
    corr = domain.boundary_length / rate
    if not 0.75 < corr < 1.35:
        raise RuntimeError(
            f"local-time calibration {corr:.3f} implausibly far from 1; "
            "check dt or the conversion factor")
    return corr


# ---------------------------------------------------------------------------
# hitting law and Feynman-Kac solvers
# ---------------------------------------------------------------------------


@dataclass
class HittingLaw:
    bin_edges: np.ndarray
    freq: np.ndarray
    stderr: np.ndarray
    reference: np.ndarray
    sup_rel_dev: float
    n_paths: int
    dt: float


def hitting_law_from_exits(th, x0, domain: Domain, n_bins: int,
                           reference: str, dt: float) -> HittingLaw:
    """Histogram pooled exit parameters against reference arc probabilities."""
    th = np.asarray(th, dtype=float)
    n_paths = th.size
    edges = np.linspace(0.0, domain.period, n_bins + 1)
    counts, _ = np.histogram(np.mod(th, domain.period), bins=edges)
    freq = counts / n_paths
    stderr = np.sqrt(np.maximum(freq * (1 - freq), 1e-300) / n_paths)
    if reference == "poisson":
        rv = np.array([poisson_kernel_arc_integral(x0, lo, hi)
                       for lo, hi in zip(edges[:-1], edges[1:])])
    elif reference == "uniform":
        rv = np.full(n_bins, 1.0 / n_bins)
    elif reference == "none":
        rv = None
    else:
        raise ValueError(f"unknown reference {reference!r}")
    sup_rel = float(np.max(np.abs(freq - rv) / rv)) if rv is not None else np.nan
    return HittingLaw(edges, freq, stderr, rv, sup_rel, n_paths, dt)


def estimate_hitting_law(x0, field, domain: Domain, rng, n_paths: int,
                         n_bins: int, dt: float, reference: str = "poisson") -> HittingLaw:
    """Histogram of the exit position against reference arc probabilities.

    ``reference`` is 'poisson' (closed-form disk kernel integrals, valid
    for constant conductivity), 'uniform', or 'none'.
    """
    x0 = np.asarray(x0, dtype=float)
    th, _ = simulate_absorbed_ensemble(np.tile(x0, (n_paths, 1)), field, domain, rng, dt)
    return hitting_law_from_exits(th, x0, domain, n_bins, reference, dt)


def feynman_kac_dirichlet(x0, phi: Callable, field, domain: Domain, rng,
                          n_paths: int, dt: float) -> MCEstimate:
    """u(x0) = E[ phi(exit position) ] for the Dirichlet problem."""
    x0 = np.asarray(x0, dtype=float)
    th, _ = simulate_absorbed_ensemble(np.tile(x0, (n_paths, 1)), field, domain, rng, dt)
    return _mc(phi(th), dt, label="feynman-kac-dirichlet")


def _boundary_integral(domain: Domain, f: Callable, n_quad: int = 8192) -> float:
    th = np.linspace(0.0, domain.period, n_quad, endpoint=False)
    dens = domain.boundary_density(th)
    return float(np.mean(f(th) * dens) * domain.period)


def feynman_kac_neumann(x0, f: Callable, field, domain: Domain, rng,
                        horizon: float, n_paths: int, dt: float,
                        l_corr: float = 1.0, c_cal=None):
    """Long-run local-time functional for the co-normal problem.

    Returns estimates of E int_0^T f dL at T and at T/2; their difference
    exposes non-convergence.  The boundary data must conserve current
    (zero surface integral), otherwise the representation diverges.
    """
    comp = _boundary_integral(domain, f)
    if abs(comp) > 1e-10:
        raise ValueError(
            f"incompatible boundary flux: <f,1> = {comp:g} != 0; current is not conserved")
    x0 = np.asarray(x0, dtype=float)
    res = simulate_reflected_ensemble(
        np.tile(x0, (n_paths, 1)), field, domain, rng, dt, horizon=horizon,
        c_cal=c_cal, l_corr=l_corr, f_boundary=f, checkpoint_times=[horizon / 2.0],
    )
    est_T = _mc(res.f_dl, dt, label=f"feynman-kac-neumann T={horizon:g}")
    est_half = _mc(res.checkpoints[:, 0], dt, label=f"feynman-kac-neumann T={horizon / 2:g}")
    return est_T, est_half


def revuz_check(field, domain: Domain, phi: Callable, t: float, n_paths: int,
                rng, dt: float, l_corr: float = 1.0, c_cal=None):
    """Surface-measure identity for the local time under the uniform law.

    lhs = (|D|/t) E[ int_0^t phi dL ] with uniform starts, rhs = the
    surface integral of phi; the two agree for every t when the local time
    carries the correct normalization.
    """
    if t < 10.0 * dt:
        raise ValueError("t below 10 dt: local-time resolution too coarse")
    x0 = domain.sample_interior(n_paths, rng)
    res = simulate_reflected_ensemble(x0, field, domain, rng, dt, horizon=t,
                                      c_cal=c_cal, l_corr=l_corr, f_boundary=phi)
    scale = domain.area / t
    lhs = _mc(scale * res.f_dl, dt, label="revuz-lhs")
    rhs = _boundary_integral(domain, phi)
    return lhs, rhs


# ---------------------------------------------------------------------------
# boundary-process statistics
# ---------------------------------------------------------------------------


def sample_boundary_traces(field, domain: Domain, rng, n_paths: int, s_length: float,
                           dt: float, l_corr: float = 1.0, c_cal=None) -> List[BoundaryTrace]:
    """Traces of the boundary process from stationary (uniform-sigma) starts."""
    from .boundary import traces_from_contact_set

    th0 = domain.sample_boundary_theta(n_paths, rng)
    x0 = domain.boundary_xy(th0)
    res = simulate_reflected_ensemble(
        x0, field, domain, rng, dt, s_budget=s_length, c_cal=c_cal, l_corr=l_corr,
        collect_contacts=True, start_on_boundary_theta=th0,
    )
    return traces_from_contact_set(res.contacts, start_thetas=th0, period=domain.period)


@dataclass
class KernelEstimate:
    """Folded empirical jump-kernel histogram over separations (0, pi]."""

    bin_edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    min_angle: float
    total_s: float
    reference: Optional[np.ndarray] = None
    low_confidence: Optional[np.ndarray] = None

    @property
    def bin_mids(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def estimate_jump_kernel(traces: Sequence[BoundaryTrace], s_budget: float,
                         bin_edges, min_angle: float,
                         op: Optional[DtNOperator] = None,
                         abel_r: float = 1.0 - 1e-6) -> KernelEstimate:
    """Empirical jump intensity per unit local time and boundary measure.

    Jumps are consecutive-contact displacements folded to (0, pi]; the
    per-bin density is count / (2 * total_s * width): under a stationary
    start the expected count in a separation bin is total_s times the
    kernel mass of the two matching arcs.  Bins with fewer than 25 jumps
    are flagged low-confidence.  When ``op`` is given, bin-averaged
    reference values of the spectral kernel are attached.
    """
    bin_edges = np.asarray(bin_edges, dtype=float)
    if min_angle > bin_edges[0] + 1e-12:
        raise ValueError("first bin starts below the resolution min_angle")
    seps = []
    total_s = 0.0
    for tr in traces:
        total_s += min(tr.s_total, s_budget) if s_budget else tr.s_total
        th = tr.thetas
        if len(th) < 2:
            continue
        s_jump = tr.s_values[1:]  # level at which the inverse clock jumps
        d = np.abs(wrap_separation(th[:-1], th[1:], tr.period))
        keep = (d >= min_angle) & (s_jump > 0.0)
        if s_budget:
            keep &= s_jump <= s_budget
        seps.append(d[keep])
    seps = np.concatenate(seps) if seps else np.zeros(0)
    counts, _ = np.histogram(seps, bins=bin_edges)
    widths = np.diff(bin_edges)
    dens = counts / (2.0 * total_s * widths)
    stderr = np.sqrt(np.maximum(counts, 1.0)) / (2.0 * total_s * widths)
    ref = None
    if op is not None:
        ref = np.empty(len(widths))
        nodes, wq = np.polynomial.legendre.leggauss(64)
        for i, (lo, hi) in enumerate(zip(bin_edges[:-1], bin_edges[1:])):
            dd = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
            # bin average of the kernel (Gauss weights sum to 2)
            ref[i] = float(np.sum(levy_kernel(op, dd, abel_r=abel_r) * wq) / 2.0)
    return KernelEstimate(bin_edges=bin_edges, density=dens, stderr=stderr,
                          counts=counts, min_angle=min_angle, total_s=total_s,
                          reference=ref, low_confidence=counts < 25)


def generator_probe(traces: Sequence[BoundaryTrace], phi: Callable, t: float,
                    n_bins: int, period: float = 2.0 * np.pi):
    """Binned finite-time generator quotient [(T_t phi)(x) - phi(x)] / t.

    Each trace contributes one sample anchored at its exact start point;
    the quotient estimates minus the DtN action on phi.  Returns
    (bin_centers, value, stderr, n_per_bin).
    """
    th0, val = [], []
    for tr in traces:
        if tr.start_theta is None or tr.s_final < t:
            continue
        th0.append(tr.start_theta)
        val.append((phi(tr.at_s(t)) - phi(tr.start_theta)) / t)
    th0 = np.asarray(th0)
    val = np.asarray(val)
    edges = np.linspace(0.0, period, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    idx = np.clip(np.digitize(np.mod(th0, period), edges) - 1, 0, n_bins - 1)
    out = np.zeros(n_bins)
    se = np.zeros(n_bins)
    n_per = np.zeros(n_bins, dtype=int)
    for b in range(n_bins):
        sel = idx == b
        n_per[b] = sel.sum()
        if n_per[b]:
            out[b] = val[sel].mean()
            se[b] = val[sel].std(ddof=1) / np.sqrt(n_per[b]) if n_per[b] > 1 else np.inf
    return centers, out, se, n_per


def spectral_decay(traces: Sequence[BoundaryTrace], n: int, t_grid,
                   n_groups: int = 8, origin_stride: Optional[float] = None):
    """DtN eigenvalue from the decay of the mode-n characteristic function.

    For rotation-invariant conductivity, E cos(n (xi_{s+t} - xi_s)) =
    exp(-lambda_n t) under the stationary start.  The estimate is the
    least-squares slope of the log characteristic function over t_grid;
    the standard error comes from grouping the traces.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    stride = origin_stride if origin_stride is not None else float(t_grid.max())
    groups = [[] for _ in range(n_groups)]
    for i, tr in enumerate(traces):
        if tr.s_final < t_grid.max():
            continue
        origins = np.arange(0.0, tr.s_final - t_grid.max(), stride)
        if origins.size == 0:
            origins = np.array([0.0])
        base = tr.at_s(origins)
        rows = np.empty((origins.size, t_grid.size))
        for k, t in enumerate(t_grid):
            rows[:, k] = np.cos(n * (tr.at_s(origins + t) - base))
        groups[i % n_groups].append(rows)

    def fit(rows):
        C = rows.mean(axis=0)
        good = C > 3.0 / np.sqrt(rows.shape[0])
        tg, lc = t_grid[good], np.log(C[good])
        if tg.size < 2:
            return np.nan
        A = np.stack([np.ones_like(tg), -tg], axis=-1)
        coef, *_ = np.linalg.lstsq(A, lc, rcond=None)
        return coef[1]

    all_rows = np.concatenate([r for g in groups for r in g], axis=0)
    lam = fit(all_rows)
    lam_g = [fit(np.concatenate(g, axis=0)) for g in groups if g]
    lam_g = [v for v in lam_g if np.isfinite(v)]
    se = float(np.std(lam_g, ddof=1) / np.sqrt(len(lam_g))) if len(lam_g) > 1 else np.inf
    return MCEstimate(value=float(lam), stderr=se, n_samples=all_rows.shape[0],
                      dt=0.0, label=f"spectral-decay n={n}")


def levy_identity_check(traces: Sequence[BoundaryTrace], arc_a, arc_b, t: float,
                        op: DtNOperator, period: float = 2.0 * np.pi,
                        abel_r: float = 1.0 - 1e-6):
    """Expected jump counts between arcs against the kernel double integral.

    lhs: mean number of jumps from arc A to arc B during local time (0, t]
    per trace (stationary start); rhs: t * int_A int_B N dsigma dsigma /
    sigma(boundary).  The arcs must be disjoint (the test function vanishes
    on the diagonal).
    """
    a0, a1 = arc_a
    b0, b1 = arc_b
    probe = np.linspace(a0, a1, 257)
    if np.any(arc_contains(probe, b0, b1, period)):
        raise ValueError("arcs overlap: the pair function must vanish on the diagonal")
    counts = []
    for tr in traces:
        if tr.s_total < t:
            continue
        th = tr.thetas
        if len(th) < 2:
            counts.append(0.0)
            continue
        s_jump = tr.s_values[1:]
        sel = (s_jump > 0.0) & (s_jump <= t)
        sel &= arc_contains(th[:-1], a0, a1, period)
        sel &= arc_contains(th[1:], b0, b1, period)
        counts.append(float(np.count_nonzero(sel)))
    counts = np.asarray(counts)
    lhs = _mc(counts, 0.0, label="levy-identity-lhs")
    rhs = t * levy_kernel_arc_integral(op, arc_a, arc_b, abel_r=abel_r) / period
    return lhs, rhs


def kernel_distance(k1: KernelEstimate, k2: KernelEstimate,
                    min_angle: Optional[float] = None) -> float:
    """Inverse-variance weighted L2 distance between kernel estimates.

    Reference kernels enter with zero variance; when both inputs are
    references the weights are one.  Bins below min_angle are excluded.
    """
    if k1.bin_edges.shape != k2.bin_edges.shape or np.max(
            np.abs(k1.bin_edges - k2.bin_edges)) > 1e-12:
        raise ValueError("kernel estimates use incompatible binning")
    lo = min_angle if min_angle is not None else max(k1.min_angle, k2.min_angle)
    mids = k1.bin_mids
    sel = mids >= lo
    var = k1.stderr[sel] ** 2 + k2.stderr[sel] ** 2
    w = np.where(var > 0, 1.0 / np.maximum(var, 1e-300), 1.0)
    diff = k1.density[sel] - k2.density[sel]
    return float(np.sqrt(np.sum(w * diff**2)))


def reference_kernel_estimate(op: DtNOperator, bin_edges, min_angle: float,
                              abel_r: float = 1.0 - 1e-6) -> KernelEstimate:
    """Bin-averaged spectral kernel packaged as a zero-variance estimate."""
    bin_edges = np.asarray(bin_edges, dtype=float)
    widths = np.diff(bin_edges)
    dens = np.empty(len(widths))
    nodes, wq = np.polynomial.legendre.leggauss(64)
    for i, (lo, hi) in enumerate(zip(bin_edges[:-1], bin_edges[1:])):
        dd = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
        dens[i] = float(np.sum(levy_kernel(op, dd, abel_r=abel_r) * wq) / 2.0)
    return KernelEstimate(bin_edges=bin_edges, density=dens,
                          stderr=np.zeros_like(dens), counts=np.zeros(len(widths), dtype=int),
                          min_angle=min_angle, total_s=0.0, reference=dens,
                          low_confidence=np.zeros(len(widths), dtype=bool))
