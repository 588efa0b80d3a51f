"""Time change of reflected paths by their boundary local time.

The boundary process is the reflected diffusion watched on the clock of
its boundary local time: with tau(s) = sup{ r : L_r <= s } (the
right-continuous right-inverse of L), the trace is xi(s) = X_{tau(s)},
a pure-jump process on the boundary.  On discrete records L is a step
function; all identities in this module (change of variables, inverse
monotonicity, diffusive scaling laws) hold exactly on such records and the
corresponding checks are floating-point tight rather than statistical.

Where the record jumps (tau(s-) < tau(s)) the trace takes the right limit,
i.e. the value at tau(s), matching the right-continuity of the underlying
process.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .simulate import ContactSet, PathSample

__all__ = [
    "BoundaryTrace",
    "JumpEvent",
    "local_time_inverse",
    "boundary_trace",
    "trace_from_contacts",
    "traces_from_contact_set",
    "jump_events",
    "change_of_variables_check",
    "scaling_check",
    "wrap_separation",
]


def wrap_separation(a, b, period=2.0 * np.pi):
    """Shortest signed separation b - a on a circle of the given period."""
    d = np.mod(np.asarray(b) - np.asarray(a) + 0.5 * period, period) - 0.5 * period
    return d


# ---------------------------------------------------------------------------
# inverse local time
# ---------------------------------------------------------------------------


def local_time_inverse(path: PathSample, s: float) -> float:
    """tau(s) = sup{ r : L_r <= s } evaluated on the discrete record.

    Right-continuous in s; raises for s beyond the accumulated local time.
    """
    L = path.local_time
    if s < 0 or s > L[-1]:
        raise ValueError(f"s={s} outside accumulated local time [0, {L[-1]}]")
    j = int(np.searchsorted(L, s, side="right"))
    if j >= len(L):
        return float(path.times[-1])
    return float(path.times[j])


def _inverse_many(times, L, s_values):
    j = np.searchsorted(L, s_values, side="right")
    j = np.minimum(j, len(L) - 1)
    return times[j], j


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass
class BoundaryTrace:
    """Time-changed boundary record: local-time clock s -> boundary point.

    ``thetas[k]`` is the boundary parameter of the trace on the level
    interval [s_values[k], next level); ``source_tau`` is the clock time
    at which that value was attained.  ``s_total`` is the total local time
    accrued (the level reached by the last contact, beyond the start of
    its own interval).  ``start_theta`` marks the known start location for
    paths launched on the boundary.  The jump from record k to k+1 carries
    the local-time stamp s_values[k+1].
    """

    s_values: np.ndarray
    thetas: np.ndarray
    source_tau: np.ndarray
    period: float = 2.0 * np.pi
    start_theta: Optional[float] = None
    s_total: Optional[float] = None

    def __post_init__(self):
        if self.s_total is None:
            self.s_total = float(self.s_values[-1]) if len(self.s_values) else 0.0

    def __len__(self):
        return len(self.s_values)

    @property
    def s_final(self) -> float:
        return float(self.s_total)

    def at_s(self, s_grid):
        """Trace values at given local-time instants (right-continuous)."""
        s_grid = np.asarray(s_grid, dtype=float)
        if len(self.s_values) == 0:
            raise ValueError("empty trace")
        j = np.searchsorted(self.s_values, s_grid, side="right")
        j = np.clip(j, 1, len(self.s_values)) - 1
        return self.thetas[j]

    def xi_values(self, domain):
        return domain.boundary_xy(self.thetas)


def default_s_grid(path: PathSample) -> np.ndarray:
    """Uniform local-time grid with the median per-contact increment.

    At this spacing consecutive grid cells almost never absorb more than
    one resolvable jump, so jump detection on the resampled trace is not
    aliased.
    """
    dL = np.diff(path.local_time)
    dL = dL[dL > 0]
    if dL.size == 0:
        return np.zeros(1)
    step = float(np.median(dL))
    grid = np.arange(0.0, path.final_local_time + 0.5 * step, step)
    return grid[grid <= path.final_local_time]


def boundary_trace(path: PathSample, s_grid=None) -> BoundaryTrace:
    """Trace of a path sampled on an increasing local-time grid.

    Without an explicit grid the default uniform grid (median per-contact
    increment) is used."""
    if s_grid is None:
        s_grid = default_s_grid(path)
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size == 0:
        return BoundaryTrace(np.zeros(0), np.zeros(0), np.zeros(0))
    if np.any(np.diff(s_grid) < 0):
        raise ValueError("s_grid must be increasing")
    L = path.local_time
    if s_grid[-1] > L[-1]:
        raise ValueError("s_grid exceeds accumulated local time")
    tau, j = _inverse_many(path.times, L, s_grid)
    thetas = path.thetas[j]
    missing = np.isnan(thetas)
    if missing.any():
        # s at/after the final accumulated level: hold the last contact
        contact_idx = np.flatnonzero(path.boundary_flags)
        if contact_idx.size == 0:
            raise ValueError("path has no boundary contacts")
        for i in np.flatnonzero(missing):
            prev = contact_idx[contact_idx <= j[i]]
            thetas = thetas.copy()
            thetas[i] = path.thetas[prev[-1]] if prev.size else path.thetas[contact_idx[0]]
    return BoundaryTrace(s_values=s_grid.copy(), thetas=thetas, source_tau=tau)


def trace_from_contacts(t, theta, dL, start_theta=None, period=2.0 * np.pi) -> BoundaryTrace:
    """Maximal-resolution trace from a stream of boundary contacts.

    Contact k (time t_k, parameter theta_k, increment dL_k) contributes the
    value theta_k on the level interval [S_{k-1}, S_k) with S_k the running
    local time; zero-increment contacts carry no level interval but are kept
    as markers.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    dL = np.asarray(dL, dtype=float)
    S = np.cumsum(dL)
    s_start = np.concatenate([[0.0], S[:-1]])
    return BoundaryTrace(s_values=s_start, thetas=theta, source_tau=t,
                         period=period, start_theta=start_theta,
                         s_total=float(S[-1]) if len(S) else 0.0)


def traces_from_contact_set(contacts: ContactSet, start_thetas=None,
                            period=2.0 * np.pi) -> List[BoundaryTrace]:
    out = []
    for i in range(contacts.n_paths):
        sl = contacts.path_slice(i)
        st = None if start_thetas is None else float(start_thetas[i])
        out.append(trace_from_contacts(contacts.t[sl], contacts.theta[sl],
                                       contacts.dL[sl], start_theta=st, period=period))
    return out


# ---------------------------------------------------------------------------
# jumps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpEvent:
    """A resolved jump of the boundary process."""

    s: float
    theta_from: float
    theta_to: float
    gap: float  # excursion duration tau(s) - tau(s-)


def jump_events(trace: BoundaryTrace, min_angle: float) -> List[JumpEvent]:
    """Consecutive-record jumps with parameter separation >= min_angle.

    min_angle is an explicit resolution parameter: the true boundary
    process has a dense set of arbitrarily small jumps, so every jump
    statistic is reported relative to this threshold.
    """
    if min_angle <= 0:
        raise ValueError("min_angle must be positive")
    out: List[JumpEvent] = []
    th = trace.thetas
    if len(th) < 2:
        return out
    sep = np.abs(wrap_separation(th[:-1], th[1:], trace.period))
    gaps = np.diff(trace.source_tau)
    hits = np.flatnonzero((sep >= min_angle) & (gaps > 0))
    for k in hits:
        out.append(JumpEvent(s=float(trace.s_values[k + 1]),
                             theta_from=float(th[k]),
                             theta_to=float(th[k + 1]),
                             gap=float(gaps[k])))
    return out


def jump_arrays(trace: BoundaryTrace, min_angle: float):
    """Vectorized variant of jump_events: (s, from, to, gap) arrays."""
    th = trace.thetas
    if len(th) < 2:
        z = np.zeros(0)
        return z, z, z, z
    sep = np.abs(wrap_separation(th[:-1], th[1:], trace.period))
    gaps = np.diff(trace.source_tau)
    m = (sep >= min_angle) & (gaps > 0)
    return trace.s_values[1:][m], th[:-1][m], th[1:][m], gaps[m]


# ---------------------------------------------------------------------------
# exact discrete identities
# ---------------------------------------------------------------------------


def _levels(path: PathSample):
    """Contact times and cumulative local-time levels of a record."""
    idx = np.flatnonzero(np.diff(path.local_time) > 0) + 1
    t_k = path.times[idx]
    S_k = path.local_time[idx]
    return t_k, S_k


def change_of_variables_check(path: PathSample, f: Callable[[float], float],
                              a: float, b: float):
    """Both sides of int_{tau(a)}^{tau(b)} f(t) dL_t = int_a^b f(tau(s)) ds.

    The left side is the level-restricted Stieltjes sum over the record
    (atoms split at the levels a and b, the discrete reading of integrating
    dL between the clock times tau(a) and tau(b)); the right side
    integrates f(tau(.)) over the local-time interval using the inverse.
    On step records the two are algebraically identical.
    """
    if a > b:
        raise ValueError("need a <= b")
    L_final = path.local_time[-1]
    if b > L_final:
        raise ValueError("b exceeds accumulated local time")
    t_k, S_k = _levels(path)
    S_prev = np.concatenate([[0.0], S_k[:-1]])

    # lhs: sum_k f(t_k) * |[S_{k-1}, S_k] intersect [a, b]|
    overlap = np.maximum(np.minimum(S_k, b) - np.maximum(S_prev, a), 0.0)
    lhs = float(np.sum([f(tk) * w for tk, w in zip(t_k, overlap) if w > 0.0])) if t_k.size else 0.0

    # rhs: exact piecewise integration of s -> f(tau(s))
    cuts = np.unique(np.concatenate([[a, b], S_k[(S_k > a) & (S_k < b)],
                                     S_prev[(S_prev > a) & (S_prev < b)]]))
    rhs = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        rhs += f(local_time_inverse(path, mid)) * (hi - lo)
    return lhs, float(rhs)


def rescale_path(path: PathSample, R: float) -> PathSample:
    """Deterministic diffusive rescaling of a record: (x, L) -> (x/R, R L).

    The result is a record of the reflected diffusion for the rescaled
    conductivity R^-2 kappa(R .) on the 1/R-dilated domain, with the same
    clock.
    """
    return PathSample(
        times=path.times.copy(),
        points=path.points / R,
        local_time=R * path.local_time,
        boundary_flags=path.boundary_flags.copy(),
        thetas=path.thetas.copy(),
    )


def scaling_check(path: PathSample, R: float, n_probe: int = 64) -> dict:
    """Verify the scaling laws on the rescaled record.

    Checks, exactly on the discrete record:
      * L^R_final = R * L_final,
      * tau^R(u) = tau(u/R) at probe levels u,
      * xi^R(u) = xi(u/R) / R for the trace positions.
    Probe levels avoid the record's level boundaries so that floating-point
    division cannot flip the half-open interval membership.
    """
    scaled = rescale_path(path, R)
    report = {
        "R": R,
        "L_final_error": abs(scaled.local_time[-1] - R * path.local_time[-1]),
    }
    L_final = path.local_time[-1]
    if L_final > 0:
        _, S_k = _levels(path)
        anchors = np.concatenate([[0.0], S_k])
        mids = 0.5 * (anchors[:-1] + anchors[1:])
        if mids.size > n_probe:
            mids = mids[np.linspace(0, mids.size - 1, n_probe).astype(int)]
        tau_err = 0.0
        pos_err = 0.0
        for s in mids:
            tau_o = local_time_inverse(path, s)
            tau_r = local_time_inverse(scaled, R * s)
            tau_err = max(tau_err, abs(tau_r - tau_o))
            j_o = np.searchsorted(path.local_time, s, side="right")
            j_r = np.searchsorted(scaled.local_time, R * s, side="right")
            j_o = min(j_o, len(path.times) - 1)
            j_r = min(j_r, len(scaled.times) - 1)
            pos_err = max(pos_err, float(np.max(np.abs(
                scaled.points[j_r] - path.points[j_o] / R))))
        report["tau_error"] = tau_err
        report["trace_error"] = pos_err
    else:
        report["tau_error"] = 0.0
        report["trace_error"] = 0.0
    return report
