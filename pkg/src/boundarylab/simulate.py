"""Reflected and absorbed diffusion paths for the generator div(kappa grad).

The scheme is Euler-Maruyama with conormal pull-back at the boundary:

    proposal = x + (div kappa)(x) dt + B(x) sqrt(dt) Z,      B B^T = 2 kappa,

and when the proposal leaves the domain it is pulled back to the nearest
boundary point (for isotropic fields the conormal direction is the normal
direction).  The pull-back depth feeds the boundary local time through

    dL = c_cal * depth,

where the exact conversion factor per unit local time is kappa_nu = nu .
kappa nu at the contact point, i.e. c_cal = 1/kappa_nu; the small O(sqrt(dt))
undercount of the discrete scheme is compensated by a multiplicative
correction calibrated against the surface-measure (Revuz) identity, see
``estimators.calibrate_local_time``.  With this normalization the local
time of the reflecting Brownian-motion case (kappa = 1/2) obeys the
classical Skorohod decomposition X = x + W - (1/2) int nu dL, and the
Revuz measure of L is the surface measure for every built-in field.

Away from the boundary the step size is enlarged adaptively (clamped
quadratically in the distance) so that boundary interaction is resolved at
the configured dt while deep-interior motion takes long exact Gaussian
steps; for constant fields this introduces no interior bias.  Paths are
bit-reproducible for a fixed (master_seed, stream_id).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import BoundaryPoint, Domain, ProjectionError

__all__ = [
    "RngStream",
    "PathSample",
    "AbsorbedResult",
    "ContactSet",
    "EnsembleResult",
    "step_reflected",
    "sample_path",
    "sample_absorbed",
    "simulate_reflected_ensemble",
    "simulate_absorbed_ensemble",
]

# safety margin of the adaptive step: (distance/step std)^2 at the clamp
_ALPHA = 32.0
_MAX_HALVINGS = 10


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream; (master_seed, stream_id) is the full key.

    Streams with distinct ids are statistically independent Philox streams;
    the same pair reproduces the same draws bit-for-bit on one build.
    """

    master_seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass
class PathSample:
    """Discretized reflected trajectory with clock, position and local time."""

    times: np.ndarray
    points: np.ndarray
    local_time: np.ndarray
    boundary_flags: np.ndarray
    thetas: np.ndarray  # boundary parameter at contact steps, nan elsewhere

    def __post_init__(self):
        if np.any(np.diff(self.local_time) < 0):
            raise ValueError("local time must be nondecreasing")

    @property
    def final_local_time(self) -> float:
        return float(self.local_time[-1])


@dataclass
class AbsorbedResult:
    """First-exit data of the absorbed diffusion."""

    exit_time: float
    exit_point: BoundaryPoint
    path: Optional[PathSample] = None


@dataclass
class ContactSet:
    """Boundary-contact events of an ensemble, sorted by (path, time).

    ``offsets`` delimits each path's slice: events of path i live at
    ``slice(offsets[i], offsets[i+1])``.  ``s`` is the running local time
    immediately after each contact.
    """

    offsets: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    dL: np.ndarray
    s: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.offsets) - 1

    def path_slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])


@dataclass
class EnsembleResult:
    final_x: np.ndarray
    final_t: np.ndarray
    local_time: np.ndarray
    f_dl: Optional[np.ndarray] = None
    checkpoints: Optional[np.ndarray] = None  # (n_paths, n_checkpoints) of f_dl
    contacts: Optional[ContactSet] = None
    full: Optional[dict] = None  # per-step record, small runs only


def _local_time_factor(field, domain, theta, c_cal, l_corr, k_nu_const=None):
    if c_cal is not None:
        return np.full(theta.shape, float(c_cal))
    if k_nu_const is not None:
        return np.full(theta.shape, l_corr / k_nu_const)
    kn = field.kappa_normal(theta, domain)
    return l_corr / kn


# ---------------------------------------------------------------------------
# single-step contract
# ---------------------------------------------------------------------------


def step_reflected(x, dt, field, domain, rng, c_cal=None, l_corr=1.0):
    """One Euler step with conormal pull-back; returns (x', dL).

    ``c_cal`` overrides the depth-to-local-time factor; by default it is
    1/kappa_nu at the contact point times the calibration ``l_corr``.
    """
    x = np.asarray(x, dtype=float)
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0.0:
        return x.copy(), 0.0
    p = x.reshape(1, 2)
    drift = field.grad_div(p)
    sig = field.diffusion_factor(p)
    z = rng.standard_normal(2)
    if field.isotropic:
        prop = p + drift * dt + np.sqrt(dt) * sig[:, None] * z
    else:
        prop = p + drift * dt + np.sqrt(dt) * (sig[0] @ z)
    for _ in range(_MAX_HALVINGS):
        if domain.signed_inner_distance(prop)[0] >= 0:
            return prop[0], 0.0
        theta, foot, _, depth, _ = domain.project(prop)
        if depth[0] <= domain.projection_reach:
            fac = _local_time_factor(field, domain, theta, c_cal, l_corr)
            return foot[0], float(fac[0] * depth[0])
        dt *= 0.5
        z = rng.standard_normal(2)
        if field.isotropic:
            prop = p + drift * dt + np.sqrt(dt) * sig[:, None] * z
        else:
            prop = p + drift * dt + np.sqrt(dt) * (sig[0] @ z)
    raise ProjectionError("proposal stayed beyond projection reach after retries")


# ---------------------------------------------------------------------------
# vectorized ensemble engine
# ---------------------------------------------------------------------------


def simulate_reflected_ensemble(
    x0: np.ndarray,
    field,
    domain: Domain,
    rng: np.random.Generator,
    dt: float,
    horizon: Optional[float] = None,
    s_budget: Optional[float] = None,
    c_cal=None,
    l_corr: float = 1.0,
    adaptive: bool = True,
    dt_max: Optional[float] = None,
    f_boundary: Optional[Callable] = None,
    checkpoint_times: Sequence[float] = (),
    collect_contacts: bool = False,
    start_on_boundary_theta: Optional[np.ndarray] = None,
    collect_full: bool = False,
    max_steps: int = 100_000_000,
) -> EnsembleResult:
    """Advance an ensemble of reflected paths to a clock or local-time horizon.

    Exactly one of ``horizon`` (clock time) and ``s_budget`` (accumulated
    local time per path) must be given.  ``f_boundary`` accumulates the
    Stieltjes integral int f(theta) dL online; ``checkpoint_times`` snapshot
    that accumulator at intermediate clock times.  ``collect_contacts``
    returns every boundary-contact event; ``collect_full`` additionally
    stores the whole trajectory (small runs only).
    """
    if (horizon is None) == (s_budget is None):
        raise ValueError("give exactly one of horizon / s_budget")
    if len(checkpoint_times) and f_boundary is None:
        raise ValueError("checkpoint_times snapshot the f_boundary accumulator")
    x = np.array(x0, dtype=float).reshape(-1, 2)
    n = x.shape[0]
    if np.any(domain.signed_inner_distance(x) < -1e-12):
        raise ValueError("start points must lie in the closed domain")
    if dt_max is None:
        dt_max = 0.01 if field.constant else 1e-3
    dt_max = max(dt_max, dt)
    isotropic = field.isotropic
    k_const = float(field.kappa_iso(x[:1])[0]) if (field.constant and isotropic) else None
    k_nu_const = k_const  # nu . kappa nu on the boundary, constant fields only

    # live (lazily compacted) state; idx maps live slots to original paths
    idx = np.arange(n)
    t = np.zeros(n)
    L = np.zeros(n)
    d = np.maximum(domain.signed_inner_distance(x), 0.0)
    fdl_g = np.zeros(n) if f_boundary is not None else None
    n_ck = len(checkpoint_times)
    ckpts = np.sort(np.asarray(checkpoint_times, dtype=float)) if n_ck else None
    ck_vals = np.zeros((n, n_ck)) if n_ck else None
    ck_next = np.zeros(n, dtype=np.int64)

    final_x = np.zeros((n, 2))
    final_t = np.zeros(n)
    final_L = np.zeros(n)
    final_fdl = np.zeros(n) if f_boundary is not None else None

    ev_idx, ev_t, ev_theta, ev_dl = [], [], [], []
    if collect_contacts and start_on_boundary_theta is not None:
        th0 = np.asarray(start_on_boundary_theta, dtype=float)
        ev_idx.append(np.arange(n, dtype=np.int64))
        ev_t.append(np.zeros(n))
        ev_theta.append(th0.copy())
        ev_dl.append(np.zeros(n))

    full = None
    if collect_full:
        on_b = np.abs(domain.signed_inner_distance(x)) < 1e-12
        th_init = np.full(n, np.nan)
        if start_on_boundary_theta is not None:
            th_init[:] = start_on_boundary_theta
        full = {"t": [t.copy()], "x": [x.copy()], "L": [L.copy()],
                "flag": [on_b.copy()], "theta": [th_init]}

    done = np.zeros(n, dtype=bool)
    n_iter = 0
    while idx.size:
        n_iter += 1
        if n_iter > max_steps:
            raise RuntimeError("step budget exhausted; lower the horizon or raise dt")
        m = idx.size
        if k_const is not None:
            k = k_const
        elif isotropic:
            k = field.kappa_iso(x)
        else:
            k = field.ellipticity_c
        if adaptive:
            dtl = d * d / (_ALPHA * k)
            np.clip(dtl, dt, dt_max, out=dtl)
        else:
            dtl = np.full(m, dt)
        if horizon is not None:
            np.minimum(dtl, horizon - t, out=dtl)
            np.maximum(dtl, 0.0, out=dtl)  # finished paths idle until compaction
        else:
            dtl[done] = 0.0
        if n_ck:
            pending = ck_next < n_ck
            if pending.any():
                lim = ckpts[np.minimum(ck_next, n_ck - 1)] - t
                lim[~pending] = np.inf
                np.minimum(dtl, np.maximum(lim, 0.0), out=dtl)

        z = rng.standard_normal((m, 2))
        if isotropic:
            sig = np.sqrt((2.0 * k) * dtl)
            step = sig[:, None] * z
        else:
            B = field.diffusion_factor(x)
            step = np.sqrt(dtl)[:, None] * np.einsum("nij,nj->ni", B, z)
        if field.constant:
            prop = x + step
            drift = None
        else:
            drift = field.grad_div(x)
            prop = x + drift * dtl[:, None] + step

        din = domain.signed_inner_distance(prop)
        # interior (coarse) steps must not reach the boundary; retry halved
        bad = (din < 0) & (dtl > dt * 1.000001)
        tries = 0
        while bad.any():
            tries += 1
            if tries > _MAX_HALVINGS:
                raise ProjectionError("adaptive step kept escaping the domain")
            nb = int(bad.sum())
            dtl[bad] = np.maximum(dtl[bad] * 0.5, dt)
            zb = rng.standard_normal((nb, 2))
            if isotropic:
                kb = k if k_const is not None else k[bad]
                step_b = np.sqrt(2.0 * kb * dtl[bad])[:, None] * zb
            else:
                Bb = field.diffusion_factor(x[bad])
                step_b = np.sqrt(dtl[bad])[:, None] * np.einsum("nij,nj->ni", Bb, zb)
            prop[bad] = x[bad] + step_b if drift is None else (
                x[bad] + drift[bad] * dtl[bad, None] + step_b)
            din[bad] = domain.signed_inner_distance(prop[bad])
            bad = (din < 0) & (dtl > dt * 1.000001) & bad

        out = din < 0.0
        theta_step = None
        if out.any():
            theta_c, foot, _, depth, _ = domain.project(prop[out])
            if np.any(depth > domain.projection_reach):
                raise ProjectionError("fine step overshot beyond projection reach")
            fac = _local_time_factor(field, domain, theta_c, c_cal, l_corr,
                                     k_nu_const=k_nu_const)
            dl = fac * depth
            prop[out] = foot
            din[out] = 0.0
            L[out] += dl
            if fdl_g is not None:
                fdl_g[out] += f_boundary(theta_c) * dl
            if collect_contacts:
                ev_idx.append(idx[out].copy())
                ev_t.append(t[out] + dtl[out])
                ev_theta.append(theta_c.astype(np.float64))
                ev_dl.append(dl)
            if collect_full:
                theta_step = np.full(m, np.nan)
                theta_step[out] = theta_c

        x = prop
        d = din
        t += dtl

        if n_ck and fdl_g is not None:
            hit = (ck_next < n_ck) & (t >= ckpts[np.minimum(ck_next, n_ck - 1)] - 1e-15)
            if hit.any():
                ck_vals[idx[hit], ck_next[hit]] = fdl_g[hit]
                ck_next[hit] += 1

        if collect_full:
            rec_t = np.full(n, np.nan)
            rec_t[idx] = t
            rec_x = np.full((n, 2), np.nan)
            rec_x[idx] = x
            rec_L = np.zeros(n)
            rec_L[idx] = L
            fl = np.zeros(n, dtype=bool)
            fl[idx] = out
            th = np.full(n, np.nan)
            if theta_step is not None:
                th[idx] = theta_step
            full["t"].append(rec_t)
            full["x"].append(rec_x)
            full["L"].append(rec_L)
            full["flag"].append(fl)
            full["theta"].append(th)
            if len(full["t"]) * n > 20_000_000:
                raise MemoryError("full-path recording is for small runs only")

        if horizon is not None:
            done = t >= horizon - 1e-15
        else:
            done |= L >= s_budget
        n_done = int(done.sum())
        if n_done == m or n_done > m // 4:
            gi = idx[done]
            final_x[gi] = x[done]
            final_t[gi] = t[done]
            final_L[gi] = L[done]
            if fdl_g is not None:
                final_fdl[gi] = fdl_g[done]
            keep = ~done
            x, t, L, d, idx = x[keep], t[keep], L[keep], d[keep], idx[keep]
            ck_next = ck_next[keep]
            if fdl_g is not None:
                fdl_g = fdl_g[keep]
            done = np.zeros(idx.size, dtype=bool)

    contacts = None
    if collect_contacts:
        if ev_idx:
            eidx = np.concatenate(ev_idx)
            tt = np.concatenate(ev_t)
            th = np.concatenate(ev_theta)
            dl = np.concatenate(ev_dl)
            order = np.argsort(eidx, kind="stable")
            eidx, tt, th, dl = eidx[order], tt[order], th[order], dl[order]
            counts = np.bincount(eidx, minlength=n)
            offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            s = np.empty_like(dl)
            for i in range(n):
                sl = slice(offsets[i], offsets[i + 1])
                s[sl] = np.cumsum(dl[sl])
        else:
            offsets = np.zeros(n + 1, dtype=np.int64)
            tt = th = dl = s = np.zeros(0)
        contacts = ContactSet(offsets, tt, th, dl, s)

    return EnsembleResult(final_x=final_x, final_t=final_t, local_time=final_L,
                          f_dl=final_fdl, checkpoints=ck_vals, contacts=contacts,
                          full=full)


# ---------------------------------------------------------------------------
# single-path records
# ---------------------------------------------------------------------------


def sample_path(x0, horizon, dt, field, domain, rng, c_cal=None, l_corr=1.0,
                adaptive=False) -> PathSample:
    """One reflected path with the full step record (conservative: runs to
    the horizon, never killed).  horizon = 0 yields the single-record path."""
    x0 = np.asarray(x0, dtype=float)
    if horizon == 0.0:
        return PathSample(
            times=np.zeros(1),
            points=x0.reshape(1, 2).copy(),
            local_time=np.zeros(1),
            boundary_flags=np.array([bool(abs(domain.signed_inner_distance(x0.reshape(1, 2))[0]) < 1e-12)]),
            thetas=np.full(1, np.nan),
        )
    res = simulate_reflected_ensemble(
        x0.reshape(1, 2), field, domain, rng, dt, horizon=horizon,
        c_cal=c_cal, l_corr=l_corr, adaptive=adaptive, collect_full=True,
    )
    full = res.full
    times = np.array([v[0] for v in full["t"]])
    pts = np.stack([v[0] for v in full["x"]])
    L = np.array([v[0] for v in full["L"]])
    flags = np.array([v[0] for v in full["flag"]])
    thetas = np.array([v[0] for v in full["theta"]])
    return PathSample(times=times, points=pts, local_time=L,
                      boundary_flags=flags, thetas=thetas)


def sample_absorbed(x0, dt, field, domain, rng, bridge=True, keep_path=False,
                    adaptive=True) -> AbsorbedResult:
    """One absorbed path: stopped at the first boundary contact."""
    x0 = np.asarray(x0, dtype=float)
    if domain.signed_inner_distance(x0.reshape(1, 2))[0] <= 0:
        raise ValueError("absorbed paths must start in the open interior")
    rec = [] if keep_path else None
    theta, tau = simulate_absorbed_ensemble(
        x0.reshape(1, 2), field, domain, rng, dt, bridge=bridge,
        adaptive=adaptive, record=rec,
    )
    path = None
    if keep_path:
        arr = np.asarray(rec[0])
        path = PathSample(
            times=arr[:, 0], points=arr[:, 1:3],
            local_time=np.zeros(arr.shape[0]),
            boundary_flags=np.zeros(arr.shape[0], dtype=bool),
            thetas=np.full(arr.shape[0], np.nan),
        )
    bp = domain.boundary_param(float(theta[0]))
    return AbsorbedResult(exit_time=float(tau[0]), exit_point=bp, path=path)


def simulate_absorbed_ensemble(
    x0: np.ndarray,
    field,
    domain: Domain,
    rng: np.random.Generator,
    dt: float,
    bridge: bool = True,
    adaptive: bool = True,
    dt_max: Optional[float] = None,
    record: Optional[list] = None,
    max_steps: int = 100_000_000,
):
    """First-exit simulation for an ensemble; returns (exit_theta, exit_time).

    The Brownian-bridge crossing test removes the O(sqrt(dt)) late-exit
    bias of discrete boundary checks: a step that stays inside but starts
    and ends within the near-boundary band is declared an exit with the
    half-space bridge probability exp(-d1 d2 / (kappa_n dt)).
    """
    x = np.array(x0, dtype=float).reshape(-1, 2)
    n = x.shape[0]
    if np.any(domain.signed_inner_distance(x) <= 0):
        raise ValueError("absorbed paths must start in the open interior")
    if dt_max is None:
        dt_max = 0.01 if field.constant else 1e-3
    dt_max = max(dt_max, dt)

    t = np.zeros(n)
    exit_theta = np.zeros(n)
    exit_time = np.zeros(n)
    active = np.arange(n)
    isotropic = field.isotropic
    band_ref = None
    n_iter = 0
    while active.size:
        n_iter += 1
        if n_iter > max_steps:
            raise RuntimeError("step budget exhausted")
        xa = x[active]
        d1 = np.maximum(domain.signed_inner_distance(xa), 0.0)
        k = field.kappa_iso(xa) if isotropic else np.full(active.size, 1.0)
        if band_ref is None:
            band_ref = 6.0 * np.sqrt(2.0 * float(np.max(k)) * dt)
        dtl = np.clip(d1 * d1 / (_ALPHA * k), dt, dt_max) if adaptive else np.full(active.size, dt)
        drift = None if field.constant else field.grad_div(xa)
        z = rng.standard_normal((active.size, 2))
        if isotropic:
            step = np.sqrt(2.0 * k * dtl)[:, None] * z
        else:
            B = field.diffusion_factor(xa)
            step = np.sqrt(dtl)[:, None] * np.einsum("nij,nj->ni", B, z)
        prop = xa + step if drift is None else xa + drift * dtl[:, None] + step

        din = domain.signed_inner_distance(prop)
        crossed = din < 0
        tx = t[active] + dtl
        th = np.zeros(active.size)
        if crossed.any():
            theta_c, _, _, _, _ = domain.project(prop[crossed])
            th[crossed] = theta_c
        if bridge:
            d2 = din
            near = (~crossed) & (d1 < band_ref) & (d2 < band_ref) & (dtl <= dt * 1.000001)
            if near.any():
                p = np.exp(-d1[near] * d2[near] / (k[near] * dtl[near]))
                hit = rng.uniform(size=int(near.sum())) < p
                idx = np.flatnonzero(near)[hit]
                if idx.size:
                    crossed[idx] = True
                    mid = 0.5 * (xa[idx] + prop[idx])
                    theta_m, _, _, _, _ = domain.project(mid)
                    th[idx] = theta_m
                    tx[idx] = t[active][idx] + 0.5 * dtl[idx]

        if record is not None:
            for j in range(active.size):
                while len(record) <= active[j]:
                    record.append([])
                record[active[j]].append((t[active[j]], xa[j, 0], xa[j, 1]))

        gone = np.flatnonzero(crossed)
        if gone.size:
            g = active[gone]
            exit_theta[g] = th[gone]
            exit_time[g] = tx[gone]
        keep = ~crossed
        x[active[keep]] = prop[keep]
        t[active[keep]] = tx[keep]
        active = active[keep]
    return exit_theta, exit_time
