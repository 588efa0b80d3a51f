"""Deterministic reference computations.

This module provides the non-stochastic side of every cross-check:

* Dirichlet-to-Neumann eigenvalues for radial conductivities on the unit
  disk, by separation of variables.  Mode n solves
  (r k(r) u')' = n^2 k(r) u / r with u regular at 0 and u(1) = 1, and the
  eigenvalue is lambda_n = k(1) u'(1).  Two independent integrators are
  provided (a Riccati form driven by an adaptive RK and a log-radius RK4
  on the linear system with Richardson extrapolation) so the results can
  be cross-validated.
* The boundary jump kernel N as an Abel-summed cosine series in the DtN
  eigenvalues.  The series is split into the affine-in-n part, whose Abel
  limit is known in closed form, plus a damped residual; for constant
  conductivity the kernel is exact, and for kappa = 1/2 it reproduces the
  Feller kernel (4 pi (1 - cos(delta)))^-1 of the circular Cauchy process.
* The closed-form Poisson (harmonic-measure) kernel of the unit disk.
* Divergence-form finite-difference solvers for the Dirichlet and the
  conservative co-normal (Neumann) problem, on a cartesian square grid and
  on a polar disk grid, plus a discrete DtN matrix assembled column by
  column with conservative flux recovery.
* The integro-differential decomposition check: the DtN map equals its
  tangential drift part plus the jump integral against N, up to a
  truncation that vanishes with the cutoff.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

__all__ = [
    "DtNOperator",
    "FourierSeries",
    "dtn_eigenvalues_radial",
    "dtn_apply",
    "levy_kernel",
    "levy_kernel_arc_integral",
    "poisson_kernel_disk",
    "poisson_kernel_arc_integral",
    "SquareGrid",
    "DiskPolarGrid",
    "GridFunction",
    "solve_dirichlet_fd",
    "solve_neumann_fd",
    "dtn_matrix_square",
    "integro_decomposition_check",
]


# ---------------------------------------------------------------------------
# Fourier data on the circle
# ---------------------------------------------------------------------------


@dataclass
class FourierSeries:
    """Real trigonometric polynomial a0 + sum_n (a_n cos n t + b_n sin n t)."""

    a0: float
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def from_modes(cls, a0=0.0, cos=(), sin=()):
        a = np.asarray(cos, dtype=float)
        b = np.asarray(sin, dtype=float)
        m = max(len(a), len(b))
        return cls(float(a0), np.pad(a, (0, m - len(a))), np.pad(b, (0, m - len(b))))

    @classmethod
    def cosine(cls, n: int, amp: float = 1.0):
        a = np.zeros(n)
        a[n - 1] = amp
        return cls(0.0, a, np.zeros(n))

    @property
    def n_modes(self) -> int:
        return len(self.a)

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.a0)
        for n in range(1, self.n_modes + 1):
            if self.a[n - 1]:
                out = out + self.a[n - 1] * np.cos(n * theta)
            if self.b[n - 1]:
                out = out + self.b[n - 1] * np.sin(n * theta)
        return out

    def derivative(self) -> "FourierSeries":
        ns = np.arange(1, self.n_modes + 1)
        return FourierSeries(0.0, ns * self.b, -ns * self.a)

    def mean(self) -> float:
        return self.a0


# ---------------------------------------------------------------------------
# radial DtN eigenvalues
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DtNOperator:
    """DtN eigenvalues lambda_0..lambda_n_max for Fourier modes on the disk."""

    n_max: int
    eigenvalues: np.ndarray
    kappa_label: str

    def __post_init__(self):
        lam = self.eigenvalues
        if abs(lam[0]) > 1e-12:
            raise ValueError("lambda_0 must vanish (constants are in the kernel)")
        if len(lam) != self.n_max + 1:
            raise ValueError("need n_max + 1 eigenvalues")


def _profile_of(field_or_profile) -> Callable:
    if callable(field_or_profile):
        return field_or_profile

    field = field_or_profile

    def prof(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        pts = np.stack([r, np.zeros_like(r)], axis=-1)
        return field.kappa_iso(pts)

    return prof


def _riccati_lambda(prof, n: int, r0=1e-6, rtol=1e-12) -> float:
    # y = r k u'/u satisfies y' = n^2 k / r - y^2 / (r k), y(0+) = n k(0)
    if n == 0:
        return 0.0

    def rhs(r, y):
        k = prof(np.array([r]))[0]
        return n * n * k / r - y * y / (r * k)

    y0 = n * prof(np.array([r0]))[0]
    sol = solve_ivp(rhs, (r0, 1.0), [y0], method="RK45", rtol=rtol, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"Riccati integration failed for mode {n}")
    return float(sol.y[0, -1])


def _log_rk4_lambdas(prof, n_list, r0=1e-6, n_steps=None) -> np.ndarray:
    """Linear system in u = r^n a(r), b = r k u' / r^n, integrated in log r.

    Fourth-order fixed-step RK with Richardson extrapolation (h and h/2).
    """
    n_arr = np.asarray(n_list, dtype=float)
    nmax = float(n_arr.max(initial=1.0))

    def run(steps):
        xi0, xi1 = np.log(r0), 0.0
        h = (xi1 - xi0) / steps
        a = np.ones_like(n_arr)
        b = n_arr * prof(np.array([r0]))[0] * np.ones_like(n_arr)

        def deriv(xi, a, b):
            r = np.exp(xi)
            k = prof(np.array([r]))[0]
            return (b - n_arr * k * a) / k, n_arr * (n_arr * k * a - b)

        xi = xi0
        for _ in range(steps):
            k1a, k1b = deriv(xi, a, b)
            k2a, k2b = deriv(xi + 0.5 * h, a + 0.5 * h * k1a, b + 0.5 * h * k1b)
            k3a, k3b = deriv(xi + 0.5 * h, a + 0.5 * h * k2a, b + 0.5 * h * k2b)
            k4a, k4b = deriv(xi + h, a + h * k3a, b + h * k3b)
            a = a + (h / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a)
            b = b + (h / 6.0) * (k1b + 2 * k2b + 2 * k3b + k4b)
            xi += h
        return b / a

    base = int(max(1200, 16 * nmax)) if n_steps is None else n_steps
    v1 = run(base)
    v2 = run(2 * base)
    lam = (16.0 * v2 - v1) / 15.0
    lam[n_arr == 0] = 0.0
    return lam


def dtn_eigenvalues_radial(field_or_profile, n_max: int, label: Optional[str] = None,
                           integrator: str = "riccati") -> DtNOperator:
    """Eigenvalues of the DtN map for a radial isotropic conductivity.

    ``integrator`` selects 'riccati' (adaptive RK on the Riccati form) or
    'linear' (fixed-step log-radius RK4 with Richardson); the two agree to
    better than 1e-8 relative for smooth positive profiles and serve as
    mutual oracles.
    """
    prof = _profile_of(field_or_profile)
    rr = np.linspace(1e-6, 1.0, 513)
    vals = prof(rr)
    if np.any(vals <= 0.0):
        raise ValueError("conductivity profile must stay positive (ellipticity)")
    if label is None:
        label = getattr(field_or_profile, "label", "radial")
    ns = np.arange(n_max + 1)
    if integrator == "riccati":
        lam = np.array([_riccati_lambda(prof, int(n)) for n in ns])
    elif integrator == "linear":
        lam = _log_rk4_lambdas(prof, ns)
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    if np.any(lam < -1e-12) or np.any(np.diff(lam) < -1e-9 * max(lam[-1], 1.0)):
        raise RuntimeError("radial spectrum must be nonnegative and nondecreasing")
    return DtNOperator(n_max=n_max, eigenvalues=lam, kappa_label=label)


def radial_mode_value(field_or_profile, n: int, r_eval: float) -> float:
    """Mode-n solution of the radial conductivity equation at radius r_eval.

    Returns u_n(r_eval) normalized by u_n(1) = 1; with constant
    conductivity this is r_eval^n.  Used as the reference for harmonic
    extension values at interior points of the disk.
    """
    if n == 0:
        return 1.0
    if not 0.0 <= r_eval <= 1.0:
        raise ValueError("r_eval must lie in [0, 1]")
    prof = _profile_of(field_or_profile)
    r0 = 1e-6
    if r_eval <= r0:
        return 0.0

    def rhs(r, y):
        k = prof(np.array([r]))[0]
        a, b = y
        return [(b - n * k * a) / (r * k), n * (n * k * a - b) / r]

    y0 = [1.0, n * prof(np.array([r0]))[0]]
    sol = solve_ivp(rhs, (r0, 1.0), y0, method="RK45", rtol=1e-11, atol=1e-12,
                    t_eval=[min(max(r_eval, r0), 1.0), 1.0])
    if not sol.success:
        raise RuntimeError(f"mode solve failed for n={n}")
    a_eval, a_one = sol.y[0, 0], sol.y[0, -1]
    return float(r_eval**n * a_eval / a_one)


def dtn_constant(c: float, n_max: int) -> DtNOperator:
    """Exact eigenvalues lambda_n = c n for constant conductivity c."""
    return DtNOperator(n_max=n_max, eigenvalues=c * np.arange(n_max + 1, dtype=float),
                       kappa_label=f"const{c:g}")


def dtn_apply(op: DtNOperator, phi: FourierSeries) -> FourierSeries:
    """Mode-wise action of the DtN map; the output has zero mean."""
    m = phi.n_modes
    if m > op.n_max:
        warnings.warn(
            f"input has {m} modes but the operator stores {op.n_max}; truncating",
            RuntimeWarning,
        )
        m = op.n_max
    lam = op.eigenvalues[1 : m + 1]
    return FourierSeries(0.0, lam * phi.a[:m], lam * phi.b[:m])


# ---------------------------------------------------------------------------
# boundary jump kernel
# ---------------------------------------------------------------------------


def _kernel_split(op: DtNOperator):
    lam = op.eigenvalues
    if op.n_max >= 2:
        slope = lam[-1] - lam[-2]
        offset = lam[-1] - slope * op.n_max
    else:
        slope, offset = lam[-1], 0.0
    ns = np.arange(1, op.n_max + 1)
    resid = lam[1:] - slope * ns - offset
    return slope, offset, ns, resid


def levy_kernel(op: DtNOperator, delta, abel_r: float = 1.0 - 1e-4):
    """Jump kernel N(delta) >= 0 of the boundary process, rotation-invariant case.

    N is minus the Abel sum of (1/pi) sum_n lambda_n cos(n delta): the
    affine-in-n part of the spectrum is summed in closed form at the Abel
    limit, and abel_r damps only the residual series.  The sign convention
    makes N the jump intensity density, so that
    integral (cos(n d) - 1) N(d) dd = -lambda_n.
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0.0) or np.any(delta > np.pi + 1e-12):
        raise ValueError("delta must lie in (0, pi]; the kernel diverges on the diagonal")
    if not 0.0 < abel_r <= 1.0:
        raise ValueError("abel_r must lie in (0, 1]")
    slope, offset, ns, resid = _kernel_split(op)
    s1 = -1.0 / (4.0 * np.sin(delta / 2.0) ** 2)  # Abel limit of sum n cos(n d)
    s0 = -0.5  # Abel limit of sum cos(n d), d != 0
    res = np.tensordot(np.cos(np.multiply.outer(delta, ns)), resid * abel_r**ns, axes=1)
    out = -(slope * s1 + offset * s0 + res) / np.pi
    return out if out.shape else float(out)


def levy_kernel_arc_integral(op: DtNOperator, arc_a, arc_b, abel_r=1.0 - 1e-4,
                             n_quad: int = 200) -> float:
    """Double integral of N over two arcs (start in arc_a, end in arc_b).

    Arcs are (lo, hi) parameter intervals; they must not overlap (the
    kernel is singular on the diagonal).
    """
    a0, a1 = arc_a
    b0, b1 = arc_b
    mid_gap = np.abs((((0.5 * (b0 + b1) - 0.5 * (a0 + a1)) + np.pi) % (2 * np.pi)) - np.pi)
    if mid_gap < 0.5 * ((a1 - a0) + (b1 - b0)):
        raise ValueError("arcs overlap or touch; kernel integral diverges")
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    xs = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * nodes
    ys = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * nodes
    wx = 0.5 * (a1 - a0) * weights
    wy = 0.5 * (b1 - b0) * weights
    dd = np.abs(((ys[None, :] - xs[:, None]) + np.pi) % (2.0 * np.pi) - np.pi)
    if np.any(dd < 1e-9):
        raise ValueError("arcs overlap or touch; kernel integral diverges")
    vals = levy_kernel(op, dd.ravel(), abel_r=abel_r).reshape(dd.shape)
    return float(wx @ vals @ wy)


# ---------------------------------------------------------------------------
# Poisson kernel of the unit disk
# ---------------------------------------------------------------------------


def poisson_kernel_disk(x, theta):
    """Harmonic-measure density (1-|x|^2) / (2 pi |x - e(theta)|^2).

    Exit-position density with respect to arc length for the absorbed
    diffusion with unit (or any constant) conductivity on the unit disk.
    """
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    if r2 >= 1.0:
        raise ValueError("x must be an interior point of the unit disk")
    theta = np.asarray(theta, dtype=float)
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    d2 = np.sum((x - e) ** 2, axis=-1)
    out = (1.0 - r2) / (2.0 * np.pi * d2)
    return out if out.shape else float(out)


def poisson_kernel_arc_integral(x, lo: float, hi: float, n_quad: int = 128) -> float:
    """Exit probability of the arc (lo, hi) from x: integral of the kernel."""
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    th = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
    return float(np.sum(poisson_kernel_disk(x, th) * weights) * 0.5 * (hi - lo))


# ---------------------------------------------------------------------------
# finite-difference grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SquareGrid:
    """Node-centered cartesian grid on [0, size]^2 with spacing size/n."""

    n: int
    size: float = 1.0

    @property
    def h(self) -> float:
        return self.size / self.n

    def nodes(self):
        xs = np.linspace(0.0, self.size, self.n + 1)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        return X, Y

    def boundary_nodes(self):
        """Non-corner boundary nodes, counterclockwise from the origin.

        Returns (arc parameters, xy coordinates, (ix, iy) indices).
        """
        n, h, S = self.n, self.h, self.size
        ixs, iys, arcs = [], [], []
        for i in range(1, n):  # bottom
            ixs.append(i); iys.append(0); arcs.append(i * h)
        for j in range(1, n):  # right
            ixs.append(n); iys.append(j); arcs.append(S + j * h)
        for i in range(1, n):  # top
            ixs.append(n - i); iys.append(n); arcs.append(2 * S + i * h)
        for j in range(1, n):  # left
            ixs.append(0); iys.append(n - j); arcs.append(3 * S + j * h)
        ix = np.array(ixs); iy = np.array(iys)
        xy = np.stack([ix * h, iy * h], axis=-1)
        return np.array(arcs), xy, (ix, iy)


@dataclass(frozen=True)
class DiskPolarGrid:
    """Cell-centered polar grid on the unit disk: r_i = (i+1/2) dr."""

    nr: int
    ntheta: int

    @property
    def dr(self) -> float:
        return 1.0 / self.nr

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.ntheta

    def centers(self):
        r = (np.arange(self.nr) + 0.5) * self.dr
        th = np.arange(self.ntheta) * self.dtheta
        return r, th


@dataclass
class GridFunction:
    """Discrete solution values on a grid with bilinear point evaluation."""

    grid: Union[SquareGrid, DiskPolarGrid]
    values: np.ndarray
    residual: float = 0.0

    def value_at(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if isinstance(self.grid, SquareGrid):
            h = self.grid.h
            fx = np.clip(x[0] / h, 0, self.grid.n - 1e-12)
            fy = np.clip(x[1] / h, 0, self.grid.n - 1e-12)
            i, j = int(fx), int(fy)
            tx, ty = fx - i, fy - j
            v = self.values
            return float((1 - tx) * (1 - ty) * v[i, j] + tx * (1 - ty) * v[i + 1, j]
                         + (1 - tx) * ty * v[i, j + 1] + tx * ty * v[i + 1, j + 1])
        g = self.grid
        r = float(np.hypot(x[0], x[1]))
        th = float(np.mod(np.arctan2(x[1], x[0]), 2 * np.pi))
        fr = np.clip(r / g.dr - 0.5, 0.0, g.nr - 1.000001)
        i = int(fr)
        tr = fr - i
        ft = th / g.dtheta
        j = int(ft) % g.ntheta
        tt = ft - int(ft)
        jp = (j + 1) % g.ntheta
        v = self.values
        return float((1 - tr) * (1 - tt) * v[i, j] + tr * (1 - tt) * v[i + 1 if i + 1 < g.nr else i, j]
                     + (1 - tr) * tt * v[i, jp] + tr * tt * v[i + 1 if i + 1 < g.nr else i, jp])


# ---------------------------------------------------------------------------
# square-grid assembly
# ---------------------------------------------------------------------------


def _kappa_iso_at(field, pts):
    if not field.isotropic:
        raise NotImplementedError("finite-difference solvers cover isotropic fields")
    return field.kappa_iso(pts)


def _square_operator(grid: SquareGrid, field):
    """Conservative flux operator K acting on all nodes (no boundary data).

    Row p of K u is the net outflux of the dual cell of node p divided by
    the cell area; boundary rows use half (corner: quarter) cells.  The
    Dirichlet solver restricts rows to the interior; the Neumann solver
    adds prescribed boundary fluxes on the right-hand side; conservative
    flux recovery evaluates boundary rows on a Dirichlet solution.
    """
    n, h = grid.n, grid.h
    m = (n + 1) * (n + 1)

    def nid(ix, iy):
        return ix * (n + 1) + iy

    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    ix = ix.ravel()
    iy = iy.ravel()

    def half_span(idx):
        # transverse extent of the dual cell in units of h (1 interior, 1/2 edge)
        return np.where(idx > 0, 0.5, 0.0) + np.where(idx < n, 0.5, 0.0)

    rows, cols, vals = [], [], []

    def add_faces(ixA, iyA, ixB, iyB, span):
        midx = 0.5 * (ixA + ixB) * h
        midy = 0.5 * (iyA + iyB) * h
        k = _kappa_iso_at(field, np.stack([midx, midy], axis=-1))
        w = k * span  # kappa * face length (span*h) / node distance (h)
        A = nid(ixA, iyA)
        B = nid(ixB, iyB)
        rows.append(np.concatenate([A, A, B, B]))
        cols.append(np.concatenate([A, B, B, A]))
        vals.append(np.concatenate([w, -w, w, -w]))

    mx = ix < n  # x-faces between (ix,iy) and (ix+1,iy), length = span_y * h
    add_faces(ix[mx], iy[mx], ix[mx] + 1, iy[mx], half_span(iy[mx]))
    my = iy < n  # y-faces
    add_faces(ix[my], iy[my], ix[my], iy[my] + 1, half_span(ix[my]))

    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    area = half_span(ix) * half_span(iy) * h * h
    return K, area


def _square_indices(grid: SquareGrid):
    n = grid.n
    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    ids = ix * (n + 1) + iy
    interior = ((ix > 0) & (ix < n) & (iy > 0) & (iy < n)).ravel()
    boundary = ~interior
    return ids.ravel(), interior, boundary


def solve_dirichlet_fd(grid, field, phi, rtol: float = 1e-10) -> GridFunction:
    """Solve div(kappa grad u) = 0 with Dirichlet data phi on the boundary.

    ``phi`` is a callable of the boundary parameter (arc length on the
    square, polar angle on the disk).  Second-order conservative scheme;
    the linear system is solved directly, residual reported on the result.
    """
    if isinstance(grid, DiskPolarGrid):
        return _solve_disk(grid, field, phi, kind="dirichlet")
    K, _ = _square_operator(grid, field)
    n, h, S = grid.n, grid.h, grid.size
    ids, interior, boundary = _square_indices(grid)
    X, Y = grid.nodes()

    # boundary values by arc parameter
    bvals = np.zeros((n + 1, n + 1))
    xs = np.arange(n + 1) * h
    bvals[:, 0] = phi(xs)  # bottom: arc = x
    bvals[n, :] = phi(S + np.arange(n + 1) * h)  # right: arc = S + y
    bvals[::-1, n] = phi(2 * S + np.arange(n + 1) * h)  # top: arc = 2S + (S - x)
    bvals[0, ::-1] = phi(3 * S + np.arange(n + 1) * h)  # left: arc = 3S + (S - y)
    bflat = bvals.ravel()

    Kii = K[interior][:, interior]
    Kib = K[interior][:, boundary]
    rhs = -Kib @ bflat[boundary]
    u_i = spla.spsolve(Kii.tocsc(), rhs)
    u = bflat.copy()
    u[interior] = u_i
    res = float(np.linalg.norm(Kii @ u_i - rhs) / max(1.0, np.linalg.norm(rhs)))
    if res > rtol:
        raise RuntimeError(f"Dirichlet solve residual {res:g} above {rtol:g}")
    return GridFunction(grid, u.reshape(n + 1, n + 1), residual=res)


def solve_neumann_fd(grid, field, f, rtol: float = 1e-8) -> GridFunction:
    """Solve the conservative co-normal problem kappa du/dnu = f, mean-zero.

    ``f`` is a callable of the boundary parameter; its boundary integral
    must vanish (current conservation), checked by quadrature to 1e-12.
    The mean-zero solution is produced with a Lagrange multiplier.
    """
    if isinstance(grid, DiskPolarGrid):
        return _solve_disk(grid, field, f, kind="neumann", rtol=rtol)
    n, h, S = grid.n, grid.h, grid.size
    # continuum compatibility check
    tt = np.linspace(0.0, 4 * S, 16385)[:-1]
    comp = float(np.mean(f(tt)) * 4 * S)
    if abs(comp) > 1e-12 * max(1.0, np.max(np.abs(f(tt)))):
        raise ValueError(
            f"incompatible boundary flux: <f,1> = {comp:g} != 0; current is not conserved")
    K, area = _square_operator(grid, field)
    ids, interior, boundary = _square_indices(grid)

    # prescribed influx on boundary faces: net flux out = f * face length
    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    ixf, iyf = ix.ravel(), iy.ravel()
    load = np.zeros((n + 1) * (n + 1))

    def face_arcs(idx_along, side):
        # arc parameter of the node on each side
        if side == "bottom":
            return idx_along * h
        if side == "right":
            return S + idx_along * h
        if side == "top":
            return 2 * S + (n - idx_along) * h
        return 3 * S + (n - idx_along) * h

    for side, sel in (("bottom", iyf == 0), ("right", ixf == n),
                      ("top", iyf == n), ("left", ixf == 0)):
        nodes = np.flatnonzero(sel)
        along = ixf[nodes] if side in ("bottom", "top") else iyf[nodes]
        ln = np.where((along > 0) & (along < n), 1.0, 0.5) * h
        load[nodes] += f(face_arcs(along, side)) * ln

    m = (n + 1) * (n + 1)
    ones = np.ones(m)
    A = sp.bmat([[K, ones[:, None]], [ones[None, :], None]], format="csc")
    b = np.concatenate([load, [0.0]])
    sol = spla.spsolve(A, b)
    u = sol[:m]
    u = u - u.mean()
    res = float(np.linalg.norm(K @ u - load + sol[m]) / max(1.0, np.linalg.norm(load)))
    if res > rtol:
        raise RuntimeError(f"Neumann solve flux residual {res:g} above {rtol:g}")
    return GridFunction(grid, u.reshape(n + 1, n + 1), residual=res)


# ---------------------------------------------------------------------------
# polar-grid assembly (unit disk)
# ---------------------------------------------------------------------------


def _disk_operator(grid: DiskPolarGrid, field):
    nr, nt = grid.nr, grid.ntheta
    dr, dth = grid.dr, grid.dtheta
    r, th = grid.centers()

    def cid(i, j):
        return i * nt + j

    rows, cols, vals = [], [], []

    def add(i1, j1, i2, j2, w):
        a, b = cid(i1, j1), cid(i2, j2)
        rows.extend([a, a, b, b])
        cols.extend([a, b, b, a])
        vals.extend([w, -w, w, -w])

    J = np.arange(nt)
    # radial faces between ring i-1 and i at radius i*dr
    for i in range(1, nr):
        rf = i * dr
        pts = np.stack([rf * np.cos(th), rf * np.sin(th)], axis=-1)
        k = _kappa_iso_at(field, pts)
        w = k * rf * dth / dr
        for j in range(nt):
            add(i - 1, j, i, j, w[j])
    # angular faces between sector j and j+1 at radius r_i
    for i in range(nr):
        thf = th + 0.5 * dth
        pts = np.stack([r[i] * np.cos(thf), r[i] * np.sin(thf)], axis=-1)
        k = _kappa_iso_at(field, pts)
        w = k * dr / (r[i] * dth)
        for j in range(nt):
            add(i, j, i, (j + 1) % nt, w[j])
    K = sp.csr_matrix((np.array(vals), (np.array(rows), np.array(cols))),
                      shape=(nr * nt, nr * nt))
    areas = np.repeat(r * dr * dth, 1)[:, None] * np.ones((1, nt))
    return K, areas.ravel()


def _solve_disk(grid: DiskPolarGrid, field, data, kind: str, rtol: float = 1e-8):
    nr, nt = grid.nr, grid.ntheta
    dr, dth = grid.dr, grid.dtheta
    r, th = grid.centers()
    K, areas = _disk_operator(grid, field)
    K = K.tolil()
    load = np.zeros(nr * nt)
    pts_b = np.stack([np.cos(th), np.sin(th)], axis=-1)
    k_b = _kappa_iso_at(field, pts_b)

    if kind == "dirichlet":
        # ghost value 2 phi - u gives a second-order boundary condition
        phi = data(th)
        w = k_b * 1.0 * dth / (0.5 * dr)
        for j in range(nt):
            p = (nr - 1) * nt + j
            K[p, p] += w[j]
            load[p] += w[j] * phi[j]
        u = spla.spsolve(K.tocsc(), load)
        res = float(np.linalg.norm(K.tocsr() @ u - load) / max(1.0, np.linalg.norm(load)))
        return GridFunction(grid, u.reshape(nr, nt), residual=res)

    # co-normal data: outward flux through the rim face of each boundary cell
    f = data(th)
    comp = float(np.sum(f) * dth)
    ttf = np.linspace(0, 2 * np.pi, 16385)[:-1]
    comp_cont = float(np.mean(data(ttf)) * 2 * np.pi)
    if abs(comp_cont) > 1e-12 * max(1.0, np.max(np.abs(data(ttf)))):
        raise ValueError(
            f"incompatible boundary flux: <f,1> = {comp_cont:g} != 0; current is not conserved")
    for j in range(nt):
        load[(nr - 1) * nt + j] += f[j] * dth  # face length dth at r = 1
    m = nr * nt
    A = sp.bmat([[K.tocsr(), areas[:, None]], [areas[None, :], None]], format="csc")
    b = np.concatenate([load, [0.0]])
    sol = spla.spsolve(A, b)
    u = sol[:m]
    u = u - float(u @ areas) / float(areas.sum())
    res = float(np.linalg.norm(K.tocsr() @ u - load + sol[m] * areas)
                / max(1.0, np.linalg.norm(load)))
    if res > rtol:
        raise RuntimeError(f"Neumann solve flux residual {res:g} above {rtol:g}")
    return GridFunction(grid, u.reshape(nr, nt), residual=res)


# ---------------------------------------------------------------------------
# discrete DtN on the square
# ---------------------------------------------------------------------------


@dataclass
class DiscreteDtN:
    """Discrete DtN matrix on the non-corner boundary nodes of a square grid.

    ``corner_flux`` is the flux response to the all-ones datum at the four
    corner nodes, so the map kills constants: matrix @ 1 + corner_flux = 0.
    """

    arcs: np.ndarray
    xy: np.ndarray
    matrix: np.ndarray
    weight: float  # boundary measure per node (= h)
    corner_flux: np.ndarray = None

    def kernel(self, i: int, j: int) -> float:
        """Off-diagonal jump-kernel value N(x_i, x_j) (>= 0 off-diagonal)."""
        if i == j:
            raise ValueError("kernel is singular on the diagonal")
        return -self.matrix[i, j] / self.weight


def dtn_matrix_square(grid: SquareGrid, field) -> DiscreteDtN:
    """Assemble the DtN matrix column by column from Dirichlet solves.

    Column j is the conservative boundary-flux recovery K u|_boundary / h of
    the discrete harmonic extension of the hat datum at boundary node j.
    """
    K, _ = _square_operator(grid, field)
    ids, interior, boundary_mask = _square_indices(grid)
    arcs, xy, (bix, biy) = grid.boundary_nodes()
    n = grid.n
    bids = bix * (n + 1) + biy
    Kii = K[interior][:, interior].tocsc()
    lu = spla.splu(Kii)
    Kib = K[interior][:, bids]
    Kbi = K[bids][:, interior]
    Kbb = K[bids][:, bids]
    m = len(bids)
    lam = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        u_i = lu.solve(-(Kib @ e))
        flux = Kbi @ u_i + Kbb @ e
        lam[:, j] = flux / grid.h
    cids = np.array([0, n * (n + 1), n * (n + 1) + n, n])
    Kic = K[interior][:, cids]
    Kbc = K[bids][:, cids]
    ones_c = np.ones(4)
    u_i = lu.solve(-(Kic @ ones_c))
    corner_flux = (Kbi @ u_i + Kbc @ ones_c) / grid.h
    return DiscreteDtN(arcs=arcs, xy=xy, matrix=lam, weight=grid.h,
                       corner_flux=corner_flux)


# ---------------------------------------------------------------------------
# integro-differential decomposition
# ---------------------------------------------------------------------------


def integro_decomposition_check(op: DtNOperator, phi: FourierSeries, eps: float,
                                abel_r: float = 1.0 - 1e-6, n_theta: int = 256,
                                n_quad: int = 4096):
    """Split the DtN action into tangential drift and jump parts.

    Returns (lhs, drift_term, jump_term, residual_sup) on a theta grid:
    lhs is the spectral action of the map, the drift term is the action on
    the coordinate functions dotted with the tangential gradient, and the
    jump term integrates the compensated increment against the jump kernel
    outside the cutoff |delta| < eps.  The residual sup-norm tends to 0 as
    eps -> 0 (linearly) at fixed spectral resolution.
    """
    if eps <= 0 or eps >= np.pi:
        raise ValueError("need 0 < eps < pi")
    if phi.n_modes > max(2, op.n_max // 4):
        warnings.warn("slow coefficient decay: decomposition accuracy degrades",
                      RuntimeWarning)
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    lhs = dtn_apply(op, phi).evaluate(theta)

    # drift: (DtN of the coordinate functions) . tangential gradient
    lam1 = op.eigenvalues[1]
    dcol = np.stack([lam1 * np.cos(theta), lam1 * np.sin(theta)], axis=-1)
    dphi = phi.derivative().evaluate(theta)
    tang = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    drift = np.sum(dcol * tang, axis=-1) * dphi

    # jump part: the symmetrized increment kills the odd chord compensator
    nodes, weights = np.polynomial.legendre.leggauss(64)
    edges = np.geomspace(eps, np.pi, n_quad // 64 + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    dd = (mids[:, None] + half[:, None] * nodes[None, :]).ravel()
    ww = (half[:, None] * np.ones_like(nodes)[None, :] * weights[None, :]).ravel()
    Nv = levy_kernel(op, dd, abel_r=abel_r)
    inc = (phi.evaluate(theta[:, None] + dd[None, :])
           + phi.evaluate(theta[:, None] - dd[None, :])
           - 2.0 * phi.evaluate(theta)[:, None])
    jump = -(inc * (Nv * ww)[None, :]).sum(axis=1)

    residual = float(np.max(np.abs(lhs - drift - jump)))
    return lhs, drift, jump, residual
