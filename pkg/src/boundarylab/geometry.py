"""Planar domains with parametrized boundaries.

Three domain families are supported:

* the unit disk, parametrized by the polar angle,
* the unit square ``[0,1]^2``, parametrized by arc length from the origin
  counterclockwise (x-axis edge first),
* smooth star-shaped domains ``r < rho(theta)`` with a strictly positive,
  twice continuously differentiable radius profile.

Every domain exposes the boundary parametrization, outward unit normals,
the surface (arc-length) measure, an interior signed distance and the
nearest-point projection used by the reflection step of the simulator.
All array-facing methods are vectorized and the objects are immutable, so
they can be shared freely between simulation workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundaryPoint",
    "Projection",
    "Domain",
    "UnitDisk",
    "UnitSquare",
    "StarDomain",
    "make_domain",
    "ProjectionError",
]

_GAUSS_ORDER = 24
_GAUSS_PANELS = 64


class ProjectionError(ValueError):
    """Raised when a point is outside the reach of the nearest-point map."""


@dataclass(frozen=True)
class BoundaryPoint:
    """A boundary point given by its parameter value and cartesian position.

    ``density`` is the local surface-measure density |d(curve)/d(theta)|,
    i.e. the weight converting parameter intervals into arc length.
    """

    theta: float
    xy: np.ndarray
    density: float = 1.0


@dataclass(frozen=True)
class Projection:
    """Result of the nearest-point projection onto the boundary."""

    foot: BoundaryPoint
    normal: np.ndarray
    depth: float
    inside: bool


class Domain:
    """Common interface; concrete domains implement the array methods."""

    kind: str
    period: float
    boundary_length: float
    area: float
    projection_reach: float

    # -- parametrization -------------------------------------------------
    def boundary_xy(self, theta):
        raise NotImplementedError

    def boundary_normal(self, theta):
        raise NotImplementedError

    def boundary_density(self, theta):
        raise NotImplementedError

    def boundary_param(self, theta: float) -> BoundaryPoint:
        """Point on the boundary for a parameter value (reduced mod period)."""
        th = float(theta) % self.period
        xy = self.boundary_xy(np.array([th]))[0]
        dens = float(self.boundary_density(np.array([th]))[0])
        return BoundaryPoint(th, xy, dens)

    # -- measures ---------------------------------------------------------
    def surface_measure(self, theta_a: float, theta_b: float) -> float:
        """Arc length of the boundary piece theta_a <= theta <= theta_b."""
        if theta_b < theta_a:
            raise ValueError("theta_a must not exceed theta_b")
        if theta_b - theta_a > self.period + 1e-12:
            raise ValueError("arc longer than one period")
        return self._arc_length(theta_a, theta_b)

    def _arc_length(self, a, b):
        raise NotImplementedError

    # -- point queries ----------------------------------------------------
    def signed_inner_distance(self, pts):
        """Distance to the boundary, positive inside, negative outside.

        For the star domain this is a conservative (slightly shrunk) bound;
        it is only used for step-size control, never for geometry proper.
        """
        raise NotImplementedError

    def inside(self, pts):
        return self.signed_inner_distance(pts) >= 0.0

    def project(self, pts):
        """Vectorized nearest-point projection.

        Returns ``(theta, foot_xy, normal, depth, inside)`` where ``depth``
        is the distance from the point to its foot (zero for interior
        points) and ``inside`` flags points in the closed domain.
        """
        raise NotImplementedError

    def project_point(self, x) -> Projection:
        """Scalar projection with reach checking (reflection-step contract)."""
        pts = np.asarray(x, dtype=float).reshape(1, 2)
        theta, foot, normal, depth, inside = self.project(pts)
        if not inside[0] and depth[0] > self.projection_reach:
            raise ProjectionError(
                f"point {x} lies {depth[0]:.3g} outside the boundary, beyond "
                f"the projection reach {self.projection_reach:.3g}"
            )
        dens = float(self.boundary_density(theta[:1])[0])
        bp = BoundaryPoint(float(theta[0]), foot[0], dens)
        return Projection(bp, normal[0], float(depth[0]) if not inside[0] else 0.0, bool(inside[0]))

    # -- sampling ---------------------------------------------------------
    def sample_interior(self, n, rng):
        raise NotImplementedError

    def sample_boundary_theta(self, n, rng):
        """Parameters distributed like the surface measure (uniform in sigma)."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# unit disk
# ---------------------------------------------------------------------------


class UnitDisk(Domain):
    kind = "unit-disk"
    period = 2.0 * np.pi
    boundary_length = 2.0 * np.pi
    area = np.pi
    projection_reach = 0.5

    def boundary_xy(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def boundary_normal(self, theta):
        return self.boundary_xy(theta)

    def boundary_density(self, theta):
        return np.ones_like(np.asarray(theta, dtype=float))

    def _arc_length(self, a, b):
        return b - a

    def signed_inner_distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        return 1.0 - np.hypot(pts[..., 0], pts[..., 1])

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)
        safe = np.where(r > 0, r, 1.0)
        foot = pts / safe[:, None]
        foot[r == 0] = np.array([1.0, 0.0])
        normal = foot.copy()
        inside = r <= 1.0
        depth = np.where(inside, 0.0, r - 1.0)
        return theta, foot, normal, depth, inside

    def sample_interior(self, n, rng):
        r = np.sqrt(rng.uniform(size=n))
        th = rng.uniform(0.0, 2.0 * np.pi, size=n)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def sample_boundary_theta(self, n, rng):
        return rng.uniform(0.0, 2.0 * np.pi, size=n)


# ---------------------------------------------------------------------------
# unit square
# ---------------------------------------------------------------------------


class UnitSquare(Domain):
    """The unit square [0,1]^2, boundary parametrized by arc length.

    The parameter starts at the corner (0,0) and runs counterclockwise:
    bottom edge, right edge, top edge, left edge.  Corners carry the
    bisector normal; they form a sigma-null set.
    """

    kind = "unit-square"
    period = 4.0
    boundary_length = 4.0
    area = 1.0
    projection_reach = 0.5

    def boundary_xy(self, theta):
        t = np.mod(np.asarray(theta, dtype=float), 4.0)
        x = np.empty_like(t)
        y = np.empty_like(t)
        m0 = t < 1.0
        m1 = (t >= 1.0) & (t < 2.0)
        m2 = (t >= 2.0) & (t < 3.0)
        m3 = t >= 3.0
        x[m0], y[m0] = t[m0], 0.0
        x[m1], y[m1] = 1.0, t[m1] - 1.0
        x[m2], y[m2] = 3.0 - t[m2], 1.0
        x[m3], y[m3] = 0.0, 4.0 - t[m3]
        return np.stack([x, y], axis=-1)

    def boundary_normal(self, theta):
        t = np.mod(np.asarray(theta, dtype=float), 4.0)
        n = np.zeros(t.shape + (2,))
        m0 = t < 1.0
        m1 = (t >= 1.0) & (t < 2.0)
        m2 = (t >= 2.0) & (t < 3.0)
        m3 = t >= 3.0
        n[m0] = [0.0, -1.0]
        n[m1] = [1.0, 0.0]
        n[m2] = [0.0, 1.0]
        n[m3] = [-1.0, 0.0]
        return n

    def boundary_density(self, theta):
        return np.ones_like(np.asarray(theta, dtype=float))

    def _arc_length(self, a, b):
        return b - a

    def signed_inner_distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        inside_d = np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))
        cx = np.clip(x, 0.0, 1.0)
        cy = np.clip(y, 0.0, 1.0)
        out_d = np.hypot(x - cx, y - cy)
        return np.where(out_d > 0, -out_d, inside_d)

    @staticmethod
    def _theta_of_xy(x, y):
        # assumes the point lies on the boundary
        t = np.empty_like(x)
        on_bottom = y <= 0.0
        on_right = (x >= 1.0) & ~on_bottom
        on_top = (y >= 1.0) & ~on_bottom & ~on_right
        t[on_bottom] = x[on_bottom]
        t[on_right] = 1.0 + y[on_right]
        t[on_top] = 3.0 - x[on_top]
        rest = ~(on_bottom | on_right | on_top)
        t[rest] = 4.0 - y[rest]
        return np.mod(t, 4.0)

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[:, 0], pts[:, 1]
        cx = np.clip(x, 0.0, 1.0)
        cy = np.clip(y, 0.0, 1.0)
        out_d = np.hypot(x - cx, y - cy)
        outside = out_d > 0.0

        foot = np.stack([cx, cy], axis=-1)
        normal = np.zeros_like(foot)
        depth = np.zeros_like(x)

        if outside.any():
            diff = pts[outside] - foot[outside]
            nrm = np.hypot(diff[:, 0], diff[:, 1])
            normal[outside] = diff / nrm[:, None]
            depth[outside] = nrm

        ins = ~outside
        if ins.any():
            xi, yi = x[ins], y[ins]
            # nearest face among the four
            dists = np.stack([yi, 1.0 - xi, 1.0 - yi, xi], axis=0)
            face = np.argmin(dists, axis=0)
            fx = np.where(face == 0, xi, np.where(face == 1, 1.0, np.where(face == 2, xi, 0.0)))
            fy = np.where(face == 0, 0.0, np.where(face == 1, yi, np.where(face == 2, 1.0, yi)))
            foot[ins] = np.stack([fx, fy], axis=-1)
            nx = np.where(face == 0, 0.0, np.where(face == 1, 1.0, np.where(face == 2, 0.0, -1.0)))
            ny = np.where(face == 0, -1.0, np.where(face == 1, 0.0, np.where(face == 2, 1.0, 0.0)))
            normal[ins] = np.stack([nx, ny], axis=-1)

        theta = self._theta_of_xy(foot[:, 0], foot[:, 1])
        return theta, foot, normal, depth, ~outside

    def sample_interior(self, n, rng):
        return rng.uniform(size=(n, 2))

    def sample_boundary_theta(self, n, rng):
        return rng.uniform(0.0, 4.0, size=n)


# ---------------------------------------------------------------------------
# smooth star-shaped domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StarDomain(Domain):
    """Star-shaped domain r < rho(theta) with a smooth positive profile.

    ``rho_coeffs`` lists Fourier coefficients ``[c0, a1, b1, a2, b2, ...]``
    for rho(theta) = c0 + sum_k (a_k cos k theta + b_k sin k theta).
    The nearest-point projection solves the stationarity equation for the
    parameter by Newton iteration (tolerance 1e-12, at most 50 steps).
    """

    rho_coeffs: tuple
    kind: str = "star-smooth"
    period: float = 2.0 * np.pi
    boundary_length: float = field(init=False, default=0.0)
    area: float = field(init=False, default=0.0)
    projection_reach: float = field(init=False, default=0.0)
    _dist_factor: float = field(init=False, default=1.0)

    def __post_init__(self):
        th = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        rho = self.rho(th)
        if np.any(rho <= 0.0):
            raise ValueError("radius profile must stay positive")
        object.__setattr__(self, "boundary_length", self._arc_length(0.0, 2.0 * np.pi))
        object.__setattr__(self, "area", 0.5 * float(np.mean(rho**2)) * 2.0 * np.pi)
        drho = self.drho(th)
        tilt = rho / np.hypot(rho, drho)
        object.__setattr__(self, "_dist_factor", 0.8 * float(tilt.min()))
        # conservative reach: a fraction of the smallest profile radius
        object.__setattr__(self, "projection_reach", 0.25 * float(rho.min()))

    # profile and derivatives --------------------------------------------
    def _modes(self):
        c = np.asarray(self.rho_coeffs, dtype=float)
        c0 = c[0]
        ab = c[1:]
        ks = np.arange(1, (ab.size + 1) // 2 + 1)
        a = ab[0::2]
        b = ab[1::2] if ab.size > 1 else np.zeros(0)
        b = np.pad(b, (0, a.size - b.size))
        return c0, ks[: a.size], a, b

    def rho(self, theta):
        theta = np.asarray(theta, dtype=float)
        c0, ks, a, b = self._modes()
        ang = np.multiply.outer(theta, ks)
        return c0 + np.cos(ang) @ a + np.sin(ang) @ b

    def drho(self, theta):
        theta = np.asarray(theta, dtype=float)
        c0, ks, a, b = self._modes()
        ang = np.multiply.outer(theta, ks)
        return -np.sin(ang) @ (ks * a) + np.cos(ang) @ (ks * b)

    def d2rho(self, theta):
        theta = np.asarray(theta, dtype=float)
        c0, ks, a, b = self._modes()
        ang = np.multiply.outer(theta, ks)
        return -np.cos(ang) @ (ks**2 * a) - np.sin(ang) @ (ks**2 * b)

    # boundary geometry ----------------------------------------------------
    def boundary_xy(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.rho(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    def _tangent(self, theta):
        r, dr = self.rho(theta), self.drho(theta)
        ct, st = np.cos(theta), np.sin(theta)
        tx = dr * ct - r * st
        ty = dr * st + r * ct
        return np.stack([tx, ty], axis=-1)

    def boundary_normal(self, theta):
        theta = np.asarray(theta, dtype=float)
        t = self._tangent(theta)
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def boundary_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.hypot(self.rho(theta), self.drho(theta))

    def _arc_length(self, a, b):
        nodes, weights = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
        edges = np.linspace(a, b, _GAUSS_PANELS + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        th = mid[:, None] + half[:, None] * nodes[None, :]
        vals = self.boundary_density(th.ravel()).reshape(th.shape)
        return float(np.sum(vals @ weights * half))

    # point queries ----------------------------------------------------------
    def signed_inner_distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        th = np.arctan2(pts[..., 1], pts[..., 0])
        gap = self.rho(th) - r
        return np.where(gap >= 0, gap * self._dist_factor, gap)

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        # Newton iteration on (x - c(theta)) . c'(theta) = 0
        for _ in range(50):
            c = self.boundary_xy(theta)
            cp = self._tangent(theta)
            r, dr, d2r = self.rho(theta), self.drho(theta), self.d2rho(theta)
            ct, st = np.cos(theta), np.sin(theta)
            cppx = d2r * ct - 2.0 * dr * st - r * ct
            cppy = d2r * st + 2.0 * dr * ct - r * st
            diff = pts - c
            g = diff[:, 0] * cp[:, 0] + diff[:, 1] * cp[:, 1]
            gp = -(cp[:, 0] ** 2 + cp[:, 1] ** 2) + diff[:, 0] * cppx + diff[:, 1] * cppy
            step = g / gp
            theta = theta - step
            if np.max(np.abs(step)) < 1e-12:
                break
        theta = np.mod(theta, 2.0 * np.pi)
        foot = self.boundary_xy(theta)
        normal = self.boundary_normal(theta)
        diff = pts - foot
        depth = np.hypot(diff[:, 0], diff[:, 1])
        rr = np.hypot(pts[:, 0], pts[:, 1])
        inside = rr <= self.rho(np.arctan2(pts[:, 1], pts[:, 0]))
        depth = np.where(inside, 0.0, depth)
        return theta, foot, normal, depth, inside

    def sample_interior(self, n, rng):
        rho_max = float(self.rho(np.linspace(0, 2 * np.pi, 2048)).max())
        out = np.empty((n, 2))
        got = 0
        while got < n:
            m = 2 * (n - got) + 16
            th = rng.uniform(0.0, 2.0 * np.pi, size=m)
            keep = rng.uniform(size=m) < (self.rho(th) / rho_max) ** 2
            th = th[keep][: n - got]
            r = self.rho(th) * np.sqrt(rng.uniform(size=th.size))
            out[got : got + th.size] = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
            got += th.size
        return out

    def sample_boundary_theta(self, n, rng):
        dens_max = float(self.boundary_density(np.linspace(0, 2 * np.pi, 2048)).max())
        out = np.empty(n)
        got = 0
        while got < n:
            m = 2 * (n - got) + 16
            th = rng.uniform(0.0, 2.0 * np.pi, size=m)
            keep = rng.uniform(size=m) < self.boundary_density(th) / dens_max
            th = th[keep][: n - got]
            out[got : got + th.size] = th
            got += th.size
        return out


def make_domain(kind: str, rho_coeffs=None) -> Domain:
    """Build a domain from config values ``domain.kind`` / ``domain.rho_coeffs``."""
    if kind == "unit-disk":
        return UnitDisk()
    if kind == "unit-square":
        return UnitSquare()
    if kind == "star-smooth":
        if not rho_coeffs:
            raise ValueError("star-smooth domain needs rho_coeffs")
        return StarDomain(tuple(float(c) for c in rho_coeffs))
    raise ValueError(f"unknown domain kind: {kind!r}")
