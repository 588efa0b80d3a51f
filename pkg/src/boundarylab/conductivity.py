"""Symmetric uniformly elliptic conductivity fields.

A field kappa maps points of the closed domain to symmetric 2x2 matrices
satisfying c^-1 |xi|^2 <= xi . kappa xi <= c |xi|^2.  The simulator needs
two derived quantities: the row divergence (sum_j d_j kappa_ij), which is
the drift of the associated divergence-form diffusion, and the diffusion
factor B with B B^T = 2 kappa.

Built-in families (all isotropic):

* ``constant``: kappa = a * I,
* ``radial``: kappa = k(r) * I for a smooth profile, optionally forced to 1
  inside a boundary collar (useful when the identity-collar assumption is
  required),
* ``bump``: kappa = 1 + h * mollifier supported in a disk well away from
  the boundary, so the field is exactly 1 in a boundary collar.

Ellipticity is verified by sampling on a grid; this is recorded as a
sampled invariant, not a symbolic proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ConductivityField",
    "constant_field",
    "radial_field",
    "radial_poly_field",
    "collared_radial_field",
    "bump_field",
    "make_field",
]


@dataclass(frozen=True)
class ConductivityField:
    """Isotropic-or-matrix conductivity with analytic derived quantities.

    ``scalar``/``scalar_grad`` drive the fast isotropic path; generic
    matrix fields supply ``matrix`` and ``grad_div`` instead.  ``a1_width``
    is the width of the boundary collar on which the field is exactly the
    identity (0 when no such collar is claimed).
    """

    label: str
    isotropic: bool
    ellipticity_c: float
    scalar: Optional[Callable] = None
    scalar_grad: Optional[Callable] = None
    matrix: Optional[Callable] = None
    matrix_grad_div: Optional[Callable] = None
    a1_width: float = 0.0
    constant: bool = False
    domain_radius: float = 1.0

    # -- evaluation -------------------------------------------------------
    def kappa_iso(self, pts):
        """Scalar value of an isotropic field at pts (n,2) -> (n,)."""
        if not self.isotropic:
            raise ValueError("field is not isotropic")
        return self.scalar(np.asarray(pts, dtype=float))

    def eval_kappa(self, pts):
        """Full matrix value, (n,2) -> (n,2,2) (or a single 2x2 for one point).

        Rejects points outside the closure of the field's domain of
        definition (a disk of radius ``domain_radius``).
        """
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        p = pts.reshape(-1, 2)
        if np.isfinite(self.domain_radius):
            r = np.hypot(p[:, 0], p[:, 1])
            if np.any(r > self.domain_radius * (1.0 + 1e-12) + 1e-12):
                raise ValueError("evaluation outside the closure of the domain")
        if self.isotropic:
            k = self.scalar(p)
            out = np.zeros((p.shape[0], 2, 2))
            out[:, 0, 0] = k
            out[:, 1, 1] = k
        else:
            out = self.matrix(p)
        return out[0] if single else out

    def grad_div(self, pts):
        """Row divergence (sum_j d_j kappa_ij)_i, the diffusion drift."""
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        p = pts.reshape(-1, 2)
        if self.isotropic:
            g = self.scalar_grad(p)
        else:
            g = self.matrix_grad_div(p)
        return g[0] if single else g

    def diffusion_factor(self, pts):
        """Symmetric square root of 2 kappa (isotropic: scalar sqrt(2 k))."""
        if self.isotropic:
            return np.sqrt(2.0 * self.kappa_iso(pts))
        m = 2.0 * self.eval_kappa(pts)
        # closed-form sqrt of an SPD 2x2 matrix
        tr = m[..., 0, 0] + m[..., 1, 1]
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        s = np.sqrt(det)
        t = np.sqrt(tr + 2.0 * s)
        out = m.copy()
        out[..., 0, 0] += s
        out[..., 1, 1] += s
        return out / t[..., None, None]

    def kappa_normal(self, theta, domain):
        """nu . kappa nu on the boundary; the local-time push factor."""
        xy = domain.boundary_xy(np.asarray(theta, dtype=float))
        if self.isotropic:
            return self.scalar(xy)
        n = domain.boundary_normal(np.asarray(theta, dtype=float))
        m = self.eval_kappa(xy)
        return np.einsum("...i,...ij,...j->...", n, m, n)

    # -- transformations ----------------------------------------------------
    def scale(self, R: float) -> "ConductivityField":
        """Diffusive rescaling kappa^R(x) = R^-2 kappa(R x).

        The source field lives on the R-dilated domain; the result lives on
        the original (unit-size) one.  Applying ``scale(R)`` then
        ``scale(1/R)`` reproduces the field pointwise.
        """
        if R <= 0:
            raise ValueError("scaling factor must be positive")
        base = self
        if self.isotropic:
            return ConductivityField(
                label=f"{self.label}^R={R:g}",
                isotropic=True,
                ellipticity_c=self.ellipticity_c * max(R, 1.0 / R) ** 2,
                scalar=lambda p: base.scalar(np.asarray(p) * R) / R**2,
                scalar_grad=lambda p: base.scalar_grad(np.asarray(p) * R) / R,
                a1_width=self.a1_width / R if self.a1_width else 0.0,
                constant=self.constant,
                domain_radius=self.domain_radius / R,
            )
        return ConductivityField(
            label=f"{self.label}^R={R:g}",
            isotropic=False,
            ellipticity_c=self.ellipticity_c * max(R, 1.0 / R) ** 2,
            matrix=lambda p: base.matrix(np.asarray(p) * R) / R**2,
            matrix_grad_div=lambda p: base.matrix_grad_div(np.asarray(p) * R) / R,
            a1_width=self.a1_width / R if self.a1_width else 0.0,
            constant=self.constant,
            domain_radius=self.domain_radius / R,
        )

    # -- sampled invariants ---------------------------------------------------
    def verify_ellipticity(self, pts) -> bool:
        """Check the two-sided bound with constant ellipticity_c at sample points."""
        m = self.eval_kappa(pts)
        if np.max(np.abs(m - np.swapaxes(m, -1, -2))) > 1e-14:
            return False
        tr = m[..., 0, 0] + m[..., 1, 1]
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] ** 2
        disc = np.sqrt(np.maximum((0.5 * tr) ** 2 - det, 0.0))
        lo = 0.5 * tr - disc
        hi = 0.5 * tr + disc
        c = self.ellipticity_c
        return bool(np.all(lo >= 1.0 / c - 1e-12) and np.all(hi <= c + 1e-12))


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------


def constant_field(a: float) -> ConductivityField:
    """kappa = a * identity."""
    if a <= 0:
        raise ValueError("constant conductivity must be positive")
    return ConductivityField(
        label=f"const{a:g}",
        isotropic=True,
        ellipticity_c=max(a, 1.0 / a),
        scalar=lambda p: np.full(np.asarray(p).shape[0], float(a)),
        scalar_grad=lambda p: np.zeros((np.asarray(p).shape[0], 2)),
        constant=True,
        domain_radius=np.inf,
    )


def radial_field(profile, dprofile, label="radial", a1_width=0.0,
                 domain_radius=1.0) -> ConductivityField:
    """Isotropic kappa(x) = profile(|x|) with analytic radial derivative."""

    def scalar(p):
        p = np.asarray(p, dtype=float)
        return profile(np.hypot(p[:, 0], p[:, 1]))

    def scalar_grad(p):
        p = np.asarray(p, dtype=float)
        r = np.hypot(p[:, 0], p[:, 1])
        safe = np.where(r > 0, r, 1.0)
        g = dprofile(r) / safe
        g = np.where(r > 0, g, 0.0)
        return p * g[:, None]

    rr = np.linspace(0.0, domain_radius, 2049)
    vals = profile(rr)
    if np.any(vals <= 0):
        raise ValueError("radial profile must stay positive")
    c = float(max(vals.max(), 1.0 / vals.min()))
    return ConductivityField(
        label=label,
        isotropic=True,
        ellipticity_c=c,
        scalar=scalar,
        scalar_grad=scalar_grad,
        a1_width=a1_width,
        domain_radius=domain_radius,
    )


def radial_poly_field(coeffs, label=None, domain_radius=1.0) -> ConductivityField:
    """Radial profile polynomial in r^2: k(r) = sum_j coeffs[j] r^(2j)."""
    coeffs = tuple(float(c) for c in coeffs)

    def profile(r):
        r2 = np.asarray(r, dtype=float) ** 2
        out = np.zeros_like(r2)
        for c in reversed(coeffs):
            out = out * r2 + c
        return out

    def dprofile(r):
        r = np.asarray(r, dtype=float)
        r2 = r**2
        out = np.zeros_like(r2)
        for j in range(len(coeffs) - 1, 0, -1):
            out = out * r2 + j * coeffs[j]
        return 2.0 * r * out

    label = label or "radial" + "+".join(f"{c:g}r{2*j}" for j, c in enumerate(coeffs) if c)
    return radial_field(profile, dprofile, label=label, domain_radius=domain_radius)


def _smoothstep(u):
    # quintic smoothstep, C^2 at both ends
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _dsmoothstep(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u**2 * (1.0 - u) ** 2, 0.0)


def collared_radial_field(core_profile, core_dprofile, r_core=0.6, r_collar=0.85,
                          label="radial-collared") -> ConductivityField:
    """Radial field equal to core_profile(r) for r <= r_core and to 1 for
    r >= r_collar, blended smoothly in between.  Satisfies the
    identity-collar assumption with collar width 1 - r_collar."""
    if not 0.0 < r_core < r_collar < 1.0:
        raise ValueError("need 0 < r_core < r_collar < 1")
    w = r_collar - r_core

    def profile(r):
        r = np.asarray(r, dtype=float)
        s = 1.0 - _smoothstep((r - r_core) / w)
        return 1.0 + (core_profile(r) - 1.0) * s

    def dprofile(r):
        r = np.asarray(r, dtype=float)
        u = (r - r_core) / w
        s = 1.0 - _smoothstep(u)
        ds = -_dsmoothstep(u) / w
        return core_dprofile(r) * s + (core_profile(r) - 1.0) * ds

    return radial_field(profile, dprofile, label=label, a1_width=1.0 - r_collar)


def bump_field(center=(0.0, 0.0), width=0.5, height=1.0) -> ConductivityField:
    """kappa = 1 + h * exp(1/(q - 1)) with q = |x-x0|^2/w^2, supported in
    the disk of radius w around x0.  The support must stay clear of the
    boundary, so the field is exactly 1 in a collar."""
    x0 = np.asarray(center, dtype=float)
    w2 = float(width) ** 2

    def scalar(p):
        p = np.asarray(p, dtype=float)
        q = ((p[:, 0] - x0[0]) ** 2 + (p[:, 1] - x0[1]) ** 2) / w2
        out = np.ones(p.shape[0])
        inside = q < 1.0
        out[inside] += height * np.exp(1.0 / (q[inside] - 1.0))
        return out

    def scalar_grad(p):
        p = np.asarray(p, dtype=float)
        d = p - x0
        q = (d[:, 0] ** 2 + d[:, 1] ** 2) / w2
        g = np.zeros_like(p)
        inside = q < 1.0
        qi = q[inside]
        fac = height * np.exp(1.0 / (qi - 1.0)) * (-1.0 / (qi - 1.0) ** 2) * (2.0 / w2)
        g[inside] = d[inside] * fac[:, None]
        return g

    reach = np.hypot(*x0) + width
    if reach >= 1.0:
        raise ValueError("bump support must stay inside the unit disk")
    peak = 1.0 + height * np.exp(-1.0)
    return ConductivityField(
        label=f"bump(h={height:g},w={width:g})",
        isotropic=True,
        ellipticity_c=max(peak, 1.0),
        scalar=scalar,
        scalar_grad=scalar_grad,
        a1_width=1.0 - reach,
    )


def make_field(family: str, value=1.0, profile_coeffs=None, bump=None) -> ConductivityField:
    """Build a field from config values (kappa.family and friends)."""
    if family == "constant":
        return constant_field(float(value))
    if family == "radial":
        coeffs = profile_coeffs or (1.0, 1.0)
        return radial_poly_field(coeffs)
    if family == "radial-collared":
        coeffs = profile_coeffs or (1.0, 1.0)
        inner = radial_poly_field(coeffs)

        def prof(r):
            return inner.scalar(np.stack([np.asarray(r, dtype=float),
                                          np.zeros_like(np.asarray(r, dtype=float))], axis=-1))

        def dprof(r):
            r = np.asarray(r, dtype=float)
            pts = np.stack([r, np.zeros_like(r)], axis=-1)
            return inner.scalar_grad(pts)[:, 0]

        return collared_radial_field(prof, dprof,
                                     label="collared-" + inner.label)
    if family == "bump":
        b = bump or {}
        return bump_field(center=b.get("center", (0.0, 0.0)),
                          width=b.get("width", 0.5),
                          height=b.get("height", 1.0))
    raise ValueError(f"unknown conductivity family: {family!r}")
