"""Radial scattering-manifold models.

A radial metric dr^2 + phi(r)^2 h_{S^{n-1}} is reduced, for n = 3, to the
half-line operator H = -d^2/dr^2 + V with V = phi''/phi acting on
v = phi * u.  Boundary defining function near infinity is x = 1/r.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

KINDS = ("euclidean", "perturbed_conic")


class GeometryError(ValueError):
    pass


def _bump(r, r1, r2):
    """C-infinity bump on [r1, r2] normalised to 1 at the midpoint, with its
    first two r-derivatives."""
    r = np.asarray(r, dtype=float)
    c = 2.0 / (r2 - r1)
    x = c * r - (r1 + r2) / (r2 - r1)
    s = np.zeros_like(r)
    ds = np.zeros_like(r)
    d2s = np.zeros_like(r)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    w = 1.0 - xi * xi
    g = 1.0 - 1.0 / w
    g1 = -2.0 * xi / w**2
    g2 = -2.0 / w**2 - 8.0 * xi * xi / w**3
    e = np.exp(g)
    s[inside] = e
    ds[inside] = c * g1 * e
    d2s[inside] = c * c * (g2 + g1 * g1) * e
    return s, ds, d2s


@dataclass(frozen=True)
class ManifoldModel:
    """Immutable radial geometry tabulated on r_j = j * dr, j = 0..N."""

    n: int
    kind: str
    params: tuple
    r_max: float
    dr: float
    r: np.ndarray = field(repr=False, compare=False)
    phi: np.ndarray = field(repr=False, compare=False)
    dphi: np.ndarray = field(repr=False, compare=False)
    d2phi: np.ndarray = field(repr=False, compare=False)
    V: np.ndarray = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.r.size

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside which V vanishes identically (empty for euclidean)."""
        if self.kind == "euclidean":
            return (0.0, 0.0)
        _, r1, r2 = self.params
        return (r1, r2)

    @property
    def r_trans(self) -> float:
        return self.support[1]

    @property
    def C_model(self) -> float:
        """sup |V(r)| r^3 over the grid; beyond r_trans V is zero."""
        return float(np.max(np.abs(self.V) * self.r**3))

    def profile(self, r):
        """(phi, phi', phi'') at arbitrary radii."""
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return r.copy(), np.ones_like(r), np.zeros_like(r)
        a, r1, r2 = self.params
        s, ds, d2s = _bump(r, r1, r2)
        phi = r * (1.0 + a * s)
        dphi = 1.0 + a * s + a * r * ds
        d2phi = 2.0 * a * ds + a * r * d2s
        return phi, dphi, d2phi

    def potential(self, r):
        """V(r) = phi''/phi, with the removable singularity at r = 0 filled."""
        r = np.asarray(r, dtype=float)
        phi, _, d2phi = self.profile(r)
        out = np.zeros_like(r)
        nz = phi > 0
        out[nz] = d2phi[nz] / phi[nz]
        return out

    def key(self) -> str:
        blob = json.dumps(
            {"n": self.n, "kind": self.kind, "params": list(self.params),
             "r_max": self.r_max, "dr": self.dr},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "n": self.n,
                "r_max": self.r_max, "dr": self.dr}

    # Reduced variable v = phi * u (n = 3).
    def to_reduced(self, u):
        return self.phi * u

    def from_reduced(self, v):
        v = np.asarray(v)
        u = np.empty_like(v)
        u[..., 1:] = v[..., 1:] / self.phi[1:]
        # u is even in r; fill the origin by quadratic extrapolation
        u[..., 0] = (4.0 * u[..., 1] - u[..., 2]) / 3.0
        return u


def make_model(kind: str, params=(), n: int = 3, r_max: float = 200.0,
               dr: float = 0.05) -> ManifoldModel:
    """Build a radial model.

    ``perturbed_conic`` takes ``params = (a, r1, r2)`` and uses
    phi(r) = r (1 + a s(r)) with s the unit bump on [r1, r2]; |a| < 1/2.
    """
    if kind not in KINDS:
        raise GeometryError(f"unknown profile kind {kind!r}")
    if n < 3:
        raise GeometryError("dimension n must be >= 3")
    if dr <= 0 or r_max <= 0:
        raise GeometryError("grid spacing and r_max must be positive")
    N = int(round(r_max / dr))
    if N < 3 or abs(N * dr - r_max) > 1e-9 * r_max:
        raise GeometryError("r_max / dr must be an integer")
    params = tuple(float(p) for p in params)
    if kind == "euclidean":
        if params:
            raise GeometryError("euclidean profile takes no parameters")
    else:
        if len(params) != 3:
            raise GeometryError("perturbed_conic needs params (a, r1, r2)")
        a, r1, r2 = params
        if abs(a) >= 0.5:
            raise GeometryError("amplitude too large: |a| must be < 1/2")
        if not 0 < r1 < r2 < r_max:
            raise GeometryError("bump interval must satisfy 0 < r1 < r2 < r_max")

    r = np.arange(N + 1) * dr
    proto = ManifoldModel(n, kind, params, float(r_max), float(dr),
                          r, r, r, r, r)
    phi, dphi, d2phi = proto.profile(r)
    if np.any(phi[1:] <= 0):
        raise GeometryError("degenerate profile: phi must be positive for r > 0")
    V = proto.potential(r)
    arrays = [r, phi, dphi, d2phi, V]
    for arr in arrays:
        arr.setflags(write=False)
    return ManifoldModel(n, kind, params, float(r_max), float(dr), *arrays)


def distance(r1: float, r2: float) -> float:
    """Riemannian distance between two points on a common ray."""
    if r1 < 0 or r2 < 0:
        raise GeometryError("radii must be non-negative")
    return abs(r1 - r2)


def radial_derivative(u, dr):
    """Centred d/dr of an even radial function sampled on r_j = j dr.

    Uses the reflection u(-r) = u(r) at the origin and one-sided second
    order differences at the outer end.
    """
    u = np.asarray(u)
    du = np.empty_like(u)
    du[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2 * dr)
    du[..., 0] = 0.0
    du[..., -1] = (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * dr)
    return du


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w
