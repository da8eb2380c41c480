"""Contraction-mapping solvers for nonlinear Klein-Gordon equations.

    u_tt - Delta_g u + u = F(u),   u(0) = u0,  u_t(0) = u1

The solution map is u -> u_hom + Duhamel[F(u)], iterated from the
homogeneous evolution (or from zero).  ``sign = +1`` is the defocusing
case F(u) = -|u|^{p-1} u, whose conserved energy carries
+int |u|^{p+1}/(p+1).  The leapfrog oracle is an independent finite
difference solver that never touches a SpectralTable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .admissibility import exponent_table
from .geometry import radial_derivative, trapezoid_weights
from .norms import lp_norm, mixed_norm, mixed_spec, sobolev_lp, sobolev_norm, volume_weights
from .propagator import GridSolution, duhamel, kg_evolve
from .spectral import SpectralTable

MAX_ITER = 50
DIVERGENCE_STREAK = 3


class ContractionFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class Nonlinearity:
    """Descriptor for the right-hand side F.

    kind: "linear" (F = 0), "power" (F = -sign |u|^{p-1} u), "ym"
    (F = u u_r + u^3) or "forcing" (F prescribed on ``t_forcing``).
    """

    kind: str = "linear"
    p: float = 3.0
    sign: int = 1
    t_forcing: np.ndarray | None = field(default=None, repr=False)
    forcing: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("linear", "power", "ym", "forcing"):
            raise NonlinearityError(f"unknown nonlinearity {self.kind!r}")
        if self.sign not in (1, -1):
            raise NonlinearityError("sign must be +1 (defocusing) or -1 (focusing)")
        if self.kind == "forcing" and (self.forcing is None or self.t_forcing is None):
            raise NonlinearityError("forcing nonlinearity needs t_forcing and forcing")

    def __call__(self, u, dr, t=None):
        if self.kind == "linear":
            return np.zeros_like(u)
        if self.kind == "power":
            return -self.sign * np.abs(u) ** (self.p - 1) * u
        if self.kind == "ym":
            return u * radial_derivative(u, dr) + u**3
        return self.forcing_at(t)

    def forcing_at(self, t):
        tf = self.t_forcing
        i = int(np.clip(np.searchsorted(tf, t, side="right") - 1, 0, tf.size - 2))
        s = (t - tf[i]) / (tf[i + 1] - tf[i])
        return (1 - s) * self.forcing[i] + s * self.forcing[i + 1]


def power(p, sign=1) -> Nonlinearity:
    return Nonlinearity("power", float(Fraction(p)), int(sign))


YM = Nonlinearity("ym")


@dataclass
class PicardRun:
    iterates: list
    ratios: list
    converged: bool
    norms: dict
    residual: float
    T: float
    differences: list = field(default_factory=list)

    @property
    def solution(self) -> GridSolution:
        return self.iterates[-1]

    def report(self) -> dict:
        return {
            "iterations": len(self.iterates) - 1,
            "ratios": [float(x) for x in self.ratios],
            "converged": bool(self.converged),
            "residual": float(self.residual),
            "T": float(self.T),
            "norms": {k: float(v) for k, v in self.norms.items()},
        }


def default_time_grid(T: float, dt: float = 0.05) -> np.ndarray:
    n = max(2, int(math.ceil(T / dt)) + 1)
    return np.linspace(0.0, T, n)


def _picard(u0, u1, rhs: Nonlinearity, t_grid, table: SpectralTable, tol: float,
            q_norm: float, start: str = "homogeneous", max_iter: int = MAX_ITER,
            strict: bool = True):
    """Shared fixed-point loop.  Returns (iterates, ratios, diffs, converged)."""
    model = table.model
    hom = kg_evolve(u0, u1, t_grid, table)
    spec = mixed_spec(model, hom.t, q_norm, q_norm)

    def solution_map(u):
        F = rhs(u.u, model.dr)
        du, dut = duhamel(F, hom.t, table, with_derivative=True)
        return GridSolution(model, hom.t, hom.u + du, hom.ut + dut, {"kind": "picard"})

    if start == "homogeneous":
        cur = hom
    elif start == "zero":
        z = np.zeros_like(hom.u)
        cur = GridSolution(model, hom.t, z, z.copy(), {"kind": "picard"})
    else:
        raise ValueError("start must be 'homogeneous' or 'zero'")
    iterates, ratios, diffs = [cur], [], []
    streak = 0
    for _ in range(max_iter):
        new = solution_map(cur)
        diff = new.u - cur.u
        sup = float(np.max(np.abs(diff)))
        if not np.all(np.isfinite(new.u)):
            raise ContractionFailure("contraction failure: iterate is not finite",
                                     {"ratios": ratios, "differences": diffs})
        d = mixed_norm(diff, spec)
        iterates.append(new)
        if diffs and diffs[-1] > 0:
            ratios.append(d / diffs[-1])
            streak = streak + 1 if ratios[-1] > 1 else 0
        diffs.append(d)
        cur = new
        if sup < tol:
            return iterates, ratios, diffs, True, sup
        if strict and streak >= DIVERGENCE_STREAK:
            raise ContractionFailure(
                "contraction failure: ratio > 1 for 3 consecutive iterations",
                {"ratios": ratios, "differences": diffs},
            )
    return iterates, ratios, diffs, False, sup


def picard_solve(u0, u1, p, sign: int, T: float, table: SpectralTable, tol: float = 1e-13,
                 t_grid=None, start: str = "homogeneous") -> PicardRun:
    """Picard iteration for u_tt - Delta u + u = -sign |u|^{p-1} u on [0, T].

    Contraction ratios are measured in the discrete L^{q0}_{t,z} norm with
    q0 = (p-1)(n+1)/2.
    """
    n = table.model.n
    p = Fraction(p)
    et = exponent_table(p, n)
    if not et.in_range:
        raise NonlinearityError(
            f"p = {p} outside [1 + 4/(n-1), 1 + 4/(n-2)] for n = {n}")
    if T <= 0:
        raise NonlinearityError("T must be positive")
    if t_grid is None:
        t_grid = default_time_grid(T)
    q0 = float(et.q0)
    its, ratios, diffs, ok, res = _picard(u0, u1, power(p, sign), t_grid, table, tol, q0,
                                          start=start)
    u = its[-1]
    q1, alpha = float(et.q1), float(et.alpha)
    spec0 = mixed_spec(table.model, u.t, q0, q0)
    if alpha == 0:
        strich = mixed_norm(u.u, mixed_spec(table.model, u.t, q1, q1))
    else:
        inner = np.array([sobolev_lp(s, alpha, q1, table) for s in u.u])
        strich = float(lp_norm(inner, spec0.dt, q1))
    norms = {f"L^{q0:g}_tz": mixed_norm(u.u, spec0), f"L^{q1:g}_t H^{alpha:g}_{q1:g}": strich}
    return PicardRun(its, ratios, ok, norms, res, float(u.t[-1]), diffs)


def ym_solve(u0, u1, delta: float = 1 / 16, T: float = 1.0, table: SpectralTable = None,
             tol: float = 1e-12, dt: float = 0.05, T_min: float = 1e-4) -> PicardRun:
    """Local solver for u_tt - Delta u + u = u u_r + u^3.

    T is halved until every contraction ratio is at most 1/2.
    """
    if table is None:
        raise ValueError("a SpectralTable is required")
    if not 0 < delta < 1:
        raise NonlinearityError("delta must lie in (0, 1)")
    tried = []
    while T >= T_min:
        t_grid = default_time_grid(T, min(dt, T / 4))
        try:
            its, ratios, diffs, ok, res = _picard(u0, u1, YM, t_grid, table, tol, 2.0)
        except ContractionFailure as exc:
            tried.append({"T": T, "ratios": exc.diagnostics.get("ratios", [])})
        else:
            if ok and all(r <= 0.5 for r in ratios):
                u = its[-1]
                ct = max(sobolev_norm(s, 1 + delta, table) for s in u.u)
                l2linf = float(lp_norm(np.max(np.abs(u.u), axis=1),
                                       mixed_spec(table.model, u.t, 2, 2).dt, 2))
                norms = {f"C_t H^{1 + delta:g}": ct, "L^2_t L^inf": l2linf}
                return PicardRun(its, ratios, True, norms, res, T, diffs)
            tried.append({"T": T, "ratios": ratios})
        T /= 2
    raise ContractionFailure("no contraction window found", {"attempts": tried})


# ---------------------------------------------------------------------------
# independent finite-difference oracle
# ---------------------------------------------------------------------------

def leapfrog_oracle(u0, u1, rhs: Nonlinearity, t_grid, model, dt: float | None = None) -> GridSolution:
    """Centred second-order time stepping of the reduced equation

        v_tt = v_rr - V v - v + phi F(v / phi),   v = phi u,

    with Dirichlet conditions at r = 0 and r = r_max.  ``t_grid`` must be
    uniform and start at 0; the internal step divides its spacing.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0 or t_grid.size < 2:
        raise ValueError("t grid must start at 0 and have at least two nodes")
    span = np.diff(t_grid)
    if np.ptp(span) > 1e-9 * span[0]:
        raise ValueError("leapfrog oracle needs a uniform t grid")
    dr = model.dr
    if dt is None:
        dt = 0.5 * dr
    if dt > 0.5 * dr * (1 + 1e-12):
        raise ValueError(f"CFL violation: dt = {dt} exceeds 0.5 * dr = {0.5 * dr}")
    sub = int(math.ceil(span[0] / dt - 1e-9))
    h = span[0] / sub

    phi = model.phi
    inner = slice(1, -1)
    V = model.V

    def accel(v, t):
        a = np.zeros_like(v)
        a[inner] = (v[2:] - 2 * v[1:-1] + v[:-2]) / dr**2 - (V[inner] + 1) * v[inner]
        if rhs.kind != "linear":
            u = model.from_reduced(v)
            a[inner] += phi[inner] * rhs(u, dr, t)[inner]
        return a

    v = model.to_reduced(np.asarray(u0, dtype=float))
    w = model.to_reduced(np.asarray(u1, dtype=float))
    v[0] = v[-1] = 0.0
    w[0] = w[-1] = 0.0
    nt = t_grid.size
    U = np.empty((nt, model.size))
    Ut = np.empty((nt, model.size))
    U[0], Ut[0] = model.from_reduced(v), model.from_reduced(w)
    prev = v
    cur = v + h * w + 0.5 * h * h * accel(v, 0.0)
    step = 1
    for i in range(1, nt):
        while step < i * sub:
            nxt = 2 * cur - prev + h * h * accel(cur, step * h)
            prev, cur = cur, nxt
            step += 1
        nxt = 2 * cur - prev + h * h * accel(cur, step * h)
        U[i] = model.from_reduced(cur)
        Ut[i] = model.from_reduced((nxt - prev) / (2 * h))
    return GridSolution(model, t_grid, U, Ut, {"kind": "leapfrog", "dt": h, "rhs": rhs.kind})


def energy(u, ut, p="linear", sign: int = 1, model=None, table: SpectralTable | None = None) -> float:
    """Klein-Gordon energy of a slice.

    With a table the quadratic part is the spectral form
    (1/2)(||u_t||^2 + ||sqrt(1+H) u||^2); otherwise it is the finite
    difference form in the reduced variable consistent with the leapfrog
    stencil.  For a power nonlinearity sign/(p+1) int |u|^{p+1} is added.
    """
    if model is None:
        if table is None:
            raise ValueError("need a model or a table")
        model = table.model
    u = np.asarray(u, dtype=float)
    ut = np.asarray(ut, dtype=float)
    if table is not None:
        E = 0.5 * (table.l2_spectral(table.forward(ut)) ** 2
                   + table.l2_spectral(table.omega() * table.forward(u)) ** 2)
    else:
        v, vt = model.to_reduced(u), model.to_reduced(ut)
        w = trapezoid_weights(model.size, model.dr)
        grad = np.sum(np.diff(v) ** 2) / model.dr
        E = 0.5 * (np.sum(w * (vt**2 + (1 + model.V) * v**2)) + grad)
    if p != "linear":
        p = float(Fraction(p))
        E += sign / (p + 1) * float(np.sum(volume_weights(model) * np.abs(u) ** (p + 1)))
    return float(E)
