"""Mixed space-time norms, Sobolev norms and Littlewood-Paley probes.

All spatial integrals use the manifold measure phi(r)^(n-1) dr with
trapezoid weights on the model grid, so the norms are norms on (X, g).
L^infinity on a grid is the max over nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import trapezoid_weights
from .spectral import DyadicPartition, SpectralTable


class NormError(ValueError):
    pass


def _exponent(p) -> float:
    """Accept floats, Fractions, ints, "inf" or the admissibility INF sentinel."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        p = Fraction(p)
    if getattr(p, "is_infinite", False):
        return math.inf
    p = float(p)
    if not p >= 1:
        raise NormError(f"Lebesgue exponent must be >= 1, got {p}")
    return p


def volume_weights(model) -> np.ndarray:
    return model.phi ** (model.n - 1) * trapezoid_weights(model.size, model.dr)


def time_weights(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.size == 1:
        return np.ones(1)
    w = np.zeros_like(t)
    d = np.diff(t)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


@dataclass(frozen=True)
class MixedNormSpec:
    q: float
    r: float
    vol: np.ndarray
    dt: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _exponent(self.q))
        object.__setattr__(self, "r", _exponent(self.r))
        if np.any(self.vol < 0) or np.any(self.dt < 0):
            raise NormError("weights must be non-negative")


def mixed_spec(model, t, q, r) -> MixedNormSpec:
    return MixedNormSpec(q, r, volume_weights(model), time_weights(t))


def lp_norm(values, weights, p) -> float:
    """Weighted l^p norm over the last axis."""
    p = _exponent(p)
    a = np.abs(np.asarray(values))
    if math.isinf(p):
        return np.max(a, axis=-1)
    return np.sum(weights * a**p, axis=-1) ** (1.0 / p)


def mixed_norm(u, spec: MixedNormSpec) -> float:
    """||u||_{L^q_t L^r_z} for u of shape (Nt, Nr) (or a GridSolution)."""
    u = getattr(u, "u", u)
    u = np.asarray(u)
    if u.ndim != 2 or u.shape != (spec.dt.size, spec.vol.size):
        raise NormError(f"field shape {u.shape} does not match the norm weights")
    inner = lp_norm(u, spec.vol, spec.r)
    return float(lp_norm(inner, spec.dt, spec.q))


def space_norm(f, model, p) -> float:
    return float(lp_norm(f, volume_weights(model), p))


def sobolev_multiplier(table: SpectralTable, s: float) -> np.ndarray:
    return (1.0 + table.lam**2) ** (s / 2.0)


def sobolev_norm(f, s: float, table: SpectralTable) -> float:
    """||(1+H)^{s/2} f||_{L^2} evaluated by Parseval on the transform side."""
    return table.l2_spectral(sobolev_multiplier(table, s) * table.forward(f))


def sobolev_lp(f, s: float, p, table: SpectralTable) -> float:
    """Heuristic H^{s,p} norm: multiplier (1+lam^2)^{s/2}, then the grid L^p norm."""
    if s == 0:
        return space_norm(f, table.model, p)
    g = table.inverse(sobolev_multiplier(table, s) * table.forward(f))
    return space_norm(g, table.model, p)


def square_function(f, table: SpectralTable, partition: DyadicPartition):
    """(sum_k |phi_k(sqrt H) f|^2)^{1/2} including the low tail."""
    F = table.forward(f)
    acc = np.zeros(table.model.size)
    for k in partition.bands:
        acc += np.abs(table.inverse(partition.band(k, table.lam) * F)) ** 2
    return np.sqrt(acc)


def square_function_ratio(f, p, table: SpectralTable, partition: DyadicPartition) -> float:
    p = _exponent(p)
    if not 1 < p < math.inf:
        raise NormError("square-function ratio needs 1 < p < infinity")
    denom = space_norm(f, table.model, p)
    if denom == 0:
        raise NormError("square-function ratio undefined for f = 0")
    return space_norm(square_function(f, table, partition), table.model, p) / denom


def square_sum_bounds(partition: DyadicPartition, lam_max=None):
    """(min, max) of sum_k phi_k(lam)^2 over the partition's sample set."""
    lam = partition.samples
    if lam_max is not None:
        lam = lam[lam <= lam_max]
    ss = partition.square_sum(lam)
    return float(ss.min()), float(ss.max())


@dataclass(frozen=True)
class LeibnizResult:
    lhs: float
    rhs: float
    ratio: float


def leibniz_check(f, g, s: float, exponents, table: SpectralTable,
                  rtol: float = 1e-9) -> LeibnizResult:
    """Compare ||fg||_{H^{s,p}} with the fractional Leibniz right-hand side.

    ``exponents`` is (p, p1, p2, p3, p4) with 1/p = 1/p1 + 1/p2 = 1/p3 + 1/p4.
    For p != 2 the H^{s,p} norms are multiplier-then-L^p approximations.
    """
    if not 0 <= s <= 1:
        raise NormError("s must lie in [0, 1]")
    p, p1, p2, p3, p4 = (_exponent(e) for e in exponents)
    inv = lambda e: 0.0 if math.isinf(e) else 1.0 / e  # noqa: E731
    if abs(inv(p) - inv(p1) - inv(p2)) > rtol or abs(inv(p) - inv(p3) - inv(p4)) > rtol:
        raise NormError("exponents must satisfy 1/p = 1/p1 + 1/p2 = 1/p3 + 1/p4")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    model = table.model
    lhs = sobolev_lp(f * g, s, p, table)
    rhs = (sobolev_lp(f, s, p1, table) * space_norm(g, model, p2)
           + space_norm(f, model, p3) * sobolev_lp(g, s, p4, table))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return LeibnizResult(float(lhs), float(rhs), float(ratio))
