"""Spectral Klein-Gordon propagators on a radial model.

Every operator here is a multiplier m(lam) applied on the generalized
eigenfunction transform of a SpectralTable; no time stepping is done in
this module.  omega(lam) = sqrt(1 + lam^2) throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import DyadicPartition, SpectralError, SpectralTable


@dataclass
class GridSolution:
    """Space-time field u(t_i, r_j) together with its time derivative."""

    model: object
    t: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or np.any(np.diff(self.t) <= 0):
            raise ValueError("t grid must be one-dimensional and increasing")
        shape = (self.t.size, self.model.size)
        if self.u.shape != shape or self.ut.shape != shape:
            raise ValueError(f"solution arrays must have shape {shape}")

    def slice(self, i):
        return self.u[i], self.ut[i]

    def save(self, path) -> None:
        """Write arrays to ``path`` (.npz) and metadata to ``path`` + .json."""
        path = Path(path)
        with path.open("wb") as fh:
            np.savez(fh, t=self.t, u=self.u, ut=self.ut)
        side = {"model": self.model.to_dict(), "meta": self.meta}
        Path(str(path) + ".json").write_text(json.dumps(side, sort_keys=True, indent=2))

    @classmethod
    def load(cls, path) -> "GridSolution":
        from .geometry import make_model

        path = Path(path)
        side = json.loads(Path(str(path) + ".json").read_text())
        md = side["model"]
        model = make_model(md["kind"], md["params"], md["n"], md["r_max"], md["dr"])
        with np.load(path, allow_pickle=False) as data:
            return cls(model, data["t"], data["u"], data["ut"], side["meta"])


def _check_times(table: SpectralTable, times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    table.check_time(float(np.max(np.abs(times))))
    return times


def kg_evolve(u0, u1, t_grid, table: SpectralTable) -> GridSolution:
    """Solve u_tt + (1 + H) u = 0 with u(0) = u0, u_t(0) = u1."""
    t = _check_times(table, t_grid)
    F0 = table.forward(u0)
    F1 = table.forward(u1)
    w = table.omega()
    c = np.cos(np.outer(t, w))
    s = np.sin(np.outer(t, w))
    u = table.inverse(c * F0 + s / w * F1)
    ut = table.inverse(-w * s * F0 + c * F1)
    return GridSolution(table.model, t, u, ut, {"kind": "kg_evolve"})


def halfwave(f, t: float, table: SpectralTable):
    """U(t) f = exp(i t sqrt(1 + H)) f."""
    _check_times(table, t)
    return table.inverse(np.exp(1j * t * table.omega()) * table.forward(f))


def band_propagator(f, k, t: float, table: SpectralTable, partition: DyadicPartition):
    """Frequency-localized half-wave propagator; k = "low" uses the low tail."""
    _check_times(table, t)
    mult = partition.band(k, table.lam) * np.exp(1j * t * table.omega())
    return table.inverse(mult * table.forward(f))


def _duhamel_spectral(G, t_grid, w):
    """Retarded integral on the transform side.

    G has shape (Nt, Nlam).  Between consecutive time nodes the forcing is
    interpolated linearly in tau and integrated exactly against
    exp(i w tau), so the rule is exact for piecewise-linear forcing.
    Returns (U, Ut): the transforms of the solution and its time derivative.
    """
    t = np.asarray(t_grid, dtype=float)
    nt = t.size
    U = np.zeros(G.shape, dtype=np.result_type(G, float))
    Ut = np.zeros_like(U)
    if nt < 2:
        return U, Ut
    a, b = t[:-1, None], t[1:, None]
    d = b - a
    Ea, Eb = np.exp(1j * w * a), np.exp(1j * w * b)
    I0 = (Eb - Ea) / (1j * w)
    I1 = (d * Eb - I0) / (1j * w)
    Wa = I0 - I1 / d
    Wb = I1 / d
    C = np.zeros(G.shape, dtype=U.dtype)
    S = np.zeros(G.shape, dtype=U.dtype)
    C[1:] = np.cumsum(Wa.real * G[:-1] + Wb.real * G[1:], axis=0)
    S[1:] = np.cumsum(Wa.imag * G[:-1] + Wb.imag * G[1:], axis=0)
    ct = np.cos(np.outer(t, w))
    st = np.sin(np.outer(t, w))
    # sin((t - tau) w) = sin(t w) cos(tau w) - cos(t w) sin(tau w)
    U = (st * C - ct * S) / w
    Ut = ct * C + st * S
    return U, Ut


def duhamel(F, t_grid, table: SpectralTable, t=None, with_derivative=False):
    """int_0^t sin((t - tau) sqrt(1+H)) / sqrt(1+H) F(tau) dtau.

    ``F`` is sampled on ``t_grid`` (shape (Nt, Nr)).  With ``t=None`` the
    solution is returned at every grid time; otherwise ``t`` must be a grid
    time and a single radial slice is returned.
    """
    tg = _check_times(table, t_grid)
    F = np.asarray(F)
    if F.shape != (tg.size, table.model.size):
        raise SpectralError(f"forcing must have shape {(tg.size, table.model.size)}")
    if tg[0] != 0.0:
        raise SpectralError("forcing grid must start at t = 0")
    idx = None
    if t is not None:
        hit = np.nonzero(np.isclose(tg, t, rtol=0, atol=1e-12 * max(1.0, abs(t))))[0]
        if hit.size == 0:
            raise SpectralError(f"t = {t} is not a node of the forcing time grid")
        idx = int(hit[0])
        tg, F = tg[: idx + 1], F[: idx + 1]
    U, Ut = _duhamel_spectral(table.forward(F), tg, table.omega())
    if idx is not None:
        U, Ut = U[-1], Ut[-1]
    u = table.inverse(U)
    if with_derivative:
        return u, table.inverse(Ut)
    return u


def inhomogeneous_solve(u0, u1, F, t_grid, table: SpectralTable) -> GridSolution:
    """Homogeneous evolution plus the retarded Duhamel term."""
    hom = kg_evolve(u0, u1, t_grid, table)
    du, dut = duhamel(F, t_grid, table, with_derivative=True)
    return GridSolution(table.model, hom.t, hom.u + du, hom.ut + dut,
                        {"kind": "inhomogeneous"})
