"""Littlewood-Paley partition and the generalized-eigenfunction transform of
H = -d^2/dr^2 + V on the half line with Dirichlet condition at 0.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import ManifoldModel, make_model, trapezoid_weights

RESONANCE_TOL = 1e-8


class SpectralError(ValueError):
    pass


class SpectralResonance(SpectralError):
    pass


class TransformValidityError(SpectralError):
    def __init__(self, message, required_n_lambda):
        super().__init__(message)
        self.required_n_lambda = required_n_lambda


# ---------------------------------------------------------------------------
# dyadic partition
# ---------------------------------------------------------------------------

def _rho(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


def phi(lam):
    """Base cutoff, smooth, supported in [1/2, 2], with sum_j phi(2^-j lam) = 1."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    pos = lam > 0
    x = np.log2(lam[pos])
    frac = x - np.floor(x)
    # only the two translates x - floor(x) and x - floor(x) - 1 can be nonzero
    total = _rho(frac) + _rho(frac - 1.0)
    out[pos] = _rho(x) / total
    return out


def phi0(lam):
    """Low-frequency tail sum_{j <= -1} phi(2^-j lam); equals 1 for lam <= 1/2."""
    lam = np.asarray(lam, dtype=float)
    return np.where(lam < 1.0, 1.0 - phi(lam), 0.0)


@dataclass(frozen=True)
class DyadicPartition:
    k_min: int
    k_max: int

    def band(self, k, lam):
        """phi(2^-k lam) for an integer band, or the tail below k_min for "low"."""
        if k == "low":
            return phi0(np.asarray(lam, dtype=float) * 2.0 ** (-self.k_min))
        if not self.k_min <= k <= self.k_max:
            raise SpectralError(f"band {k} outside partition [{self.k_min}, {self.k_max}]")
        return phi(np.asarray(lam, dtype=float) * 2.0 ** (-k))

    @property
    def bands(self) -> list:
        return ["low", *range(self.k_min, self.k_max + 1)]

    def total(self, lam):
        return sum(self.band(k, lam) for k in self.bands)

    def square_sum(self, lam):
        return sum(self.band(k, lam) ** 2 for k in self.bands)

    @property
    def samples(self) -> np.ndarray:
        return np.logspace(self.k_min - 1, self.k_max, 10_000, base=2.0)


def build_partition(k_min: int, k_max: int) -> DyadicPartition:
    if not k_min <= 0 <= k_max:
        raise SpectralError("need k_min <= 0 <= k_max")
    return DyadicPartition(int(k_min), int(k_max))


# ---------------------------------------------------------------------------
# spectral table
# ---------------------------------------------------------------------------

def lambda_weights(lam):
    """Trapezoid weights on [0, lam_max] with an implicit zero node at lam = 0."""
    nodes = np.concatenate([[0.0], lam])
    w = np.empty_like(lam)
    w[:-1] = (nodes[2:] - nodes[:-2]) / 2
    w[-1] = (nodes[-1] - nodes[-2]) / 2
    return w


def uniform_lambda_grid(model: ManifoldModel, lam_max: float, oversample: float = 2.0):
    """lam_j = j * dlam with dlam = pi / (oversample * r_max)."""
    dlam = math.pi / (oversample * model.r_max)
    m = int(math.ceil(lam_max / dlam))
    return dlam * np.arange(1, m + 1)


@dataclass(frozen=True)
class SpectralTable:
    """Generalized eigenfunctions e(lam, r) with e ~ sin(lam r + delta) at large r.

    Functions are handled as manifold values u on the model grid; the
    transform acts on the reduced variable v = phi u:

        F(lam) = int v(r) e(lam, r) dr,    v(r) = (2/pi) int F(lam) e(lam, r) dlam.
    """

    model: ManifoldModel
    lam: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    amplitude: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def de0(self) -> np.ndarray:
        """d/dr e(lam, 0) = 1/A, since the regular solution has unit slope."""
        return 1.0 / self.amplitude

    @property
    def dlam_max(self) -> float:
        return float(np.max(np.diff(np.concatenate([[0.0], self.lam]))))

    @property
    def lam_max(self) -> float:
        return float(self.lam[-1])

    def omega(self):
        return np.sqrt(1.0 + self.lam**2)

    def forward_reduced(self, v):
        w = trapezoid_weights(self.model.size, self.model.dr)
        return (np.asarray(v) * w) @ self.e.T

    def inverse_reduced(self, F):
        return (2.0 / math.pi) * (np.asarray(F) * self.weights) @ self.e

    def forward(self, u):
        return self.forward_reduced(self.model.phi * np.asarray(u))

    def inverse(self, F):
        F = np.asarray(F)
        v = self.inverse_reduced(F)
        u = np.empty_like(v)
        u[..., 1:] = v[..., 1:] / self.model.phi[1:]
        # u(0) = v'(0)/phi'(0), exactly on the transform side
        u[..., 0] = (2.0 / math.pi) * (F * self.weights) @ self.de0 / self.model.dphi[0]
        return u

    def l2_spectral(self, F) -> float:
        return float(np.sqrt((2.0 / math.pi) * np.sum(self.weights * np.abs(F) ** 2)))

    def kernel(self, i, j, k):
        """Spectral-measure density (2/pi) e(lam_i, r_j) e(lam_i, r_k)."""
        return (2.0 / math.pi) * (self.e[i, j] * self.e[i, k])

    def check_time(self, t: float) -> None:
        """Reject times at which periodic images of the lam-quadrature re-enter
        the computational domain."""
        need = 2.0 * math.pi / (self.model.r_max + abs(t))
        if self.dlam_max > need * (1 + 1e-12):
            required = int(math.ceil(self.lam_max / need))
            raise TransformValidityError(
                f"lambda grid too coarse for t = {t}: need N_lambda >= {required}",
                required,
            )

    def key(self) -> str:
        h = hashlib.sha256(np.ascontiguousarray(self.lam).tobytes()).hexdigest()[:16]
        return f"{self.model.key()}-{h}"

    def save(self, path) -> None:
        path = Path(path)
        with path.open("wb") as fh:
            np.savez(fh, lam=self.lam, e=self.e, delta=self.delta,
                     amplitude=self.amplitude, weights=self.weights,
                     model=np.array(json.dumps(self.model.to_dict())))

    @classmethod
    def load(cls, path) -> "SpectralTable":
        with np.load(Path(path), allow_pickle=False) as data:
            md = json.loads(str(data["model"]))
            model = make_model(md["kind"], md["params"], md["n"], md["r_max"], md["dr"])
            return cls(model, data["lam"], data["e"], data["delta"],
                       data["amplitude"], data["weights"])


def _integrate_regular(model: ManifoldModel, lam, n_nodes: int):
    """RK4 for psi'' = (V - lam^2) psi, psi(0) = 0, psi'(0) = 1, vectorised in lam.

    Returns psi and psi' on the first n_nodes grid points.
    """
    dr = model.dr
    sub = max(4, int(math.ceil(lam.max() * dr / 0.02)))
    h = dr / sub
    k2 = lam**2
    y = np.zeros_like(lam)
    yp = np.ones_like(lam)
    psi = np.empty((lam.size, n_nodes))
    dpsi = np.empty((lam.size, n_nodes))
    psi[:, 0], dpsi[:, 0] = y, yp
    # V on the half-step lattice
    fine = model.potential(np.arange(2 * sub * (n_nodes - 1) + 1) * (h / 2))
    for step in range(sub * (n_nodes - 1)):
        v0, vh, v1 = fine[2 * step], fine[2 * step + 1], fine[2 * step + 2]
        a1, b1 = yp, (v0 - k2) * y
        a2, b2 = yp + 0.5 * h * b1, (vh - k2) * (y + 0.5 * h * a1)
        a3, b3 = yp + 0.5 * h * b2, (vh - k2) * (y + 0.5 * h * a2)
        a4, b4 = yp + h * b3, (v1 - k2) * (y + h * a3)
        y = y + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        yp = yp + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        if (step + 1) % sub == 0:
            j = (step + 1) // sub
            psi[:, j], dpsi[:, j] = y, yp
    return psi, dpsi


def solve_eigenfunctions(model: ManifoldModel, lam_grid, match_nodes: int = 10) -> SpectralTable:
    """Tabulate normalized generalized eigenfunctions on the model grid.

    The regular solution is integrated outward through the support of V and
    matched to A sin(lam r + delta) on a window of grid nodes just beyond it,
    where the free solution is exact.
    """
    if model.n != 3:
        raise SpectralError("PDE solves are implemented for the n = 3 reduction")
    lam = np.asarray(lam_grid, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or np.any(lam <= 0):
        raise SpectralError("lambda grid must be positive")
    if np.any(np.diff(lam) <= 0):
        raise SpectralError("lambda grid must be strictly increasing")
    if lam[-1] * model.dr > math.pi / 2:
        raise SpectralError("radial grid too coarse for lambda_max (need lam_max*dr <= pi/2)")
    r = model.r

    if model.kind == "euclidean":
        e = np.sin(np.outer(lam, r))
        delta = np.zeros_like(lam)
        amp = 1.0 / lam
    else:
        r_out = model.support[1]
        j0 = int(math.ceil(r_out / model.dr - 1e-9))
        n_nodes = j0 + match_nodes
        if n_nodes > model.size:
            raise SpectralError("no matching window beyond the support of V")
        psi, dpsi = _integrate_regular(model, lam, n_nodes)
        rw = r[j0:n_nodes]
        s = np.sin(np.outer(lam, rw))
        c = np.cos(np.outer(lam, rw))
        alpha = np.mean(psi[:, j0:] * s + dpsi[:, j0:] * c / lam[:, None], axis=1)
        beta = np.mean(psi[:, j0:] * c - dpsi[:, j0:] * s / lam[:, None], axis=1)
        amp = np.hypot(alpha, beta)
        bad = amp < RESONANCE_TOL
        if np.any(bad):
            raise SpectralResonance(f"spectral resonance at lambda = {lam[bad][0]:.6g}")
        delta = np.arctan2(beta, alpha)
        e = np.empty((lam.size, r.size))
        e[:, :j0] = psi[:, :j0] / amp[:, None]
        e[:, j0:] = np.sin(np.outer(lam, r[j0:]) + delta[:, None])

    for arr in (lam, e, delta, amp):
        arr.setflags(write=False)
    return SpectralTable(model, lam, e, delta, amp, lambda_weights(lam))


def cached_table(model: ManifoldModel, lam_grid, cache_dir=None) -> SpectralTable:
    """solve_eigenfunctions with an on-disk cache keyed by model and grid hashes."""
    if cache_dir is None:
        return solve_eigenfunctions(model, lam_grid)
    lam = np.asarray(lam_grid, dtype=float)
    h = hashlib.sha256(np.ascontiguousarray(lam).tobytes()).hexdigest()[:16]
    path = Path(cache_dir) / f"table-{model.key()}-{h}.npz"
    if path.exists():
        return SpectralTable.load(path)
    table = solve_eigenfunctions(model, lam)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.save(path)
    return table


def band_filter(f, k, table: SpectralTable, partition: DyadicPartition):
    """phi(2^-k sqrt(H)) f, or the low tail for k = "low"."""
    mult = partition.band(k, table.lam)
    return table.inverse(table.forward(f) * mult)


def count_bound_states(model: ManifoldModel) -> int:
    """Zeros of the zero-energy regular solution (which is phi itself) on (0, r_max]."""
    return int(np.count_nonzero(np.diff(np.sign(model.phi[1:])) != 0))
