"""Oscillatory kernel integrals for the low- and high-frequency Klein-Gordon
propagators, decay-exponent fits and a Van der Corput checker.

Quadrature: panels are bisected until the phase changes by at most pi/4
across each, then a Gauss-Legendre rule is applied per panel.  The error
estimate is the difference against the same rule on halved panels; all
panels are halved again (up to MAX_HALVINGS times) until it meets the
target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import phi, phi0

PANEL_PHASE = math.pi / 4
GAUSS_N = 10
MAX_HALVINGS = 8
_GL = np.polynomial.legendre.leggauss(GAUSS_N)


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class AmplitudeModel:
    """Model amplitudes a_pm(lam, d) and b(lam, d) of the localized spectral measure.

    paper_a saturates |a| <= (1 + lam d)^{-(n-1)/2} with b = 0; paper_b has
    a = 0 and b = (1 + lam d)^{-K}; constant has a = 0 and b = value.
    """

    kind: str = "paper_a"
    n: int = 3
    K: int = 10
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("paper_a", "paper_b", "constant"):
            raise ValueError(f"unknown amplitude kind {self.kind!r}")

    def a(self, lam, d):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "paper_a":
            return (1.0 + lam * d) ** (-(self.n - 1) / 2)
        return np.zeros_like(lam)

    def b(self, lam, d):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "paper_b":
            return (1.0 + lam * d) ** (-float(self.K))
        if self.kind == "constant":
            return np.full_like(lam, self.value)
        return np.zeros_like(lam)

    @property
    def has_a(self) -> bool:
        return self.kind == "paper_a"

    @property
    def has_b(self) -> bool:
        return self.kind != "paper_a"


def _panels(dphase, a, b, max_width, graded=False):
    edges = np.linspace(a, b, max(1, int(math.ceil((b - a) / max_width))) + 1)
    if graded:
        # geometric refinement toward a for amplitudes with structure at scale ~ 1/r
        edges = np.union1d(edges, a + (b - a) * 2.0 ** -np.arange(1, 40))
    lo, hi = edges[:-1], edges[1:]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        slope = np.maximum.reduce([np.abs(dphase(lo)), np.abs(dphase(mid)), np.abs(dphase(hi))])
        split = slope * (hi - lo) > PANEL_PHASE
        if not split.any():
            break
        m = 0.5 * (lo[split] + hi[split])
        lo = np.concatenate([lo[~split], lo[split], m])
        hi = np.concatenate([hi[~split], m, hi[split]])
        order = np.argsort(lo)
        lo, hi = lo[order], hi[order]
    return lo, hi


def _gauss(f, lo, hi):
    x, w = _GL
    half = 0.5 * (hi - lo)[:, None]
    nodes = 0.5 * (hi + lo)[:, None] + half * x
    vals = f(nodes)
    weights = half * w
    return np.sum(vals * weights), np.sum(np.abs(vals) * weights)


def oscillatory_quad(amp, phase, dphase, a, b, tol, max_width=None, graded=False):
    """int_a^b amp(x) exp(i phase(x)) dx with a halving-based error estimate.

    Returns (value, error).  Raises QuadratureError when the estimate is
    above ``tol`` and above the floating-point floor of the sum.
    """
    if max_width is None:
        max_width = (b - a) / 32

    def f(x):
        return amp(x) * np.exp(1j * phase(x))

    lo, hi = _panels(dphase, a, b, max_width, graded)
    coarse, _ = _gauss(f, lo, hi)
    for _ in range(MAX_HALVINGS):
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        fine, mass = _gauss(f, lo, hi)
        err = abs(fine - coarse)
        floor = 64 * np.finfo(float).eps * mass * math.sqrt(lo.size)
        if err <= max(tol, floor):
            return complex(fine), float(max(err, floor))
        coarse = fine
    raise QuadratureError(f"quadrature did not converge: error {err:.3g} > {tol:.3g}", err)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _omega(lam):
    return np.sqrt(1.0 + lam * lam)


def _kernel_direct(t, r, cutoff, support, amp, n, tol):
    """int e^{it sqrt(1+lam^2)} cutoff(lam) lam^{n-1} [sum_pm e^{pm i lam r} a + b] dlam."""
    a, b = support
    total, err = 0.0j, 0.0
    weight = lambda lam: cutoff(lam) * lam ** (n - 1)
    terms = []
    if amp.has_a:
        for s in (+1, -1):
            terms.append((lambda lam: weight(lam) * amp.a(lam, r),
                          (lambda s: lambda lam: t * _omega(lam) + s * lam * r)(s),
                          (lambda s: lambda lam: t * lam / _omega(lam) + s * r)(s)))
    if amp.has_b:
        terms.append((lambda lam: weight(lam) * amp.b(lam, r),
                      lambda lam: t * _omega(lam),
                      lambda lam: t * lam / _omega(lam)))
    for g, ph, dph in terms:
        v, e = oscillatory_quad(g, ph, dph, a, b, tol / len(terms), graded=(a == 0))
        total += v
        err += e
    return total, err


def low_envelope(t, n):
    return (1.0 + abs(t)) ** (-n / 2)


def eval_kernel_low(t: float, r: float, amp: AmplitudeModel, n: int = 3,
                    rtol: float = 1e-8, with_error: bool = False):
    """Model low-frequency kernel with the phi_0 cutoff (support [0, 1])."""
    if r < 0:
        raise ValueError("r must be non-negative")
    val, err = _kernel_direct(t, r, phi0, (0.0, 1.0), amp, n, rtol * low_envelope(t, n))
    return (val, err) if with_error else val


def low_sup_radii(t: float, count: int = 15) -> np.ndarray:
    """Radii sampled for the sup over the light cone interior: 0 and
    (0.05 .. 0.75) |t|."""
    return np.concatenate([[0.0], np.linspace(0.05, 0.75, count) * abs(t)])


def kernel_low_sup(t: float, amp: AmplitudeModel, n: int = 3, rtol: float = 1e-6) -> float:
    """max over sampled r of |eval_kernel_low(t, r)|, the quantity a dispersive
    bound controls."""
    return max(abs(eval_kernel_low(t, r, amp, n, rtol)) for r in low_sup_radii(t))


def Ih_phase(mu, h, r, t, sign):
    """Phi_pm(mu, h, r, t) = sqrt(h^2 + mu^2) pm mu r / t, stable under cancellation."""
    c = r / t
    root = np.sqrt(h * h + mu * mu)
    if sign * c < 0:
        return (h * h + mu * mu * (1.0 - c * c)) / (root - sign * mu * c)
    return root + sign * mu * c


def _Ih(t, r, h, sign, amp, n, tol):
    s = t / h
    return oscillatory_quad(
        lambda mu: phi(mu) * mu ** (n - 1) * amp.a(mu / h, r),
        lambda mu: s * Ih_phase(mu, h, r, t, sign),
        lambda mu: s * (mu / np.sqrt(h * h + mu * mu) + sign * r / t),
        0.5, 2.0, tol,
    )


def eval_Ih(t: float, r: float, h: float, sign: int, amp: AmplitudeModel, n: int = 3,
            rtol: float = 1e-8, with_error: bool = False):
    """I_h^pm(t, r) = int e^{i (t/h) Phi_pm} phi(mu) mu^{n-1} a_pm(mu/h, r) dmu.

    The absolute error target is rtol times (|t|/h)^{-(n-1)/2} (1 + h|t|)^{-1/2}.
    """
    if not 0 < h <= 1:
        raise ValueError("need 0 < h <= 1")
    if t == 0:
        raise ValueError("t must be nonzero")
    if r < 0:
        raise ValueError("r must be non-negative")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    tol = rtol * (abs(t) / h) ** (-(n - 1) / 2) * (1 + h * abs(t)) ** -0.5
    val, err = _Ih(t, r, h, sign, amp, n, tol)
    return (val, err) if with_error else val


def _Ib(t, r, h, amp, n, tol):
    s = t / h
    return oscillatory_quad(
        lambda mu: phi(mu) * mu ** (n - 1) * amp.b(mu / h, r),
        lambda mu: s * np.sqrt(h * h + mu * mu),
        lambda mu: s * mu / np.sqrt(h * h + mu * mu),
        0.5, 2.0, tol,
    )


def high_bound(t, k, theta, n=3):
    """2^{k(n+1+theta)/2} (2^-k + |t|)^{-(n-1+theta)/2}."""
    return 2.0 ** (k * (n + 1 + theta) / 2) * (2.0 ** -k + abs(t)) ** (-(n - 1 + theta) / 2)


def eval_kernel_high(t: float, k: int, r: float, theta: float, amp: AmplitudeModel,
                     n: int = 3, rtol: float = 1e-8, with_error: bool = False):
    """Band-k kernel via lam = mu / h, h = 2^-k:  h^{-n} (I_h^+ + I_h^- + I_h^b).

    theta only enters the claimed bound, not the value.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    h = 2.0 ** -k
    tol = rtol * high_bound(t, k, 0.0, n) * h**n
    if t == 0:
        val, err = _kernel_direct(0.0, r, lambda mu: phi(mu), (0.5, 2.0),
                                  _scaled(amp, h), n, tol)
    else:
        val, err = 0.0j, 0.0
        if amp.has_a:
            for sign in (1, -1):
                v, e = _Ih(t, r, h, sign, amp, n, tol / 3)
                val += v
                err += e
        if amp.has_b:
            v, e = _Ib(t, r, h, amp, n, tol / 3)
            val += v
            err += e
    val, err = val * h ** (-n), err * h ** (-n)
    return (val, err) if with_error else val


class _scaled:
    """Amplitude model seen through lam = mu / h, used for the t = 0 path."""

    def __init__(self, amp, h):
        self.amp, self.h = amp, h
        self.has_a, self.has_b = amp.has_a, amp.has_b

    def a(self, mu, d):
        return self.amp.a(np.asarray(mu) / self.h, d)

    def b(self, mu, d):
        return self.amp.b(np.asarray(mu) / self.h, d)


def eval_kernel_band_direct(t, k, r, amp, n=3, rtol=1e-8):
    """Same band-k kernel integrated directly in lam over [2^{k-1}, 2^{k+1}]."""
    tol = rtol * high_bound(t, k, 0.0, n)
    val, _ = _kernel_direct(t, r, lambda lam: phi(lam * 2.0 ** -k),
                            (2.0 ** (k - 1), 2.0 ** (k + 1)), amp, n, tol)
    return val


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    t: np.ndarray
    values: np.ndarray
    exponent: float
    residual: float
    intercept: float = 0.0


def fit_decay(samples) -> DecayFit:
    """Least-squares slope of log|value| against log t."""
    t, v = (np.asarray(x, dtype=float) for x in zip(*samples))
    if t.size < 8:
        raise ValueError("need at least 8 samples")
    if np.any(t <= 0) or np.any(v <= 0):
        raise ValueError("samples must be positive")
    if np.log10(t.max() / t.min()) < 2 - 1e-12:
        raise ValueError("samples must span at least two decades in t")
    X = np.column_stack([np.log(t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(X, np.log(v), rcond=None)
    res = np.log(v) - X @ coef
    return DecayFit(t, v, float(coef[0]), float(np.sqrt(np.mean(res**2))), float(coef[1]))


# ---------------------------------------------------------------------------
# Van der Corput
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VdcResult:
    lhs: float
    rhs: float
    passed: bool
    variation: float


def default_ck(k: int) -> float:
    """Classical textbook constant 5 * 2^(k-1) - 2."""
    return 5.0 * 2 ** (k - 1) - 2.0


def _num_deriv(f, x, step):
    return (f(x + step) - f(x - step)) / (2 * step)


def vdc_check(phase: Callable, psi: Callable, lam: float, k: int, interval,
              phase_dk: Callable, dphase: Callable | None = None,
              dpsi: Callable | None = None, c_k: float | None = None,
              samples: int = 4001) -> VdcResult:
    """Compare |int_a^b e^{i lam phase} psi| with c_k lam^{-1/k} (|psi(b)| + int |psi'|).

    ``phase_dk`` is the k-th derivative of the phase; its modulus must be at
    least 1 on (a, b).  For k = 1 the first derivative must be monotone.
    """
    a, b = map(float, interval)
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    xs = np.linspace(a, b, samples)[1:-1]
    dk = np.asarray(phase_dk(xs), dtype=float)
    if np.any(np.abs(dk) < 1.0 - 1e-12):
        raise ValueError(f"derivative floor violated: min |phase^({k})| = {np.abs(dk).min():.6g} < 1")
    if k == 1:
        steps = np.diff(dk)
        if not (np.all(steps >= -1e-14) or np.all(steps <= 1e-14)):
            raise ValueError("k = 1 requires a monotone phase derivative")
    if c_k is None:
        c_k = default_ck(k)
    h = 1e-6 * max(1.0, b - a)
    if dphase is None:
        dphase = lambda x: _num_deriv(phase, x, h)
    if dpsi is None:
        dpsi = lambda x: _num_deriv(psi, x, h)
    val, _ = oscillatory_quad(lambda x: np.asarray(psi(x), dtype=float) * np.ones_like(x),
                              lambda x: lam * phase(x), lambda x: lam * dphase(x),
                              a, b, tol=np.inf)
    lo = np.linspace(a, b, 513)
    var, _ = _gauss(lambda x: np.abs(dpsi(x)) * np.ones_like(x), lo[:-1], lo[1:])
    var = float(np.real(var))
    rhs = c_k * lam ** (-1.0 / k) * (abs(float(psi(np.array(b)))) + var)
    lhs = abs(val)
    return VdcResult(lhs, rhs, bool(lhs <= rhs), var)
