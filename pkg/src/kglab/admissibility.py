"""Exact rational bookkeeping for Klein-Gordon admissible exponents.

Exponents are Fractions; infinity is the symbolic sentinel ``INF`` with
1/INF = 0.  No floating point is used anywhere in this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class AdmissibilityError(ValueError):
    pass


class _Infinity:
    """Symbolic +infinity for Lebesgue exponents."""

    is_infinite = True
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __eq__(self, other):
        return isinstance(other, _Infinity)

    def __hash__(self):
        return hash("kglab-inf")

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def as_exponent(x):
    """Parse ints, Fractions, rational strings ("7/3") or infinity markers."""
    if isinstance(x, _Infinity):
        return INF
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "∞"):
            return INF
        return Fraction(s)
    if isinstance(x, float):
        if x == float("inf"):
            return INF
        raise AdmissibilityError("floats are not accepted; pass a Fraction or a string")
    return Fraction(x)


def recip(x) -> Fraction:
    x = as_exponent(x)
    return Fraction(0) if x is INF else 1 / x


def fmt(x) -> str:
    x = as_exponent(x)
    return "inf" if x is INF else str(x)


def _check_pair(q, r, n, theta):
    q, r, theta = as_exponent(q), as_exponent(r), as_exponent(theta)
    for name, v in (("q", q), ("r", r)):
        if v is not INF and v < 2:
            raise AdmissibilityError(f"{name} must lie in [2, inf]")
    if theta is INF or not 0 <= theta <= 1:
        raise AdmissibilityError("theta must lie in [0, 1]")
    if int(n) != n or n < 1:
        raise AdmissibilityError("n must be a positive integer")
    return q, r, int(n), theta


def is_kg_admissible(q, r, n: int, theta) -> bool:
    """2/q + (n-1+theta)/r <= (n-1+theta)/2, excluding (q, r, n, theta) = (2, inf, 3, 0)."""
    q, r, n, theta = _check_pair(q, r, n, theta)
    if q == 2 and r is INF and n == 3 and theta == 0:
        return False
    sigma = n - 1 + theta
    return 2 * recip(q) + sigma * recip(r) <= sigma / 2


def gap_index(q, r, n: int, theta) -> Fraction:
    """s with 1/q + (n+theta)/r = (n+theta)/2 - s."""
    q, r, n, theta = _check_pair(q, r, n, theta)
    return (n + theta) / 2 - (n + theta) * recip(r) - recip(q)


@dataclass(frozen=True)
class AdmissiblePair:
    q: object
    r: object
    n: int
    theta: Fraction
    s: Fraction

    @property
    def admissible(self) -> bool:
        return is_kg_admissible(self.q, self.r, self.n, self.theta)


def make_pair(q, r, n, theta) -> AdmissiblePair:
    q, r, n, theta = _check_pair(q, r, n, theta)
    return AdmissiblePair(q, r, n, theta, gap_index(q, r, n, theta))


@dataclass(frozen=True)
class ExponentTable:
    p: Fraction
    n: int
    q0: Fraction
    q1: Fraction
    s_c: Fraction
    alpha: Fraction
    p_conf: Fraction
    in_range: bool

    def as_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v)
                for k, v in self.__dict__.items()}


def exponent_table(p, n: int) -> ExponentTable:
    p = as_exponent(p)
    if p is INF or p <= 1:
        raise AdmissibilityError("p must be a finite rational > 1")
    if n < 3:
        raise AdmissibilityError("n must be >= 3")
    s_c = Fraction(n, 2) - 2 / (p - 1)
    lo, hi = 1 + Fraction(4, n - 1), 1 + Fraction(4, n - 2)
    return ExponentTable(
        p=p, n=n,
        q0=(p - 1) * (n + 1) / 2,
        q1=Fraction(2 * (n + 1), n - 1),
        s_c=s_c,
        alpha=s_c - Fraction(1, 2),
        p_conf=1 + Fraction(4, n),
        in_range=lo <= p <= hi,
    )


def semiclassical_lambda(h, q, r, alpha, sigma) -> Fraction:
    """Exponent e with Lambda(h) = h^e = h^{-(alpha+sigma)(1/2 - 1/r) + 1/q}.

    ``h`` must be a non-positive integer power of two; the exponent itself does
    not depend on h.
    """
    h = as_exponent(h)
    if h is INF or h <= 0 or h > 1:
        raise AdmissibilityError("h must lie in (0, 1]")
    inv = 1 / h
    if inv.denominator != 1 or inv.numerator & (inv.numerator - 1):
        raise AdmissibilityError("h must be a power of 2, h = 2^-k with k >= 0")
    alpha, sigma = as_exponent(alpha), as_exponent(sigma)
    return -(alpha + sigma) * (Fraction(1, 2) - recip(r)) + recip(q)


def keel_tao_values(n: int, theta):
    """(alpha, sigma) read off from the high-frequency dispersive bound."""
    theta = as_exponent(theta)
    return (n + 1 + theta) / 2, (n - 1 + theta) / 2


def rational_lattice(n: int, thetas, denom: int = 8):
    """Admissible points (q, r, theta) with 1/q, 1/r on the lattice (1/denom) Z in [0, 1/2]."""
    pts = []
    for theta in thetas:
        theta = as_exponent(theta)
        for a in range(denom // 2 + 1):
            for b in range(denom // 2 + 1):
                iq, ir = Fraction(a, denom), Fraction(b, denom)
                q = INF if iq == 0 else 1 / iq
                r = INF if ir == 0 else 1 / ir
                if is_kg_admissible(q, r, n, theta):
                    pts.append((q, r, theta))
    return pts


def region_boundary(n: int, theta, denom: int = 16):
    """Rows (theta, q, r, s) on the sharp line 2/q + (n-1+theta)/r = (n-1+theta)/2."""
    theta = as_exponent(theta)
    sigma = n - 1 + theta
    rows = []
    for b in range(denom // 2 + 1):
        ir = Fraction(b, denom)
        iq = sigma * (Fraction(1, 2) - ir) / 2
        if iq > Fraction(1, 2):
            continue
        q = INF if iq == 0 else 1 / iq
        r = INF if ir == 0 else 1 / ir
        if q == 2 and r is INF and n == 3 and theta == 0:
            continue
        rows.append((theta, q, r, gap_index(q, r, n, theta)))
    return rows
