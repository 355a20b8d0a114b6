"""Peak-age distribution of the LCFS-S queue with simple ARQ.

Every generating function involved is a ratio of polynomials in ``s``, so the
peak-age PGF is assembled with exact rational arithmetic and its law is read
off by expanding the power series through the denominator recurrence.

Times are counted in frames of ``n`` channel uses. Geometric laws live on
{1, 2, ...}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, NumericalError, PgfArithmeticError

NEGATIVE_TOL = 1e-9


@dataclass(frozen=True)
class QueueParams:
    """Arrival probability per channel use, frame length and per-round error probability."""

    lam: float
    n: int
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be an integer >= 1, got {self.n}")
        if not 0.0 <= self.eps < 1.0:
            raise ConfigError(f"eps must lie in [0, 1), got {self.eps}")

    @property
    def q_frame(self) -> float:
        """Probability that no packet arrives during a frame, (1 - lambda)^n."""
        return no_arrival_probability(self.lam, self.n)

    @property
    def no_preemption_probability(self) -> float:
        return (1.0 - self.eps) / (1.0 - self.eps * self.q_frame)


def no_arrival_probability(lam: float, n: int) -> float:
    if lam >= 1.0:
        return 0.0
    return math.exp(n * math.log1p(-lam))


def frames_threshold(a, n) -> int:
    """Smallest integer number of frames m with m >= a / n (exact for float a)."""
    return math.ceil(Fraction(a) / Fraction(n))


def _poly(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return c if c.size else np.zeros(1)


def _polyadd(a, b):
    out = np.zeros(max(a.size, b.size))
    out[: a.size] += a
    out[: b.size] += b
    return out


class RationalPgf:
    """num(s) / den(s) with coefficients in ascending powers and den[0] == 1."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=(1.0,)):
        num, den = _poly(num), _poly(den)
        nz = np.flatnonzero(den)
        if nz.size == 0:
            raise PgfArithmeticError("denominator is identically zero")
        z = nz[0]
        if z:
            # common factor s^z must also divide the numerator
            scale = max(np.max(np.abs(num)), 1.0)
            if np.any(np.abs(num[:z]) > 1e-12 * scale):
                raise PgfArithmeticError("result has a pole at s = 0 and no power series")
            num, den = num[z:], den[z:]
            if num.size == 0:
                num = np.zeros(1)
        d0 = den[0]
        self.num = num / d0
        self.den = den / d0

    def __repr__(self):
        return f"RationalPgf(num={self.num.tolist()}, den={self.den.tolist()})"

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(s, self.num) / np.polynomial.polynomial.polyval(s, self.den)

    def __add__(self, other):
        other = _as_pgf(other)
        return RationalPgf(
            _polyadd(np.convolve(self.num, other.den), np.convolve(other.num, self.den)),
            np.convolve(self.den, other.den),
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalPgf(-self.num, self.den)

    def __sub__(self, other):
        return self + (-_as_pgf(other))

    def __rsub__(self, other):
        return _as_pgf(other) - self

    def __mul__(self, other):
        other = _as_pgf(other)
        return RationalPgf(np.convolve(self.num, other.num), np.convolve(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_pgf(other)
        if not np.any(other.num):
            raise PgfArithmeticError("division by the zero function")
        return RationalPgf(np.convolve(self.num, other.den), np.convolve(self.den, other.num))

    def __rtruediv__(self, other):
        return _as_pgf(other) / self

    def scale(self, c: float) -> "RationalPgf":
        return RationalPgf(c * self.num, self.den)

    def trimmed(self, tol: float = 0.0) -> "RationalPgf":
        """Drop trailing coefficients with magnitude <= tol."""
        return RationalPgf(_trim(self.num, tol), _trim(self.den, tol))

    def series(self, order: int) -> np.ndarray:
        """Power-series coefficients c_0..c_order."""
        c = np.zeros(order + 1)
        num, den = self.num, self.den
        for m in range(order + 1):
            acc = num[m] if m < num.size else 0.0
            for j in range(1, min(m, den.size - 1) + 1):
                acc -= den[j] * c[m - j]
            c[m] = acc
        return c

    def mean(self) -> float:
        """G'(1), the expectation of the represented law."""
        P = np.polynomial.polynomial
        n1, d1 = P.polyval(1.0, self.num), P.polyval(1.0, self.den)
        dn1, dd1 = P.polyval(1.0, P.polyder(self.num)), P.polyval(1.0, P.polyder(self.den))
        return float((dn1 * d1 - n1 * dd1) / d1**2)


def _trim(c, tol):
    nz = np.flatnonzero(np.abs(c) > tol)
    return c[: nz[-1] + 1] if nz.size else np.zeros(1)


def _as_pgf(x) -> RationalPgf:
    if isinstance(x, RationalPgf):
        return x
    return RationalPgf([float(x)])


def pgf_arith(a: RationalPgf, b, op: str) -> RationalPgf:
    """Apply ``op`` in {"add", "sub", "mul", "div", "scale"}; for "scale" ``b`` is the constant."""
    if op == "scale":
        return a.scale(float(b))
    ops = {
        "add": RationalPgf.__add__,
        "sub": RationalPgf.__sub__,
        "mul": RationalPgf.__mul__,
        "div": RationalPgf.__truediv__,
    }
    if op not in ops:
        raise ConfigError(f"unknown operation {op!r}")
    return ops[op](a, b)


def geometric_pgf(success: float) -> RationalPgf:
    """PGF of Geom(success) on {1, 2, ...}: success*s / (1 - (1 - success)*s)."""
    return RationalPgf([0.0, success], [1.0, -(1.0 - success)])


@dataclass(frozen=True)
class AgePgfParts:
    """Building blocks of the peak-age PGF."""

    p: float
    service: RationalPgf        # conditional service time of a delivered packet
    interarrival: RationalPgf   # frames between arrivals
    lead: RationalPgf           # time from an arrival to the next one given no preemption
    age: RationalPgf


def age_pgf_parts(qp: QueueParams) -> AgePgfParts:
    if qp.lam <= 0.0:
        raise ConfigError("no arrivals: lambda must be > 0 for a steady state to exist")
    q = qp.q_frame
    r = qp.eps * q
    p = (1.0 - qp.eps) / (1.0 - r)
    g_h = geometric_pgf(1.0 - r)
    g_t = geometric_pgf(1.0 - q)
    g_t0 = (g_t - g_h.scale(1.0 - p)).scale(1.0 / p)
    g_a = g_t0 * g_h.scale(p) / (1.0 - g_h.scale(1.0 - p))
    return AgePgfParts(p=p, service=g_h, interarrival=g_t, lead=g_t0, age=g_a)


def assemble_age_pgf(qp: QueueParams) -> RationalPgf:
    """Steady-state PGF of the peak age (in frames)."""
    return age_pgf_parts(qp).age


@dataclass(frozen=True)
class AgeDistribution:
    pmf: np.ndarray
    M: int
    tail_mass: float

    def ccdf(self, m: int) -> float:
        """P[A >= m] for m <= M + 1."""
        if m <= 0:
            return 1.0
        if m > self.M + 1:
            raise ValueError(f"m={m} beyond truncation order {self.M}")
        return min(max(1.0 - math.fsum(self.pmf[:m]), 0.0), 1.0)


def invert_pgf(G: RationalPgf, M: int) -> AgeDistribution:
    """Law of the represented random variable on {0..M} by exact series expansion."""
    if M < 1:
        raise ConfigError(f"truncation order must be >= 1, got {M}")
    total = float(G(1.0))
    if not abs(total - 1.0) <= 1e-8:
        raise NumericalError(f"not a probability generating function: G(1) = {total!r}")
    c = G.series(M)
    if not np.all(np.isfinite(c)):
        raise NumericalError("non-finite series coefficient")
    worst = int(np.argmin(c))
    if c[worst] < -NEGATIVE_TOL:
        raise NumericalError(f"negative coefficient {c[worst]:.3e} at order {worst}")
    return AgeDistribution(pmf=c, M=M, tail_mass=1.0 - math.fsum(c))


def violation_probability(qp: QueueParams, a: float) -> float:
    """P[A >= a/n] with A the steady-state peak age in frames and a in channel uses."""
    if not a > 0:
        raise ConfigError(f"threshold a must be > 0, got {a}")
    m = frames_threshold(a, qp.n)
    dist = invert_pgf(assemble_age_pgf(qp), max(m, 1))
    return dist.ccdf(m)


def limiting_violation(eps: float, n: int, a: float) -> float:
    """Violation probability as lambda -> 1: P[H >= a/n - 1] with H ~ Geom(1 - eps)."""
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"eps must lie in [0, 1), got {eps}")
    if not (a > 0 and n > 0):
        raise ConfigError("a and n must be positive")
    h = frames_threshold(a, n) - 1
    if h <= 1:
        return 1.0
    return eps ** (h - 1)
