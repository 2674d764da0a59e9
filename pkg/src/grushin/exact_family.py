"""Closed-form spectral arithmetic for the shifted-parabola family
V = x^2 + s2 on the cylinder.

The fibered operator -u'' + k^2 (x^2 + s2) u is a scaled harmonic oscillator,
so its levels are (2n+1)|k| + k^2 s2. That makes every spectral question below
a question about integers: eigenvalues are integer pairs (lin, quad) denoting
lin + quad * s2 with lin = (2n+1)|k| and quad = k^2, multiplicities count
lattice points, and the eigenvalue counting function is an exact divisor-style
sum. All arithmetic is exact: Fractions for rational s2, pair equality for
tagged irrationals, 64-bit-guarded integers throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    ExactScalar,
    IntegerOverflowError,
    InvariantViolation,
    PreconditionError,
)

__all__ = [
    "ExactEigenvalue",
    "SpectrumLine",
    "exact_eigenvalue",
    "multiplicity_factorization",
    "multiplicity_enumeration",
    "counting_function",
    "weyl_residual",
    "WeylSample",
    "enumerate_exact_pairs",
    "factorize",
]

_INT64_MAX = 2**63 - 1
_FACTOR_LIMIT = 10**12  # trial division stays cheap below this


def _check64(value: int, what: str) -> int:
    if abs(value) > _INT64_MAX:
        raise IntegerOverflowError(f"{what} = {value} exceeds the 64-bit guard")
    return value


@dataclass(frozen=True)
class ExactEigenvalue:
    """Integer pair (lin, quad) denoting the eigenvalue lin + quad * s2,
    with lin = (2n+1)|k| and quad = k^2 for some valid (k, n)."""

    lin: int
    quad: int

    def __post_init__(self):
        _check64(self.lin, "lin")
        _check64(self.quad, "quad")
        if self.lin < 1 or self.quad < 1:
            raise InvariantViolation("lin and quad must be positive")
        k = math.isqrt(self.quad)
        if k * k != self.quad:
            raise InvariantViolation(f"quad={self.quad} is not a perfect square")
        if self.lin % k != 0 or (self.lin // k) % 2 != 1:
            raise InvariantViolation(
                f"(lin={self.lin}, quad={self.quad}) has no (k, n) preimage")

    @property
    def abs_k(self) -> int:
        return math.isqrt(self.quad)

    @property
    def level(self) -> int:
        return ((self.lin // self.abs_k) - 1) // 2

    def value(self, s2: ExactScalar) -> float:
        return float(self.lin + self.quad * s2.approx)

    def exact_value(self, s2: ExactScalar) -> Fraction:
        if not s2.is_rational:
            raise PreconditionError("exact numeric value needs rational s2")
        return Fraction(self.lin) + self.quad * s2.rational


@dataclass(frozen=True)
class SpectrumLine:
    """An assembled eigenvalue of the two-dimensional operator: its numeric
    value, the contributing Fourier/level pairs, and the multiplicity."""

    value: float
    contributors: tuple[tuple[int, int], ...]
    multiplicity: int
    exact_value: Fraction | None = None
    exact_pair: tuple[int, int] | None = None

    def __post_init__(self):
        if self.multiplicity != len(self.contributors):
            raise InvariantViolation("multiplicity must equal the contributor count")
        if self.multiplicity % 2 != 0:
            raise InvariantViolation("multiplicities are even (k and -k pair up)")
        have = set(self.contributors)
        if any((-k, n) not in have for k, n in self.contributors):
            raise InvariantViolation("contributors must be closed under k -> -k")


def _sorted_contributors(pairs) -> tuple[tuple[int, int], ...]:
    return tuple(sorted(pairs, key=lambda kn: (abs(kn[0]), kn[0], kn[1])))


def exact_eigenvalue(k: int, n: int, s2: ExactScalar) -> ExactEigenvalue:
    """The eigenvalue pair for Fourier mode k and oscillator level n:
    lin = (2n+1)|k|, quad = k^2. The pair itself is s2-independent; s2 only
    fixes the numeric value lin + quad * s2."""
    if k == 0:
        raise PreconditionError("k must be nonzero")
    if n < 0:
        raise PreconditionError("n must be >= 0")
    _check64(k, "k")
    _check64(n, "n")
    lin = _check64((2 * n + 1) * abs(k), "(2n+1)|k|")
    quad = _check64(k * k, "k^2")
    return ExactEigenvalue(lin=lin, quad=quad)


def factorize(value: int) -> dict[int, int]:
    """Prime factorization by trial division (guarded to 1e12)."""
    if value < 1:
        raise PreconditionError("factorization needs a positive integer")
    if value > _FACTOR_LIMIT:
        raise IntegerOverflowError(f"{value} exceeds the trial-division limit {_FACTOR_LIMIT}")
    out: dict[int, int] = {}
    rest = value
    for p in (2, 3):
        while rest % p == 0:
            out[p] = out.get(p, 0) + 1
            rest //= p
    d = 5
    while d * d <= rest:
        for p in (d, d + 2):
            while rest % p == 0:
                out[p] = out.get(p, 0) + 1
                rest //= p
        d += 6
    if rest > 1:
        out[rest] = out.get(rest, 0) + 1
    return out


def multiplicity_factorization(value: int) -> int:
    """Multiplicity of the eigenvalue E = value for s2 = 0, from the prime
    factorization E = 2^k0 * p1^a1 * ... * pr^ar.

    Counting the ways to write E = (2n+1)|k|: the odd part 2n+1 can be any
    divisor of the odd part of E, so with the factor 2 for k -> -k,

        mult(E) = 2 * prod(ai + 1).
    """
    if value == 0:
        raise PreconditionError("E = 0 is not an eigenvalue")
    if value < 0:
        raise PreconditionError("eigenvalues are positive")
    mult = 2
    for p, a in factorize(value).items():
        if p != 2:
            mult *= a + 1
    return mult


def multiplicity_enumeration(target, s2: ExactScalar) -> SpectrumLine:
    """All (k, n) whose eigenvalue equals the target, with exact equality.

    Rational s2: the target is an exact rational (int, Fraction, or float
    taken at face value) and equality is tested in Fraction arithmetic.
    Irrational s2: the target is a pair (lin, quad) or an ExactEigenvalue and
    equality is pair equality; no float comparison ever happens.
    """
    if s2.is_rational:
        t = target.exact_value(s2) if isinstance(target, ExactEigenvalue) else Fraction(target)
        if t <= 0:
            raise PreconditionError("eigenvalues are positive")
        contributors = []
        k = 1
        while Fraction(k) + k * k * s2.rational <= t:
            _check64(k, "k")
            rem = t - k * k * s2.rational
            q = rem / k
            if q.denominator == 1 and q >= 1 and q.numerator % 2 == 1:
                n = (q.numerator - 1) // 2
                contributors.extend([(k, n), (-k, n)])
            k += 1
        return SpectrumLine(
            value=float(t),
            contributors=_sorted_contributors(contributors),
            multiplicity=len(contributors),
            exact_value=t,
        )

    if isinstance(target, ExactEigenvalue):
        lin, quad = target.lin, target.quad
    else:
        lin, quad = target
    k = math.isqrt(max(quad, 0))
    valid = quad >= 1 and k * k == quad and lin >= k and lin % k == 0 and (lin // k) % 2 == 1
    contributors: list[tuple[int, int]] = []
    if valid:
        n = ((lin // k) - 1) // 2
        contributors = [(k, n), (-k, n)]
    return SpectrumLine(
        value=float(lin + quad * s2.approx),
        contributors=_sorted_contributors(contributors),
        multiplicity=len(contributors),
        exact_pair=(lin, quad),
    )


def _count_levels(rem_num: int, rem_den: int, k: int) -> int:
    """card{n >= 0 : (2n+1) <= rem/k} with rem = rem_num/rem_den >= 0:
    floor((rem/k + 1)/2), and 0 when rem/k < 1."""
    if rem_num < rem_den * k:
        return 0
    return (rem_num + rem_den * k) // (2 * rem_den * k)


def counting_function(e_max, s2: ExactScalar) -> int:
    """Exact number of eigenvalues (with multiplicity) <= e_max:

        N(E) = 2 * sum over 0 < k <= min(E, sqrt(E)/s) of
                   card{n : (2n+1) <= (E - k^2 s2)/k}.

    Exact rational arithmetic when s2 is rational; the tagged-irrational case
    evaluates through the numeric approximation.
    """
    if not (float(e_max) > 0):
        raise PreconditionError("e_max must be positive")
    if s2.is_rational:
        t = Fraction(e_max)
        s2f = s2.rational
        if s2f == 0:
            kmax = int(t)  # k <= E
            if kmax < 1:
                return 0
            if t.denominator == 1 and kmax <= 10**8:
                k = np.arange(1, kmax + 1, dtype=np.int64)
                _check64(int(t) + kmax, "E + k")
                return int(2 * np.sum((int(t) + k) // (2 * k)))
            total = 0
            for k in range(1, kmax + 1):
                total += _count_levels(t.numerator, t.denominator, k)
            return 2 * total
        total = 0
        k = 1
        while k <= t and k * k * s2f <= t:
            _check64(k * k * s2f.numerator, "k^2 * s2 numerator")
            rem = t - k * k * s2f
            total += _count_levels(rem.numerator, rem.denominator, k)
            k += 1
        return 2 * total

    e = float(e_max)
    s = math.sqrt(s2.approx)
    kmax = int(min(e, math.sqrt(e) / s))
    total = 0
    for k in range(1, kmax + 1):
        y = (e - k * k * s2.approx) / k
        if y >= 1.0:
            total += int(math.floor((y + 1.0) / 2.0))
    return 2 * total


@dataclass(frozen=True)
class WeylSample:
    e: float
    count: int
    residual: float


def weyl_residual(e_samples, s2: ExactScalar) -> list[WeylSample]:
    """Normalized counting-function residuals for asymptotic inspection:

        s2 == 0:  (N(E) - E ln E) / E
        s2 != 0:  (N(E) - E ln sqrt(E)) / E
    """
    samples = list(e_samples)
    if any(not (float(e) > 0) for e in samples):
        raise PreconditionError("samples must be positive")
    if any(b <= a for a, b in zip(samples, samples[1:])):
        raise PreconditionError("samples must be increasing")
    zero = s2.is_rational and s2.rational == 0
    out = []
    for e in samples:
        n_e = counting_function(e, s2)
        e_f = float(e)
        lead = e_f * math.log(e_f) if zero else e_f * math.log(math.sqrt(e_f))
        out.append(WeylSample(e=e_f, count=n_e, residual=(n_e - lead) / e_f))
    return out


def enumerate_exact_pairs(s2: ExactScalar, e_max) -> list[tuple[int, int, ExactEigenvalue]]:
    """Every (k > 0, n, pair) with eigenvalue <= e_max, in (k, n) order."""
    if not (float(e_max) > 0):
        raise PreconditionError("e_max must be positive")
    out = []
    if s2.is_rational:
        t = Fraction(e_max)
        k = 1
        while Fraction(k) + k * k * s2.rational <= t:
            rem = t - k * k * s2.rational
            top = rem / k
            n = 0
            while 2 * n + 1 <= top:
                out.append((k, n, exact_eigenvalue(k, n, s2)))
                n += 1
            k += 1
        return out
    e = float(e_max)
    k = 1
    while k + k * k * s2.approx <= e:
        top = (e - k * k * s2.approx) / k
        n = 0
        while 2 * n + 1 <= top:
            out.append((k, n, exact_eigenvalue(k, n, s2)))
            n += 1
        k += 1
    return out
