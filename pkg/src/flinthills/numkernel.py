"""Certified arbitrary-precision real arithmetic.

Everything analytic in this package flows through :class:`CertReal`, an
interval with MPFR endpoints.  The certification contract is simple and
absolute: the represented real value always lies in ``[lo, hi]``; every
operation rounds the lower endpoint down and the upper endpoint up, so the
contract survives arbitrary composition.

The module also provides enclosures of the constants the rest of the
toolkit needs (pi, sqrt(2), the golden ratio) and the two hot kernels:
``sin_abs_enclosure`` (|sin n| at integer arguments, with adaptive-precision
argument reduction) and ``nearest_lattice_distance`` (min_m |n - m*alpha|).

pi is not taken from the library: it is summed from a Machin arctangent
decomposition in exact integer fixed-point with an explicit alternating-series
tail bound, so the enclosure is certified end to end.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Union

import gmpy2
from gmpy2 import mpfr, mpq, mpz

from .errors import DomainError, PrecisionExhausted, ResourceLimitError

_MPFR_ZERO = mpfr(0)

# Hard ceiling for constant computation; generous next to the 4096-bit
# default policy ceiling but finite so runaway ladders fail loudly.
PI_BITS_CEILING = 1 << 20


def _down(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundDown)


def _up(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundUp)


def _exact_neg(x: mpfr) -> mpfr:
    """Sign flip at the operand's own precision (always exact)."""
    return gmpy2.context(precision=x.precision).minus(x)


def _to_mpq(x) -> mpq:
    """Exact conversion of int/Fraction/mpq/mpz/mpfr to mpq."""
    if isinstance(x, (int, mpz)):
        return mpq(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, mpq):
        return x
    if isinstance(x, mpfr):
        return mpq(x)
    raise TypeError(f"cannot convert {type(x)!r} exactly")


@dataclass(frozen=True)
class PrecisionPolicy:
    """Adaptive-precision schedule: double from start_bits up to max_bits.

    target_rel_width is the relative interval width at which refinement
    stops.  Results that still miss the target at max_bits are returned
    with their ``wide`` flag set rather than discarded.
    """

    start_bits: int = 192
    max_bits: int = 4096
    target_rel_width: Fraction = Fraction(1, 2**50)

    def __post_init__(self):
        if self.start_bits < 8:
            raise DomainError("start_bits must be at least 8")
        if self.start_bits > self.max_bits:
            raise DomainError("start_bits must not exceed max_bits")
        if self.target_rel_width <= 0:
            raise DomainError("target_rel_width must be positive")

    def ladder(self):
        """Yield the precision schedule: start, 2*start, ..., max_bits."""
        bits = self.start_bits
        while bits < self.max_bits:
            yield bits
            bits *= 2
        yield self.max_bits


DEFAULT_POLICY = PrecisionPolicy()


@dataclass(frozen=True)
class CertReal:
    """Interval enclosure of a real number with MPFR endpoints.

    ``wide`` marks a valid enclosure that failed to reach its requested
    width target; batch computations carry it instead of aborting.
    """

    lo: mpfr
    hi: mpfr
    precision_bits: int
    wide: bool = False

    def __post_init__(self):
        if gmpy2.is_nan(self.lo) or gmpy2.is_nan(self.hi):
            raise DomainError("NaN endpoint in enclosure")
        if not self.lo <= self.hi:
            raise DomainError(f"inverted enclosure [{self.lo}, {self.hi}]")

    # ---- constructors -------------------------------------------------

    @staticmethod
    def from_scalar(x, bits: int, wide: bool = False) -> "CertReal":
        """Enclose an exact scalar (int, Fraction, mpq, mpfr) outward."""
        q = _to_mpq(x)
        lo = _down(bits).add(q, _MPFR_ZERO)
        hi = _up(bits).add(q, _MPFR_ZERO)
        return CertReal(lo, hi, bits, wide)

    @staticmethod
    def from_endpoints(lo, hi, bits: int, wide: bool = False) -> "CertReal":
        """Enclose [lo, hi] given as exact scalars, rounding outward."""
        l = _down(bits).add(_to_mpq(lo), _MPFR_ZERO)
        h = _up(bits).add(_to_mpq(hi), _MPFR_ZERO)
        return CertReal(l, h, bits, wide)

    # ---- inspection ---------------------------------------------------

    def width(self) -> mpfr:
        return _up(self.precision_bits).sub(self.hi, self.lo)

    def rel_width_leq(self, target: Fraction) -> bool:
        """Exact test width/lo <= target; requires lo > 0."""
        if not self.lo > 0:
            return False
        return mpq(self.hi) - mpq(self.lo) <= _to_mpq(target) * mpq(self.lo)

    def midpoint(self) -> mpfr:
        ctx = gmpy2.context(precision=self.precision_bits)
        return ctx.div(ctx.add(self.lo, self.hi), mpfr(2))

    def mid_fraction(self) -> Fraction:
        m = mpq(self.lo) + (mpq(self.hi) - mpq(self.lo)) / 2
        return Fraction(m.numerator, m.denominator)

    def contains(self, x) -> bool:
        q = _to_mpq(x)
        return self.lo <= q and q <= self.hi

    def overlaps(self, other: "CertReal") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def contains_interval(self, other: "CertReal") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def certainly_ge(self, t) -> bool:
        """True iff every value in the enclosure is >= t (exact threshold)."""
        return mpq(self.lo) >= _to_mpq(t)

    def certainly_gt(self, t) -> bool:
        return mpq(self.lo) > _to_mpq(t)

    def certainly_lt(self, t) -> bool:
        return mpq(self.hi) < _to_mpq(t)

    def certainly_le(self, t) -> bool:
        return mpq(self.hi) <= _to_mpq(t)

    def is_positive(self) -> bool:
        return self.lo > 0

    # ---- arithmetic ---------------------------------------------------

    def _bits_with(self, other, bits):
        if bits is not None:
            return bits
        if isinstance(other, CertReal):
            return max(self.precision_bits, other.precision_bits)
        return self.precision_bits

    @staticmethod
    def _lift(x, bits: int) -> "CertReal":
        if isinstance(x, CertReal):
            return x
        return CertReal.from_scalar(x, bits)

    def add(self, other, bits=None) -> "CertReal":
        bits = self._bits_with(other, bits)
        o = CertReal._lift(other, bits)
        return CertReal(
            _down(bits).add(self.lo, o.lo),
            _up(bits).add(self.hi, o.hi),
            bits,
            self.wide or o.wide,
        )

    def sub(self, other, bits=None) -> "CertReal":
        bits = self._bits_with(other, bits)
        o = CertReal._lift(other, bits)
        return CertReal(
            _down(bits).sub(self.lo, o.hi),
            _up(bits).sub(self.hi, o.lo),
            bits,
            self.wide or o.wide,
        )

    def neg(self) -> "CertReal":
        return CertReal(
            _exact_neg(self.hi), _exact_neg(self.lo), self.precision_bits, self.wide
        )

    def abs(self) -> "CertReal":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return self.neg()
        return CertReal(
            mpfr(0),
            max(_exact_neg(self.lo), self.hi),
            self.precision_bits,
            self.wide,
        )

    def mul(self, other, bits=None) -> "CertReal":
        bits = self._bits_with(other, bits)
        o = CertReal._lift(other, bits)
        dn, upc = _down(bits), _up(bits)
        pairs = (
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        )
        lo = min(dn.mul(a, b) for a, b in pairs)
        hi = max(upc.mul(a, b) for a, b in pairs)
        return CertReal(lo, hi, bits, self.wide or o.wide)

    def div(self, other, bits=None) -> "CertReal":
        bits = self._bits_with(other, bits)
        o = CertReal._lift(other, bits)
        if o.lo <= 0 <= o.hi:
            raise DomainError("division by an enclosure containing zero")
        dn, upc = _down(bits), _up(bits)
        pairs = (
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        )
        lo = min(dn.div(a, b) for a, b in pairs)
        hi = max(upc.div(a, b) for a, b in pairs)
        return CertReal(lo, hi, bits, self.wide or o.wide)

    def recip(self, bits=None) -> "CertReal":
        bits = bits if bits is not None else self.precision_bits
        return CertReal.from_scalar(1, bits).div(self, bits=bits)

    def sqrt(self, bits=None) -> "CertReal":
        bits = bits if bits is not None else self.precision_bits
        if self.lo < 0:
            raise DomainError("sqrt of an enclosure reaching below zero")
        return CertReal(
            _down(bits).sqrt(self.lo), _up(bits).sqrt(self.hi), bits, self.wide
        )

    def exp(self, bits=None) -> "CertReal":
        bits = bits if bits is not None else self.precision_bits
        return CertReal(
            _down(bits).exp(self.lo), _up(bits).exp(self.hi), bits, self.wide
        )

    def log(self, bits=None) -> "CertReal":
        bits = bits if bits is not None else self.precision_bits
        if not self.lo > 0:
            raise DomainError("log of an enclosure reaching zero")
        return CertReal(
            _down(bits).log(self.lo), _up(bits).log(self.hi), bits, self.wide
        )

    def log2(self, bits=None) -> "CertReal":
        bits = bits if bits is not None else self.precision_bits
        if not self.lo > 0:
            raise DomainError("log2 of an enclosure reaching zero")
        return CertReal(
            _down(bits).log2(self.lo), _up(bits).log2(self.hi), bits, self.wide
        )

    def pow_int(self, k: int, bits=None) -> "CertReal":
        bits = bits if bits is not None else self.precision_bits
        if k == 0:
            return CertReal.from_scalar(1, bits, self.wide)
        if k < 0:
            return self.pow_int(-k, bits).recip(bits)
        dn, upc = _down(bits), _up(bits)
        if k % 2 == 1 or self.lo >= 0:
            return CertReal(
                dn.pow(self.lo, k), upc.pow(self.hi, k), bits, self.wide
            )
        if self.hi <= 0:
            return CertReal(
                dn.pow(self.hi, k), upc.pow(self.lo, k), bits, self.wide
            )
        # even power of a sign-straddling interval
        big = max(-self.lo, self.hi)
        return CertReal(mpfr(0), upc.pow(big, k), bits, self.wide)

    def pow_fraction(self, e: Fraction, bits=None) -> "CertReal":
        """x**e for exact rational e; requires a strictly positive enclosure."""
        e = Fraction(e)
        if e.denominator == 1:
            return self.pow_int(e.numerator, bits)
        bits = bits if bits is not None else self.precision_bits
        if not self.lo > 0:
            raise DomainError("rational power of a non-positive enclosure")
        eq = _to_mpq(e)
        e_lo = _down(bits).add(eq, _MPFR_ZERO)
        e_hi = _up(bits).add(eq, _MPFR_ZERO)
        dn, upc = _down(bits), _up(bits)
        corners = (
            (self.lo, e_lo),
            (self.lo, e_hi),
            (self.hi, e_lo),
            (self.hi, e_hi),
        )
        # x**e = exp(e*log x) is monotone in each argument separately for
        # x > 0, so the extrema sit at corner points.
        lo = min(dn.pow(x, y) for x, y in corners)
        hi = max(upc.pow(x, y) for x, y in corners)
        return CertReal(lo, hi, bits, self.wide)

    def scale_2exp(self, k: int) -> "CertReal":
        """Exact multiplication by 2**k (exponent shift)."""
        lo_ctx = gmpy2.context(precision=self.lo.precision)
        hi_ctx = gmpy2.context(precision=self.hi.precision)
        if k >= 0:
            lo = lo_ctx.mul_2exp(self.lo, k)
            hi = hi_ctx.mul_2exp(self.hi, k)
        else:
            lo = lo_ctx.div_2exp(self.lo, -k)
            hi = hi_ctx.div_2exp(self.hi, -k)
        return CertReal(lo, hi, self.precision_bits, self.wide)

    def intersect(self, other: "CertReal") -> "CertReal":
        if not self.overlaps(other):
            raise DomainError("intersection of disjoint enclosures")
        return CertReal(
            max(self.lo, other.lo),
            min(self.hi, other.hi),
            max(self.precision_bits, other.precision_bits),
            self.wide or other.wide,
        )

    def mark_wide(self) -> "CertReal":
        return replace(self, wide=True)

    # operator sugar; precision defaults to the wider operand
    __add__ = add
    __sub__ = sub
    __mul__ = mul
    __truediv__ = div
    __neg__ = neg

    def __repr__(self):
        tag = ", wide" if self.wide else ""
        return f"CertReal[{self.lo}, {self.hi}]({self.precision_bits}b{tag})"


# ---------------------------------------------------------------------------
# Alpha sources: refinable enclosures of the period constants
# ---------------------------------------------------------------------------


class AlphaSource:
    """A real number that can be enclosed at any requested precision.

    A bare :class:`CertReal` is accepted wherever an AlphaSource is: it is
    wrapped in a :class:`FixedSource` whose refinement saturates at the
    stored enclosure (the wide-result machinery then reports honestly
    instead of pretending to refine).
    """

    name: str = "alpha"

    def enclosure(self, bits: int) -> CertReal:
        raise NotImplementedError


class PiSource(AlphaSource):
    name = "pi"

    def enclosure(self, bits: int) -> CertReal:
        return pi_enclosure(max(bits, 8))


class Sqrt2Source(AlphaSource):
    name = "sqrt2"

    def enclosure(self, bits: int) -> CertReal:
        two = CertReal.from_scalar(2, bits)
        return two.sqrt(bits)


class GoldenSource(AlphaSource):
    """(1 + sqrt 5) / 2."""

    name = "golden"

    def enclosure(self, bits: int) -> CertReal:
        five = CertReal.from_scalar(5, bits)
        return five.sqrt(bits).add(1, bits=bits).div(2, bits=bits)


class RationalSource(AlphaSource):
    def __init__(self, value: Fraction, name: str = None):
        self.value = Fraction(value)
        self.name = name or f"rational:{self.value}"

    def enclosure(self, bits: int) -> CertReal:
        return CertReal.from_scalar(self.value, bits)


class FixedSource(AlphaSource):
    """Wraps a fixed enclosure; refinement cannot shrink it."""

    def __init__(self, value: CertReal, name: str = "fixed"):
        self.value = value
        self.name = name

    def enclosure(self, bits: int) -> CertReal:
        return self.value


class ReciprocalSource(AlphaSource):
    """1/x for an underlying source with a strictly positive enclosure."""

    def __init__(self, src: "AlphaSource", name: str = None):
        self.src = src
        self.name = name or f"1/{src.name}"

    def enclosure(self, bits: int) -> CertReal:
        return self.src.enclosure(bits).recip(bits=bits)


def as_source(alpha: Union[CertReal, AlphaSource]) -> AlphaSource:
    if isinstance(alpha, AlphaSource):
        return alpha
    if isinstance(alpha, CertReal):
        return FixedSource(alpha)
    raise TypeError(f"expected CertReal or AlphaSource, got {type(alpha)!r}")


# ---------------------------------------------------------------------------
# pi via Machin's decomposition, in exact integer fixed-point
# ---------------------------------------------------------------------------

_pi_cache: dict[int, CertReal] = {}
_pi_lock = threading.Lock()


def _atan_inv_scaled(k: int, work_bits: int) -> tuple[int, int]:
    """Integer bounds l, h with l <= arctan(1/k) * 2**work_bits <= h.

    Sums the alternating series sum_i (-1)^i / ((2i+1) k^(2i+1)) in
    fixed-point.  Each floored term is off by less than 1; the truncation
    tail is below the first omitted term, which is below 1 once the loop
    stops.  The slack accounts for both.
    """
    scale = 1 << work_bits
    k2 = k * k
    total = 0
    i = 0
    kpow = k
    while True:
        term = scale // ((2 * i + 1) * kpow)
        if term == 0:
            break
        total += -term if (i & 1) else term
        i += 1
        kpow *= k2
    slack = i + 1
    return total - slack, total + slack


def pi_enclosure(bits: int, ceiling: int = None) -> CertReal:
    """Certified enclosure of pi with width at most 2**(-bits+2).

    Machin: pi = 16*arctan(1/5) - 4*arctan(1/239), each arctangent summed
    with an explicit tail bound.  Results are cached (read-mostly, behind
    a lock); enclosures are immutable so sharing is safe.
    """
    if bits < 8:
        raise DomainError("pi_enclosure requires bits >= 8")
    limit = ceiling if ceiling is not None else PI_BITS_CEILING
    if bits > limit:
        raise ResourceLimitError(
            f"pi enclosure at {bits} bits exceeds the {limit}-bit ceiling"
        )
    with _pi_lock:
        hit = _pi_cache.get(bits)
    if hit is not None:
        return hit

    work = bits + 32
    lo5, hi5 = _atan_inv_scaled(5, work)
    lo239, hi239 = _atan_inv_scaled(239, work)
    lo_int = 16 * lo5 - 4 * hi239
    hi_int = 16 * hi5 - 4 * lo239

    store = bits + 8
    lo = _down(store).div_2exp(_down(store).add(lo_int, _MPFR_ZERO), work)
    hi = _up(store).div_2exp(_up(store).add(hi_int, _MPFR_ZERO), work)
    result = CertReal(lo, hi, store)

    with _pi_lock:
        _pi_cache[bits] = result
    return result


# ---------------------------------------------------------------------------
# Hot kernels
# ---------------------------------------------------------------------------


def _nearest_multiple(n: int, alpha: CertReal, bits: int) -> int:
    """Integer m with n/alpha roughly nearest m; any m keeps enclosures valid."""
    ctx = gmpy2.context(precision=bits)
    t = ctx.div(mpfr(n, precision=bits), alpha.midpoint())
    return int(gmpy2.floor(ctx.add(t, mpfr("0.5"))))


def _reduced_interval(n: int, m: int, alpha: CertReal, bits: int) -> CertReal:
    """Enclosure of |n - m*alpha|."""
    n_iv = CertReal.from_scalar(n, bits)
    return n_iv.sub(alpha.mul(m, bits=bits), bits=bits).abs()


def sin_abs_enclosure(
    n: int,
    alpha: Union[CertReal, AlphaSource],
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CertReal:
    """Certified enclosure of |sin n| for a period enclosing pi.

    Reduces n modulo the period (nearest multiple), then evaluates sin on
    the reduced interval with directed rounding.  Precision doubles from
    policy.start_bits until the relative width target is met; if max_bits
    is reached first the best valid enclosure is returned with its wide
    flag set.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    src = as_source(alpha)
    best = None
    for bits in policy.ladder():
        a = src.enclosure(bits)
        if not a.lo > 0:
            raise DomainError("period enclosure must be strictly positive")
        m = _nearest_multiple(n, a, bits)
        red = _reduced_interval(n, m, a, bits)
        # need the reduced interval inside [0, pi) for endpoint evaluation
        if not red.hi < 3:
            best = CertReal(mpfr(0), mpfr(1), bits, wide=True)
            continue
        dn, upc = _down(bits), _up(bits)
        lo_s = min(dn.sin(red.lo), dn.sin(red.hi))
        if lo_s < 0:
            lo_s = mpfr(0)
        # sin is increasing only up to pi/2; clamp to 1 past the safe zone
        half_pi_lo = _down(bits).div_2exp(a.lo, 1)
        if red.hi >= half_pi_lo:
            hi_s = mpfr(1)
        else:
            hi_s = min(upc.sin(red.hi), mpfr(1))
        cur = CertReal(lo_s, hi_s, bits)
        best = cur
        if cur.rel_width_leq(policy.target_rel_width):
            return cur
    return best.mark_wide()


def nearest_lattice_distance(
    n: int,
    alpha: Union[CertReal, AlphaSource],
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> tuple[int, CertReal]:
    """The m minimizing |n - alpha*m| plus a certified distance enclosure.

    The minimizer must be certified unique: if two candidates' distance
    enclosures overlap, precision is raised per the policy; a genuine tie
    (possible only for rational alpha) exhausts the ladder and raises.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    src = as_source(alpha)
    best = None
    for bits in policy.ladder():
        a = src.enclosure(bits)
        if not a.lo > 0:
            raise DomainError("period enclosure must be strictly positive")
        m0 = _nearest_multiple(n, a, bits)
        candidates = sorted({max(0, m0 - 1), max(0, m0), m0 + 1})
        dists = {m: _reduced_interval(n, m, a, bits) for m in candidates}
        m_star = min(candidates, key=lambda m: dists[m].hi)
        d_star = dists[m_star]
        unique = all(
            dists[m].lo > d_star.hi for m in candidates if m != m_star
        )
        if unique:
            if d_star.rel_width_leq(policy.target_rel_width) or d_star.hi == 0:
                return m_star, d_star
            best = (m_star, d_star)
    if best is not None:
        m_star, d_star = best
        return m_star, d_star.mark_wide()
    raise PrecisionExhausted(
        f"minimizing multiple for n={n} not certified unique within "
        f"{policy.max_bits} bits (tie or insufficient input width)"
    )
