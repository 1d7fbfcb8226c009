"""Sine-like functions and certified evaluation of the generalized series.

A sine-like function P has period alpha and is sandwiched B1*x <= P(x)
<= B2*x near zero (after reduction into |x| <= alpha/2).  The series terms
are A(n) = n**-u * P(n)**-v; partial sums are evaluated with plain
left-to-right interval addition (the interval width is the honest cost
signal, no compensation games).

Three kinds are supported: |sin| with period pi, the lattice distance
min_m |x - m*alpha| (B1 = B2 = 1 exactly), and user-supplied piecewise
linear profiles over one period, validated against the sandwich at load.

Summation is deterministic under parallelism: terms are summed ascending
within fixed-size chunks and chunk sums are combined in index order, so a
chunked run, a threaded run, and a resumed run are bit-for-bit identical.
"""

from __future__ import annotations

import base64
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import gmpy2
from gmpy2 import mpfr, mpq

from .approx import ApproxRecord
from .errors import DomainError, PrecisionExhausted
from .numkernel import (
    DEFAULT_POLICY,
    AlphaSource,
    CertReal,
    GoldenSource,
    PiSource,
    PrecisionPolicy,
    Sqrt2Source,
    as_source,
    nearest_lattice_distance,
    pi_enclosure,
    sin_abs_enclosure,
)

CHUNK = 1024

KINDS = ("abs-sin", "lattice-distance", "custom-table")


@dataclass(frozen=True)
class SeriesParams:
    """Exponents of the term n**-u * P(n)**-v."""

    u: Fraction
    v: Fraction

    def __post_init__(self):
        object.__setattr__(self, "u", Fraction(self.u))
        object.__setattr__(self, "v", Fraction(self.v))
        if self.u <= 0 or self.v <= 0:
            raise DomainError("u and v must be positive")


class SineLikeSpec:
    """A concrete periodic profile with its period and sandwich bounds.

    For kind 'abs-sin' the period must enclose pi (|sin| has no other
    period); for 'lattice-distance' the sandwich is exact with
    B1 = B2 = 1; 'custom-table' takes breakpoints (t_i, y_i) over half a
    period in period units (t in [0, 1/2], P(t*alpha) = y_i at
    breakpoints, linear between, pinned y_0 = 0 at t_0 = 0, and even
    within the period).  The sandwich is certified at load: piecewise
    linearity makes the breakpoint checks sufficient.
    """

    def __init__(
        self,
        alpha: Union[CertReal, AlphaSource],
        B1,
        B2,
        kind: str,
        table: Optional[list[tuple[Fraction, Fraction]]] = None,
        check_bits: int = 128,
    ):
        self.alpha = as_source(alpha)
        self.B1 = Fraction(B1)
        self.B2 = Fraction(B2)
        self.kind = kind
        self.table = None
        if self.B1 <= 0 or self.B2 <= 0:
            raise DomainError("sandwich bounds must be positive")
        if self.B1 > self.B2:
            raise DomainError("need B1 <= B2")
        if kind not in KINDS:
            raise DomainError(f"unknown sine-like kind {kind!r}")
        a = self.alpha.enclosure(check_bits)
        if not a.lo > 0:
            raise DomainError("period must be strictly positive")
        if kind == "abs-sin":
            if not a.overlaps(pi_enclosure(check_bits)):
                raise DomainError("abs-sin requires the period to enclose pi")
        if kind == "custom-table":
            if not table:
                raise DomainError("custom-table needs breakpoints")
            self.table = tuple(
                (Fraction(t), Fraction(y)) for t, y in table
            )
            self._check_table(a)

    def _check_table(self, a: CertReal):
        tab = self.table
        if tab[0] != (Fraction(0), Fraction(0)):
            raise DomainError("table must start at (0, 0)")
        if tab[-1][0] != Fraction(1, 2):
            raise DomainError("table must end at t = 1/2")
        ts = [t for t, _ in tab]
        if ts != sorted(set(ts)):
            raise DomainError("breakpoint positions must be strictly ascending")
        alo, ahi = mpq(a.lo), mpq(a.hi)
        for t, y in tab[1:]:
            if y <= 0:
                raise DomainError("profile must be positive away from 0")
            tq = mpq(t.numerator, t.denominator)
            yq = mpq(y.numerator, y.denominator)
            b1 = mpq(self.B1.numerator, self.B1.denominator)
            b2 = mpq(self.B2.numerator, self.B2.denominator)
            if not b1 * tq * ahi <= yq:
                raise DomainError(f"lower sandwich fails at t = {t}")
            if not yq <= b2 * tq * alo:
                raise DomainError(f"upper sandwich fails at t = {t}")

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha.name,
            "B1": str(self.B1),
            "B2": str(self.B2),
        }

    def __repr__(self):
        return f"SineLikeSpec({self.kind}, alpha={self.alpha.name})"


def _table_eval(spec: SineLikeSpec, t: CertReal, bits: int) -> CertReal:
    """Piecewise-linear profile over a t-interval clipped to [0, 1/2]."""
    t_lo = max(Fraction(0), Fraction(mpq(t.lo).numerator, mpq(t.lo).denominator))
    t_hi = min(Fraction(1, 2), Fraction(mpq(t.hi).numerator, mpq(t.hi).denominator))
    if t_hi < t_lo:
        t_hi = t_lo
    tab = spec.table
    vals: list[Fraction] = []

    def at(x: Fraction) -> Fraction:
        for (ta, ya), (tb, yb) in zip(tab, tab[1:]):
            if ta <= x <= tb:
                if ta == x:
                    return ya
                return ya + (yb - ya) * (x - ta) / (tb - ta)
        raise DomainError(f"t = {x} outside table range")

    vals.append(at(t_lo))
    vals.append(at(t_hi))
    for tb, yb in tab:
        if t_lo < tb < t_hi:
            vals.append(yb)
    return CertReal.from_endpoints(min(vals), max(vals), bits)


def p_eval(
    n: int,
    spec: SineLikeSpec,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CertReal:
    """Certified enclosure of P(n)."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    if spec.kind == "abs-sin":
        return sin_abs_enclosure(n, spec.alpha, policy)
    _, dist = nearest_lattice_distance(n, spec.alpha, policy)
    if spec.kind == "lattice-distance":
        return dist
    bits = dist.precision_bits
    a = spec.alpha.enclosure(bits)
    t = dist.div(a, bits=bits)
    return _table_eval(spec, t, bits)


def _int_pow_interval(n: int, e: CertReal, bits: int) -> CertReal:
    """n**e for integer n >= 2 and an exponent enclosure."""
    base = mpfr(n, precision=bits)
    dn = gmpy2.context(precision=bits, round=gmpy2.RoundDown)
    up = gmpy2.context(precision=bits, round=gmpy2.RoundUp)
    return CertReal(dn.pow(base, e.lo), up.pow(base, e.hi), bits, e.wide)


def _p_ceiling(spec: SineLikeSpec, bits: int) -> CertReal:
    """Trivially valid range of P: [0, sup P], kind-specific supremum."""
    if spec.kind == "abs-sin":
        hi = CertReal.from_scalar(1, bits)
    elif spec.kind == "lattice-distance":
        hi = spec.alpha.enclosure(bits).div(2, bits=bits)
    else:
        hi = CertReal.from_scalar(max(y for _, y in spec.table), bits)
    return CertReal(mpfr(0), hi.hi, bits, wide=True)


def term(
    n: int,
    spec: SineLikeSpec,
    params: SeriesParams,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CertReal:
    """Certified enclosure of A(n) = n**-u * P(n)**-v.

    If P(n) cannot be certified away from zero within the policy (or at
    all: exact half-period ties happen for rational periods) the term
    comes back wide with an infinite upper endpoint; batch consumers
    record it and continue.
    """
    try:
        pn = p_eval(n, spec, policy)
    except PrecisionExhausted:
        pn = _p_ceiling(spec, policy.start_bits)
    bits = max(policy.start_bits, pn.precision_bits)
    n_pow = CertReal.from_scalar(n, bits).pow_fraction(-params.u, bits=bits)
    if not pn.lo > 0:
        hi = mpfr("inf")
        if pn.hi > 0:
            lo_box = CertReal(pn.hi, pn.hi, bits).pow_fraction(
                -params.v, bits=bits
            )
            lo = n_pow.mul(lo_box, bits=bits).lo
        else:
            lo = mpfr(0)
        return CertReal(lo, hi, bits, wide=True)
    p_pow = pn.pow_fraction(-params.v, bits=bits)
    return n_pow.mul(p_pow, bits=bits)


def _bound(
    n: int,
    r_record: ApproxRecord,
    spec: SineLikeSpec,
    params: SeriesParams,
    b_const: Fraction,
    policy: PrecisionPolicy,
) -> CertReal:
    if r_record.q != n:
        raise DomainError("record denominator must match n")
    if r_record.exponent is None:
        raise DomainError("record has no certified exponent")
    bits = max(policy.start_bits, r_record.exponent.precision_bits)
    a = spec.alpha.enclosure(bits)
    coef = a.mul(b_const, bits=bits).pow_fraction(params.v, bits=bits).recip(
        bits=bits
    )
    e = r_record.exponent.mul(params.v, bits=bits).sub(
        params.u + params.v, bits=bits
    )  # -(u + v - v*r)
    decay = _int_pow_interval(n, e, bits)
    return coef.mul(decay, bits=bits)


def term_upper_bound(
    n: int,
    r_record: ApproxRecord,
    spec: SineLikeSpec,
    params: SeriesParams,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CertReal:
    """The decay bound (1/(alpha*B1)**v) * n**-(u+v-v*r(n)); term(n) <= it."""
    return _bound(n, r_record, spec, params, spec.B1, policy)


def term_lower_bound(
    n: int,
    r_record: ApproxRecord,
    spec: SineLikeSpec,
    params: SeriesParams,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CertReal:
    """Mirror image with B2: term(n) >= (1/(alpha*B2)**v) * n**-(u+v-v*r(n))."""
    return _bound(n, r_record, spec, params, spec.B2, policy)


# ---------------------------------------------------------------------------
# Partial sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialSumLedger:
    """Certified partial sum plus the evidence trail.

    Tracks the largest term seen (ties broken toward the smallest n) and
    every n whose term came back wide.  ``meta`` echoes the series and
    policy so a resume can refuse mismatched configurations.
    """

    N: int
    sum: CertReal
    largest_term: tuple[int, CertReal]
    wide_terms: tuple[int, ...]
    meta: dict

    def to_json_dict(self) -> dict:
        def enc(c: CertReal) -> dict:
            return {
                "lo": _dec(c.lo, "down"),
                "hi": _dec(c.hi, "up"),
                "lo_bin": base64.b64encode(gmpy2.to_binary(c.lo)).decode(),
                "hi_bin": base64.b64encode(gmpy2.to_binary(c.hi)).decode(),
                "bits": c.precision_bits,
                "wide": c.wide,
            }

        n, val = self.largest_term
        return {
            "N": self.N,
            "sum": enc(self.sum),
            "largest_term": {"n": n, **enc(val)},
            "wide_terms": list(self.wide_terms),
            "meta": self.meta,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)

    @staticmethod
    def from_json_dict(doc: dict) -> "PartialSumLedger":
        def dec(d: dict) -> CertReal:
            lo = gmpy2.from_binary(base64.b64decode(d["lo_bin"]))
            hi = gmpy2.from_binary(base64.b64decode(d["hi_bin"]))
            return CertReal(lo, hi, d["bits"], d.get("wide", False))

        lt = doc["largest_term"]
        return PartialSumLedger(
            N=doc["N"],
            sum=dec(doc["sum"]),
            largest_term=(lt["n"], dec(lt)),
            wide_terms=tuple(doc["wide_terms"]),
            meta=doc["meta"],
        )

    @staticmethod
    def from_json(text: str) -> "PartialSumLedger":
        return PartialSumLedger.from_json_dict(json.loads(text))


def _dec(x: mpfr, direction: str) -> str:
    from .approx import decimal_str

    return decimal_str(x, direction)


def _term_bigger(a: tuple[int, CertReal], b: tuple[int, CertReal]) -> bool:
    """Deterministic 'larger term' order: by lo, then hi, then smaller n."""
    na, va = a
    nb, vb = b
    if va.lo != vb.lo:
        return va.lo > vb.lo
    if va.hi != vb.hi:
        return va.hi > vb.hi
    return na < nb


def _chunk_sum(
    lo_n: int,
    hi_n: int,
    spec: SineLikeSpec,
    params: SeriesParams,
    policy: PrecisionPolicy,
    acc_bits: int,
):
    total = CertReal.from_scalar(0, acc_bits)
    largest: Optional[tuple[int, CertReal]] = None
    wide: list[int] = []
    for n in range(lo_n, hi_n + 1):
        t = term(n, spec, params, policy)
        if t.wide:
            wide.append(n)
        total = total.add(t, bits=acc_bits)
        if largest is None or _term_bigger((n, t), largest):
            largest = (n, t)
    return total, largest, wide


def _series_meta(
    spec: SineLikeSpec, params: SeriesParams, policy: PrecisionPolicy
) -> dict:
    return {
        "series": {
            **spec.describe(),
            "u": str(params.u),
            "v": str(params.v),
        },
        "policy": {
            "start_bits": policy.start_bits,
            "max_bits": policy.max_bits,
            "target_rel_width": str(policy.target_rel_width),
        },
        "chunk": CHUNK,
    }


def partial_sum(
    N: int,
    spec: SineLikeSpec,
    params: SeriesParams,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    checkpoint_every: int = 10**6,
    workers: int = 1,
    resume: Optional[PartialSumLedger] = None,
    checkpoint_cb=None,
) -> PartialSumLedger:
    """Certified enclosure of sum_{n=1..N} A(n) with a full evidence ledger.

    Deterministic for fixed inputs no matter the worker count: terms sum
    ascending inside fixed chunks, chunk sums combine in index order.
    ``resume`` continues from a previous ledger (same series, policy and
    chunking enforced); ``checkpoint_cb`` is invoked with an intermediate
    ledger every checkpoint_every terms (rounded up to chunk boundaries).
    """
    if N < 1:
        raise DomainError("N must be positive")
    if checkpoint_every < 1:
        raise DomainError("checkpoint_every must be positive")
    acc_bits = policy.start_bits
    meta = _series_meta(spec, params, policy)

    start = 1
    total = CertReal.from_scalar(0, acc_bits)
    largest: Optional[tuple[int, CertReal]] = None
    wide: list[int] = []
    if resume is not None:
        if resume.meta != meta:
            raise DomainError("resume ledger configuration mismatch")
        if resume.N >= N:
            return resume
        if resume.N % CHUNK != 0:
            raise DomainError("resume point must sit on a chunk boundary")
        start = resume.N + 1
        total = resume.sum
        largest = resume.largest_term
        wide = list(resume.wide_terms)

    ckpt_stride = ((checkpoint_every + CHUNK - 1) // CHUNK) * CHUNK
    bounds = []
    lo = start
    while lo <= N:
        hi = min(N, ((lo - 1) // CHUNK + 1) * CHUNK)
        bounds.append((lo, hi))
        lo = hi + 1

    def run(chunks):
        nonlocal total, largest, wide
        for (lo_n, hi_n), (csum, clargest, cwide) in chunks:
            total = total.add(csum, bits=acc_bits)
            wide.extend(cwide)
            if clargest is not None and (
                largest is None or _term_bigger(clargest, largest)
            ):
                largest = clargest
            if checkpoint_cb is not None and hi_n % ckpt_stride == 0:
                checkpoint_cb(
                    PartialSumLedger(
                        hi_n, total, largest, tuple(wide), meta
                    )
                )

    if workers <= 1:
        run(
            (b, _chunk_sum(b[0], b[1], spec, params, policy, acc_bits))
            for b in bounds
        )
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _chunk_sum, lo_n, hi_n, spec, params, policy, acc_bits
                )
                for lo_n, hi_n in bounds
            ]
            run(zip(bounds, (f.result() for f in futures)))

    return PartialSumLedger(N, total, largest, tuple(wide), meta)


# ---------------------------------------------------------------------------
# Named presets
# ---------------------------------------------------------------------------


def preset(name: str) -> tuple[SineLikeSpec, SeriesParams]:
    """Named series configurations.

    'flint-hills': period pi, |sin| profile, sandwich 1/2 and 1, exponents
    u = 3, v = 2.  'sqrt2-lattice': period sqrt(2), lattice distance
    (exact sandwich), u = 1, v = 1.
    """
    if name == "flint-hills":
        return (
            SineLikeSpec(PiSource(), Fraction(1, 2), Fraction(1), "abs-sin"),
            SeriesParams(Fraction(3), Fraction(2)),
        )
    if name == "sqrt2-lattice":
        return (
            SineLikeSpec(Sqrt2Source(), Fraction(1), Fraction(1), "lattice-distance"),
            SeriesParams(Fraction(1), Fraction(1)),
        )
    raise DomainError(f"unknown preset {name!r}")


PRESETS = ("flint-hills", "sqrt2-lattice")
