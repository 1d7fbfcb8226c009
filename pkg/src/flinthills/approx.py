"""Approximation-exponent analysis.

For a denominator q and target t (by convention the reciprocal 1/alpha of
the period), the exponent r(q) = -log_q(min_p |t - p/q|) measures how well
q approximates t.  This module certifies r(q) as an interval, classifies
denominators against a mu-hypothesis (good / not-good / unknown), combines
pairs of close good approximations into a new approximation whose exponent
is provably large, counts good denominators in windows, and runs the
finite-range growth-law check.

Classification is always by full interval position; an interval straddling
a threshold is reported as a third state rather than guessed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import gmpy2
from gmpy2 import mpfr, mpq

from .contfrac import CFExpansion, MuSpec, expand
from .errors import (
    DegenerateDenominatorError,
    DomainError,
    HypothesisViolation,
    PrecisionExhausted,
)
from .numkernel import (
    DEFAULT_POLICY,
    AlphaSource,
    CertReal,
    PrecisionPolicy,
    ReciprocalSource,
    as_source,
)


@dataclass(frozen=True)
class ApproxRecord:
    """A denominator with its best numerator, error and exponent enclosures.

    ``side`` is the certified sign of p/q - t (+1 above, -1 below, 0 when
    not certified); combination needs it to recover signed errors.
    Records produced by :func:`combine` carry the specific numerator
    p2 - p1, which need not be the minimizing one; their exponent is then
    a lower bound for r(q2 - q1).
    """

    q: int
    p: int
    error: CertReal
    exponent: Optional[CertReal]
    side: int = 0

    def status_against(self, mu: MuSpec, epsilon1: Fraction) -> str:
        return is_good(self, mu, epsilon1)


def _exponent_interval(error: CertReal, base: int, bits: int) -> CertReal:
    """Enclosure of -log(error)/log(base); tolerates error.lo == 0."""
    ln_base = CertReal.from_scalar(base, bits).log(bits)
    if error.lo > 0:
        return error.log(bits).neg().div(ln_base, bits=bits)
    # lower exponent endpoint from the error's upper endpoint only
    hi_err = CertReal(error.hi, error.hi, bits)
    lo_exp = hi_err.log(bits).neg().div(ln_base, bits=bits)
    return CertReal(lo_exp.lo, mpfr("inf"), bits, wide=True)


def exponent(
    q: int,
    alpha: Union[CertReal, AlphaSource],
    policy: PrecisionPolicy = DEFAULT_POLICY,
    target_reciprocal: bool = True,
) -> ApproxRecord:
    """Certified record for the best approximation p/q of the target.

    The target is 1/alpha by convention (pass target_reciprocal=False to
    analyze alpha itself).  The minimizing p is certified unique before
    the error and exponent enclosures are formed; if the width target
    cannot be met the widest valid record is returned flagged wide.
    """
    if q < 2:
        raise DomainError("exponent analysis needs q >= 2 (log base q)")
    src = as_source(alpha)
    best: Optional[ApproxRecord] = None
    for bits in policy.ladder():
        a = src.enclosure(bits)
        if not a.lo > 0:
            raise DomainError("alpha enclosure must be strictly positive")
        t = a.recip(bits=bits) if target_reciprocal else a
        qt = t.mul(q, bits=bits)
        ctx = gmpy2.context(precision=bits)
        p_mid = int(gmpy2.floor(ctx.add(qt.midpoint(), mpfr("0.5"))))
        cands = sorted({max(0, p_mid - 1), max(0, p_mid), p_mid + 1})
        errs = {
            p: t.sub(Fraction(p, q), bits=bits).abs() for p in cands
        }
        p_star = min(cands, key=lambda p: errs[p].hi)
        err = errs[p_star]
        if not all(errs[p].lo > err.hi for p in cands if p != p_star):
            continue
        if not err.lo > 0:
            # error interval still touches zero: cannot certify this round
            diff = t.sub(Fraction(p_star, q), bits=bits)
            best = ApproxRecord(
                q, p_star, err.mark_wide(),
                _exponent_interval(err, q, bits),
                0 if diff.lo <= 0 <= diff.hi else (1 if diff.hi < 0 else -1),
            )
            continue
        diff = t.sub(Fraction(p_star, q), bits=bits)
        side = 1 if diff.hi < 0 else -1  # p/q above t iff t - p/q < 0
        expo = _exponent_interval(err, q, bits)
        rec = ApproxRecord(q, p_star, err, expo, side)
        best = rec
        if err.rel_width_leq(policy.target_rel_width):
            return rec
    if best is not None:
        return ApproxRecord(
            best.q, best.p, best.error.mark_wide(),
            best.exponent.mark_wide() if best.exponent else None, best.side,
        )
    raise PrecisionExhausted(
        f"best numerator for q={q} not certified within {policy.max_bits} bits"
    )


def is_good(record: ApproxRecord, mu: MuSpec, epsilon1) -> str:
    """Trivalent test of the exponent against mu - epsilon1.

    'good' iff the whole exponent interval sits at or above the threshold,
    'not-good' iff entirely below, 'unknown' on a straddle.
    """
    epsilon1 = Fraction(epsilon1)
    if epsilon1 <= 0:
        raise DomainError("epsilon1 must be positive")
    if record.exponent is None:
        return "unknown"
    threshold = mu.mu - epsilon1
    if record.exponent.certainly_ge(threshold):
        return "good"
    if record.exponent.certainly_lt(threshold):
        return "not-good"
    return "unknown"


def are_close(q1: int, q2: int, delta) -> bool:
    """Exact test q2 - q1 < q1**delta for rational delta."""
    if q1 >= q2:
        raise DomainError("are_close requires q1 < q2")
    if q1 < 1:
        raise DomainError("q1 must be positive")
    d = Fraction(delta)
    if d <= 0:
        raise DomainError("delta must be positive")
    gap = q2 - q1
    return gap ** d.denominator < q1 ** d.numerator


def combine(r1: ApproxRecord, r2: ApproxRecord) -> ApproxRecord:
    """The combined approximation (p2-p1)/(q2-q1) of the same target.

    Its signed error is (q2*B - q1*A)/(q2-q1) where A, B are the signed
    errors of the inputs; both records must carry certified sides.  The
    exponent is recomputed in base q2-q1, which must be at least 2.
    """
    if r1.q >= r2.q:
        raise DomainError("combine requires r1.q < r2.q")
    if r1.side == 0 or r2.side == 0:
        raise DomainError("combine needs certified error signs on both records")
    q_new = r2.q - r1.q
    bits = max(r1.error.precision_bits, r2.error.precision_bits)
    a_signed = r1.error.mul(r1.side, bits=bits)
    b_signed = r2.error.mul(r2.side, bits=bits)
    numer = b_signed.mul(r2.q, bits=bits).sub(
        a_signed.mul(r1.q, bits=bits), bits=bits
    )
    err = numer.abs().div(q_new, bits=bits)
    side = 0
    if numer.lo > 0:
        side = 1
    elif numer.hi < 0:
        side = -1
    if q_new == 1:
        raise DegenerateDenominatorError(
            "combined denominator is 1; exponent undefined in base 1",
            error=err,
        )
    expo = _exponent_interval(err, q_new, bits)
    return ApproxRecord(q_new, r2.p - r1.p, err, expo, side)


def combined_exponent_bound(
    mu: MuSpec, epsilon1, epsilon2, q1: int, bits: int = 128
) -> CertReal:
    """Guaranteed exponent floor for a combined epsilon-good close pair.

    Evaluates 1 + (mu - 1 - eps1)/eps2 - 1/(eps2 * log2 q1) as an
    enclosure; any certified good close pair with first denominator q1
    past the slack threshold combines to an exponent above this value.
    """
    epsilon1, epsilon2 = Fraction(epsilon1), Fraction(epsilon2)
    if not 0 < epsilon2 < 1:
        raise DomainError("epsilon2 must lie in (0, 1)")
    if q1 < 2:
        raise DomainError("q1 must be at least 2")
    exact = 1 + (mu.mu - 1 - epsilon1) / epsilon2
    log2q1 = CertReal.from_scalar(q1, bits).log2(bits)
    correction = log2q1.mul(epsilon2, bits=bits).recip(bits=bits)
    return CertReal.from_scalar(exact, bits).sub(correction, bits=bits)


def slack_threshold_ok(q1: int, mu: MuSpec, epsilon1) -> bool:
    """Exact test q1**(mu - eps1 - 1) > 2, the combined-bound validity gate."""
    c = mu.mu - Fraction(epsilon1) - 1
    if c <= 0:
        return False
    return q1 ** c.numerator > 2 ** c.denominator


# ---------------------------------------------------------------------------
# Scanning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoodScanResult:
    """All certified-good denominators up to q_max, plus the undecided ones.

    ``records`` holds only the good ones (sorted by q); ``unknown`` holds
    straddles and precision-exhausted entries, which are never silently
    dropped.  Not-good denominators are omitted (they are the bulk).
    """

    alpha_id: str
    mu_assumed: MuSpec
    epsilon1: Fraction
    q_max: int
    records: tuple[ApproxRecord, ...]
    unknown: tuple[ApproxRecord, ...]

    def good_qs(self) -> list[int]:
        return [r.q for r in self.records]

    # ---- serialization ------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["q", "p", "error_lo", "error_hi", "exp_lo", "exp_hi", "status"])
        for rec, status in self._rows():
            w.writerow(
                [
                    rec.q,
                    rec.p,
                    decimal_str(rec.error.lo, "down"),
                    decimal_str(rec.error.hi, "up"),
                    decimal_str(rec.exponent.lo, "down") if rec.exponent else "",
                    decimal_str(rec.exponent.hi, "up") if rec.exponent else "",
                    status,
                ]
            )
        return buf.getvalue()

    def _rows(self):
        rows = [(r, "good") for r in self.records]
        rows += [(r, "unknown") for r in self.unknown]
        rows.sort(key=lambda pair: pair[0].q)
        return rows

    def to_json_dict(self) -> dict:
        def rec_dict(rec, status):
            return {
                "q": rec.q,
                "p": rec.p,
                "error": [decimal_str(rec.error.lo, "down"),
                          decimal_str(rec.error.hi, "up")],
                "exponent": (
                    [decimal_str(rec.exponent.lo, "down"),
                     decimal_str(rec.exponent.hi, "up")]
                    if rec.exponent is not None
                    else None
                ),
                "side": rec.side,
                "status": status,
            }

        return {
            "alpha_id": self.alpha_id,
            "mu": str(self.mu_assumed.mu),
            "mu_provenance": self.mu_assumed.provenance,
            "epsilon1": str(self.epsilon1),
            "q_max": self.q_max,
            "records": [rec_dict(r, s) for r, s in self._rows()],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)

    @staticmethod
    def from_json_dict(doc: dict) -> "GoodScanResult":
        """Rebuild a scan from its JSON form.

        Decimal endpoints were written with directed rounding, so the
        parsed intervals contain the originals; certification survives
        the round trip (possibly slightly widened).
        """
        bits = 192
        good, unknown = [], []
        for rd in doc["records"]:
            err = CertReal.from_endpoints(
                Fraction(rd["error"][0]), _parse_hi(rd["error"][1]), bits
            )
            expo = None
            if rd.get("exponent") is not None:
                expo = CertReal.from_endpoints(
                    Fraction(rd["exponent"][0]),
                    _parse_hi(rd["exponent"][1]),
                    bits,
                )
            rec = ApproxRecord(rd["q"], rd["p"], err, expo, rd.get("side", 0))
            (good if rd["status"] == "good" else unknown).append(rec)
        return GoodScanResult(
            alpha_id=doc["alpha_id"],
            mu_assumed=MuSpec(
                Fraction(doc["mu"]), doc.get("mu_provenance", "assumed")
            ),
            epsilon1=Fraction(doc["epsilon1"]),
            q_max=doc["q_max"],
            records=tuple(good),
            unknown=tuple(unknown),
        )

    @staticmethod
    def from_json(text: str) -> "GoodScanResult":
        return GoodScanResult.from_json_dict(json.loads(text))


def _parse_hi(s: str):
    if s == "inf":
        return Fraction(10) ** 600  # practical stand-in for an infinite endpoint
    return Fraction(s)


def all_records(
    alpha: Union[CertReal, AlphaSource],
    q_max: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    target_reciprocal: bool = True,
) -> list[ApproxRecord]:
    """Exponent records for every q in [2, q_max], in order."""
    src = as_source(alpha)
    out = []
    for q in range(2, q_max + 1):
        try:
            out.append(exponent(q, src, policy, target_reciprocal))
        except PrecisionExhausted:
            out.append(
                ApproxRecord(
                    q, 0,
                    CertReal(mpfr(0), mpfr("inf"), policy.start_bits, True),
                    None, 0,
                )
            )
    return out


def decimal_str(x: mpfr, direction: str, sig: int = 60) -> str:
    """Positional decimal with directed rounding; no scientific notation."""
    if gmpy2.is_infinite(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    mag = float(gmpy2.log10(abs(x)))
    decimals = max(0, sig - 1 - math.floor(mag))
    mode = "D" if direction == "down" else "U"
    return format(x, f".{decimals}{mode}f")


def _convergent_frame(
    src: AlphaSource,
    q_max: int,
    policy: PrecisionPolicy,
    target_reciprocal: bool,
) -> Optional[CFExpansion]:
    """Expansion of the scan target deep enough to cover q_max, if possible."""
    target = _TargetSource(src, target_reciprocal)
    depth = 16
    best: Optional[CFExpansion] = None
    while True:
        try:
            cf = expand(target, depth, policy)
        except PrecisionExhausted as exc:
            cf = exc.partial
            if cf is None:
                return best
            return cf
        best = cf
        if cf.convergents[-1][1] > q_max:
            return cf
        depth *= 2


def _TargetSource(src: AlphaSource, reciprocal: bool) -> AlphaSource:
    return ReciprocalSource(src) if reciprocal else src


def _not_good_cutoff(
    eps_lo: mpq, window_lo: int, window_hi: int, c: Fraction
) -> int:
    """Smallest q in [window_lo, window_hi) certified not-good in bulk.

    For q below the next convergent denominator, the best error is at
    least eps_n / q; the denominator is certainly not good once
    eps_n * q**c >= 1 (c = mu - eps1 - 1 > 0).  The predicate is monotone
    in q, so binary search finds the cutoff.  Returns window_hi when no q
    in the window can be excluded.
    """
    if eps_lo <= 0:
        return window_hi

    num, den = c.numerator, c.denominator
    e_num, e_den = eps_lo.numerator, eps_lo.denominator

    def excluded(q: int) -> bool:
        return int(e_num) ** den * q ** num >= int(e_den) ** den

    if not excluded(window_hi - 1):
        return window_hi
    lo, hi = window_lo, window_hi - 1
    if excluded(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if excluded(mid):
            hi = mid
        else:
            lo = mid
    return hi


def scan_good(
    alpha: Union[CertReal, AlphaSource],
    mu: MuSpec,
    epsilon1,
    q_max: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    fast: bool = True,
    target_reciprocal: bool = True,
) -> GoodScanResult:
    """All certified epsilon1-good denominators in [2, q_max].

    The fast path walks the target's convergents: between consecutive
    convergent denominators the best-approximation floor excludes every q
    past an exactly computed cutoff, so only a thin head of each window is
    evaluated.  The skip rule is validated against the naive full scan in
    the test suite; pass fast=False to force the naive scan.
    """
    if q_max < 2:
        raise DomainError("q_max must be at least 2")
    epsilon1 = Fraction(epsilon1)
    if epsilon1 <= 0:
        raise DomainError("epsilon1 must be positive")
    src = as_source(alpha)
    c = mu.mu - epsilon1 - 1

    good: list[ApproxRecord] = []
    unknown: list[ApproxRecord] = []

    def eval_q(q: int):
        try:
            rec = exponent(q, src, policy, target_reciprocal)
        except PrecisionExhausted:
            rec = ApproxRecord(
                q, 0, CertReal(mpfr(0), mpfr("inf"), policy.start_bits, True),
                None, 0,
            )
        status = is_good(rec, mu, epsilon1)
        if status == "good":
            good.append(rec)
        elif status == "unknown":
            unknown.append(rec)

    frame = None
    if fast and c > 0:
        frame = _convergent_frame(src, q_max, policy, target_reciprocal)

    if frame is None:
        for q in range(2, q_max + 1):
            eval_q(q)
    else:
        target = _TargetSource(src, target_reciprocal)
        bits = max(policy.start_bits, 2 * q_max.bit_length() + 64)
        t = target.enclosure(bits)
        qs = [qn for _, qn in frame.convergents]
        # second-kind errors eps_n = |q_n t - p_n| for the bulk-skip floor
        eps_lo = []
        for p_n, q_n in frame.convergents:
            e = t.mul(q_n, bits=bits).sub(p_n, bits=bits).abs()
            eps_lo.append(mpq(e.lo))
        q = 2
        while q <= q_max:
            # locate the convergent window [q_n, q_{n+1}) containing q
            n = max(i for i, qn in enumerate(qs) if qn <= q)
            window_hi = qs[n + 1] if n + 1 < len(qs) else q_max + 1
            window_hi = min(window_hi, q_max + 1)
            cutoff = _not_good_cutoff(eps_lo[n], q, window_hi, c)
            for qq in range(q, cutoff):
                eval_q(qq)
            q = window_hi

    good.sort(key=lambda r: r.q)
    unknown.sort(key=lambda r: r.q)
    return GoodScanResult(
        alpha_id=(f"1/{src.name}" if target_reciprocal else src.name),
        mu_assumed=mu,
        epsilon1=epsilon1,
        q_max=q_max,
        records=tuple(good),
        unknown=tuple(unknown),
    )


# ---------------------------------------------------------------------------
# Window counts and the growth-law check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowCount:
    q1: int
    epsilon2: Fraction
    count: int
    truncated: bool


def window_count(scan: GoodScanResult, q1: int, epsilon2) -> WindowCount:
    """Good denominators in (q1, q1 + q1**epsilon2], exact boundary test."""
    if q1 > scan.q_max:
        raise DomainError("q1 must not exceed the scanned range")
    eps2 = Fraction(epsilon2)
    num, den = eps2.numerator, eps2.denominator
    count = 0
    for rec in scan.records:
        if rec.q <= q1:
            continue
        if (rec.q - q1) ** den <= q1 ** num:
            count += 1
    truncated = (scan.q_max - q1) ** den < q1 ** num
    return WindowCount(q1, eps2, count, truncated)


@dataclass(frozen=True)
class GrowthRow:
    n: int
    q_n: int
    floor_n: float
    margin: float
    ok: bool


@dataclass(frozen=True)
class GrowthReport:
    epsilon2: Fraction
    exponent: Fraction  # 1/(1 - eps2)
    c_fit: float
    rows: tuple[GrowthRow, ...]
    passed: bool
    insufficient_data: bool


def _margin_leq(qa: int, na: int, qb: int, nb: int, e: Fraction) -> bool:
    """Exact test Q_a/a**e <= Q_b/b**e."""
    num, den = e.numerator, e.denominator
    return qa ** den * nb ** num <= qb ** den * na ** num


def growth_check(scan: GoodScanResult, epsilon2) -> GrowthReport:
    """Finite-range evidence for the polynomial growth floor of good q's.

    Fits the floor constant on the first half of the sequence (its
    smallest margin, exactly compared) and passes iff no later margin
    drops below it.  This is evidence over the scanned range, not a
    proof; exponentially growing sequences pass, polynomially slower
    ones fail.
    """
    eps2 = Fraction(epsilon2)
    if not 0 < eps2 < 1:
        raise DomainError("epsilon2 must lie in (0, 1)")
    hypo = 1 + scan.epsilon1 / (1 - eps2)
    if not scan.mu_assumed.mu > hypo:
        raise HypothesisViolation(
            f"mu = {scan.mu_assumed.mu} <= 1 + eps1/(1-eps2) = {hypo}; "
            "the growth law does not apply"
        )
    e = 1 / (1 - eps2)
    qs = scan.good_qs()
    n_total = len(qs)
    insufficient = n_total < 4
    if n_total == 0:
        return GrowthReport(eps2, e, 0.0, (), True, True)

    half = max(1, n_total // 2)
    fit_idx = min(
        range(half),
        key=lambda i: _MarginKey(qs[i], i + 1, e),
    )
    qa, na = qs[fit_idx], fit_idx + 1
    c_fit = qa / (na ** float(e))
    rows = []
    passed = True
    for i, q_n in enumerate(qs):
        n = i + 1
        ok = _margin_leq(qa, na, q_n, n, e)
        floor_n = c_fit * (n ** float(e))
        rows.append(GrowthRow(n, q_n, floor_n, q_n / (n ** float(e)), ok))
        if i >= half and not ok and not insufficient:
            passed = False
    return GrowthReport(eps2, e, c_fit, tuple(rows), passed, insufficient)


class _MarginKey:
    """Sort key comparing Q_n/n**e exactly."""

    def __init__(self, q: int, n: int, e: Fraction):
        self.q, self.n, self.e = q, n, e

    def __lt__(self, other: "_MarginKey") -> bool:
        return (
            _margin_leq(self.q, self.n, other.q, other.n, self.e)
            and not _margin_leq(other.q, other.n, self.q, self.n, self.e)
        )
