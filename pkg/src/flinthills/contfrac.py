"""Exact continued-fraction engine.

Expansions hold partial quotients plus convergents as exact big rationals.
Everything here is integer arithmetic except where a value must be enclosed
(expansion of a real, certified ceilings in the divergence constructor),
and those paths go through :mod:`flinthills.numkernel`.

The constructor ``construct_divergent`` builds an irrational whose
reciprocal's expansion forces the generalized series to keep producing
terms above 1: each new partial quotient is the ceiling of
``alpha * B2 * q_n**(u/v - 1)``, evaluated against a rational bracket of
the number being built (the true value of any continuation lies between
the last convergent and its mediant with the previous one).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import gmpy2
from gmpy2 import mpz

from .errors import (
    DigitBudgetError,
    DomainError,
    PrecisionExhausted,
)
from .numkernel import (
    DEFAULT_POLICY,
    AlphaSource,
    CertReal,
    PrecisionPolicy,
    as_source,
)

_SEED_PREV = (1, 0)  # (p_{-1}, q_{-1})
_SEED_PREV2 = (0, 1)  # (p_{-2}, q_{-2})


@dataclass(frozen=True)
class CFExpansion:
    """Partial quotients a0, a1, ... with convergents p_n/q_n.

    Instances are immutable; ``extend`` returns a new expansion sharing the
    prefix.  The recurrence p_n = a_n p_{n-1} + p_{n-2} (same for q) is
    established at construction, so convergents are always consistent with
    the terms.
    """

    terms: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]

    @staticmethod
    def from_terms(terms: Sequence[int]) -> "CFExpansion":
        terms = tuple(int(a) for a in terms)
        if not terms:
            raise DomainError("expansion needs at least one term")
        if terms[0] < 0:
            raise DomainError("a0 must be nonnegative")
        if any(a < 1 for a in terms[1:]):
            raise DomainError("partial quotients a_i (i >= 1) must be >= 1")
        convs = []
        p_prev, q_prev = _SEED_PREV
        p_prev2, q_prev2 = _SEED_PREV2
        for a in terms:
            p = a * p_prev + p_prev2
            q = a * q_prev + q_prev2
            convs.append((p, q))
            p_prev2, q_prev2 = p_prev, q_prev
            p_prev, q_prev = p, q
        return CFExpansion(terms, tuple(convs))

    def extend(self, more: Sequence[int]) -> "CFExpansion":
        return CFExpansion.from_terms(self.terms + tuple(more))

    def __len__(self) -> int:
        return len(self.terms)

    def value_bracket(self) -> tuple[Fraction, Fraction]:
        """Exact rational bracket containing every continuation's value.

        Any real whose expansion begins with these terms lies between the
        last convergent and its mediant with the previous convergent.
        """
        p, q = self.convergents[-1]
        if len(self.terms) >= 2:
            pp, qp = self.convergents[-2]
        else:
            pp, qp = _SEED_PREV
        a, b = Fraction(p, q), Fraction(p + pp, q + qp)
        return (a, b) if a <= b else (b, a)

    def value_enclosure(self, bits: int) -> CertReal:
        lo, hi = self.value_bracket()
        return CertReal.from_endpoints(lo, hi, bits)

    # ---- serialization (decimal strings keep big integers portable) ----

    def to_json_dict(self) -> dict:
        return {
            "terms": list(self.terms),
            "convergents": [[str(p), str(q)] for p, q in self.convergents],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)

    @staticmethod
    def from_json_dict(doc: dict) -> "CFExpansion":
        cf = CFExpansion.from_terms([int(a) for a in doc["terms"]])
        if "convergents" in doc:
            claimed = [(int(p), int(q)) for p, q in doc["convergents"]]
            if claimed != list(cf.convergents):
                raise DomainError("convergents inconsistent with terms")
        return cf

    @staticmethod
    def from_json(text: str) -> "CFExpansion":
        return CFExpansion.from_json_dict(json.loads(text))


class CFValueSource(AlphaSource):
    """The value defined by a (finite) expansion prefix, as an AlphaSource.

    The enclosure width is fixed by the expansion depth, not by the
    requested precision; consumers see a wide result if they need more.
    """

    def __init__(self, cf: CFExpansion, name: Optional[str] = None):
        self.cf = cf
        self.lo, self.hi = cf.value_bracket()
        head = ",".join(str(a) for a in cf.terms[:6])
        tail = ",..." if len(cf.terms) > 6 else ""
        self.name = name or f"cf:[{head}{tail}]"

    def enclosure(self, bits: int) -> CertReal:
        return CertReal.from_endpoints(self.lo, self.hi, bits)


@dataclass(frozen=True)
class MuSpec:
    """An irrationality-measure hypothesis.

    mu is an input everywhere in this toolkit: it is assumed, taken from
    the literature, or known by construction.  It is never inferred from
    finitely many digits.  mu == 2 means exactly two.
    """

    mu: Fraction
    provenance: str = "assumed"

    _PROVENANCES = ("assumed", "constructed", "literature-bound")

    def __post_init__(self):
        object.__setattr__(self, "mu", Fraction(self.mu))
        if self.mu < 2:
            raise DomainError("mu < 2 is impossible for irrationals")
        if self.provenance not in self._PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")

    @staticmethod
    def exactly_two(provenance: str = "assumed") -> "MuSpec":
        return MuSpec(Fraction(2), provenance)

    @staticmethod
    def pi_literature() -> "MuSpec":
        """Best published upper bound for mu(pi), usable as a hypothesis."""
        return MuSpec(Fraction(7104, 1000), "literature-bound")


# ---------------------------------------------------------------------------
# Expansion of a real number
# ---------------------------------------------------------------------------


def _expand_once(x: CertReal, n_terms: int, bits: int) -> list[int]:
    """Certified terms extractable from one enclosure; stops at ambiguity."""
    terms: list[int] = []
    while len(terms) < n_terms:
        flo = gmpy2.floor(x.lo)
        fhi = gmpy2.floor(x.hi)
        if flo != fhi:
            break
        a = int(flo)
        terms.append(a)
        if len(terms) == n_terms:
            break
        frac = x.sub(a, bits=bits)
        if not frac.lo > 0:
            break
        x = frac.recip(bits=bits)
    return terms


def expand(
    alpha,
    n_terms: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CFExpansion:
    """First n_terms certified partial quotients of alpha.

    A term is emitted only when the whole enclosure of the current
    remainder has the same floor.  Precision climbs the policy ladder;
    if the source cannot be refined far enough, PrecisionExhausted is
    raised carrying the certified prefix.
    """
    if n_terms < 1:
        raise DomainError("n_terms must be positive")
    src = as_source(alpha)
    best: list[int] = []
    for bits in policy.ladder():
        x = src.enclosure(bits)
        terms = _expand_once(x, n_terms, bits)
        if best and terms[: len(best)] != best[: len(terms)]:
            raise DomainError("certified prefixes disagree across precisions")
        if len(terms) > len(best):
            best = terms
        if len(best) >= n_terms:
            return CFExpansion.from_terms(best[:n_terms])
    partial = CFExpansion.from_terms(best) if best else None
    raise PrecisionExhausted(
        f"certified only {len(best)} of {n_terms} terms within "
        f"{policy.max_bits} bits",
        partial=partial,
        terms_certified=len(best),
    )


# ---------------------------------------------------------------------------
# Error bounds and the Sondow running estimate
# ---------------------------------------------------------------------------


def convergent_error_bounds(cf: CFExpansion, n: int) -> tuple[Fraction, Fraction]:
    """Exact rational bracket for |value - p_n/q_n| from the next quotient.

    Returns (1/((a_{n+1}+2) q_n^2), 1/(a_{n+1} q_n^2)); the true error of
    the n-th convergent lies strictly between them.
    """
    if n < 0 or n + 1 >= len(cf.terms):
        raise IndexError(f"need term a_{n + 1}; expansion has {len(cf.terms)}")
    a_next = cf.terms[n + 1]
    q = cf.convergents[n][1]
    return (
        Fraction(1, (a_next + 2) * q * q),
        Fraction(1, a_next * q * q),
    )


def sondow_estimate(cf: CFExpansion, bits: int = 128) -> list[tuple[int, CertReal]]:
    """Running finite-depth estimate 2 + ln(a_{n+1})/ln(q_n).

    Only indices with q_n >= 2 are reported (the ratio is undefined at
    q_n = 1).  These are running estimates from a prefix, not values of
    the irrationality measure; the limsup is not computable from finitely
    many terms.
    """
    if len(cf.terms) < 2:
        raise DomainError("need at least 2 terms")
    out: list[tuple[int, CertReal]] = []
    for n in range(1, len(cf.terms) - 1):
        q_n = cf.convergents[n][1]
        if q_n < 2:
            continue
        a_next = cf.terms[n + 1]
        ln_a = CertReal.from_scalar(a_next, bits).log(bits)
        ln_q = CertReal.from_scalar(q_n, bits).log(bits)
        out.append((n, ln_a.div(ln_q, bits=bits).add(2, bits=bits)))
    return out


def sondow_final(cf: CFExpansion, bits: int = 128) -> Optional[CertReal]:
    est = sondow_estimate(cf, bits)
    return est[-1][1] if est else None


# ---------------------------------------------------------------------------
# Theorem-shaped constructor: force divergence via huge partial quotients
# ---------------------------------------------------------------------------

DEFAULT_DIGIT_BUDGET = 10**6


def _root_bracket(k: int, r: int, guard: int) -> tuple[Fraction, Fraction]:
    """Rational bracket of k**(1/r) with error below 2**-guard."""
    scaled, exact = gmpy2.iroot(mpz(k) << (r * guard), r)
    lo = Fraction(int(scaled), 1 << guard)
    if exact:
        return lo, lo
    return lo, Fraction(int(scaled) + 1, 1 << guard)


def _pow_bracket(q: int, e: Fraction, guard: int) -> tuple[Fraction, Fraction]:
    """Rational bracket of q**e for integer q >= 1, rational e."""
    s, r = e.numerator, e.denominator
    if r == 1:
        val = Fraction(q) ** s
        return val, val
    k = q ** abs(s)
    lo, hi = _root_bracket(k, r, guard)
    if s >= 0:
        return lo, hi
    return 1 / hi, 1 / lo


def _certified_ceil(
    c_lo: Fraction, c_hi: Fraction, q: int, e: Fraction
) -> int:
    """ceil(c * q**e) with c known only inside [c_lo, c_hi].

    Tightens the root bracket until the ceiling is unambiguous; if the
    ambiguity comes from the c interval itself (fixed by the expansion
    prefix), the ceiling of the upper bound is returned, which is always a
    valid choice: the construction only needs the quotient to sit at or
    above the true target.
    """
    guard = 32
    while True:
        r_lo, r_hi = _pow_bracket(q, e, guard)
        t_lo = c_lo * r_lo
        t_hi = c_hi * r_hi
        cl, ch = math.ceil(t_lo), math.ceil(t_hi)
        if cl == ch:
            return max(1, ch)
        # root error no longer dominant => c-interval ambiguity; go safe
        if r_hi - r_lo <= (c_hi - c_lo) * (r_lo + r_hi):
            return max(1, ch)
        guard *= 2


def _digits_estimate(c_hi: Fraction, q: int, e: Fraction) -> float:
    if q <= 1:
        base = 0.0
    else:
        base = float(e) * (q.bit_length() * 0.3010299956639812)
    lead = math.log10(float(c_hi)) if c_hi > 0 else 0.0
    return base + lead


def construct_divergent(
    u,
    v,
    B2=Fraction(1),
    n_terms: int = 8,
    prefix: Optional[CFExpansion] = None,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
) -> CFExpansion:
    """Extend a prefix so the value's reciprocal has measure 1 + u/v.

    Each appended quotient is a_{n+1} = ceil(alpha * B2 * q_n**(u/v - 1))
    where alpha is bracketed by the expansion built so far.  Consequences,
    checkable downstream: every convergent denominator q_n (with its
    successor term constructed) gives a series term A_{u,v}(q_n) > 1, and
    the Sondow running estimate tends to 1 + u/v.

    Quotients grow doubly exponentially; the digit budget aborts cleanly
    (naming the term index) before a term becomes unrepresentable at desk
    scale.
    """
    u, v, B2 = Fraction(u), Fraction(v), Fraction(B2)
    if u <= 0 or v <= 0:
        raise DomainError("u and v must be positive")
    if B2 <= 0:
        raise DomainError("B2 must be positive")
    if n_terms < 1:
        raise DomainError("n_terms must be positive")
    cf = prefix if prefix is not None else CFExpansion.from_terms([0, 1])
    e = u / v - 1
    while len(cf.terms) < n_terms:
        x_lo, x_hi = cf.value_bracket()
        if not x_lo > 0:
            raise DomainError(
                "prefix must pin the value away from 0 (the period is its "
                "reciprocal)"
            )
        # the expansion is of 1/alpha; the quotient rule needs alpha itself
        alpha_lo, alpha_hi = 1 / x_hi, 1 / x_lo
        q_last = cf.convergents[-1][1]
        est = _digits_estimate(alpha_hi * B2, q_last, e)
        if est > digit_budget:
            raise DigitBudgetError(
                f"term a_{len(cf.terms)} would need ~{est:.3g} digits "
                f"(budget {digit_budget})",
                term_index=len(cf.terms),
            )
        a_next = _certified_ceil(alpha_lo * B2, alpha_hi * B2, q_last, e)
        cf = cf.extend([a_next])
    return cf
