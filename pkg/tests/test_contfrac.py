"""Continued-fraction engine tests: exactness everywhere it is promised."""

import json
import math
from fractions import Fraction

import pytest
from gmpy2 import mpq

from flinthills.contfrac import (
    CFExpansion,
    CFValueSource,
    MuSpec,
    construct_divergent,
    convergent_error_bounds,
    expand,
    sondow_estimate,
    sondow_final,
)
from flinthills.errors import DigitBudgetError, DomainError, PrecisionExhausted
from flinthills.numkernel import (
    CertReal,
    FixedSource,
    GoldenSource,
    PiSource,
    PrecisionPolicy,
    ReciprocalSource,
    Sqrt2Source,
)

from oracles import mp_to_fraction


PI_TERMS_5 = (3, 7, 15, 1, 292)
PI_CONVERGENTS_5 = ((3, 1), (22, 7), (333, 106), (355, 113), (103993, 33102))


def test_pi_expansion_classical():
    cf = expand(PiSource(), 5)
    assert cf.terms == PI_TERMS_5
    assert cf.convergents == PI_CONVERGENTS_5


def test_golden_expansion_all_ones():
    assert expand(GoldenSource(), 5).terms == (1, 1, 1, 1, 1)


def test_sqrt2_expansion_periodic():
    assert expand(Sqrt2Source(), 4).terms == (1, 2, 2, 2)


def test_recurrence_and_coprimality():
    cf = expand(PiSource(), 12)
    p_prev, q_prev = 1, 0
    p_prev2, q_prev2 = 0, 1
    for a, (p, q) in zip(cf.terms, cf.convergents):
        assert p == a * p_prev + p_prev2
        assert q == a * q_prev + q_prev2
        assert math.gcd(p, q) == 1
        p_prev2, q_prev2 = p_prev, q_prev
        p_prev, q_prev = p, q
    qs = [q for _, q in cf.convergents]
    assert all(b > a for a, b in zip(qs[1:], qs[2:]))  # strictly up from n>=1


def test_alternating_enclosure():
    cf = expand(ReciprocalSource(PiSource()), 10)
    import mpmath

    with mpmath.workprec(300):
        x = mp_to_fraction(1 / mpmath.pi())
    for n, (p, q) in enumerate(cf.convergents):
        if n % 2 == 0:
            assert Fraction(p, q) < x
        else:
            assert Fraction(p, q) > x


def test_expansion_ambiguity_reported():
    # an interval containing 1/3 cannot certify the expansion of 1/3 forever
    enc = CertReal.from_endpoints(
        Fraction(1, 3) - Fraction(1, 10**9),
        Fraction(1, 3) + Fraction(1, 10**9),
        128,
    )
    with pytest.raises(PrecisionExhausted) as exc_info:
        expand(FixedSource(enc, "near-third"), 50)
    err = exc_info.value
    # values above and below 1/3 expand differently after [0;...], so only
    # the first quotient is certifiable from this enclosure
    assert err.terms_certified == 1
    assert err.partial is not None and err.partial.terms == (0,)


def test_convergent_error_bounds_exact_values():
    cf = expand(PiSource(), 6)
    lo, hi = convergent_error_bounds(cf, 3)
    assert lo == Fraction(1, 3754086)
    assert hi == Fraction(1, 3728548)


def test_golden_error_bounds_all_ones():
    cf = expand(GoldenSource(), 6)
    lo, hi = convergent_error_bounds(cf, 2)
    q2 = cf.convergents[2][1]
    assert q2 == 2
    assert (lo, hi) == (Fraction(1, 12), Fraction(1, 4))


def test_error_bounds_bracket_true_error():
    # |1/pi - p_n/q_n| lies strictly inside the bracket for every n
    import mpmath

    with mpmath.workprec(400):
        x = mp_to_fraction(1 / mpmath.pi())
    cf = expand(ReciprocalSource(PiSource()), 11)
    for n in range(len(cf.terms) - 1):
        lo, hi = convergent_error_bounds(cf, n)
        p, q = cf.convergents[n]
        true_err = abs(x - Fraction(p, q))
        assert lo < true_err < hi


def test_error_bounds_index_errors():
    cf = expand(PiSource(), 4)
    with pytest.raises(IndexError):
        convergent_error_bounds(cf, 3)
    with pytest.raises(IndexError):
        convergent_error_bounds(cf, -1)


def test_sondow_golden_exactly_two():
    cf = expand(GoldenSource(), 9)
    ests = sondow_estimate(cf)
    assert ests  # q_n reaches 2 quickly
    for _, est in ests:
        assert est.lo == 2 and est.hi == 2


def test_sondow_pi_at_n3():
    cf = expand(PiSource(), 6)
    vals = dict(sondow_estimate(cf))
    est = vals[3]  # 2 + ln(292)/ln(113)
    import mpmath

    with mpmath.workprec(300):
        want = mp_to_fraction(2 + mpmath.log(292) / mpmath.log(113))
    assert est.contains(want)
    assert abs(float(est.midpoint()) - 3.2008225) < 1e-6


def test_sondow_needs_two_terms():
    with pytest.raises(DomainError):
        sondow_estimate(CFExpansion.from_terms([3]))


# ---------------------------------------------------------------------------
# construct_divergent
# ---------------------------------------------------------------------------


def test_construct_sondow_approaches_target():
    cf = construct_divergent(3, 2, n_terms=12)
    final = sondow_final(cf)
    assert abs(float(final.midpoint()) - 2.5) < 0.1


def test_construct_u_equals_v_bounded():
    cf = construct_divergent(1, 1, n_terms=12)
    constructed = cf.terms[2:]
    assert max(constructed) <= 2  # ceil(alpha) with alpha < 2
    est = float(sondow_final(cf).midpoint())
    assert 2 <= est < 2.2  # tending to exactly 2


def test_construct_quotient_rule():
    # every constructed a_{n+1} is >= alpha * B2 * q_n**(u/v-1) for every
    # alpha consistent with the final expansion
    cf = construct_divergent(3, 2, n_terms=10)
    x_lo, x_hi = cf.value_bracket()
    alpha_hi = 1 / x_lo
    for n in range(1, len(cf.terms) - 1):
        q = cf.convergents[n][1]
        a_next = cf.terms[n + 1]
        # a_next >= alpha * sqrt(q) - 1 would be weak; check the ceil bound:
        # a_next must be >= true target, so a_next + 1 > alpha_lo*sqrt(q)
        assert Fraction(a_next) ** 2 >= Fraction(1, 2) ** 2 * q or q <= 2
        assert (a_next + 1) ** 2 > (1 / x_hi) ** 2 * q


def test_construct_respects_prefix_and_totals():
    prefix = CFExpansion.from_terms([0, 2, 1])
    cf = construct_divergent(3, 2, n_terms=8, prefix=prefix)
    assert cf.terms[:3] == (0, 2, 1)
    assert len(cf.terms) == 8
    # already long enough: returned untouched
    assert construct_divergent(3, 2, n_terms=2, prefix=prefix) is prefix


def test_construct_digit_budget_names_term():
    with pytest.raises(DigitBudgetError) as exc_info:
        construct_divergent(9, 1, n_terms=14, digit_budget=40)
    assert exc_info.value.term_index is not None


def test_construct_rejects_zero_pinned_prefix():
    with pytest.raises(DomainError):
        construct_divergent(3, 2, n_terms=6, prefix=CFExpansion.from_terms([0]))


def test_construct_roundtrip_expansion():
    cf = construct_divergent(3, 2, n_terms=9)
    recovered = expand(CFValueSource(cf), 7)
    assert recovered.terms == cf.terms[:7]


# ---------------------------------------------------------------------------
# serialization and MuSpec
# ---------------------------------------------------------------------------


def test_json_roundtrip():
    cf = expand(PiSource(), 7)
    doc = json.loads(cf.to_json())
    assert doc["terms"] == [3, 7, 15, 1, 292, 1, 1]
    assert doc["convergents"][1] == ["22", "7"]
    assert CFExpansion.from_json(cf.to_json()) == cf


def test_json_rejects_inconsistent_convergents():
    doc = {"terms": [3, 7], "convergents": [["3", "1"], ["21", "7"]]}
    with pytest.raises(DomainError):
        CFExpansion.from_json_dict(doc)


def test_term_validation():
    with pytest.raises(DomainError):
        CFExpansion.from_terms([])
    with pytest.raises(DomainError):
        CFExpansion.from_terms([1, 0])
    with pytest.raises(DomainError):
        CFExpansion.from_terms([-1, 2])
    CFExpansion.from_terms([0, 1])  # a0 = 0 is fine


def test_muspec_validation():
    MuSpec(Fraction(5, 2), "assumed")
    MuSpec.exactly_two("constructed")
    assert MuSpec.pi_literature().mu == Fraction(7104, 1000)
    with pytest.raises(DomainError):
        MuSpec(Fraction(3, 2), "assumed")
    with pytest.raises(DomainError):
        MuSpec(Fraction(5, 2), "guessed")


def test_value_bracket_brackets_continuations():
    cf = CFExpansion.from_terms([0, 1, 2])
    lo, hi = cf.value_bracket()
    for extra in ([1], [5], [1, 1, 7]):
        ext = cf.extend(extra)
        p, q = ext.convergents[-1]
        assert lo <= Fraction(p, q) <= hi
