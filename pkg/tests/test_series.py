"""Series tests: term oracles, bound chains, deterministic summation."""

import random
from fractions import Fraction

import mpmath
import pytest
from gmpy2 import mpq

from flinthills.approx import exponent
from flinthills.errors import DomainError
from flinthills.numkernel import (
    CertReal,
    PiSource,
    PrecisionPolicy,
    RationalSource,
    Sqrt2Source,
    pi_enclosure,
)
from flinthills.series import (
    PartialSumLedger,
    SeriesParams,
    SineLikeSpec,
    p_eval,
    partial_sum,
    preset,
    term,
    term_lower_bound,
    term_upper_bound,
)

from oracles import mp_to_fraction, partial_sum_oracle, sin_abs_oracle


FH_SPEC, FH_PARAMS = preset("flint-hills")


def term_oracle(n: int, prec: int = 400) -> Fraction:
    with mpmath.workprec(prec):
        return mp_to_fraction(1 / (mpmath.mpf(n) ** 3 * mpmath.sin(n) ** 2))


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------


def test_flint_hills_preset_wiring():
    assert FH_SPEC.kind == "abs-sin"
    assert FH_SPEC.alpha.name == "pi"
    assert FH_SPEC.B1 == Fraction(1, 2)
    assert FH_SPEC.B2 == Fraction(1)
    assert (FH_PARAMS.u, FH_PARAMS.v) == (Fraction(3), Fraction(2))


def test_sqrt2_preset_wiring():
    spec, params = preset("sqrt2-lattice")
    assert spec.kind == "lattice-distance"
    assert spec.B1 == spec.B2 == Fraction(1)
    with pytest.raises(DomainError):
        preset("nope")


def test_abs_sin_requires_pi_period():
    with pytest.raises(DomainError):
        SineLikeSpec(Sqrt2Source(), Fraction(1, 2), Fraction(1), "abs-sin")


def test_params_validation():
    with pytest.raises(DomainError):
        SeriesParams(Fraction(0), Fraction(2))
    with pytest.raises(DomainError):
        SineLikeSpec(PiSource(), Fraction(2), Fraction(1), "abs-sin")


def test_custom_table_sandwich_validation():
    table = [(Fraction(0), Fraction(0)), (Fraction(1, 2), Fraction(7, 10))]
    spec = SineLikeSpec(
        Sqrt2Source(), Fraction(9, 10), Fraction(1), "custom-table", table
    )
    assert spec.table is not None
    bad = [(Fraction(0), Fraction(0)), (Fraction(1, 2), Fraction(8, 10))]
    with pytest.raises(DomainError):
        SineLikeSpec(Sqrt2Source(), Fraction(9, 10), Fraction(1), "custom-table", bad)
    with pytest.raises(DomainError):
        SineLikeSpec(
            Sqrt2Source(), Fraction(9, 10), Fraction(1), "custom-table",
            [(Fraction(0), Fraction(1, 10)), (Fraction(1, 2), Fraction(7, 10))],
        )


def test_custom_table_evaluation_sandwiched():
    table = [
        (Fraction(0), Fraction(0)),
        (Fraction(1, 4), Fraction(7, 20)),
        (Fraction(1, 2), Fraction(7, 10)),
    ]
    spec = SineLikeSpec(
        Sqrt2Source(), Fraction(9, 10), Fraction(1), "custom-table", table
    )
    lat = SineLikeSpec(Sqrt2Source(), 1, 1, "lattice-distance")
    for n in (1, 2, 3, 10, 99):
        pv = p_eval(n, spec)
        dist = p_eval(n, lat)
        # B1*dist <= P <= B2*dist certified
        assert mpq(dist.mul(Fraction(9, 10)).hi) <= mpq(pv.hi) or pv.overlaps(
            dist.mul(Fraction(9, 10))
        )
        assert mpq(pv.lo) <= mpq(dist.hi)


# ---------------------------------------------------------------------------
# terms
# ---------------------------------------------------------------------------


def test_term_1_flint_hills():
    t = term(1, FH_SPEC, FH_PARAMS)
    assert t.contains(term_oracle(1))
    assert abs(float(t.midpoint()) - 1.4122829274) < 1e-9


def test_term_1_sqrt2_lattice():
    spec, params = preset("sqrt2-lattice")
    t = term(1, spec, params)
    with mpmath.workprec(300):
        want = mp_to_fraction(1 / (mpmath.sqrt(2) - 1))
    assert t.contains(want)
    assert abs(float(t.midpoint()) - 2.4142135624) < 1e-9


def test_term_355_flint_hills():
    t = term(355, FH_SPEC, FH_PARAMS)
    assert t.contains(term_oracle(355))
    assert abs(float(t.midpoint()) - 24.5981812207) < 1e-8


def test_term_wide_when_profile_hits_zero():
    spec = SineLikeSpec(RationalSource(Fraction(2)), 1, 1, "lattice-distance")
    t = term(2, spec, SeriesParams(3, 2))
    assert t.wide
    assert t.hi > 10**100  # infinite upper endpoint


def test_term_rational_exponents():
    params = SeriesParams(Fraction(5, 2), Fraction(3, 2))
    t = term(7, FH_SPEC, params)
    with mpmath.workprec(300):
        want = mp_to_fraction(
            mpmath.mpf(7) ** mpmath.mpf("-2.5")
            * abs(mpmath.sin(7)) ** mpmath.mpf("-1.5")
        )
    assert t.contains(want)


# ---------------------------------------------------------------------------
# bound chain
# ---------------------------------------------------------------------------


def test_bound_chain_flint_hills():
    rng = random.Random(9)
    for n in rng.sample(range(2, 5000), 25) + [355]:
        rec = exponent(n, PiSource())
        t = term(n, FH_SPEC, FH_PARAMS)
        upper = term_upper_bound(n, rec, FH_SPEC, FH_PARAMS)
        lower = term_lower_bound(n, rec, FH_SPEC, FH_PARAMS)
        assert mpq(t.hi) <= mpq(upper.hi)
        assert mpq(lower.lo) <= mpq(t.lo)


def test_bound_tight_for_exact_lattice():
    # with B1 = B2 = 1 the chain collapses: bounds bracket the term tightly
    spec, _ = preset("sqrt2-lattice")
    params = SeriesParams(3, 2)
    for n in (2, 5, 12, 29, 70):
        rec = exponent(n, Sqrt2Source())
        t = term(n, spec, params)
        upper = term_upper_bound(n, rec, spec, params)
        lower = term_lower_bound(n, rec, spec, params)
        assert mpq(lower.lo) <= mpq(t.lo) and mpq(t.hi) <= mpq(upper.hi)
        # identical constants: the two bounds agree up to interval width
        assert lower.overlaps(upper)


def test_bound_generic_decay_at_r_one():
    from flinthills.approx import ApproxRecord

    n = 100
    one = CertReal.from_endpoints(Fraction(1), Fraction(1), 192)
    err = CertReal.from_endpoints(Fraction(1, 100), Fraction(1, 100), 192)
    rec = ApproxRecord(n, 0, err, one, 1)
    bound = term_upper_bound(n, rec, FH_SPEC, FH_PARAMS)
    coef = pi_enclosure(192).mul(Fraction(1, 2)).pow_fraction(Fraction(2)).recip()
    want = coef.mul(Fraction(1, n**3))
    assert bound.overlaps(want)


def test_bound_requires_matching_q():
    rec = exponent(7, PiSource())
    with pytest.raises(DomainError):
        term_upper_bound(8, rec, FH_SPEC, FH_PARAMS)


# ---------------------------------------------------------------------------
# partial sums
# ---------------------------------------------------------------------------


def test_partial_sum_n1_equals_term():
    led = partial_sum(1, FH_SPEC, FH_PARAMS)
    t = term(1, FH_SPEC, FH_PARAMS)
    assert led.sum.overlaps(t)
    assert led.largest_term[0] == 1


def test_partial_sum_n2_fixture():
    led = partial_sum(2, FH_SPEC, FH_PARAMS)
    with mpmath.workprec(300):
        want = mp_to_fraction(
            1 / mpmath.sin(1) ** 2 + 1 / (8 * mpmath.sin(2) ** 2)
        )
    assert led.sum.contains(want)
    assert abs(float(led.sum.midpoint()) - 1.5634642321) < 1e-9


def test_partial_sum_monotone():
    prev = partial_sum(10, FH_SPEC, FH_PARAMS)
    cur = partial_sum(11, FH_SPEC, FH_PARAMS)
    assert mpq(cur.sum.lo) >= mpq(prev.sum.lo)
    assert mpq(cur.sum.lo) >= mpq(cur.largest_term[1].lo)


def test_partial_sum_oracle_overlap():
    led = partial_sum(1000, FH_SPEC, FH_PARAMS)
    lo, hi = partial_sum_oracle(1000)
    assert mpq(led.sum.lo) <= mpq(hi.numerator, hi.denominator)
    assert mpq(lo.numerator, lo.denominator) <= mpq(led.sum.hi)


def test_parallel_determinism():
    serial = partial_sum(3000, FH_SPEC, FH_PARAMS, workers=1)
    threaded = partial_sum(3000, FH_SPEC, FH_PARAMS, workers=3)
    assert serial.sum.lo == threaded.sum.lo
    assert serial.sum.hi == threaded.sum.hi
    assert serial.largest_term == threaded.largest_term
    assert serial.wide_terms == threaded.wide_terms


def test_resume_bit_identical():
    checkpoints = []
    full = partial_sum(
        2500, FH_SPEC, FH_PARAMS,
        checkpoint_every=1024, checkpoint_cb=checkpoints.append,
    )
    assert checkpoints and checkpoints[0].N == 1024
    resumed = partial_sum(2500, FH_SPEC, FH_PARAMS, resume=checkpoints[0])
    assert resumed.sum.lo == full.sum.lo and resumed.sum.hi == full.sum.hi
    assert resumed.largest_term == full.largest_term


def test_resume_rejects_mismatched_config():
    led = partial_sum(1024, FH_SPEC, FH_PARAMS, checkpoint_every=1024)
    other = PrecisionPolicy(start_bits=384)
    with pytest.raises(DomainError):
        partial_sum(2000, FH_SPEC, FH_PARAMS, policy=other, resume=led)


def test_ledger_json_roundtrip_exact():
    led = partial_sum(50, FH_SPEC, FH_PARAMS)
    back = PartialSumLedger.from_json(led.to_json())
    assert back.sum.lo == led.sum.lo and back.sum.hi == led.sum.hi
    assert back.largest_term[0] == led.largest_term[0]
    assert back.largest_term[1].lo == led.largest_term[1].lo
    assert back.meta == led.meta


def test_wide_terms_recorded_not_fatal():
    spec = SineLikeSpec(RationalSource(Fraction(2)), 1, 1, "lattice-distance")
    led = partial_sum(5, spec, SeriesParams(3, 2))
    assert 2 in led.wide_terms and 4 in led.wide_terms
    assert led.sum.hi > 10**100  # the widths flow into the sum honestly
