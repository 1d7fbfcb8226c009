"""Independent oracles for cross-checking certified results.

Everything here deliberately avoids the package's own arithmetic paths:
pi comes from a different Machin identity summed in exact Fractions, and
transcendental values come from mpmath (an independent implementation).
"""

from fractions import Fraction

import mpmath


def mp_to_fraction(x: mpmath.mpf) -> Fraction:
    """Exact dyadic value of an mpmath float."""
    sign, man, exp, _ = x._mpf_
    f = Fraction(man) * Fraction(2) ** exp
    return -f if sign else f


def pi_bracket_oracle(scale_bits: int) -> tuple[Fraction, Fraction]:
    """pi bracket from pi/4 = arctan(1/2) + arctan(1/3), exact Fractions.

    A different Machin-type identity from the one the package uses, summed
    with the alternating-series tail bound, so agreement is meaningful.
    """

    def atan_inv(k: int) -> tuple[Fraction, Fraction]:
        total = Fraction(0)
        i = 0
        kpow = k
        limit = Fraction(1, 1 << scale_bits)
        while True:
            t = Fraction(1, (2 * i + 1) * kpow)
            if t < limit:
                # alternating series: partial sum is within t of the value
                return total - t, total + t
            total += -t if (i & 1) else t
            i += 1
            kpow *= k * k

    lo2, hi2 = atan_inv(2)
    lo3, hi3 = atan_inv(3)
    return 4 * (lo2 + lo3), 4 * (hi2 + hi3)


# 70 decimal digits of pi, as published
PI_70_DIGITS = Fraction(
    "3.141592653589793238462643383279502884197169399375105820974944592307816"
)


def sin_abs_oracle(n: int, prec: int = 400) -> Fraction:
    with mpmath.workprec(prec):
        return mp_to_fraction(abs(mpmath.sin(n)))


def dist_oracle(n: int, alpha_name: str, prec: int = 400) -> tuple[int, Fraction]:
    with mpmath.workprec(prec):
        a = _alpha_mp(alpha_name)
        m = int(mpmath.nint(n / a))
        best = min(
            (abs(n - k * a), k) for k in (max(0, m - 1), m, m + 1)
        )
        return best[1], mp_to_fraction(best[0])


def _alpha_mp(name: str) -> mpmath.mpf:
    if name == "pi":
        return mpmath.pi()
    if name == "sqrt2":
        return mpmath.sqrt(2)
    if name == "golden":
        return (1 + mpmath.sqrt(5)) / 2
    raise ValueError(name)


def brute_exponent_oracle(
    q: int, alpha_name: str, prec: int = 256, reciprocal: bool = True
) -> tuple[int, Fraction, Fraction]:
    """(p, error, exponent) for the best p/q at fixed precision."""
    with mpmath.workprec(prec):
        a = _alpha_mp(alpha_name)
        t = 1 / a if reciprocal else a
        p = int(mpmath.nint(q * t))
        err = abs(t - mpmath.mpf(p) / q)
        r = -mpmath.log(err) / mpmath.log(q)
        return p, mp_to_fraction(err), mp_to_fraction(r)


def brute_good_set_oracle(
    alpha_name: str, mu: Fraction, eps1: Fraction, q_max: int, prec: int = 256
) -> set[int]:
    """Good denominators by naive scan at fixed precision.

    Only safe when no exponent sits within ~2**-prec of the threshold,
    which holds for the test grids used.
    """
    threshold = mpmath.mpf(mu.numerator) / mu.denominator - mpmath.mpf(
        eps1.numerator
    ) / eps1.denominator
    out = set()
    with mpmath.workprec(prec):
        a = _alpha_mp(alpha_name)
        t = 1 / a
        for q in range(2, q_max + 1):
            p = int(mpmath.nint(q * t))
            err = abs(t - mpmath.mpf(p) / q)
            r = -mpmath.log(err) / mpmath.log(q)
            if r >= threshold:
                out.add(q)
    return out


def partial_sum_oracle(N: int, prec: int = 256) -> tuple[Fraction, Fraction]:
    """Loose bracket of the flagship partial sum at fixed precision.

    Per-term rounding error is generously padded, so the bracket is sound
    for comparison even though mpmath is not an interval library.
    """
    with mpmath.workprec(prec):
        total = mpmath.mpf(0)
        for n in range(1, N + 1):
            total += 1 / (mpmath.mpf(n) ** 3 * mpmath.sin(n) ** 2)
        pad = mpmath.mpf(2) ** (-prec + 64) * total
        return mp_to_fraction(total - pad), mp_to_fraction(total + pad)
