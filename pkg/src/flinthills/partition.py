"""Convergence-analysis planner.

Splits the exponent axis into cells: S3 below mu - x (terms decay fast,
density irrelevant), S1 at or above mu + y (only finitely many such q can
exist), and a ladder of cells T_1..T_k covering [mu - x, mu + y) whose
widths stay under the exact budget function

    f(a) = (a*(1 + v - v*mu) + (mu - 1)*(u + v - 1) - 1) / (v*(mu - 1)),

so each cell gets a density exponent b_i making its sub-series summable.
All planner arithmetic is exact rational; interval enclosures appear only
when classifying measured records against the cuts.

The planner is feasible exactly on 2 <= mu < 1 + u/v with v >= 1 (mu < 2
cannot happen for irrationals and is rejected).  The coarse three-set
split is feasible under the stricter surd threshold computed by
:func:`weak_threshold`.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .approx import ApproxRecord
from .contfrac import MuSpec
from .errors import DomainError, InfeasiblePlanError
from .numkernel import DEFAULT_POLICY, CertReal, PrecisionPolicy
from .series import SeriesParams, SineLikeSpec, term


# ---------------------------------------------------------------------------
# Exact surd values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurdValue:
    """a + b*sqrt(radicand) in canonical form (radicand squarefree).

    Supports exact equality and exact comparison against rationals, plus
    interval enclosure for display.
    """

    a: Fraction
    b: Fraction
    radicand: int

    @staticmethod
    def make(a: Fraction, b: Fraction, radicand_frac: Fraction) -> "SurdValue":
        a, b = Fraction(a), Fraction(b)
        rad = Fraction(radicand_frac)
        if rad < 0:
            raise DomainError("negative radicand")
        if b == 0 or rad == 0:
            return SurdValue(a, Fraction(0), 0)
        # sqrt(p/q) = sqrt(p*q)/q
        n = rad.numerator * rad.denominator
        b = b / rad.denominator
        # pull square factors out of n
        square, free = 1, 1
        d = 2
        m = n
        while d * d <= m:
            exp = 0
            while m % d == 0:
                m //= d
                exp += 1
            square *= d ** (exp // 2)
            if exp % 2:
                free *= d
            d += 1
        free *= m
        b = b * square
        if free == 1:
            return SurdValue(a + b, Fraction(0), 0)
        return SurdValue(a, b, free)

    def is_rational(self) -> bool:
        return self.radicand == 0 or self.b == 0

    def enclosure(self, bits: int = 128) -> CertReal:
        base = CertReal.from_scalar(self.a, bits)
        if self.is_rational():
            return base
        root = CertReal.from_scalar(self.radicand, bits).sqrt(bits)
        return base.add(root.mul(self.b, bits=bits), bits=bits)

    def cmp_fraction(self, x: Fraction) -> int:
        """Exact sign of (self - x): -1, 0, or +1."""
        x = Fraction(x)
        if self.is_rational():
            v = self.a
            return (v > x) - (v < x)
        # a + b*sqrt(R) vs x  <=>  b*sqrt(R) vs x - a
        rhs = x - self.a
        if self.b > 0:
            if rhs <= 0:
                return 1
            lhs_sq = self.b * self.b * self.radicand
            rhs_sq = rhs * rhs
            return (lhs_sq > rhs_sq) - (lhs_sq < rhs_sq)
        if rhs >= 0:
            return -1
        lhs_sq = self.b * self.b * self.radicand
        rhs_sq = rhs * rhs
        return (rhs_sq > lhs_sq) - (rhs_sq < lhs_sq)

    def __float__(self):
        return self.a.__float__() + self.b.__float__() * math.sqrt(self.radicand)


def weak_threshold(params: SeriesParams) -> SurdValue:
    """The coarse three-set convergence threshold as an exact surd.

    (sqrt((u+3)(u-1)) + u - 1) / (2v) + 1.  Degenerate at u = 1 where the
    radicand vanishes (exact value 1, reported with a warning); u < 1 is
    outside the domain.
    """
    u, v = params.u, params.v
    if u < 1:
        raise DomainError("weak_threshold needs u >= 1 (radicand positivity)")
    if u == 1:
        warnings.warn("u = 1 degenerates the threshold to exactly 1")
        return SurdValue(Fraction(1), Fraction(0), 0)
    rad = (u + 3) * (u - 1)
    return SurdValue.make(1 + (u - 1) / (2 * v), 1 / (2 * v), rad)


# ---------------------------------------------------------------------------
# The budget function and the plan
# ---------------------------------------------------------------------------


def step_budget(a_prev, mu: MuSpec, params: SeriesParams) -> Fraction:
    """f(a_prev): the exact ceiling on the next cut's distance."""
    a = Fraction(a_prev)
    m, u, v = mu.mu, params.u, params.v
    if m <= 1:
        raise DomainError("mu must exceed 1")
    return (a * (1 + v - v * m) + (m - 1) * (u + v - 1) - 1) / (v * (m - 1))


def step_budget_slope(mu: MuSpec, params: SeriesParams) -> Fraction:
    """Exact linear coefficient of a in f: (1 + v - v*mu)/(v*(mu - 1)).

    Nonpositive whenever v >= 1 and mu >= 2, so f attains its minimum at
    the right end of any interval.
    """
    m, v = mu.mu, params.v
    if m <= 1:
        raise DomainError("mu must exceed 1")
    return (1 + v - v * m) / (v * (m - 1))


@dataclass(frozen=True)
class PartitionPlan:
    """Cut points a_0 < ... < a_k with per-cell density budgets b_1..b_k.

    a_0 = mu - x, a_k = mu + y; every step is below the budget f at its
    left endpoint, and every b_i sits strictly inside its feasible open
    interval, so each cell's predicted convergence exponent
    (u + v - v*a_i)/(1 - b_i) exceeds 1.
    """

    mu: MuSpec
    params: SeriesParams
    x: Fraction
    y: Fraction
    cuts: tuple[Fraction, ...]
    b: tuple[Fraction, ...]
    margin: Fraction

    @property
    def k(self) -> int:
        return len(self.b)

    def predicted_exponent(self, i: int) -> Fraction:
        """Convergence exponent of cell T_i (1-based)."""
        u, v = self.params.u, self.params.v
        a_i = self.cuts[i]
        return (u + v - v * a_i) / (1 - self.b[i - 1])

    def to_json_dict(self) -> dict:
        return {
            "mu": str(self.mu.mu),
            "mu_provenance": self.mu.provenance,
            "u": str(self.params.u),
            "v": str(self.params.v),
            "x": str(self.x),
            "y": str(self.y),
            "cuts": [str(c) for c in self.cuts],
            "b": [str(b) for b in self.b],
            "margin": str(self.margin),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)

    @staticmethod
    def from_json_dict(doc: dict) -> "PartitionPlan":
        return PartitionPlan(
            mu=MuSpec(Fraction(doc["mu"]), doc.get("mu_provenance", "assumed")),
            params=SeriesParams(Fraction(doc["u"]), Fraction(doc["v"])),
            x=Fraction(doc["x"]),
            y=Fraction(doc["y"]),
            cuts=tuple(Fraction(c) for c in doc["cuts"]),
            b=tuple(Fraction(b) for b in doc["b"]),
            margin=Fraction(doc["margin"]),
        )

    @staticmethod
    def from_json(text: str) -> "PartitionPlan":
        return PartitionPlan.from_json_dict(json.loads(text))


def verify_plan(plan: PartitionPlan) -> None:
    """Exact check of every plan invariant; raises DomainError on failure."""
    mu, u, v = plan.mu.mu, plan.params.u, plan.params.v
    cuts, bs = plan.cuts, plan.b
    if len(cuts) != len(bs) + 1:
        raise DomainError("cut/budget length mismatch")
    if plan.x <= 0 or plan.y <= 0:
        raise DomainError("x and y must be positive")
    if cuts[0] != mu - plan.x or cuts[-1] != mu + plan.y:
        raise DomainError("end cuts must be mu - x and mu + y")
    if not plan.x > mu + (1 - u) / v - 1:
        raise DomainError("x below its floor")
    if any(a >= b for a, b in zip(cuts, cuts[1:])):
        raise DomainError("cuts must be strictly ascending")
    if plan.margin <= 0:
        raise DomainError("margin must be positive")
    for i in range(1, len(cuts)):
        a_prev, a_i = cuts[i - 1], cuts[i]
        if not a_i - a_prev < step_budget(a_prev, plan.mu, plan.params):
            raise DomainError(f"step {i} exceeds the budget f(a_{i - 1})")
        b_i = bs[i - 1]
        if not 0 < b_i < 1:
            raise DomainError(f"b_{i} outside (0, 1)")
        if not b_i < 1 - (mu - a_prev) / (mu - 1):
            raise DomainError(f"b_{i} violates the density ceiling")
        if not (u + v - v * a_i) / (1 - b_i) > 1:
            raise DomainError(f"cell {i} predicted exponent not above 1")


def plan(
    mu: MuSpec,
    params: SeriesParams,
    safety: Fraction = Fraction(1, 2),
) -> PartitionPlan:
    """Canonical feasible plan for 2 <= mu < 1 + u/v, v >= 1.

    x interpolates its feasible range (floor, mu - 1) by the safety knob,
    y keeps f(a_k) >= (1 - safety) * f(mu), the uniform cut width is
    safety * min(f(a_0), f(a_k)), and each b_i is the midpoint of its
    feasible interval.  Every invariant is re-verified before returning.
    """
    safety = Fraction(safety)
    if not 0 < safety < 1:
        raise DomainError("safety must lie strictly inside (0, 1)")
    m, u, v = mu.mu, params.u, params.v
    if v < 1:
        raise InfeasiblePlanError(
            f"v = {v} violates the hypothesis v >= 1 (the budget f may "
            "increase and the schedule need not exist)"
        )
    if not m < 1 + u / v:
        raise InfeasiblePlanError(
            f"mu = {m} violates the hypothesis mu < 1 + u/v = {1 + u / v} "
            "(the budget at mu is nonpositive)"
        )
    # mu >= 2 is enforced by MuSpec itself.

    f_mu = 1 + u / v - m  # = step_budget(mu), the exact corner identity
    x_lo = max(Fraction(0), m + (1 - u) / v - 1)
    x_hi = m - 1
    x = x_lo + safety * (x_hi - x_lo)
    y = safety * f_mu

    a0 = m - x
    ak = m + y
    f_a0 = step_budget(a0, mu, params)
    f_ak = step_budget(ak, mu, params)
    margin = safety * min(f_a0, f_ak)
    k = math.ceil((ak - a0) / margin)
    step = (ak - a0) / k
    cuts = tuple(a0 + i * step for i in range(k + 1))

    bs = []
    for i in range(1, k + 1):
        a_prev, a_i = cuts[i - 1], cuts[i]
        b_hi = min(Fraction(1), 1 - (m - a_prev) / (m - 1))
        b_lo = max(Fraction(0), 1 - (u + v - v * a_i))
        if not b_lo < b_hi:
            raise InfeasiblePlanError(
                f"empty density window for cell {i} (internal)"
            )
        bs.append((b_lo + b_hi) / 2)

    result = PartitionPlan(mu, params, x, y, cuts, tuple(bs), margin)
    verify_plan(result)
    return result


def fact_feasible(
    mu: MuSpec, params: SeriesParams
) -> Optional[tuple[Fraction, Fraction]]:
    """A witness (x, y) for the coarse three-set split, or None.

    The constraint system is x > 0, y > 0,
    x > mu + (1-u)/v - 1 and x < (u + v*(1 - mu - y)) * (mu - 1);
    it is solvable exactly when mu is under the weak threshold.
    """
    m, u, v = mu.mu, params.u, params.v
    floor = max(Fraction(0), m + (1 - u) / v - 1)
    r0 = (u + v * (1 - m)) * (m - 1)  # ceiling as y -> 0
    if not floor < r0:
        return None
    target = (floor + r0) / 2
    y = (r0 - target) / (v * (m - 1))
    x = (floor + target) / 2
    return x, y


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def classify3(record: ApproxRecord, mu: MuSpec, x, y) -> str:
    """Coarse cell of a record: S1 / S2 / S3 / unknown by interval position."""
    x, y = Fraction(x), Fraction(y)
    if x <= 0 or y <= 0:
        raise DomainError("x and y must be positive")
    if record.exponent is None:
        return "unknown"
    hi_t = mu.mu + y
    lo_t = mu.mu - x
    e = record.exponent
    if e.certainly_ge(hi_t):
        return "S1"
    if e.certainly_lt(lo_t):
        return "S3"
    if e.certainly_ge(lo_t) and e.certainly_lt(hi_t):
        return "S2"
    return "unknown"


def classify_fine(record: ApproxRecord, pl: PartitionPlan) -> str:
    """Fine cell: S3 below a_0, S1 at or above a_k, T_i inside, else unknown."""
    if record.exponent is None:
        return "unknown"
    e = record.exponent
    cuts = pl.cuts
    if e.certainly_lt(cuts[0]):
        return "S3"
    if e.certainly_ge(cuts[-1]):
        return "S1"
    for i in range(1, len(cuts)):
        if e.certainly_ge(cuts[i - 1]) and e.certainly_lt(cuts[i]):
            return f"T{i}"
    return "unknown"


@dataclass(frozen=True)
class CellSummary:
    cell: str
    count: int
    term_sum: CertReal
    predicted_exponent: Optional[Fraction]
    flagged: bool  # predicted exponent <= 1 (impossible for a valid plan)


@dataclass(frozen=True)
class CellSumReport:
    plan: PartitionPlan
    cells: tuple[CellSummary, ...]

    def to_csv(self) -> str:
        from .approx import decimal_str

        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(
            ["cell", "count", "sum_lo", "sum_hi", "predicted_exponent", "flagged"]
        )
        for c in self.cells:
            w.writerow(
                [
                    c.cell,
                    c.count,
                    decimal_str(c.term_sum.lo, "down"),
                    decimal_str(c.term_sum.hi, "up"),
                    str(c.predicted_exponent) if c.predicted_exponent else "",
                    c.flagged,
                ]
            )
        return buf.getvalue()


def cell_sum_report(
    records: Sequence[ApproxRecord],
    pl: PartitionPlan,
    spec: SineLikeSpec,
    params: SeriesParams,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> CellSumReport:
    """Per-cell record counts and certified term sums over a full record set."""
    order = ["S3"] + [f"T{i}" for i in range(1, pl.k + 1)] + ["S1", "unknown"]
    members: dict[str, list[ApproxRecord]] = {c: [] for c in order}
    for rec in records:
        members[classify_fine(rec, pl)].append(rec)
    bits = policy.start_bits
    cells = []
    for name in order:
        total = CertReal.from_scalar(0, bits)
        for rec in sorted(members[name], key=lambda r: r.q):
            total = total.add(term(rec.q, spec, params, policy), bits=bits)
        pred = None
        flagged = False
        if name.startswith("T"):
            pred = pl.predicted_exponent(int(name[1:]))
            flagged = pred <= 1
        cells.append(
            CellSummary(name, len(members[name]), total, pred, flagged)
        )
    return CellSumReport(pl, tuple(cells))
