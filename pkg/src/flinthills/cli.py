"""Command-line front end: reproducible experiments over the toolkit.

Subcommands: cf (expansion), scan (good-denominator scan), sum (partial
sums), construct (divergence-forcing expansions), plan (partition
schedules), density (growth/window/combine audits).

Every command is deterministic given its configuration.  Exit codes:
0 success, 2 infeasible parameters or a violated theorem hypothesis,
3 precision exhausted with partial output written, 1 anything else.

Configuration can come from a key=value file (--config); flags override
it.  FLINTHILLS_MAX_BITS caps the default precision ladder.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import approx, contfrac, partition, series
from .errors import (
    DigitBudgetError,
    DomainError,
    HypothesisViolation,
    InfeasiblePlanError,
    PrecisionExhausted,
    ResourceLimitError,
)
from .numkernel import (
    AlphaSource,
    CertReal,
    FixedSource,
    GoldenSource,
    PiSource,
    PrecisionPolicy,
    ReciprocalSource,
    Sqrt2Source,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_PRECISION = 3


def _parse_fraction(text: str) -> Fraction:
    """Exact rational from '3/2', '0.25' or '1e-20' style strings."""
    text = text.strip()
    if "/" in text:
        return Fraction(text)
    return Fraction(Decimal(text))


@dataclass
class RunConfig:
    alpha: str = "pi"
    start_bits: int = 192
    max_bits: int = 4096
    target_rel_width: Fraction = Fraction(1, 2**50)
    fmt: str = "json"
    out: Optional[str] = None
    seed: int = 0

    def policy(self) -> PrecisionPolicy:
        return PrecisionPolicy(self.start_bits, self.max_bits, self.target_rel_width)


def _load_config_file(path: str) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"bad config line (want key=value): {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        file_vals = _load_config_file(args.config)
        if "alpha" in file_vals:
            cfg.alpha = file_vals["alpha"]
        if "start_bits" in file_vals:
            cfg.start_bits = int(file_vals["start_bits"])
        if "max_bits" in file_vals:
            cfg.max_bits = int(file_vals["max_bits"])
        if "target_rel_width" in file_vals:
            cfg.target_rel_width = _parse_fraction(file_vals["target_rel_width"])
        if "format" in file_vals:
            cfg.fmt = file_vals["format"]
        if "out" in file_vals:
            cfg.out = file_vals["out"]
        if "seed" in file_vals:
            cfg.seed = int(file_vals["seed"])
    env_max = os.environ.get("FLINTHILLS_MAX_BITS")
    if env_max:
        cfg.max_bits = int(env_max)
    if getattr(args, "alpha", None):
        cfg.alpha = args.alpha
    if getattr(args, "start_bits", None):
        cfg.start_bits = args.start_bits
    if getattr(args, "max_bits", None):
        cfg.max_bits = args.max_bits
    if getattr(args, "target_rel_width", None):
        cfg.target_rel_width = _parse_fraction(args.target_rel_width)
    if getattr(args, "format", None):
        cfg.fmt = args.format
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def resolve_alpha(spec: str, policy: PrecisionPolicy) -> AlphaSource:
    """Named constants plus cf-file: and decimal-file: loaders."""
    if spec == "pi":
        return PiSource()
    if spec == "sqrt2":
        return Sqrt2Source()
    if spec == "golden":
        return GoldenSource()
    if spec.startswith("cf-file:"):
        cf = contfrac.CFExpansion.from_json(Path(spec[8:]).read_text())
        return contfrac.CFValueSource(cf)
    if spec.startswith("decimal-file:"):
        lines = [
            ln.strip()
            for ln in Path(spec[13:]).read_text().splitlines()
            if ln.strip() and not ln.strip().startswith("#")
        ]
        if len(lines) < 2:
            raise DomainError(
                "decimal-file needs a value line and an error-bound line; "
                "uncertified digits are rejected"
            )
        value = _parse_fraction(lines[0])
        bound = _parse_fraction(lines[1])
        if bound <= 0:
            raise DomainError("error bound must be positive")
        enc = CertReal.from_endpoints(value - bound, value + bound, policy.start_bits)
        return FixedSource(enc, name=f"decimal:{lines[0][:24]}")
    raise DomainError(f"unknown alpha source {spec!r}")


def _emit(cfg: RunConfig, payload: str, summary: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(payload)
        print(summary)
    else:
        print(payload)
        print(summary, file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_cf(args) -> int:
    cfg = build_config(args)
    policy = cfg.policy()
    src = resolve_alpha(cfg.alpha, policy)
    partial = False
    try:
        cf = contfrac.expand(src, args.terms, policy)
    except PrecisionExhausted as exc:
        if exc.partial is None:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PRECISION
        cf = exc.partial
        partial = True
    trace = contfrac.sondow_estimate(cf) if len(cf.terms) >= 3 else []
    last_est = float(trace[-1][1].midpoint()) if trace else None
    summary = (
        f"cf {src.name}: {len(cf.terms)} terms, last convergent "
        f"{cf.convergents[-1][0]}/{cf.convergents[-1][1]}, "
        f"sondow running estimate {last_est}"
    )
    if partial:
        summary += f" [partial: requested {args.terms}]"
    _emit(cfg, cf.to_json(indent=2), summary)
    return EXIT_PRECISION if partial else EXIT_OK


def cmd_scan(args) -> int:
    cfg = build_config(args)
    policy = cfg.policy()
    src = resolve_alpha(cfg.alpha, policy)
    mu = contfrac.MuSpec(_parse_fraction(args.mu), "assumed")
    eps1 = _parse_fraction(args.eps1)
    scan = approx.scan_good(
        src, mu, eps1, args.qmax, policy,
        fast=not args.brute,
        target_reciprocal=not args.target_alpha,
    )
    growth_line = ""
    if args.eps2 is not None:
        try:
            report = approx.growth_check(scan, _parse_fraction(args.eps2))
        except HypothesisViolation as exc:
            print(f"hypothesis violation: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        growth_line = (
            f"; growth pass={report.passed} c_fit={report.c_fit:.4g}"
        )
    payload = scan.to_csv() if cfg.fmt == "csv" else scan.to_json(indent=2)
    summary = (
        f"scan {scan.alpha_id}: {len(scan.records)} good, "
        f"{len(scan.unknown)} unknown of q<={scan.q_max}{growth_line}"
    )
    _emit(cfg, payload, summary)
    exhausted = any(r.error.wide for r in scan.unknown)
    return EXIT_PRECISION if exhausted else EXIT_OK


def cmd_sum(args) -> int:
    cfg = build_config(args)
    policy = cfg.policy()
    if args.preset:
        spec, params = series.preset(args.preset)
    else:
        src = resolve_alpha(cfg.alpha, policy)
        spec = series.SineLikeSpec(
            src, _parse_fraction(args.B1), _parse_fraction(args.B2), args.kind
        )
        params = series.SeriesParams(Fraction(3), Fraction(2))
    if args.u is not None or args.v is not None:
        params = series.SeriesParams(
            _parse_fraction(args.u) if args.u else params.u,
            _parse_fraction(args.v) if args.v else params.v,
        )
    resume = None
    ckpt_path = args.checkpoint
    if ckpt_path and Path(ckpt_path).exists():
        resume = series.PartialSumLedger.from_json(Path(ckpt_path).read_text())

    def save_ckpt(ledger: series.PartialSumLedger):
        if ckpt_path:
            Path(ckpt_path).write_text(ledger.to_json())

    ledger = series.partial_sum(
        args.N, spec, params, policy,
        checkpoint_every=args.checkpoint_every,
        workers=args.workers,
        resume=resume,
        checkpoint_cb=save_ckpt if ckpt_path else None,
    )
    if ckpt_path:
        save_ckpt(ledger)
    if args.terms_csv:
        with open(args.terms_csv, "w") as fh:
            fh.write("n,term_lo,term_hi\n")
            for n in range(1, args.N + 1):
                t = series.term(n, spec, params, policy)
                fh.write(
                    f"{n},{approx.decimal_str(t.lo, 'down')},"
                    f"{approx.decimal_str(t.hi, 'up')}\n"
                )
    summary = (
        f"sum N={ledger.N}: [{approx.decimal_str(ledger.sum.lo, 'down', 30)}, "
        f"{approx.decimal_str(ledger.sum.hi, 'up', 30)}], largest term at "
        f"n={ledger.largest_term[0]}, {len(ledger.wide_terms)} wide terms"
    )
    _emit(cfg, ledger.to_json(indent=2), summary)
    return EXIT_PRECISION if ledger.wide_terms else EXIT_OK


def cmd_construct(args) -> int:
    cfg = build_config(args)
    u = _parse_fraction(args.u)
    v = _parse_fraction(args.v)
    b2 = _parse_fraction(args.B2)
    prefix = None
    if args.prefix:
        prefix = contfrac.CFExpansion.from_json(Path(args.prefix).read_text())
    try:
        cf = contfrac.construct_divergent(
            u, v, b2, args.terms, prefix, digit_budget=args.digit_budget
        )
    except DigitBudgetError as exc:
        print(f"digit budget exceeded at term {exc.term_index}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = verify_construction(cf, u, v, prefix_len=len(prefix.terms) if prefix else 2)
    doc = {"expansion": cf.to_json_dict(), "verification": report}
    checks = [row["term_above_one"] for row in report["convergents"]]
    summary = (
        f"construct u={u} v={v}: {len(cf.terms)} terms, "
        f"{sum(checks)}/{len(checks)} convergents certified A>1, "
        f"sondow final {report['sondow_final']}"
    )
    _emit(cfg, json.dumps(doc, indent=2), summary)
    return EXIT_OK if all(checks) else EXIT_ERROR


def verify_construction(
    cf: contfrac.CFExpansion, u: Fraction, v: Fraction, prefix_len: int = 2
) -> dict:
    """Per-convergent certificate: series term above 1, plus the Sondow trace.

    Checks every convergent whose successor quotient was rule-constructed
    (the claim does not cover prefix terms); the final convergent awaits
    its successor and is not yet checkable.
    """
    alpha_src = ReciprocalSource(contfrac.CFValueSource(cf), name="alpha")
    sine = series.SineLikeSpec(alpha_src, 1, 1, "lattice-distance")
    params = series.SeriesParams(u, v)
    rows = []
    for n in range(max(0, prefix_len - 1), len(cf.terms) - 1):
        q_n = cf.convergents[n][1]
        t = series.term(q_n, sine, params)
        rows.append(
            {
                "n": n,
                "q_digits": len(str(q_n)),
                "a_next": str(cf.terms[n + 1]),
                "term_lo": approx.decimal_str(t.lo, "down", 20),
                "term_above_one": bool(t.certainly_gt(1)),
            }
        )
    trace = contfrac.sondow_estimate(cf)
    final = trace[-1][1] if trace else None
    return {
        "convergents": rows,
        "sondow_trace": [
            (n, float(est.midpoint())) for n, est in trace
        ],
        "sondow_final": float(final.midpoint()) if final else None,
    }


def cmd_plan(args) -> int:
    cfg = build_config(args)
    mu = contfrac.MuSpec(_parse_fraction(args.mu), "assumed")
    params = series.SeriesParams(_parse_fraction(args.u), _parse_fraction(args.v))
    try:
        pl = partition.plan(mu, params, _parse_fraction(args.safety))
    except InfeasiblePlanError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    summary = (
        f"plan mu={mu.mu} u={params.u} v={params.v}: k={pl.k} cells, "
        f"margin {pl.margin} (~{float(pl.margin):.4g})"
    )
    _emit(cfg, pl.to_json(indent=2), summary)
    return EXIT_OK


def cmd_density(args) -> int:
    cfg = build_config(args)
    policy = cfg.policy()
    mu = contfrac.MuSpec(_parse_fraction(args.mu), "assumed")
    eps1 = _parse_fraction(args.eps1)
    eps2 = _parse_fraction(args.eps2)
    if args.scan_file:
        scan = approx.GoodScanResult.from_json(Path(args.scan_file).read_text())
    else:
        src = resolve_alpha(cfg.alpha, policy)
        scan = approx.scan_good(
            src, mu, eps1, args.qmax, policy,
            target_reciprocal=not args.target_alpha,
        )
    try:
        growth = approx.growth_check(scan, eps2)
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    audit = combine_audit(scan, eps2)
    windows = [
        {
            "q1": rec.q,
            "count": approx.window_count(scan, rec.q, eps2).count,
            "truncated": approx.window_count(scan, rec.q, eps2).truncated,
        }
        for rec in scan.records
    ]
    doc = {
        "alpha_id": scan.alpha_id,
        "growth": {
            "epsilon2": str(eps2),
            "exponent": str(growth.exponent),
            "c_fit": growth.c_fit,
            "passed": growth.passed,
            "insufficient_data": growth.insufficient_data,
            "rows": [
                {"n": r.n, "q_n": r.q_n, "floor_n": r.floor_n, "ok": r.ok}
                for r in growth.rows
            ],
        },
        "windows": windows,
        "combine_audit": audit,
    }
    summary = (
        f"density {scan.alpha_id}: growth pass={growth.passed}, "
        f"{audit['pairs_close']} close pairs, "
        f"{audit['violations']} bound violations"
    )
    _emit(cfg, json.dumps(doc, indent=2), summary)
    if not growth.passed:
        return EXIT_INFEASIBLE
    return EXIT_OK


def combine_audit(scan: approx.GoodScanResult, eps2: Fraction) -> dict:
    """Check every adjacent close good pair against the combined-exponent floor."""
    mu, eps1 = scan.mu_assumed, scan.epsilon1
    rows = []
    n_close = n_checked = n_degenerate = n_below_slack = n_violations = 0
    recs = scan.records
    for r1, r2 in zip(recs, recs[1:]):
        if not approx.are_close(r1.q, r2.q, eps2):
            continue
        n_close += 1
        if not approx.slack_threshold_ok(r1.q, mu, eps1):
            n_below_slack += 1
            continue
        bound = approx.combined_exponent_bound(mu, eps1, eps2, r1.q)
        try:
            comb = approx.combine(r1, r2)
        except Exception:
            n_degenerate += 1
            continue
        n_checked += 1
        ok = comb.exponent is not None and comb.exponent.lo > bound.hi
        if not ok:
            n_violations += 1
        rows.append(
            {
                "q1": r1.q,
                "q2": r2.q,
                "combined_q": comb.q,
                "combined_exp_lo": float(comb.exponent.lo) if comb.exponent else None,
                "bound_hi": float(bound.hi),
                "ok": ok,
            }
        )
    return {
        "pairs_close": n_close,
        "pairs_checked": n_checked,
        "pairs_degenerate": n_degenerate,
        "pairs_below_slack": n_below_slack,
        "violations": n_violations,
        "rows": rows,
    }


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, alpha: bool = True):
    if alpha:
        p.add_argument("--alpha", help="pi|sqrt2|golden|cf-file:PATH|decimal-file:PATH")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--start-bits", type=int, dest="start_bits")
    p.add_argument("--max-bits", type=int, dest="max_bits")
    p.add_argument("--target-rel-width", dest="target_rel_width")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="flinthills",
        description="certified Diophantine approximation and series toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cf", help="continued fraction expansion")
    _add_common(p)
    p.add_argument("--terms", type=int, required=True)
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("scan", help="scan for good denominators")
    _add_common(p)
    p.add_argument("--mu", required=True)
    p.add_argument("--eps1", required=True)
    p.add_argument("--qmax", type=int, required=True)
    p.add_argument("--eps2", help="also run the growth check")
    p.add_argument("--brute", action="store_true", help="disable convergent skipping")
    p.add_argument(
        "--target-alpha", action="store_true", dest="target_alpha",
        help="measure approximations of alpha itself instead of 1/alpha",
    )
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("sum", help="certified partial sums")
    _add_common(p)
    p.add_argument("--preset", choices=series.PRESETS)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--u")
    p.add_argument("--v")
    p.add_argument("--B1", default="1/2")
    p.add_argument("--B2", default="1")
    p.add_argument("--kind", default="abs-sin", choices=series.KINDS)
    p.add_argument("--checkpoint", help="checkpoint file (resumes when present)")
    p.add_argument("--checkpoint-every", type=int, default=10**6,
                   dest="checkpoint_every")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--terms-csv", dest="terms_csv",
                   help="also stream per-term enclosures to this CSV")
    p.set_defaults(func=cmd_sum)

    p = sub.add_parser("construct", help="build a divergence-forcing expansion")
    _add_common(p, alpha=False)
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--B2", default="1")
    p.add_argument("--terms", type=int, required=True)
    p.add_argument("--prefix", help="expansion JSON to extend (default [0;1])")
    p.add_argument("--digit-budget", type=int, default=contfrac.DEFAULT_DIGIT_BUDGET,
                   dest="digit_budget")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("plan", help="partition schedule")
    _add_common(p, alpha=False)
    p.add_argument("--mu", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--safety", default="1/2")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("density", help="growth, window and combine audits")
    _add_common(p)
    p.add_argument("--mu", required=True)
    p.add_argument("--eps1", required=True)
    p.add_argument("--eps2", required=True)
    p.add_argument("--qmax", type=int, default=10**4)
    p.add_argument("--scan-file", dest="scan_file",
                   help="audit a previously saved scan JSON instead of scanning")
    p.add_argument(
        "--target-alpha", action="store_true", dest="target_alpha",
        help="measure approximations of alpha itself instead of 1/alpha",
    )
    p.set_defaults(func=cmd_density)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfeasiblePlanError, HypothesisViolation) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (DomainError, ResourceLimitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
