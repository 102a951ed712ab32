"""Command-line entry point: ``calibloss <subcommand> [options]``.

Exit codes: 0 every requested check passed, 1 usage error, 2 an invariant
or assertion failed, 3 an input or output file could not be read or written.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bounds, core, harness, scoring, trigram
from .calibrate import ApproxCalibrationParams, is_approx_calibrated, make_approx_calibrated
from .core import Sampler, trial_rng, validate_distribution
from .losses import builtin_catalog, check_left_strong_concavity, expected_loss, get_loss

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_IO = 0, 1, 2, 3

BOUND_COLUMNS = ["kind", "loss", "N", "eps", "gamma", "delta", "alpha1", "alpha2", "ln_beta", "ln_m", "gap",
                 "vacuous"]


class UsageError(Exception):
    pass


class Violation(Exception):
    """An invariant failed; the message names the first one."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text}")
    return int(v)


def _csv_list(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return str(v)


def render_csv(rows: list[dict], columns: list[str] | None = None, stamp: bool = True) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    buf = io.StringIO()
    if stamp:
        buf.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def emit(args, rows: list[dict], summary: dict, columns: list[str] | None = None) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out", "format")}
    if args.format == "json":
        text = json.dumps(_jsonable({"config": config, "rows": rows, "summary": summary}), indent=2) + "\n"
    else:
        text = render_csv(rows, columns)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
        print(json.dumps(_jsonable(summary)))
    else:
        sys.stdout.write(text)


def read_bounds_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _opt(v: str):
    return float(v) if v not in ("", None) else None


def recheck_bounds(rows: list[dict], tol: float = 1e-9) -> list[str]:
    """Recompute every row of a bounds CSV; return a description of each mismatch."""
    bad = []
    for i, r in enumerate(rows):
        rep = bounds.compute(r["kind"], r["loss"], float(r["N"]), _opt(r["eps"]), _opt(r["gamma"]),
                             _opt(r["delta"]), _opt(r["alpha1"]) or 0.0, _opt(r["alpha2"]) or 0.0)
        for col in ("ln_beta", "ln_m", "gap"):
            a, b = _opt(r[col]), getattr(rep, col)
            if (a is None) != (b is None) or (a is not None and not math.isclose(a, b, rel_tol=tol, abs_tol=tol)):
                bad.append(f"row {i}: {col} {a} != {b}")
        if (r["vacuous"] == "true") != rep.vacuous:
            bad.append(f"row {i}: vacuous flag differs")
    return bad


def cmd_bounds(args) -> int:
    if args.check:
        bad = recheck_bounds(read_bounds_csv(args.check))
        if bad:
            raise Violation("bounds round-trip: " + bad[0])
        print(f"{args.check}: all rows reproduce")
        return EXIT_OK
    if args.N is None:
        raise UsageError("--N is required")
    kinds = args.kind or []
    if not kinds:
        if args.eps is not None:
            kinds.append("strong-proper")
        if args.gamma is not None and args.delta is not None:
            kinds.append("concentration")
        if args.eps is not None and args.delta is not None:
            kinds.append("sample-proper")
        if args.eps is not None and (args.alpha1 or args.alpha2):
            kinds.append("approx-strong-proper")
    if not kinds:
        raise UsageError("give --eps and/or --gamma with --delta, or choose --kind")
    rows = []
    for name in args.loss:
        for kind in kinds:
            rep = bounds.compute(kind, name, args.N, args.eps, args.gamma, args.delta, args.alpha1, args.alpha2,
                                 args.c1)
            rows.append({c: getattr(rep, c) for c in BOUND_COLUMNS})
    emit(args, rows, {"rows": len(rows)}, BOUND_COLUMNS)
    return EXIT_OK


def _random_pairs(N_max: int, trials: int, seed: int):
    for t in range(trials):
        rng = trial_rng(seed, t)
        N = int(rng.integers(2, N_max + 1))
        yield t, harness.random_full_support(N, rng), harness.random_full_support(N, rng)


def _suite_calibrated(args, what: str) -> tuple[list[dict], dict]:
    rows, summary = [], {}
    losses = args.loss or [f.name for f in builtin_catalog()]
    for name in losses:
        res = harness.sweep_strong_properness(name, N_max=args.N, trials_p=args.trials, seed=args.seed)
        s = res.summary
        rows.append({"loss": name, **{k: s[k] for k in ("candidates", "proper_violations", "bound_violations",
                                                          "strict_violations", "min_slack")}})
        key = {"strict-properness": ("proper_violations", "strict_violations"),
               "strong-properness": ("bound_violations",)}[what]
        if any(s[k] for k in key):
            summary.setdefault("violation", f"{what} failed for {name}")
    return rows, summary


def _suite_kl(args):
    worst_id, worst_pin = 0.0, math.inf
    loss = get_loss("log")
    for _, p, q in _random_pairs(args.N, args.trials, args.seed):
        gap = expected_loss(loss, q, p) - expected_loss(loss, p, p)
        kl = core.kl_divergence(p, q)
        worst_id = max(worst_id, abs(gap - kl))
        worst_pin = min(worst_pin, kl - 0.5 * core.l1_distance(p, q) ** 2)
    summary = {"max_identity_error": worst_id, "min_pinsker_slack": worst_pin}
    if worst_id > 1e-9:
        summary["violation"] = "log-loss gap differs from KL"
    elif worst_pin < -1e-12:
        summary["violation"] = "Pinsker inequality"
    return [summary.copy()], summary


def _suite_bregman(args):
    rows, summary = [], {}
    for g in ("shannon", "quad", "invroot"):
        worst, worst_l1 = 0.0, math.inf
        for _, p, q in _random_pairs(args.N, args.trials, args.seed):
            d = scoring.divergence(g, p, q)
            direct = scoring.expected_generated_loss(g, q, p) - scoring.expected_generated_loss(g, p, p)
            worst = max(worst, abs(d - direct), abs(d - scoring.closed_form_divergence(g, p, q)))
            worst_l1 = min(worst_l1, d - 0.5 * core.l1_distance(p, q) ** 2)
        rows.append({"generator": g, "max_error": worst, "min_l1_slack": worst_l1})
        if worst > 1e-9:
            summary.setdefault("violation", f"Bregman identity for {g}")
    return rows, summary


def _suite_concavity(args):
    rows, summary = [], {}
    for loss in builtin_catalog():
        rep = check_left_strong_concavity(loss, raise_on_violation=False)
        rows.append({"loss": loss.name, "min_slack": rep.min_slack, "ok": rep.ok})
        if not rep.ok:
            summary.setdefault("violation", f"concavity metadata for {loss.name}")
    return rows, summary


SUITES = {
    "strict-properness": lambda a: _suite_calibrated(a, "strict-properness"),
    "strong-properness": lambda a: _suite_calibrated(a, "strong-properness"),
    "kl-pinsker": _suite_kl,
    "bregman": _suite_bregman,
    "concavity": _suite_concavity,
}


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    rows, summary = [], {}
    for name in names:
        if name in ("strict-properness", "strong-properness") and args.N > 8:
            raise UsageError("calibrated-set sweeps need --N <= 8")
        r, s = SUITES[name](args)
        rows += [{"suite": name, **x} for x in r]
        if "violation" in s:
            summary.setdefault("violation", s["violation"])
    summary["passed"] = "violation" not in summary
    emit(args, rows, summary)
    if not summary["passed"]:
        raise Violation(summary["violation"])
    return EXIT_OK


def cmd_demo(args) -> int:
    if args.name == "logloss-nonconcentration":
        res = harness.demo_logloss_nonconcentration(args.N, args.m, args.trials, args.seed, args.allow_dense)
        ok, what = abs(res.summary["z"]) <= 3, "finite fraction outside 3 sigma of (1-1/N)^m"
    elif args.name == "linear-improperness":
        res = harness.demo_linear_loss_improperness(args.N, args.m, args.trials, args.seed, args.allow_dense)
        s = res.summary
        ok = s["calibrated"] and s["structure_ok"] and s["reversal_fraction"] >= args.min_reversal
        what = "constructed pair not calibrated or reversal fraction below --min-reversal"
    else:
        ex = scoring.l2_counterexample(args.N)
        summary = {"N": ex.N, "l1_dist": float(ex.l1_dist), "l2_gap": float(ex.l2_gap),
                   "gap_times_N": float(ex.gap_times_N), "float_gap": ex.l2_gap_float}
        emit(args, [summary], summary)
        if ex.gap_times_N != 2 or ex.l1_dist != 2:
            raise Violation("l2 counterexample identity")
        return EXIT_OK
    emit(args, res.trials if args.rows else [], res.summary)
    if not ok:
        raise Violation(what)
    return EXIT_OK


def _load_pair(args):
    if args.p:
        p = core.read_distribution(args.p)
        q = core.read_distribution(args.q) if args.q else p
        return p, q
    if args.N is None:
        raise UsageError("give --p (and --q) files or --N for a generated pair")
    rng = trial_rng(args.seed, 10**9)
    pv = harness.random_full_support(args.N, rng)
    qv = harness.random_coarsening(pv, max(1, args.blocks), rng)
    return validate_distribution(pv), validate_distribution(qv / math.fsum(qv.tolist()))


def cmd_calibrate(args) -> int:
    p, q = _load_pair(args)
    params = ApproxCalibrationParams(args.alpha1, args.alpha2, args.delta)
    qp, trace = make_approx_calibrated(q, Sampler(p), params, seed=args.seed, multiplier=args.multiplier)
    rep = is_approx_calibrated(qp, p, params)
    if args.q_out:
        core.write_distribution(qp, args.q_out)
    summary = {**trace.summary(), "certified": bool(rep), "exception_mass": rep.exception_mass,
               "l1_to_input": core.l1_distance(q, qp)}
    if args.trace:
        Path(args.trace).write_text(json.dumps(_jsonable(summary), indent=2) + "\n", encoding="utf-8")
    emit(args, [{"index": i, "q": float(a), "q_prime": float(b)} for i, (a, b) in enumerate(zip(q.probs, qp.probs))],
         {k: summary[k] for k in ("certified", "exception_mass", "l1_to_input", "samples_used", "bucket_count")})
    if not rep:
        raise Violation("constructed distribution failed the approximate-calibration certifier")
    return EXIT_OK


def cmd_concentrate(args) -> int:
    p, q = _load_pair(args)
    res = harness.run_concentration(args.loss, p, q, args.m, args.trials, args.gamma, args.seed)
    emit(args, res.trials if args.rows else [], res.summary)
    if args.delta is not None and res.summary["failure_rate"] > args.delta:
        raise Violation(f"failure rate {res.summary['failure_rate']} exceeds delta {args.delta}")
    return EXIT_OK


def cmd_sample_proper(args) -> int:
    p, q = _load_pair(args)
    res = harness.run_sample_properness(args.loss, p, q, args.m, args.trials, args.seed)
    emit(args, res.trials if args.rows else [], res.summary)
    if args.delta is not None and res.summary["success_fraction"] < 1 - args.delta:
        raise Violation(f"success fraction {res.summary['success_fraction']} below 1 - delta")
    return EXIT_OK


def cmd_trigram(args) -> int:
    base = trigram.ingest(args.english) if args.english else trigram.bundled("english")
    noise = trigram.ingest(args.noise, noise=True) if args.noise else trigram.bundled("foreign")
    corpus = trigram.mix_noise(base, noise, args.noise_mass)
    rows = trigram.experiment(corpus, args.alpha, args.losses, args.smoothing)
    summary = {"words": len(corpus), "noise_words": int(corpus.noise.sum())}
    if args.samples:
        for a in args.alpha:
            summary[f"samples(alpha={a:g})"] = trigram.sample_words(trigram.train(corpus, a, args.smoothing),
                                                                    args.samples, seed=args.seed)
    if args.curve:
        cols = ["rank", "p_cum"] + [f"q_cum(alpha={a:g})" for a in args.alpha]
        curves = [trigram.cumulative_curve(trigram.train(corpus, a, args.smoothing), corpus) for a in args.alpha]
        data = [dict(zip(cols, [int(c[0]), float(c[1])] + [float(cv[i, 2]) for cv in curves]))
                for i, c in enumerate(curves[0])]
        Path(args.curve).write_text(render_csv(data, cols), encoding="utf-8", newline="\n")
    emit(args, rows, summary)
    return EXIT_OK


def cmd_scoring(args) -> int:
    rows, summary = [], {}
    for g in args.generator:
        worst, worst_l1 = 0.0, math.inf
        ratios = []
        for _, p, q in _random_pairs(args.N, args.trials, args.seed):
            d = scoring.divergence(g, p, q)
            direct = scoring.expected_generated_loss(g, q, p) - scoring.expected_generated_loss(g, p, p)
            worst = max(worst, abs(d - direct))
            worst_l1 = min(worst_l1, d - 0.5 * core.l1_distance(p, q) ** 2)
            h = scoring.hellinger_sq(p, q)
            if h > 0:
                ratios.append(d / h)
        # logged only; no formal relation to Hellinger is claimed
        rows.append({"generator": g, "max_identity_error": worst, "min_l1_slack": worst_l1,
                     "min_over_hellinger_sq": min(ratios), "max_over_hellinger_sq": max(ratios)})
        if worst > 1e-9:
            summary.setdefault("violation", f"Bregman identity for {g}")
    summary["passed"] = "violation" not in summary
    emit(args, rows, summary)
    if not summary["passed"]:
        raise Violation(summary["violation"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="calibloss", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--out", help="write the table here instead of stdout")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if seed:
            sp.add_argument("--seed", type=_int, default=0)

    sp = sub.add_parser("bounds", help="evaluate closed-form bounds")
    sp.add_argument("--loss", type=_csv_list, default=["log"])
    sp.add_argument("--kind", type=_csv_list, default=None, help=", ".join(bounds.KINDS))
    sp.add_argument("--N", type=_num)
    for name in ("eps", "gamma", "delta"):
        sp.add_argument(f"--{name}", type=_num)
    sp.add_argument("--alpha1", type=_num, default=0.0)
    sp.add_argument("--alpha2", type=_num, default=0.0)
    sp.add_argument("--c1", type=_num, default=1.0)
    sp.add_argument("--check", metavar="CSV", help="recompute a bounds CSV and compare")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("verify", help="run oracle sweeps and invariant suites")
    sp.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    sp.add_argument("--N", type=_int, default=8)
    sp.add_argument("--trials", type=_int, default=50)
    sp.add_argument("--loss", type=_csv_list, default=None)
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("demo", help="reproduce the counterexamples")
    sp.add_argument("--name", required=True, choices=("logloss-nonconcentration", "linear-improperness",
                                                      "l2-counterexample"))
    sp.add_argument("--N", type=_int, default=10_000)
    sp.add_argument("--m", type=_int, default=100)
    sp.add_argument("--trials", type=_int, default=1000)
    sp.add_argument("--allow-dense", action="store_true", help="permit m > N/10")
    sp.add_argument("--min-reversal", type=_num, default=0.0)
    sp.add_argument("--rows", action="store_true", help="emit one row per trial")
    common(sp)
    sp.set_defaults(func=cmd_demo)

    def pair_args(sp):
        sp.add_argument("--p", help="target distribution file (JSON or TSV)")
        sp.add_argument("--q", help="candidate distribution file (defaults to p)")
        sp.add_argument("--N", type=_int, help="generate p at random and q as a coarsening of it")
        sp.add_argument("--blocks", type=_int, default=20)

    sp = sub.add_parser("calibrate", help="build an approximately calibrated q'")
    pair_args(sp)
    sp.add_argument("--alpha1", type=_num, default=0.3)
    sp.add_argument("--alpha2", type=_num, default=0.1)
    sp.add_argument("--delta", type=_num, default=0.1)
    sp.add_argument("--multiplier", type=_num, default=1.0)
    sp.add_argument("--q-out", help="write q' here")
    sp.add_argument("--trace", help="write the construction trace as JSON here")
    common(sp)
    sp.set_defaults(func=cmd_calibrate)

    for name, func in (("concentrate", cmd_concentrate), ("sample-proper", cmd_sample_proper)):
        sp = sub.add_parser(name, help=f"Monte Carlo {name} experiment")
        pair_args(sp)
        sp.add_argument("--loss", default="log")
        sp.add_argument("--m", type=_int, required=True)
        sp.add_argument("--trials", type=_int, default=1000)
        if name == "concentrate":
            sp.add_argument("--gamma", type=_num, required=True)
        sp.add_argument("--delta", type=_num, help="fail unless the outcome holds with this confidence")
        sp.add_argument("--rows", action="store_true")
        common(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("trigram", help="character-trigram head/tail experiment")
    sp.add_argument("--english", help="word<TAB>frequency list (default: bundled)")
    sp.add_argument("--noise", help="foreign word list (default: bundled)")
    sp.add_argument("--noise-mass", type=_num, default=0.12)
    sp.add_argument("--alpha", type=lambda s: [float(x) for x in _csv_list(s)], default=[1.0, 1.4])
    sp.add_argument("--losses", type=_csv_list, default=["log", "loglog"])
    sp.add_argument("--smoothing", type=_num, default=0.0)
    sp.add_argument("--samples", type=_int, default=0)
    sp.add_argument("--curve", help="write the cumulative-mass curve CSV here")
    common(sp)
    sp.set_defaults(func=cmd_trigram)

    sp = sub.add_parser("scoring", help="check generator losses against their divergences")
    sp.add_argument("--generator", type=_csv_list, default=["shannon", "quad", "invroot"])
    sp.add_argument("--N", type=_int, default=64)
    sp.add_argument("--trials", type=_int, default=1000)
    common(sp)
    sp.set_defaults(func=cmd_scoring)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits on --help and on usage errors; report the code instead
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except Violation as e:
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    except (UsageError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
