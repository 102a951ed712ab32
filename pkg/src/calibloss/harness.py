"""Monte Carlo experiments and counterexample reproductions.

Every trial draws from its own generator ``trial_rng(seed, trial)``, so a
trial's outcome does not depend on which other trials ran or in what order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import core
from .calibrate import (ApproxCalibrationParams, construction_sample_count, is_approx_calibrated,
                        make_approx_calibrated)
from .core import Sampler, as_distribution, draw_indices, trial_rng, validate_distribution
from .errors import InvalidShape, OddDomain, ParameterOutOfRange
from .losses import LocalLoss, expected_loss, expected_loss_matrix, get_loss
from .bounds import strong_properness_gap_bound


@dataclass
class ExperimentResult:
    name: str
    config: dict[str, Any]
    trials: list[dict[str, Any]]
    summary: dict[str, Any]
    seed: int

    def to_dict(self) -> dict:
        return {"config": {"name": self.name, "seed": self.seed, **self.config},
                "rows": self.trials, "summary": self.summary}


def summarize(values, failures=None) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64)
    fin = v[np.isfinite(v)]
    out = {"count": int(v.size), "finite": int(fin.size)}
    if fin.size:
        out.update(mean=float(fin.mean()), median=float(np.median(fin)),
                   q05=float(np.quantile(fin, 0.05)), q95=float(np.quantile(fin, 0.95)))
    if failures is not None:
        out["failure_rate"] = float(np.mean(failures)) if len(failures) else 0.0
    return out


def random_rational_p(N: int, rng: np.random.Generator, denom: int = 10_000) -> np.ndarray:
    """Normalized exponentials rounded to multiples of ``1/denom``, every entry at least ``1/denom``."""
    if denom < N:
        raise ParameterOutOfRange("denominator must be at least N")
    w = rng.exponential(size=N)
    share = w / w.sum() * (denom - N)
    counts = np.floor(share).astype(np.int64)
    rem = (denom - N) - int(counts.sum())
    # largest remainders take the leftover units
    counts[np.argsort(-(share - counts), kind="stable")[:rem]] += 1
    return (counts + 1) / denom


def random_full_support(N: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.exponential(size=N)
    return w / w.sum()


def scale_for_loglog(p: np.ndarray) -> np.ndarray:
    """Mix ``p`` with uniform until every entry is at most ``1/e``; needs N >= 3."""
    N = p.size
    cap = 1 / math.e
    if 1.0 / N > cap:
        raise ParameterOutOfRange(f"N={N} is too small to keep every probability below 1/e")
    top = float(p.max())
    if top <= cap:
        return p
    lam = (cap - 1.0 / N) / (top - 1.0 / N) * 0.999
    out = lam * p + (1 - lam) / N
    return out / math.fsum(out.tolist())


def _loss_ready_p(loss: LocalLoss, N: int, rng) -> np.ndarray:
    p = random_rational_p(N, rng)
    return scale_for_loglog(p) if loss.z_min > 1.0 else p


def sweep_strong_properness(loss: LocalLoss | str, N_max: int = 8, trials_p: int = 100, seed: int = 0,
                            N_min: int = 2, tol: float = 1e-9, strict_tol: float = 1e-12) -> ExperimentResult:
    """Check gap >= C(4N/eps) eps^2/128 and strict positivity over every calibrated q.

    Losses whose natural domain starts at e get supports mixed toward
    uniform so that every probability stays at or below 1/e.
    """
    loss = get_loss(loss)
    if N_max > 8:
        raise ParameterOutOfRange("the brute-force sweep is limited to N <= 8")
    if loss.z_min > 1.0:
        N_min = max(N_min, 3)
    Ns = list(range(N_min, N_max + 1))
    rows = []
    for t in range(trials_p):
        rng = trial_rng(seed, t)
        N = Ns[t % len(Ns)]
        pv = _loss_ready_p(loss, N, rng)
        p = validate_distribution(pv)
        Q = core.calibrated_matrix(p)
        gaps = expected_loss_matrix(loss, Q, p)
        eps = np.abs(Q - pv).sum(axis=1)
        bound = np.array([strong_properness_gap_bound(loss, N, min(e, 2.0)) for e in eps])
        slack = gaps - bound
        differs = np.abs(Q - pv).max(axis=1) > 1e-12
        strict_bad = int(np.sum(differs & ~(gaps > strict_tol))) if loss.strictly_concave else 0
        rows.append({
            "trial": t, "N": N, "candidates": int(Q.shape[0]),
            "min_gap": float(gaps.min()),
            "min_gap_distinct": float(gaps[differs].min()) if differs.any() else None,
            "min_slack": float(slack.min()),
            "proper_violations": int(np.sum(gaps < -tol)),
            "bound_violations": int(np.sum(slack < -tol)),
            "strict_violations": strict_bad,
        })
    summary = {
        "proper_violations": sum(r["proper_violations"] for r in rows),
        "bound_violations": sum(r["bound_violations"] for r in rows),
        "strict_violations": sum(r["strict_violations"] for r in rows),
        "min_slack": min(r["min_slack"] for r in rows),
        "candidates": sum(r["candidates"] for r in rows),
    }
    summary["passed"] = not (summary["proper_violations"] or summary["bound_violations"]
                             or summary["strict_violations"])
    return ExperimentResult("strong-properness", {"loss": loss.name, "N_min": N_min, "N_max": N_max,
                                                  "trials_p": trials_p}, rows, summary, seed)


def run_concentration(loss: LocalLoss | str, p, q, m: int, trials: int, gamma: float,
                      seed: int = 0) -> ExperimentResult:
    """Fraction of trials where the empirical loss of q misses its expectation by gamma or more."""
    loss = get_loss(loss)
    p, q = as_distribution(p), as_distribution(q)
    true = expected_loss(loss, q, p)
    vq = loss.values(q.probs)
    cdf = np.cumsum(p.probs)
    devs = np.empty(trials)
    for t in range(trials):
        idx = draw_indices(p, m, trial_rng(seed, t), cdf)
        emp = float(vq[idx].mean())
        devs[t] = abs(emp - true) if math.isfinite(true) else math.inf
    fails = devs >= gamma
    summary = summarize(devs, fails)
    summary["true_loss"] = true
    summary["infinite_true_loss"] = not math.isfinite(true)
    rows = [{"trial": t, "deviation": float(d), "failed": bool(f)} for t, (d, f) in enumerate(zip(devs, fails))]
    return ExperimentResult("concentration", {"loss": loss.name, "N": p.N, "m": m, "trials": trials,
                                              "gamma": gamma}, rows, summary, seed)


def deviation_slope(loss: LocalLoss | str, p, q, ms=(100, 1000, 10_000), trials: int = 300,
                    seed: int = 0) -> tuple[float, list[float]]:
    """Least-squares slope of log median deviation against log m."""
    meds = []
    for k, m in enumerate(ms):
        r = run_concentration(loss, p, q, m, trials, math.inf, seed + k)
        meds.append(r.summary["median"])
    slope = float(np.polyfit(np.log(ms), np.log(meds), 1)[0])
    return slope, meds


def run_sample_properness(loss: LocalLoss | str, p, q, m: int, trials: int, seed: int = 0) -> ExperimentResult:
    """How often p's empirical loss beats q's on m samples from p."""
    loss = get_loss(loss)
    p, q = as_distribution(p), as_distribution(q)
    vq, vp = loss.values(q.probs), loss.values(p.probs)
    with np.errstate(invalid="ignore"):
        diff = np.where(np.isposinf(vq) & np.isfinite(vp), np.inf, vq - vp)
    cdf = np.cumsum(p.probs)
    rows = []
    wins = ties = 0
    for t in range(trials):
        idx = draw_indices(p, m, trial_rng(seed, t), cdf)
        d = diff[idx]
        gap = math.inf if np.any(np.isposinf(d)) else math.fsum(d.tolist()) / m
        wins += gap > 0
        ties += gap == 0
        rows.append({"trial": t, "empirical_gap": gap})
    summary = {"success_fraction": wins / trials, "tie_fraction": ties / trials,
               "reversal_fraction": (trials - wins - ties) / trials,
               "true_gap": expected_loss(loss, q, p) - expected_loss(loss, p, p)}
    return ExperimentResult("sample-properness", {"loss": loss.name, "N": p.N, "m": m, "trials": trials},
                            rows, summary, seed)


def demo_logloss_nonconcentration(N: int, m: int, trials: int, seed: int = 0,
                                  allow_dense: bool = False) -> ExperimentResult:
    """p uniform, q uniform off one point: the true log loss is infinite yet most samples miss that point."""
    if m > N / 10 and not allow_dense:
        raise ParameterOutOfRange(f"m={m} exceeds N/10={N / 10}; pass allow_dense to override")
    p = core.uniform(N)
    qv = np.full(N, 1.0 / (N - 1)) if N > 1 else np.ones(1)
    qv[0] = 0.0
    q = validate_distribution(qv)
    loss = get_loss("log")
    vq = loss.values(q.probs)
    cdf = np.cumsum(p.probs)
    finite = np.empty(trials, dtype=bool)
    for t in range(trials):
        idx = draw_indices(p, m, trial_rng(seed, t), cdf)
        finite[t] = bool(np.all(np.isfinite(vq[idx])))
    frac = float(finite.mean())
    expected = (1 - 1 / N) ** m
    sigma = math.sqrt(expected * (1 - expected) / trials)
    summary = {"finite_fraction": frac, "expected_fraction": expected, "sigma": sigma,
               "z": (frac - expected) / sigma if sigma > 0 else (0.0 if frac == expected else math.inf),
               "true_loss": expected_loss(loss, q, p)}
    rows = [{"trial": t, "finite_empirical": bool(f)} for t, f in enumerate(finite)]
    return ExperimentResult("logloss-nonconcentration", {"N": N, "m": m, "trials": trials}, rows, summary, seed)


def linear_demo_pair(N: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """The target p (half its support) and the calibrated q that linear loss cannot separate."""
    if N % 2:
        raise OddDomain(f"N must be even, got {N}")
    if N < 8:
        raise InvalidShape(f"N must be at least 8, got {N}")
    s = 1 / math.sqrt(m)
    if s >= 0.25:
        raise InvalidShape(f"m={m} too small: need 1/sqrt(m) < 1/4")
    h = N // 2
    p = np.zeros(N)
    p[0], p[1] = 0.25 + s, 0.25 - s
    p[2:h] = 1 / (2 * (h - 2))
    q = np.empty(N)
    q[0] = q[1] = 0.25
    q[2:] = 1 / (2 * (N - 2))
    return p, q


def demo_linear_loss_improperness(N: int, m: int, trials: int, seed: int = 0,
                                  allow_dense: bool = False) -> ExperimentResult:
    """Fraction of trials where the calibrated but far q beats p under linear loss on the sample."""
    if m > N / 10 and not allow_dense:
        raise ParameterOutOfRange(f"m={m} exceeds N/10={N / 10}; pass allow_dense to override")
    pv, qv = linear_demo_pair(N, m)
    p, q = validate_distribution(pv), validate_distribution(qv)
    cal = core.is_calibrated(q, p, tol=1e-12)
    levels = core.level_sets(q).levels
    structure = (levels.get(0.25) == (0, 1) and len(levels) == 2)
    loss = get_loss("linear")
    diff = loss.values(qv) - loss.values(pv)
    cdf = np.cumsum(pv)
    rev = np.empty(trials, dtype=bool)
    for t in range(trials):
        idx = draw_indices(p, m, trial_rng(seed, t), cdf)
        rev[t] = math.fsum(diff[idx].tolist()) < 0
    summary = {"reversal_fraction": float(rev.mean()), "calibrated": bool(cal), "structure_ok": bool(structure),
               "max_discrepancy": cal.max_discrepancy, "l1_distance": core.l1_distance(p, q)}
    rows = [{"trial": t, "reversed": bool(r)} for t, r in enumerate(rev)]
    return ExperimentResult("linear-improperness", {"N": N, "m": m, "trials": trials}, rows, summary, seed)


def run_construction(q, p, params: ApproxCalibrationParams, trials: int, seed: int = 0,
                     multiplier: float = 1.0) -> ExperimentResult:
    """Repeat the approximate-calibration construction and certify each output against p."""
    q, p = as_distribution(q), as_distribution(p)
    sampler = Sampler(p)
    rows = []
    for t in range(trials):
        qp, trace = make_approx_calibrated(q, sampler, params, seed=seed, trial=t, multiplier=multiplier)
        rep = is_approx_calibrated(qp, p, params)
        rows.append({"trial": t, "certified": bool(rep), "l1_to_input": core.l1_distance(q, qp),
                     "exception_mass": rep.exception_mass, "low_buckets": len(trace.low),
                     "high_buckets": len(trace.high)})
    fails = [not r["certified"] for r in rows]
    d = [r["l1_to_input"] for r in rows]
    summary = summarize(d, fails)
    summary["K"] = float(np.median(d)) / (params.alpha1 + params.alpha2)
    summary["samples_per_run"] = construction_sample_count(q.N, params, multiplier)
    summary["allowed_failure"] = params.delta + 3 * math.sqrt(params.delta / trials)
    return ExperimentResult("construction", {"N": q.N, "alpha1": params.alpha1, "alpha2": params.alpha2,
                                             "delta": params.delta, "trials": trials,
                                             "multiplier": multiplier}, rows, summary, seed)


def random_coarsening(p, blocks: int, rng: np.random.Generator) -> np.ndarray:
    """Calibrated q obtained by averaging p over a random partition into ``blocks`` parts."""
    p = as_distribution(p)
    labels = rng.permutation(np.arange(p.N) % blocks)
    sums = np.bincount(labels, weights=p.probs, minlength=blocks)
    sizes = np.bincount(labels, minlength=blocks)
    return sums[labels] / sizes[labels]
