"""One test per acceptance criterion, each at its stated tolerance.

Every check prints a PASS/FAIL line; the lines are collected again in the
terminal summary.  Two sub-checks are known to be unattainable as stated
and are marked ``xfail(strict=True)``: they run unchanged and would turn
the suite red if they ever started passing.
"""
import math
import time

import numpy as np
import pytest

from calibloss import core, harness, scoring, trigram
from calibloss.calibrate import ApproxCalibrationParams
from calibloss.losses import builtin_catalog, check_left_strong_concavity, get_loss
from calibloss.bounds import concentration_bound

LOSSES = ["log", "powlog:0.5", "loglog", "sqlog", "linear", "negsqrt"]


@pytest.fixture(scope="module")
def sweeps():
    t0 = time.perf_counter()
    out = {name: harness.sweep_strong_properness(name, N_max=8, trials_p=200, seed=0) for name in LOSSES}
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sweep_targets():
    """The same 200 targets the sweep draws, with every calibrated candidate."""
    out = []
    for name in ("log", "loglog"):
        loss = get_loss(name)
        Ns = list(range(3 if loss.z_min > 1 else 2, 9))
        for t in range(200):
            rng = core.trial_rng(0, t)
            pv = harness._loss_ready_p(loss, Ns[t % len(Ns)], rng)
            out.append((pv, core.calibrated_matrix(pv)))
    return out


def random_pairs(count, N_max, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, N_max + 1))
        yield rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))


class TestAcceptance:
    @pytest.mark.slow
    def test_01_strict_properness(self, sweeps, verdict):
        res, elapsed = sweeps
        bad = {k: (r.summary["proper_violations"], r.summary["strict_violations"]) for k, r in res.items()}
        ok = all(a == 0 and b == 0 for a, b in bad.values()) and elapsed < 60
        cands = sum(r.summary["candidates"] for r in res.values())
        verdict("1 strict calibrated properness", ok,
                f"{cands} candidates over {len(LOSSES)} losses, violations {bad}, {elapsed:.1f}s")

    def test_02_strong_properness_bound(self, sweeps, verdict):
        res, _ = sweeps
        bad = sum(r.summary["bound_violations"] for r in res.values())
        slack = min(r.summary["min_slack"] for r in res.values())
        verdict("2 strong properness bound", bad == 0, f"{bad} violations, min slack {slack:.3g}")

    def test_03_kl_pinsker(self, verdict):
        log = get_loss("log")
        err, slack = 0.0, math.inf
        for p, q in random_pairs(10_000, 64, 3):
            gap = math.fsum((p * (log.f(1 / q) - log.f(1 / p))).tolist())
            kl = core.kl_divergence(p, q)
            err = max(err, abs(gap - kl))
            slack = min(slack, kl - 0.5 * core.l1_distance(p, q) ** 2)
        verdict("3 KL identity and Pinsker", err <= 1e-9 and slack >= 0,
                f"max |gap - KL| {err:.2e}, min Pinsker slack {slack:.2e}")

    def test_04_conditional_inverse_mean(self, sweep_targets, verdict):
        worst = 0.0
        for pv, Q in sweep_targets:
            for q in Q:
                for t, block in core.level_sets(q).levels.items():
                    worst = max(worst, abs(core.conditional_inverse_mean(pv, block) - 1 / t))
        verdict("4 conditional inverse mean", worst <= 1e-9, f"max error {worst:.2e}")

    def test_05_calibrated_mass_bound(self, sweep_targets, verdict):
        worst = math.inf
        for pv, Q in sweep_targets:
            N = pv.size
            worst = min(worst, float(np.min(Q - pv / N)))
        N = 7
        witness = core.min_mass_ratio(core.uniform(N), core.point_mass(N, 2))
        ok = worst >= -1e-12 and witness == pytest.approx(1 / N, abs=1e-15)
        verdict("5 calibrated mass bound", ok, f"min q_x - p_x/N {worst:.3g}, witness ratio {witness:.6f}")

    def test_06a_bregman_agreement(self, verdict):
        err, quad = 0.0, 0.0
        for p, q in random_pairs(10_000, 64, 6):
            for g in ("shannon", "quad", "invroot"):
                direct = scoring.expected_generated_loss(g, q, p) - scoring.expected_generated_loss(g, p, p)
                err = max(err, abs(scoring.divergence(g, p, q) - direct))
            quad = max(quad, abs(scoring.divergence("quad", p, q) - 0.5 * float(np.sum((p - q) ** 2))))
        verdict("6 Bregman agreement and quadratic form", err <= 1e-9 and quad <= 1e-12,
                f"max identity error {err:.2e}, quadratic error {quad:.2e}")

    @pytest.mark.xfail(strict=True, reason="2 sum sqrt(q) has l1 rate 1/2, so only D >= l1^2/4 holds")
    def test_06b_inverse_root_half_l1(self, verdict):
        worst = min(scoring.divergence("invroot", p, q) / core.l1_distance(p, q) ** 2
                    for p, q in random_pairs(10_000, 64, 6))
        verdict("6 inverse-root divergence >= l1^2/2", worst >= 0.5, f"min D / l1^2 = {worst:.4f}")

    def test_07_l2_weakness(self, verdict):
        bad = [n for n in range(2, 2049, 2)
               if (e := scoring.l2_counterexample(n)).gap_times_N != 2 or e.l1_dist != 2]
        verdict("7 l2 counterexample", not bad, f"1024 even N checked exactly, failures {bad[:5]}")

    def test_08_logloss_nonconcentration(self, verdict):
        s = harness.demo_logloss_nonconcentration(10_000, 100, 1000, seed=0).summary
        verdict("8 log-loss non-concentration", abs(s["z"]) <= 3,
                f"finite fraction {s['finite_fraction']:.3f} vs {s['expected_fraction']:.5f}, z={s['z']:.2f}")

    def test_09a_linear_pair_calibrated(self, verdict):
        s = harness.demo_linear_loss_improperness(10_000, 100, 1000, seed=0).summary
        verdict("9 linear-loss pair is calibrated", s["calibrated"] and s["structure_ok"],
                f"max discrepancy {s['max_discrepancy']:.1e}, l1 distance {s['l1_distance']:.3f}")

    @pytest.mark.xfail(strict=True, reason="the reversal needs a 2*sqrt(2) sigma deviation; its rate is ~0.14%")
    def test_09b_linear_reversal_rate(self, verdict):
        s = harness.demo_linear_loss_improperness(10_000, 100, 1000, seed=0).summary
        verdict("9 linear-loss reversal >= 10%", s["reversal_fraction"] >= 0.10,
                f"reversal fraction {s['reversal_fraction']:.3f}")

    @pytest.mark.slow
    def test_10_concentration(self, verdict):
        gamma, delta = 0.1, 0.05
        rep = concentration_bound("loglog", gamma, delta, 1e6, 1.0)
        m = math.ceil(rep.m)
        rng = np.random.default_rng(10)
        p = harness.random_full_support(1_000_000, rng)
        q = harness.random_coarsening(p, 1000, rng)
        fail = harness.run_concentration("loglog", p, q, m, 1000, gamma, seed=10).summary["failure_rate"]
        slope, _ = harness.deviation_slope("loglog", p, q, ms=(100, 1000, 10_000), trials=300, seed=20)
        ok = not rep.vacuous and fail <= delta and abs(slope + 0.5) <= 0.1
        verdict("10 concentration", ok, f"m={m}, failure rate {fail:.3f}, slope {slope:.3f}")

    def test_11_construction(self, verdict):
        params = ApproxCalibrationParams(0.3, 0.1, 0.1)
        rng = np.random.default_rng(11)
        p = harness.random_full_support(1000, rng)
        q = harness.random_coarsening(p, 20, rng)
        s = harness.run_construction(q, p, params, trials=200, seed=11).summary
        ok = s["failure_rate"] <= s["allowed_failure"] and s["median"] <= 5 * (params.alpha1 + params.alpha2)
        verdict("11 approximate-calibration construction", ok,
                f"failure {s['failure_rate']:.3f} (allowed {s['allowed_failure']:.3f}), median l1 "
                f"{s['median']:.2e}, K={s['K']:.4f}, {s['samples_per_run']} samples/run")

    def test_12_trigram(self, verdict):
        corpus = trigram.mix_noise(trigram.bundled("english"), trigram.bundled("foreign"), 0.12)
        band = np.round(np.linspace(1.3, 2.0, 8), 2)
        rows = trigram.experiment(corpus, alphas=(1.0, 1.4, *band))
        q1, q2, rest = rows[1], rows[2], rows[3:]

        def holds(r):
            return q1["log"] <= r["log"] and r["loglog"] <= q1["loglog"] and r["head_mass"] > q1["head_mass"]
        ok = holds(q2) and all(holds(r) for r in rest)
        verdict("12 trigram head/tail", ok,
                f"log {q1['log']:.3f}/{q2['log']:.3f}, loglog {q1['loglog']:.3f}/{q2['loglog']:.3f}, "
                f"head {q1['head_mass']:.3f}/{q2['head_mass']:.3f}, band {band[0]}..{band[-1]} "
                f"{'holds' if all(holds(r) for r in rest) else 'breaks'}")

    def test_13_concavity_metadata(self, verdict):
        worst = {}
        for loss in builtin_catalog():
            rep = check_left_strong_concavity(loss, raise_on_violation=False)
            worst[loss.name] = float(np.max(loss.f2(rep.z) + loss.rate_C(rep.z) / rep.z ** 2))
        ok = max(worst.values()) <= 1e-9
        verdict("13 concavity metadata", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
