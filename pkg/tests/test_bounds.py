import math

import numpy as np
import pytest

from calibloss import bounds
from calibloss.bounds import (approx_bounds, approx_strong_gap, concentration_bound, sample_properness_bound,
                              strong_properness_gap_bound)
from calibloss.errors import GrowthEnvelopeTooFast, ParameterOutOfRange
from calibloss.losses import LocalLoss, get_loss, log_loss

# frozen from a 40-digit mpmath evaluation
LN_BETA = 120.89757564549605643
M_LOG = 4378629.3346036257902
M_LOGLOG = 6887.6334029186611939


class TestStrongProperness:
    def test_values(self):
        assert strong_properness_gap_bound("log", 10, 0.5) == pytest.approx(0.25 / 128, rel=1e-15)
        assert strong_properness_gap_bound("linear", 100, 1.0) == pytest.approx(1 / 400 / 128, rel=1e-15)
        assert strong_properness_gap_bound("log", 10, 0.0) == 0.0

    def test_linear_scales_like_eps_cubed_over_N(self):
        a = strong_properness_gap_bound("linear", 100, 0.5)
        b = strong_properness_gap_bound("linear", 200, 0.25)
        assert a / b == pytest.approx(16.0)

    def test_range(self):
        with pytest.raises(ParameterOutOfRange):
            strong_properness_gap_bound("log", 10, 2.5)


class TestConcentration:
    def test_log_example(self):
        r = concentration_bound("log", 0.1, 0.05, 1e6, 1.0)
        assert r.ln_beta == pytest.approx(LN_BETA, rel=1e-13)
        assert r.m == pytest.approx(M_LOG, rel=1e-12)
        assert r.vacuous

    def test_loglog_example(self):
        r = concentration_bound("loglog", 0.1, 0.05, 1e6, 1.0)
        assert r.m == pytest.approx(M_LOGLOG, rel=1e-12)
        assert not r.vacuous

    def test_gamma_above_c_drops_min_term(self):
        r = concentration_bound("log", 1.0, 0.05, 10)
        assert r.ln_beta == pytest.approx(math.log(16) + 8 * math.log(10) - math.log(0.05))

    def test_log_space_safety(self):
        r = concentration_bound("powlog:0.5", 1e-3, 1e-6, 1e12)
        assert math.isfinite(r.ln_beta) and math.isfinite(r.ln_m)

    def test_monotone(self):
        g = [concentration_bound("log", x, 0.05, 1e6).ln_m for x in (0.05, 0.1, 0.5, 1.0)]
        d = [concentration_bound("log", 0.1, x, 1e6).ln_m for x in (0.01, 0.05, 0.5, 1 - 1e-9)]
        assert np.all(np.diff(g) <= 0) and np.all(np.diff(d) <= 0)

    def test_fast_growth_rejected(self):
        fast = LocalLoss(**{**log_loss().__dict__, "growth_r": 0.75})
        with pytest.raises(GrowthEnvelopeTooFast):
            concentration_bound(fast, 0.1, 0.05, 100)

    def test_negative_loss_rejected(self):
        with pytest.raises(ParameterOutOfRange):
            concentration_bound("linear", 0.1, 0.05, 100)


class TestSampleProperness:
    def test_frozen_value(self):
        r = sample_properness_bound("log", 0.5, 0.05, 100)
        assert r.ln_beta == pytest.approx(57.976703491673683437, rel=1e-13)
        assert r.ln_m == pytest.approx(11.989859954447114976, rel=1e-13)

    def test_halving_eps(self):
        a = sample_properness_bound("log", 0.4, 0.05, 1e4)
        b = sample_properness_bound("log", 0.2, 0.05, 1e4)
        ratio = math.exp(b.ln_m - a.ln_m)
        assert ratio == pytest.approx(16 * (b.ln_beta / a.ln_beta) ** 2, rel=1e-12)

    def test_delta_to_one(self):
        assert sample_properness_bound("log", 0.5, 1 - 1e-12, 100).m < 1e-6

    def test_monotone_in_eps(self):
        for name in ("log", "loglog", "sqlog", "powlog:0.5"):
            v = [sample_properness_bound(name, e, 0.05, 1e4).ln_m for e in (0.1, 0.2, 0.5, 1.0, 2.0)]
            assert np.all(np.diff(v) <= 0)


class TestApprox:
    def test_spec_parameters_negative_gap(self):
        g = approx_strong_gap("log", 1e4, 0.4, 0.0016, 0.0016)
        assert g == pytest.approx(-0.068274622718613478, rel=1e-12)

    def test_positive_gap_at_smaller_alphas(self):
        a1, a2 = 0.4 ** 2 / 1000, 0.4 ** 2 / (1000 * math.log(1e4))
        g = approx_strong_gap("log", 1e4, 0.4, a1, a2)
        assert g == pytest.approx(0.0036798662988258482, rel=1e-12)

    def test_zero_alphas_delegate(self):
        assert approx_strong_gap("log", 100, 0.5, 0, 0) == strong_properness_gap_bound("log", 100, 0.5)

    def test_converges_to_substituted_form(self):
        for name in ("log", "loglog", "sqlog"):
            loss = get_loss(name)
            for a in (1e-8, 1e-10):
                ref = float(loss.rate_C(np.array([1e4 / (2 * a)]))[0]) * 0.4 ** 2 / 32
                assert approx_strong_gap(loss, 1e4, 0.4, a, a) == pytest.approx(ref, rel=0.01)

    def test_three_kinds(self):
        r = approx_bounds("log", 1e4, 0.4, 1e-3, 1e-3, 0.1, 0.05)
        assert set(r) == {"approx-strong-proper", "approx-concentration", "approx-sample-proper"}
        assert r["approx-concentration"].ln_beta == pytest.approx(
            math.log(32) + 8 * math.log(1e4) - math.log(0.05) - 2 * math.log(0.1))

    def test_sample_kind_range(self):
        with pytest.raises(ParameterOutOfRange):
            approx_bounds("log", 1e4, 0.4, 0.1, 0.1, 0.1, 0.05)
        with pytest.raises(ParameterOutOfRange):
            approx_bounds("log", 1e4, 0.4, 0.6, 0.0, 0.1, 0.05)

    def test_compute_dispatch(self):
        for kind in bounds.KINDS:
            r = bounds.compute(kind, "log", 1e4, eps=0.4, gamma=0.1, delta=0.05, alpha1=1e-3, alpha2=1e-3)
            assert r.kind == kind
