import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from calibloss import core
from calibloss.errors import DomainMismatch, ParameterOutOfRange, ViolationAt, ZeroMassBucket
from calibloss.losses import (LocalLoss, builtin_catalog, check_left_strong_concavity, empirical_loss,
                              expected_loss, get_loss, jensen_gap, jensen_gap_lower_bound, log_loss, loss_gap,
                              loss_value, rate_b)

pairs = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0.01, 1), min_size=n, max_size=n), st.lists(st.floats(0.01, 1), min_size=n, max_size=n)))


def norm(v):
    v = np.asarray(v)
    return v / v.sum()


class TestCatalog:
    def test_six_unique_families(self):
        names = [f.name for f in builtin_catalog()]
        assert len(names) == 6 and len(set(names)) == 6

    def test_powlog_one_is_log(self):
        z = np.geomspace(1, 1e6, 20)
        np.testing.assert_allclose(get_loss("powlog:1").f(z), np.log(z))

    def test_powlog_range(self):
        with pytest.raises(ParameterOutOfRange):
            get_loss("powlog:1.5")

    def test_closed_form_values(self):
        assert get_loss("loglog").rate_C(np.array([math.e]))[0] == pytest.approx(2.0)
        assert get_loss("sqlog").f(np.array([1.0]))[0] == pytest.approx(4.0)

    def test_sqlog_growth_constant(self):
        # max of (2 + ln z)^2 / sqrt(z) is at z = e^2
        z = np.geomspace(1, 1e9, 20000)
        assert np.max(get_loss("sqlog").f(z) / np.sqrt(z)) == pytest.approx(16 / math.e, rel=1e-6)

    def test_unknown(self):
        with pytest.raises(KeyError):
            get_loss("hinge")


class TestLossValues:
    def test_examples(self):
        assert loss_value(get_loss("log"), core.uniform(4), 0) == pytest.approx(math.log(4))
        assert loss_value(get_loss("log"), [0.0, 1.0], 0) == math.inf
        assert loss_value(get_loss("linear"), [0.3, 0.7], 0) == pytest.approx(-0.3)
        assert loss_value(get_loss("linear"), [0.0, 1.0], 0) == 0.0

    def test_loglog_outside_domain_warns(self):
        with pytest.warns(RuntimeWarning):
            v = loss_value(get_loss("loglog"), [0.5, 0.5], 0)
        assert v == pytest.approx(math.log(math.log(2)))
        with pytest.warns(RuntimeWarning):
            v = loss_value(get_loss("loglog"), [1.0, 0.0], 0)
        # clamped just above e, where loglog is (nearly) zero
        assert 0 < v < 1e-11

    def test_expected_loss_conventions(self):
        log = get_loss("log")
        assert expected_loss(log, core.uniform(4), core.uniform(4)) == pytest.approx(math.log(4))
        # zero p mass on a zero q entry contributes nothing
        assert math.isfinite(expected_loss(log, [0.0, 1.0], [0.0, 1.0]))
        with pytest.raises(DomainMismatch):
            expected_loss(log, [0.5, 0.5], [1.0, 0.0, 0.0])

    def test_linear_calibrated_example(self):
        lin = get_loss("linear")
        p = [1 / 3, 2 / 3]
        assert expected_loss(lin, p, p) == pytest.approx(-5 / 9)
        assert expected_loss(lin, [0.5, 0.5], p) == pytest.approx(-0.5)

    @given(pairs)
    def test_kl_identity(self, pq):
        p, q = norm(pq[0]), norm(pq[1])
        gap = expected_loss(get_loss("log"), q, p) - expected_loss(get_loss("log"), p, p)
        assert gap == pytest.approx(core.kl_divergence(p, q), abs=1e-9)
        assert loss_gap(get_loss("log"), q, p) == pytest.approx(core.kl_divergence(p, q), abs=1e-12)

    def test_empirical_loss(self):
        log = get_loss("log")
        d = core.Domain(3)
        one = core.EmpiricalDistribution(d, np.array([0, 5, 0]), 5)
        q = [0.2, 0.3, 0.5]
        assert empirical_loss(log, q, one) == pytest.approx(math.log(1 / 0.3))
        exact = core.EmpiricalDistribution(d, np.array([1, 1, 2]), 4)
        assert empirical_loss(log, q, exact) == pytest.approx(expected_loss(log, q, [0.25, 0.25, 0.5]))
        assert empirical_loss(log, [0.0, 0.5, 0.5], exact) == math.inf


class TestConcavity:
    @pytest.mark.parametrize("loss", builtin_catalog(), ids=lambda f: f.name)
    def test_catalog_metadata(self, loss):
        rep = check_left_strong_concavity(loss)
        assert rep.ok and rep.min_slack >= -1e-9 and rep.z.size == 400

    def test_log_is_tight(self):
        rep = check_left_strong_concavity(get_loss("log"))
        assert np.max(np.abs(rep.slack)) < 1e-15

    def test_sqlog_slack(self):
        rep = check_left_strong_concavity(get_loss("sqlog"))
        np.testing.assert_allclose(rep.slack, 2 * np.log(rep.z) / rep.z ** 2, rtol=1e-9, atol=1e-300)

    def test_overclaimed_rate_is_caught(self):
        base = log_loss()
        bad = LocalLoss(**{**base.__dict__, "name": "log-overclaim", "rate_C": lambda z: 2.0 + 0 * z})
        with pytest.raises(ViolationAt) as e:
            check_left_strong_concavity(bad)
        assert e.value.slack == pytest.approx(-1.0)

    def test_bad_growth_is_caught(self):
        base = log_loss()
        bad = LocalLoss(**{**base.__dict__, "growth_c": 0.1})
        with pytest.raises(ViolationAt, match="growth"):
            check_left_strong_concavity(bad)

    def test_inverse_concavity_direction(self):
        rep = check_left_strong_concavity(get_loss("log"))
        assert rep.inverse_premise and rep.inverse_conclusion


class TestJensenGap:
    def test_worked_example(self):
        b = jensen_gap_lower_bound([0.1, 0.3, 0.6], [0, 1], rate_b(get_loss("log")))
        assert b == pytest.approx(0.0078125, rel=1e-12)
        assert jensen_gap(get_loss("log"), [0.1, 0.3, 0.6], [0, 1]) == pytest.approx(0.13081203594113696,
                                                                                      rel=1e-12)

    def test_uniform_block(self):
        assert jensen_gap_lower_bound([0.25, 0.25, 0.5], [0, 1], lambda z: 1 / z ** 2) == 0

    def test_log_scale_invariance(self):
        # doubling p on the block doubles eps, p(B) and t; with b(mu) = 1/mu^2 the bound is unchanged
        f = lambda z: 1 / z ** 2
        a = jensen_gap_lower_bound([0.05, 0.15, 0.8], [0, 1], f)
        b = jensen_gap_lower_bound([0.1, 0.3, 0.6], [0, 1], f)
        assert b == pytest.approx(a, rel=1e-12)

    def test_zero_mass(self):
        with pytest.raises(ZeroMassBucket):
            jensen_gap_lower_bound([0.0, 0.0, 1.0], [0, 1], lambda z: 1.0)

    @pytest.mark.parametrize("loss", builtin_catalog(), ids=lambda f: f.name)
    def test_soundness(self, loss):
        rng = np.random.default_rng(7)
        for _ in range(300):
            k = int(rng.integers(2, 6))
            p = rng.dirichlet(np.ones(k + 4))
            if p.max() > 1 / loss.z_min:
                continue
            block = list(range(k))
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                assert jensen_gap(loss, p, block) >= jensen_gap_lower_bound(p, block, rate_b(loss)) - 1e-12
