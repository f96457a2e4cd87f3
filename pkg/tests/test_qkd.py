import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sarpsim import qkd
from sarpsim.qkd import ChannelParams, CoinFlipParams, QkdParams

TABLE = QkdParams()
LOSSES = np.arange(0.0, 45.0, 0.25)


def rate(params, loss, mode="asymptotic"):
    r = qkd.secure_key_rate(params, ChannelParams(loss), mode)
    return r.r_asym if mode == "asymptotic" else r.r_finite


def scan_tolerable(params, mode):
    """0.01 dB linear scan; last loss before the rate first turns non-positive."""
    last = None
    for i in range(int(qkd.MAX_LOSS_DB / qkd.LOSS_STEP_DB) + 1):
        loss = round(i * qkd.LOSS_STEP_DB, 2)
        if not rate(params, loss, mode) > 0:
            break
        last = loss
    return last


class TestPrimitives:
    @pytest.mark.parametrize("mu, g2, expect", [(0.1, 0.005, 2.5e-5), (0.0, 0.3, 0.0),
                                                (0.144, 0.005, 5.184e-5)])
    def test_multiphoton(self, mu, g2, expect):
        assert qkd.multiphoton_prob(mu, g2) == pytest.approx(expect, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("x, h", [(0.5, 1.0), (0.0, 0.0), (1.0, 0.0)])
    def test_entropy_exact(self, x, h):
        assert qkd.binary_entropy(x) == h

    def test_entropy_reference(self):
        from decimal import Decimal, getcontext
        getcontext().prec = 40
        x, y = Decimal("0.11"), Decimal("0.89")
        oracle = float(-(x * x.ln() + y * y.ln()) / Decimal(2).ln())  # 0.4999159...
        assert qkd.binary_entropy(0.11) == pytest.approx(oracle, abs=1e-12)

    def test_entropy_domain(self):
        with pytest.raises(ValueError):
            qkd.binary_entropy(1.5)

    @pytest.mark.parametrize("kw", [dict(mu=1.5), dict(eps=0.0), dict(f_ec=0.9), dict(rep_rate=-1.0),
                                    dict(g2=-0.1), dict(mu_assumed=2.0)])
    def test_params_invalid(self, kw):
        with pytest.raises(ValueError):
            QkdParams(**kw)

    def test_channel_invalid(self):
        with pytest.raises(ValueError):
            ChannelParams(-1.0)


class TestRate:
    def test_dark_count_limit(self):
        res = qkd.secure_key_rate(TABLE, ChannelParams(60.0), "finite")
        assert res.secure_bits == 0.0 and res.r_asym <= 0

    def test_positive_at_zero_loss(self):
        assert rate(TABLE, 0.0) > 0

    def test_higher_mu_trades_loss_for_rate(self):
        hi = qkd.with_mu(TABLE, 0.144)
        assert rate(hi, 0.0) > rate(TABLE, 0.0)
        assert qkd.tolerable_loss(hi, "asymptotic") < qkd.tolerable_loss(TABLE, "asymptotic")

    def test_finite_converges(self):
        long = QkdParams(accum_time=1e6)
        res = qkd.secure_key_rate(long, ChannelParams(10.0), "finite")
        assert res.r_finite == pytest.approx(res.r_asym, rel=0.01)

    def test_finite_below_asymptotic(self):
        for loss in LOSSES:
            res = qkd.secure_key_rate(TABLE, ChannelParams(loss), "finite")
            assert res.r_finite <= res.r_asym

    def test_negative_rates_reported(self):
        res = qkd.secure_key_rate(TABLE, ChannelParams(34.0), "finite")
        assert res.r_finite < 0 and res.secure_bits == 0.0

    def test_small_block_diagnostic(self):
        res = qkd.secure_key_rate(QkdParams(accum_time=1e-9), ChannelParams(20.0), "finite")
        assert res.secure_bits == 0.0 and not res.defined and "N_sift" in res.diagnostic

    def test_tagging_vanishes(self):
        p = QkdParams(g2=0.0, p_dc=0.0)
        for loss in (0.0, 10.0, 25.0):
            res = qkd.secure_key_rate(p, ChannelParams(loss), "asymptotic")
            e = p.e_det * p.mu * ChannelParams(loss).transmission / res.p_click
            h = qkd.binary_entropy(e)
            assert res.delta_tagged == 0.0
            assert res.r_asym == pytest.approx(p.q_sift * p.q_key * res.p_click * (1 - (1 + p.f_ec) * h),
                                               rel=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            qkd.secure_key_rate(TABLE, ChannelParams(), "decoy")


class TestMonotonicity:
    """Rates below zero are clamped for the comparison; see the loss-sweep note in the README."""

    @staticmethod
    def nonincreasing(values):
        v = np.maximum(np.asarray(values), 0.0)
        return np.all(np.diff(v) <= 1e-18)

    def test_loss(self):
        assert self.nonincreasing([rate(TABLE, l) for l in LOSSES])

    @pytest.mark.parametrize("field, grid", [("e_det", np.linspace(0.0, 0.1, 21)),
                                             ("g2", [0.0, 0.001, 0.005, 0.05, 0.5, 1.0]),
                                             ("f_ec", np.linspace(1.0, 2.0, 11))])
    def test_parameters(self, field, grid):
        from dataclasses import replace
        for loss in (0.0, 15.0, 30.0):
            assert self.nonincreasing([rate(replace(TABLE, **{field: g}), loss) for g in grid])

    def test_tolerable_loss_in_g2(self):
        from dataclasses import replace
        tl = [qkd.tolerable_loss(replace(TABLE, g2=g), "asymptotic") for g in (0.005, 0.05, 0.5)]
        assert tl[0] > tl[1] > tl[2]


class TestTolerableLoss:
    @pytest.mark.parametrize("mode", ["asymptotic", "finite"])
    def test_matches_scan(self, mode):
        tl = qkd.tolerable_loss(TABLE, mode)
        assert tl is not None and tl > 0
        assert tl == scan_tolerable(TABLE, mode)

    def test_no_key(self):
        assert qkd.tolerable_loss(QkdParams(e_det=0.2)) is None

    def test_low_mu_lower_rate_everywhere(self):
        lo = QkdParams(mu=0.056, mu_assumed=0.1)
        nominal = QkdParams(mu=0.1, mu_assumed=0.1)
        for loss in LOSSES:
            r_nom = rate(nominal, loss)
            if r_nom > 0:
                assert rate(lo, loss) < r_nom
            else:
                assert rate(lo, loss) <= 0

    @pytest.mark.xfail(strict=True, reason="the GLLP variant used gives a 2.5 dB gap at these parameters")
    def test_low_mu_tolerable_loss_close(self):
        a = qkd.tolerable_loss(QkdParams(mu=0.056, mu_assumed=0.1), "asymptotic")
        b = qkd.tolerable_loss(QkdParams(mu=0.1, mu_assumed=0.1), "asymptotic")
        assert abs(a - b) <= 0.2

    def test_rate_curve(self):
        curve = qkd.rate_curve(TABLE, [0.0, 10.0, 60.0], "asymptotic")
        assert curve[0] > curve[1] > 0 >= curve[2]


@given(mu=st.floats(0.0, 1.0), g2=st.floats(0.0, 2.0), e_det=st.floats(0.0, 0.5),
       p_dc=st.floats(0.0, 1e-2), loss=st.floats(0.0, 120.0), eta=st.floats(0.0, 1.0),
       t=st.floats(1e-6, 1e6), mu_assumed=st.one_of(st.none(), st.floats(0.0, 1.0)))
def test_probabilities_bounded(mu, g2, e_det, p_dc, loss, eta, t, mu_assumed):
    p = QkdParams(mu=mu, g2=g2, e_det=e_det, p_dc=p_dc, accum_time=t, mu_assumed=mu_assumed)
    for mode in ("asymptotic", "finite"):
        res = qkd.secure_key_rate(p, ChannelParams(loss, eta), mode)
        for v in (res.p_click, res.qber, res.delta_tagged):
            assert 0.0 <= v <= 1.0
        assert res.secure_bits >= 0.0 and math.isfinite(res.r_asym)
        if mode == "finite" and res.n_sift >= 1:
            assert res.r_finite <= res.r_asym


class TestCoinFlip:
    cf = CoinFlipParams()

    def test_calibrated_fair(self):
        assert qkd.coinflip_fairness(self.cf, self.cf.mu_nominal).diff == 0.0

    def test_signs(self):
        assert qkd.coinflip_fairness(self.cf, 0.144).diff > 0
        assert qkd.coinflip_fairness(self.cf, 0.056).diff < 0

    def test_strictly_increasing(self):
        d = [qkd.coinflip_fairness(self.cf, m).diff for m in np.linspace(0.01, 0.3, 59)]
        assert np.all(np.diff(d) > 0)

    def test_alice_constant(self):
        alice = {qkd.coinflip_fairness(self.cf, m).p_cheat_alice for m in (0.05, 0.1, 0.2)}
        assert len(alice) == 1

    @given(st.floats(1e-4, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_probabilities(self, mu, a, eta):
        res = qkd.coinflip_fairness(CoinFlipParams(a=a, eta=eta), mu)
        assert a <= res.p_cheat_bob <= 1.0 and a <= res.p_cheat_alice <= 1.0

    def test_invalid_mu(self):
        with pytest.raises(ValueError):
            qkd.coinflip_fairness(self.cf, 0.0)


class TestPncCurve:
    def test_resonant_examples(self):
        out = dict(qkd.pnc_vs_area([math.pi, math.pi / 2], "resonant"))
        assert out[math.pi] == pytest.approx(0.0, abs=1e-15)
        assert out[math.pi / 2] == pytest.approx(0.5, abs=1e-15)

    def test_area_mapping(self):
        seen = []
        qkd.pnc_vs_area([math.pi, 3 * math.pi], "chirped", lambda p: seen.extend(p) or np.zeros(len(p)))
        assert seen == pytest.approx([1.0, 3.0])

    def test_chirped_plateau(self):
        theta = np.linspace(2.5, 6.0, 8) * math.pi
        assert all(v < 0.05 for _, v in qkd.pnc_vs_area(theta, "chirped"))

    def test_rejects(self):
        with pytest.raises(ValueError):
            qkd.pnc_vs_area([-1.0])
        with pytest.raises(ValueError):
            qkd.pnc_vs_area([1.0], "square")
