import math

import pytest
from hypothesis import given, strategies as st

from squeezetrack import DomainError
from squeezetrack import quantum_noise as qn


def model(eta=1.0, overlap=1.0, flux=1.0, v=1.0):
    return qn.DetectionModel(efficiency=eta, mode_overlap=overlap, scattered_flux=flux, squeezed_variance=v)


etas = st.floats(min_value=1e-3, max_value=1.0)
variances = st.floats(min_value=1e-3, max_value=1.0)
fluxes = st.floats(min_value=1e-3, max_value=1e20)
overlaps = st.floats(min_value=1e-3, max_value=1e9)


class TestScatteredFlux:
    def test_four_pi_cancels(self):
        geom = qn.ScatteringGeometry(4 * math.pi * 1e-12, 1e16, 1e-6)
        assert qn.scattered_flux(geom) == pytest.approx(1e16, rel=1e-12)

    def test_linear_in_cross_section(self):
        a = qn.scattered_flux(qn.ScatteringGeometry(1e-12, 1e16, 1e-6))
        b = qn.scattered_flux(qn.ScatteringGeometry(2e-12, 1e16, 1e-6))
        assert b == pytest.approx(2 * a, rel=1e-14)

    def test_value(self):
        # 1e16 / (4 pi) by hand
        assert qn.scattered_flux(qn.ScatteringGeometry(1e-12, 1e16, 1e-6)) == pytest.approx(7.9577e14, rel=1e-4)

    @pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(DomainError):
            qn.ScatteringGeometry(*bad)


class TestQnl:
    def test_identity(self):
        assert qn.qnl(model()) == 1.0

    def test_quadrupled_flux_halves(self):
        assert qn.qnl(model(flux=4.0)) == pytest.approx(0.5, rel=1e-15)

    def test_value(self):
        assert qn.qnl(model(0.85, 1e6, 1e12)) == pytest.approx(1.0847e-12, rel=1e-4)

    @pytest.mark.parametrize("kw", [dict(eta=0.0), dict(eta=1.2), dict(flux=0.0), dict(overlap=-1.0), dict(v=0.0)])
    def test_domain(self, kw):
        with pytest.raises(DomainError):
            model(**kw)

    @given(etas, overlaps, fluxes)
    def test_inverse_sqrt_flux(self, eta, overlap, flux):
        a = qn.qnl(model(eta, overlap, flux))
        b = qn.qnl(model(eta, overlap, 4 * flux))
        assert b == pytest.approx(a / 2, rel=1e-14)


class TestMeasuredSensitivity:
    @given(etas, overlaps, fluxes)
    def test_coherent_state_reaches_qnl(self, eta, overlap, flux):
        m = model(eta, overlap, flux, 1.0)
        assert qn.measured_sensitivity(m) == qn.qnl(m)

    def test_lossless_half_variance(self):
        m = model(1.0, 1.0, 1.0, 0.5)
        assert qn.measured_sensitivity(m) == pytest.approx(1 / math.sqrt(2), rel=1e-15)

    def test_value(self):
        # sqrt(1 - 0.85 * 0.749) = 0.602785...
        m = model(0.85, 1e6, 1e12, 0.251)
        assert qn.measured_sensitivity(m) / qn.qnl(m) == pytest.approx(0.60279, abs=1e-5)

    @given(etas, st.floats(min_value=1e-3, max_value=0.999), st.floats(min_value=1e-4, max_value=0.5))
    def test_monotone_in_variance(self, eta, v, dv):
        lo = qn.measured_sensitivity(model(eta, v=v))
        hi = qn.measured_sensitivity(model(eta, v=v + dv))
        assert hi >= lo

    def test_antisqueezed(self):
        assert qn.measured_sensitivity(model(1.0, v=3.0)) == pytest.approx(math.sqrt(3.0))


class TestDetectedVariance:
    def test_lossless(self):
        assert qn.detected_variance(1.0, 0.3) == pytest.approx(0.3, abs=1e-15)

    @given(etas)
    def test_coherent(self, eta):
        assert qn.detected_variance(eta, 1.0) == 1.0

    def test_measured_figure(self):
        assert qn.db_to_variance(2.8) == pytest.approx(0.525, abs=1e-3)

    @given(etas, variances)
    def test_loss_only_degrades(self, eta, v):
        d = qn.detected_variance(eta, v)
        assert v - 1e-15 <= d <= 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            qn.detected_variance(0.0, 0.5)
        with pytest.raises(DomainError):
            qn.detected_variance(0.5, 0.0)


class TestStringentQnl:
    def test_unit_efficiency(self):
        m = model(1.0, 3e5, 7e11)
        assert qn.stringent_qnl(m) == pytest.approx(qn.qnl(m), rel=1e-15)

    @given(etas, etas, overlaps, fluxes)
    def test_efficiency_cancels(self, e1, e2, overlap, flux):
        assert qn.stringent_qnl(model(e1, overlap, flux)) == qn.stringent_qnl(model(e2, overlap, flux))

    @given(etas, overlaps, fluxes)
    def test_relation_to_qnl(self, eta, overlap, flux):
        m = model(eta, overlap, flux)
        assert qn.stringent_qnl(m) == pytest.approx(math.sqrt(eta) * qn.qnl(m), rel=1e-13)

    def test_yeast_margin(self):
        assert qn.stringent_margin_db(2.4, 0.85) == pytest.approx(1.69, abs=5e-3)

    def test_margin_consistent_with_sensitivities(self):
        m = model(0.85, 1e6, 1e12, 1.0)
        meas = qn.qnl(m) * math.sqrt(qn.db_to_variance(2.4))
        margin = -20 * math.log10(meas / qn.stringent_qnl(m))
        assert margin == pytest.approx(qn.stringent_margin_db(2.4, 0.85), rel=1e-12)


class TestTrapLeak:
    def budget(self, leak=0.0, src=6.0, loss=0.19):
        return qn.SqueezingBudget(src, loss, 100e-6, leak)

    def test_no_leak_unchanged(self):
        b = self.budget()
        assert qn.trap_leak_variance(b) == pytest.approx(qn.detected_variance(0.81, qn.db_to_variance(6.0)), rel=1e-15)

    def test_infinite_leak_is_shot_noise(self):
        assert qn.leak_admixture(0.3, 100e-6, math.inf) == 1.0
        assert qn.leak_admixture(0.3, 100e-6, 1e6) == pytest.approx(1.0, abs=1e-9)

    def test_preset_value(self):
        # (0.525 * 100 + 11.9) / 111.9 = 0.57551
        p = qn.leak_power(170e-3, 7e-5)
        assert p == pytest.approx(11.9e-6, rel=1e-12)
        v = qn.leak_admixture(0.525, 100e-6, p)
        assert v == pytest.approx(64.4 / 111.9, rel=1e-12)
        assert qn.variance_to_db(v) == pytest.approx(2.40, abs=5e-3)

    def test_detected_override(self):
        b = self.budget(leak=11.9e-6)
        assert qn.trap_leak_variance(b, detected=0.525) == pytest.approx(64.4 / 111.9, rel=1e-12)

    @given(variances, st.floats(min_value=0, max_value=1.0), st.floats(min_value=0, max_value=1.0))
    def test_monotone_and_bounded(self, v, p1, p2):
        lo, hi = sorted((p1, p2))
        a = qn.leak_admixture(v, 100e-6, lo)
        b = qn.leak_admixture(v, 100e-6, hi)
        assert a <= b + 1e-15
        assert b <= 1.0 + 1e-15

    def test_negative_power(self):
        with pytest.raises(DomainError):
            qn.leak_admixture(0.5, 100e-6, -1.0)
        with pytest.raises(DomainError):
            qn.SqueezingBudget(6.0, 0.19, 100e-6, -1e-6)
        with pytest.raises(DomainError):
            qn.leak_power(-1.0, 7e-5)


class TestDecibels:
    def test_zero(self):
        assert qn.variance_to_db(1.0) == 0.0

    def test_forty_two_percent(self):
        assert qn.db_to_variance(2.4) == pytest.approx(0.575, abs=1e-3)
        assert qn.power_reduction(2.4) == pytest.approx(0.425, abs=1e-3)

    def test_measured(self):
        assert qn.db_to_variance(2.8) == pytest.approx(0.525, abs=1e-3)

    @given(st.floats(min_value=1e-3, max_value=1e3))
    def test_round_trip(self, v):
        assert qn.db_to_variance(qn.variance_to_db(v)) == pytest.approx(v, rel=1e-12)

    @pytest.mark.parametrize("v", [0.0, -1.0])
    def test_domain(self, v):
        with pytest.raises(DomainError):
            qn.variance_to_db(v)


class TestRateGain:
    @pytest.mark.parametrize("g, expected", [(0.0, 0.0), (0.5, 3.0)])
    def test_exact(self, g, expected):
        assert qn.measurement_rate_gain(g) == pytest.approx(expected, abs=1e-15)

    def test_yeast(self):
        assert qn.measurement_rate_gain(0.22) == pytest.approx(0.643, abs=1e-3)

    @pytest.mark.parametrize("g", [1.0, 1.5, -0.1])
    def test_domain(self, g):
        with pytest.raises(DomainError):
            qn.measurement_rate_gain(g)


def test_budget_report():
    r = qn.budget_report()
    assert r["detected_variance"] == pytest.approx(0.525, abs=1e-3)
    assert r["power_reduction"] == pytest.approx(0.425, abs=1e-3)
    assert r["stringent_margin_db"] == pytest.approx(1.69, abs=5e-3)
    assert r["rate_gain"] == pytest.approx(0.643, abs=1e-3)
