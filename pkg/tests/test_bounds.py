"""
Closed-form bound tests
"""
import numpy as np
import pytest

from app.models.errors import ConfigurationError, DomainError
from app.models.schemas import ChannelRealization, StreamLabel
from app.services import bounds_service as bounds
from app.services import model_service as model
from app.services.allocator_service import single_antenna_gains, waterfill_massive
from app.services.detector_service import analytic_roc, threshold_for_pfa
from tests.conftest import TARGET_PFA, default_network, make_params, random_params


def test_g_upper_bound():
    params = make_params(n_sensors=3, meas_noise_vars=[0.25, 0.5, 1.0])
    assert bounds.g_upper_bound(params) == pytest.approx(7.0, rel=1e-15)


def test_g_upper_bound_dominates_feasible_allocations(network_params, rng):
    ceiling = bounds.g_upper_bound(network_params)
    for _ in range(100):
        x = 10.0 ** rng.uniform(-4, 4) * rng.dirichlet(np.ones(10))
        assert model.g_asymptotic(x, network_params) < ceiling


def test_pd_bound_edges():
    """No signal leaves PD at the false-alarm level"""
    assert bounds.pd_bound(0.05, 3.0, 0.0) == pytest.approx(0.05, rel=1e-15)
    assert bounds.pd_bound(0.05, 0.0, 1.0) == pytest.approx(0.05, rel=1e-15)
    with pytest.raises(DomainError):
        bounds.pd_bound(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        bounds.pd_bound(0.05, -1.0, 1.0)


def test_high_power_bound_example():
    """sigma_theta^2 sum 1/sigma_v^2 = 1 gives sqrt(pfa)"""
    params = make_params(meas_noise_vars=[1.0])
    assert bounds.pd_bound_high_power(params, TARGET_PFA) == pytest.approx(0.05 ** 0.5, rel=1e-14)


def test_low_power_bound_example():
    """sigma_theta^2 sum 1/sigma_v^2 = 3 gives pfa^(1/2)"""
    params = make_params(signal_var=3.0, meas_noise_vars=[1.0])
    assert bounds.pd_bound_low_power(params, TARGET_PFA) == pytest.approx(0.05 ** 0.5, rel=1e-14)


def test_implied_low_power_budget():
    """(1/2M) sigma_n^2 d^{2 alpha} / sigma_v^2 with M = 1, d = 1"""
    params = make_params(fc_noise_var=0.3, meas_noise_vars=[0.5])
    assert bounds.implied_low_power_budget(params) == pytest.approx(0.3, rel=1e-14)


def test_bounds_ordered(rng):
    for _ in range(100):
        params = random_params(rng, int(rng.integers(1, 11)), int(rng.integers(1, 500)))
        pfa = float(rng.uniform(0.001, 0.5))
        low = bounds.pd_bound_low_power(params, pfa)
        high = bounds.pd_bound_high_power(params, pfa)
        assert pfa < low < high < 1.0


def test_high_power_bound_caps_finite_antenna_pd():
    """Analytic PD of the waterfill detector on an actual channel stays below the ceiling"""
    params = default_network()
    ceiling = bounds.pd_bound_high_power(params, TARGET_PFA)
    for k, budget in enumerate(np.logspace(-2, 3, 11)):
        gains = waterfill_massive(params, float(budget))
        channel = model.draw_channel(params, model.random_stream(4, StreamLabel.CHANNEL, k))
        g = model.g_exact(channel, gains, params)
        pd = analytic_roc(g, params.signal_var, threshold_for_pfa(g, params.signal_var, TARGET_PFA)).pd
        assert pd <= ceiling


def test_low_power_bound_met_by_waterfill():
    """At the implied budget the waterfill gains reach at least the low-power PD"""
    for M in (50, 100, 200, 400, 500):
        params = default_network(n_antennas=M)
        budget = bounds.implied_low_power_budget(params)
        g = model.g_asymptotic(waterfill_massive(params, budget).powers, params)
        assert bounds.pd_bound(TARGET_PFA, g, params.signal_var) >= bounds.pd_bound_low_power(params, TARGET_PFA)


def test_single_antenna_bounds_vanishing_power(rng):
    params = make_params(n_sensors=10, meas_noise_vars=rng.uniform(0.25, 0.5, 10).tolist())
    channel = model.draw_channel(params, rng)
    result = bounds.single_antenna_pd_bounds(params, channel, 1e-9, TARGET_PFA)
    assert result.low_power_bound == pytest.approx(TARGET_PFA, abs=1e-6)
    assert result.high_power_bound == bounds.pd_bound_high_power(params, TARGET_PFA)


def test_single_antenna_bounds_unit_channel(scalar_params):
    """P = sigma_n^2 and |h|^2 = 1 make the low-power g equal 1"""
    result = bounds.single_antenna_pd_bounds(scalar_params, ChannelRealization(matrix=[[1.0]]), 0.3, TARGET_PFA)
    assert result.low_power_bound == pytest.approx(0.05 ** 0.5, rel=1e-12)


def test_single_antenna_bound_dominates_quality(rng):
    """g_s(a) never exceeds the low-power quality P ||h||^2 / sigma_n^2"""
    for _ in range(50):
        params = random_params(rng, 5, 1)
        channel = model.draw_channel(params, rng)
        budget = float(10.0 ** rng.uniform(-3, 1))
        g = model.single_antenna_quality(channel, single_antenna_gains(channel, params, budget), params)
        ceiling = budget * np.sum(np.abs(channel.h) ** 2) / params.fc_noise_var
        assert g <= ceiling * (1 + 1e-12)


def test_single_antenna_bounds_need_one_antenna(network_params):
    channel = model.draw_channel(network_params, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        bounds.single_antenna_pd_bounds(network_params, channel, 1.0, TARGET_PFA)
