"""
Monte Carlo tests: empirical versus analytic ROC, reproducibility and scaled sweeps
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.models.schemas import DetectionOutcome, GainVector, StreamLabel, SweepResult, TrialPlan
from app.services import montecarlo_service as montecarlo
from app.services import model_service as model
from app.services.allocator_service import waterfill_massive
from app.services.bounds_service import pd_bound_high_power, pd_bound_low_power
from app.services.detector_service import threshold_for_pfa
from tests.conftest import TARGET_PFA, default_network


def _binomial_tolerance(p, trials, sigmas=3.0):
    return sigmas * math.sqrt(p * (1 - p) / trials) + 1.0 / trials


def _outcome(params, channel_index, trials, power_budget=1.0, seed=2014):
    channel = model.draw_channel(params, model.random_stream(seed, StreamLabel.CHANNEL, channel_index))
    gains = waterfill_massive(params, power_budget)
    threshold = threshold_for_pfa(model.g_exact(channel, gains, params), params.signal_var, TARGET_PFA)
    streams = model.TrialStreams.derive(seed, 0, channel_index, montecarlo.MULTI_PATH)
    return montecarlo.estimate_roc(params, channel, gains, threshold, trials, streams, batch_size=1000)


# ==================== ESTIMATION ====================

def test_zero_gains_never_detect(network_params):
    """g = 0: both empirical rates are zero and the outcome is flagged"""
    channel = model.draw_channel(network_params, np.random.default_rng(1))
    outcome = montecarlo.estimate_roc(
        network_params, channel, GainVector.zeros(10), 0.0, 500, model.TrialStreams.derive(1, 0))
    assert outcome.degenerate
    assert outcome.pd_empirical == outcome.pfa_empirical == 0.0


def test_single_channel_matches_analytic(network_params):
    outcome = _outcome(network_params, channel_index=0, trials=10_000)
    assert outcome.pfa_analytic == pytest.approx(TARGET_PFA, rel=1e-12)
    assert abs(outcome.pfa_empirical - TARGET_PFA) <= _binomial_tolerance(TARGET_PFA, 10_000, sigmas=4.0)
    assert abs(outcome.pd_empirical - outcome.pd_analytic) <= _binomial_tolerance(outcome.pd_analytic, 10_000, 4.0)


def test_batch_size_does_not_change_counts(network_params):
    channel = model.draw_channel(network_params, np.random.default_rng(2))
    gains = waterfill_massive(network_params, 0.5)
    threshold = threshold_for_pfa(model.g_exact(channel, gains, network_params), 1.0, TARGET_PFA)
    counts = {
        batch: montecarlo.estimate_roc(
            network_params, channel, gains, threshold, 3000, model.TrialStreams.derive(2, 0), batch_size=batch)
        for batch in (3000, 1000)
    }
    # consecutive batches consume each stream in order
    assert counts[3000].detections == counts[1000].detections
    assert counts[3000].false_alarms == counts[1000].false_alarms


def _outcome_with_pd(pd_empirical, pd_analytic=0.5, trials=10_000):
    return DetectionOutcome(
        trials=trials, detections=int(round(pd_empirical * trials)), false_alarms=500,
        pd_empirical=pd_empirical, pfa_empirical=0.05, pd_analytic=pd_analytic, pfa_analytic=0.05,
        g_value=1.0, threshold=1.0,
    )


def test_agreement_band_is_three_sigma_plus_one_trial():
    """pd = 0.5, T = 10^4: band 0.015, one trial 1e-4"""
    outcome = _outcome_with_pd(0.51505)
    assert outcome.pd_sigma_band == pytest.approx(0.015, rel=1e-12)
    assert outcome.resolution_allowance == 1e-4
    assert outcome.pd_agrees
    assert not _outcome_with_pd(0.5152).pd_agrees
    assert not _outcome_with_pd(0.4848).pd_agrees


def test_channels_agree_with_analytic(network_params):
    """Most channels land within 3 sigma of the analytic PD and PFA"""
    outcomes = [_outcome(network_params, k, trials=2000) for k in range(20)]
    pd_agree = np.mean([o.pd_agrees for o in outcomes])
    pfa_agree = np.mean([
        abs(o.pfa_empirical - o.pfa_analytic) <= _binomial_tolerance(o.pfa_analytic, o.trials) for o in outcomes
    ])
    assert pd_agree >= 0.9
    assert pfa_agree >= 0.9


@pytest.mark.slow
def test_channels_agree_with_analytic_full_trials(network_params):
    """100 channels x 10^4 trials"""
    outcomes = [_outcome(network_params, k, trials=10_000) for k in range(100)]
    assert np.mean([o.pd_agrees for o in outcomes]) >= 0.99
    assert np.mean([
        abs(o.pfa_empirical - o.pfa_analytic) <= _binomial_tolerance(o.pfa_analytic, o.trials) for o in outcomes
    ]) >= 0.99


# ==================== CHANNEL TASKS ====================

def _task(params, grid_index=0, channel_index=0, trials=200, budget=0.5):
    return montecarlo.ChannelTask(
        params=params, power_budget=budget, target_pfa=TARGET_PFA, trials=trials,
        base_seed=5, grid_index=grid_index, channel_index=channel_index, batch_size=1000,
    )


def test_channel_draw_ignores_trial_count(network_params):
    """Channel realization k is the same however many trials run on it"""
    short = montecarlo.simulate_channel(_task(network_params, trials=100))
    long = montecarlo.simulate_channel(_task(network_params, trials=300))
    assert short.multi.g_value == long.multi.g_value
    assert short.single.g_value == long.single.g_value


def test_channel_shared_across_grid_points(network_params):
    first = montecarlo.simulate_channel(_task(network_params, grid_index=0))
    second = montecarlo.simulate_channel(_task(network_params, grid_index=3))
    assert first.multi.g_value == second.multi.g_value


def test_single_path_stays_below_its_bound(network_params):
    for k in range(10):
        result = montecarlo.simulate_channel(_task(network_params, channel_index=k, budget=0.05))
        assert result.single.pd_analytic <= result.single_low_power_bound + 1e-12


# ==================== SWEEPS ====================

def test_sweep_single_point(network_params):
    service = montecarlo.MonteCarloService(workers=1)
    result = service.sweep_power(network_params, [1.0], TrialPlan(trials_per_channel=100, channel_realizations=2))
    assert len(result.grid) == len(result.pd_multi) == len(result.bound_overlays["ub_multi"]) == 1
    assert result.antennas == [50]


def test_sweep_deterministic_across_workers(network_params):
    plan = TrialPlan(trials_per_channel=200, channel_realizations=4, base_seed=3)
    serial = montecarlo.MonteCarloService(workers=1).sweep_power(network_params, [0.1, 1.0], plan)
    again = montecarlo.MonteCarloService(workers=1).sweep_power(network_params, [0.1, 1.0], plan)
    pooled = montecarlo.MonteCarloService(workers=2).sweep_power(network_params, [0.1, 1.0], plan)
    assert serial == again
    assert serial == pooled


def test_sweep_seed_changes_results(network_params):
    service = montecarlo.MonteCarloService(workers=1)
    first = service.sweep_power(network_params, [0.1], TrialPlan(trials_per_channel=200, channel_realizations=3,
                                                                 base_seed=1))
    second = service.sweep_power(network_params, [0.1], TrialPlan(trials_per_channel=200, channel_realizations=3,
                                                                  base_seed=2))
    assert first.pd_analytic_multi != second.pd_analytic_multi


def test_single_antenna_fusion_center_grid(network_params):
    """M = 1 runs through the same machinery"""
    service = montecarlo.MonteCarloService(workers=1)
    result = service.sweep_antennas(network_params, [1], TrialPlan(trials_per_channel=1000, channel_realizations=10))
    assert result.antennas == [1]
    assert result.agreement_fraction >= 0.9
    assert result.pd_analytic_single[0] <= result.bound_overlays["ub_single"][0] + 1e-12


def test_roc_sweep_tracks_targets(network_params):
    service = montecarlo.MonteCarloService(workers=1)
    grid = [0.05, 0.2, 0.5]
    result = service.sweep_pfa(network_params, grid, 0.5, TrialPlan(trials_per_channel=2000, channel_realizations=5))
    for target, pfa in zip(grid, result.pfa_multi):
        assert abs(pfa - target) <= _binomial_tolerance(target, 10_000, sigmas=4.0)
    assert result.pd_multi == sorted(result.pd_multi)


def test_sweep_result_rejects_ragged_columns():
    with pytest.raises(ValidationError):
        SweepResult(
            grid=[1.0, 2.0], power=[1.0], antennas=[50, 50],
            pd_multi=[0.5, 0.6], pd_single=[0.1, 0.2], pd_analytic_multi=[0.5, 0.6],
            pd_analytic_single=[0.1, 0.2], pfa_multi=[0.05, 0.05], pfa_single=[0.05, 0.05],
        )


# ==================== SCALED FIGURE CHECKS ====================

@pytest.mark.slow
def test_power_sweep_scaled():
    """M = 50: multi-antenna PD grows with P toward its ceiling and beats the single-antenna FC"""
    params = default_network()
    grid = [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
    plan = TrialPlan(trials_per_channel=2000, channel_realizations=60, base_seed=2014)
    result = montecarlo.MonteCarloService(workers=2).sweep_power(params, grid, plan, TARGET_PFA)

    pd = result.pd_multi
    assert all(later >= earlier - 0.01 for earlier, later in zip(pd, pd[1:]))
    assert abs(pd[-1] - pd_bound_high_power(params, TARGET_PFA)) <= 0.03
    assert pd[0] / result.pd_single[0] >= 1.5
    for budget, multi, single in zip(grid, pd, result.pd_single):
        if budget <= 1.0:
            assert multi > single
    assert result.agreement_fraction >= 0.99


@pytest.mark.slow
def test_antenna_sweep_scaled():
    """P shrinking as 1/M holds the multi-antenna PD while the single-antenna PD decays"""
    params = default_network()
    antennas = [50, 100, 200, 400]
    plan = TrialPlan(trials_per_channel=2000, channel_realizations=60, base_seed=2014)
    result = montecarlo.MonteCarloService(workers=2).sweep_antennas(params, antennas, plan, TARGET_PFA)

    pd = result.pd_multi
    assert max(pd) - min(pd) < 0.05
    for value, low, high in zip(pd, result.bound_overlays["lb_multi"], result.bound_overlays["ub_multi"]):
        assert low - 0.03 <= value <= high + 0.01
    assert result.bound_overlays["lb_multi"][0] == pytest.approx(pd_bound_low_power(params, TARGET_PFA))

    single = result.pd_analytic_single
    ceiling = result.bound_overlays["ub_single"]
    assert all(s <= c + 1e-12 for s, c in zip(single, ceiling))
    assert result.pd_single[-1] < result.pd_single[0]
    assert ceiling[-1] - single[-1] < ceiling[0] - single[0]
