"""Monte Carlo estimation of PD/PFA and the parameter sweeps built on it"""
from app.config import get_settings
from app.models.schemas import (
    ChannelRealization,
    ChannelResult,
    DetectionOutcome,
    GainVector,
    Hypothesis,
    NetworkParams,
    StreamLabel,
    SweepResult,
    TrialPlan,
)
from app.services.allocator_service import single_antenna_gains, waterfill_massive
from app.services.bounds_service import (
    implied_low_power_budget,
    pd_bound_high_power,
    pd_bound_low_power,
    single_antenna_pd_bounds,
)
from app.services.detector_service import (
    analytic_roc,
    count_exceedances,
    statistic_from_weights,
    threshold_for_pfa,
)
from app.services.model_service import (
    TrialStreams,
    draw_channel,
    draw_received,
    g_exact,
    random_stream,
    steering_solution,
)
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence
import numpy as np
import logging
import os

logger = logging.getLogger(__name__)

# Trial-stream index of each fusion center architecture
MULTI_PATH = 0
SINGLE_PATH = 1


def estimate_roc(
    params: NetworkParams,
    channel: ChannelRealization,
    gains: GainVector,
    threshold: float,
    trials: int,
    streams: TrialStreams,
    batch_size: Optional[int] = None,
) -> DetectionOutcome:
    """Empirical PD and PFA from `trials` tests under each hypothesis.

    The threshold is expected to come from threshold_for_pfa with g_exact of
    this (channel, gains) pair; the analytic pair is reported alongside.
    """
    batch_size = batch_size or get_settings().trial_batch_size
    solution = steering_solution(channel, gains, params)

    exceedances = {}
    for hypothesis in (Hypothesis.H0, Hypothesis.H1):
        count = 0
        for start in range(0, trials, batch_size):
            batch = min(batch_size, trials - start)
            *_, received = draw_received(channel, gains, params, hypothesis, batch, streams)
            statistics = statistic_from_weights(received, solution.weights, params.signal_var)
            count += count_exceedances(statistics, threshold)
        exceedances[hypothesis] = count

    roc = analytic_roc(solution.g_value, params.signal_var, threshold)
    if roc.degenerate:
        logger.warning("Zero detection quality (g = 0): detector never declares H1")

    return DetectionOutcome(
        trials=trials,
        detections=exceedances[Hypothesis.H1],
        false_alarms=exceedances[Hypothesis.H0],
        pd_empirical=exceedances[Hypothesis.H1] / trials,
        pfa_empirical=exceedances[Hypothesis.H0] / trials,
        pd_analytic=roc.pd,
        pfa_analytic=roc.pfa,
        g_value=solution.g_value,
        threshold=threshold,
        degenerate=roc.degenerate,
    )


@dataclass(frozen=True)
class ChannelTask:
    """Work unit: both FC architectures on one channel realization at one grid point"""
    params: NetworkParams
    power_budget: float
    target_pfa: float
    trials: int
    base_seed: int
    grid_index: int
    channel_index: int
    batch_size: int


def simulate_channel(task: ChannelTask) -> ChannelResult:
    """Waterfill gains on an M-antenna channel and optimal gains on an independent single-antenna channel"""
    params = task.params
    budget = task.power_budget

    channel = draw_channel(params, random_stream(task.base_seed, StreamLabel.CHANNEL, task.channel_index))
    gains = waterfill_massive(params, budget)
    threshold = threshold_for_pfa(g_exact(channel, gains, params), params.signal_var, task.target_pfa)
    multi = estimate_roc(
        params, channel, gains, threshold, task.trials,
        TrialStreams.derive(task.base_seed, task.grid_index, task.channel_index, MULTI_PATH),
        task.batch_size,
    )

    single_params = params.with_antennas(1)
    single_channel = draw_channel(
        single_params, random_stream(task.base_seed, StreamLabel.SINGLE_CHANNEL, task.channel_index)
    )
    # y = a^H h theta + ... is the M = 1 signal model evaluated at conj(a)
    transmit = single_antenna_gains(single_channel, single_params, budget).conjugate()
    single_threshold = threshold_for_pfa(
        g_exact(single_channel, transmit, single_params), params.signal_var, task.target_pfa
    )
    single = estimate_roc(
        single_params, single_channel, transmit, single_threshold, task.trials,
        TrialStreams.derive(task.base_seed, task.grid_index, task.channel_index, SINGLE_PATH),
        task.batch_size,
    )
    bounds = single_antenna_pd_bounds(single_params, single_channel, budget, task.target_pfa)
    return ChannelResult(
        channel_index=task.channel_index,
        multi=multi,
        single=single,
        single_low_power_bound=bounds.low_power_bound,
    )


@dataclass(frozen=True)
class _PointSummary:
    pd_multi: float
    pd_single: float
    pd_analytic_multi: float
    pd_analytic_single: float
    pfa_multi: float
    pfa_single: float
    single_low_power_bound: float
    agreeing: int
    compared: int


def _summarize(results: Sequence[ChannelResult]) -> _PointSummary:
    """Arithmetic means over channels, in channel-index order"""
    ordered = sorted(results, key=lambda r: r.channel_index)

    def mean(values) -> float:
        return float(np.mean(np.fromiter(values, dtype=float)))

    comparable = [o for r in ordered for o in (r.multi, r.single) if not o.degenerate]
    return _PointSummary(
        pd_multi=mean(r.multi.pd_empirical for r in ordered),
        pd_single=mean(r.single.pd_empirical for r in ordered),
        pd_analytic_multi=mean(r.multi.pd_analytic for r in ordered),
        pd_analytic_single=mean(r.single.pd_analytic for r in ordered),
        pfa_multi=mean(r.multi.pfa_empirical for r in ordered),
        pfa_single=mean(r.single.pfa_empirical for r in ordered),
        single_low_power_bound=mean(r.single_low_power_bound for r in ordered),
        agreeing=sum(o.pd_agrees for o in comparable),
        compared=len(comparable),
    )


class MonteCarloService:
    """Runs channel tasks serially or on a process pool with an ordered reduction"""

    def __init__(self, workers: Optional[int] = None):
        self.settings = get_settings()
        self.workers = workers or self.settings.workers or os.cpu_count() or 1
        logger.info(f"Monte Carlo service initialized with {self.workers} worker(s)")

    def run_tasks(self, tasks: Sequence[ChannelTask]) -> List[ChannelResult]:
        """Results in task order regardless of worker count"""
        if self.workers <= 1 or len(tasks) <= 1:
            return [simulate_channel(task) for task in tasks]
        chunksize = max(1, len(tasks) // (4 * self.workers))
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(simulate_channel, tasks, chunksize=chunksize))

    def _run_grid(
        self,
        point_params: Sequence[NetworkParams],
        budgets: Sequence[float],
        pfas: Sequence[float],
        plan: TrialPlan,
    ) -> List[_PointSummary]:
        tasks = [
            ChannelTask(
                params=params,
                power_budget=budget,
                target_pfa=pfa,
                trials=plan.trials_per_channel,
                base_seed=plan.base_seed,
                grid_index=grid_index,
                channel_index=channel_index,
                batch_size=self.settings.trial_batch_size,
            )
            for grid_index, (params, budget, pfa) in enumerate(zip(point_params, budgets, pfas))
            for channel_index in range(plan.channel_realizations)
        ]
        results = self.run_tasks(tasks)
        per_point = plan.channel_realizations
        summaries = []
        for grid_index in range(len(budgets)):
            summary = _summarize(results[grid_index * per_point:(grid_index + 1) * per_point])
            logger.debug(f"Grid point {grid_index}: P={budgets[grid_index]:.4g}, "
                         f"M={point_params[grid_index].n_antennas}, PD={summary.pd_multi:.4f}, "
                         f"PD_s={summary.pd_single:.4f}")
            summaries.append(summary)
        return summaries

    @staticmethod
    def _assemble(
        grid: Sequence[float],
        point_params: Sequence[NetworkParams],
        budgets: Sequence[float],
        summaries: Sequence[_PointSummary],
        overlays: Dict[str, List[float]],
        metadata: Dict,
    ) -> SweepResult:
        compared = sum(s.compared for s in summaries)
        agreeing = sum(s.agreeing for s in summaries)
        return SweepResult(
            grid=[float(v) for v in grid],
            power=[float(p) for p in budgets],
            antennas=[p.n_antennas for p in point_params],
            pd_multi=[s.pd_multi for s in summaries],
            pd_single=[s.pd_single for s in summaries],
            pd_analytic_multi=[s.pd_analytic_multi for s in summaries],
            pd_analytic_single=[s.pd_analytic_single for s in summaries],
            pfa_multi=[s.pfa_multi for s in summaries],
            pfa_single=[s.pfa_single for s in summaries],
            bound_overlays=overlays,
            agreement_fraction=agreeing / compared if compared else 1.0,
            metadata=metadata,
        )

    @staticmethod
    def _metadata(experiment: str, params: NetworkParams, plan: TrialPlan, target_pfa: Optional[float]) -> Dict:
        return {
            "experiment": experiment,
            "network": params.model_dump(),
            "plan": plan.model_dump(),
            "seed": plan.base_seed,
            "target_pfa": target_pfa,
        }

    def sweep_power(
        self,
        params: NetworkParams,
        power_grid: Sequence[float],
        plan: TrialPlan,
        target_pfa: float = 0.05,
    ) -> SweepResult:
        """PD of both FCs versus the gain budget P at fixed M"""
        logger.info(f"Power sweep: {len(power_grid)} points, M={params.n_antennas}, "
                    f"{plan.channel_realizations} channels x {plan.trials_per_channel} trials")
        point_params = [params] * len(power_grid)
        summaries = self._run_grid(point_params, power_grid, [target_pfa] * len(power_grid), plan)
        ceiling = pd_bound_high_power(params, target_pfa)
        overlays = {
            "ub_multi": [ceiling] * len(power_grid),
            "ub_single_low_power": [s.single_low_power_bound for s in summaries],
        }
        return self._assemble(power_grid, point_params, power_grid, summaries, overlays,
                              self._metadata("sweep-power", params, plan, target_pfa))

    def sweep_antennas(
        self,
        params: NetworkParams,
        antenna_grid: Sequence[int],
        plan: TrialPlan,
        target_pfa: float = 0.05,
    ) -> SweepResult:
        """PD versus M with the budget shrinking as P = (1/2M) sum sigma_n^2 d_i^{2 alpha} / sigma_v,i^2"""
        logger.info(f"Antenna sweep: M in {list(antenna_grid)}, "
                    f"{plan.channel_realizations} channels x {plan.trials_per_channel} trials")
        point_params = [params.with_antennas(int(m)) for m in antenna_grid]
        budgets = [implied_low_power_budget(p) for p in point_params]
        summaries = self._run_grid(point_params, budgets, [target_pfa] * len(budgets), plan)
        overlays = {
            "lb_multi": [pd_bound_low_power(p, target_pfa) for p in point_params],
            "ub_multi": [pd_bound_high_power(p, target_pfa) for p in point_params],
            "ub_single": [s.single_low_power_bound for s in summaries],
        }
        return self._assemble([int(m) for m in antenna_grid], point_params, budgets, summaries, overlays,
                              self._metadata("sweep-antennas", params, plan, target_pfa))

    def sweep_pfa(
        self,
        params: NetworkParams,
        pfa_grid: Sequence[float],
        power_budget: float,
        plan: TrialPlan,
    ) -> SweepResult:
        """Empirical ROC of both FCs at fixed P and M"""
        logger.info(f"ROC sweep: {len(pfa_grid)} false-alarm targets, P={power_budget}, M={params.n_antennas}")
        point_params = [params] * len(pfa_grid)
        budgets = [power_budget] * len(pfa_grid)
        summaries = self._run_grid(point_params, budgets, pfa_grid, plan)
        overlays = {"ub_multi": [pd_bound_high_power(params, pfa) for pfa in pfa_grid]}
        return self._assemble(pfa_grid, point_params, budgets, summaries, overlays,
                              self._metadata("roc", params, plan, None))


# Global instance
_montecarlo_service: "MonteCarloService" = None  # type: ignore


def get_montecarlo_service() -> MonteCarloService:
    """Get or create the Monte Carlo service instance"""
    global _montecarlo_service
    if _montecarlo_service is None:
        _montecarlo_service = MonteCarloService()
    return _montecarlo_service
