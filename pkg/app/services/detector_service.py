"""Neyman-Pearson detector on the scalar statistic sigma_theta^2 |a^H H^H C_w^{-1} y|^2"""
from app.models.errors import DomainError
from app.models.schemas import (
    ChannelRealization,
    DetectorConfig,
    GainVector,
    Hypothesis,
    NetworkParams,
    RocPoint,
)
from app.services.model_service import steering_solution
from typing import List, Sequence, Union
import numpy as np
import math
import logging

logger = logging.getLogger(__name__)


def statistic_from_weights(received: np.ndarray, weights: np.ndarray, signal_var: float) -> Union[float, np.ndarray]:
    """sigma_theta^2 |w^H y|^2 for one y (shape (M,)) or a batch (shape (T, M))"""
    projection = np.asarray(received) @ np.conj(weights)
    statistic = signal_var * np.abs(projection) ** 2
    return float(statistic) if np.ndim(statistic) == 0 else statistic


def test_statistic(
    received: np.ndarray,
    channel: ChannelRealization,
    gains: GainVector,
    params: NetworkParams,
) -> Union[float, np.ndarray]:
    """T = sigma_theta^2 |a^H H^H C_w^{-1} y|^2 (rank-one quadratic form as a squared magnitude)"""
    solution = steering_solution(channel, gains, params)
    return statistic_from_weights(received, solution.weights, params.signal_var)


def _check_pfa(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"Target false-alarm probability must lie in (0, 1), got {epsilon}")


def threshold_for_pfa(g: float, signal_var: float, epsilon: float) -> float:
    """gamma' = -sigma_theta^2 g ln(epsilon)"""
    _check_pfa(epsilon)
    if g < 0:
        raise DomainError(f"g must be non-negative, got {g}")
    return -signal_var * g * math.log(epsilon)


def analytic_roc(g: float, signal_var: float, threshold: float) -> RocPoint:
    """Closed-form PD and PFA of the threshold test.

    PFA = exp(-gamma'/(sigma^2 g)), PD = exp(-gamma'/(sigma^4 g^2 + sigma^2 g)).
    With g = 0 the statistic is identically zero, so the test never fires.
    """
    if g <= 0:
        logger.debug("Degenerate detector (g = 0): never declares H1")
        return RocPoint(pd=0.0, pfa=0.0, degenerate=True)
    snr = signal_var * g
    pfa = math.exp(-threshold / snr)
    pd = math.exp(-threshold / (snr * snr + snr))
    return RocPoint(pd=pd, pfa=pfa)


def log_ratio(g: float, signal_var: float) -> float:
    """ln PD / ln PFA = 1 / (1 + sigma_theta^2 g), the criterion minimized over the gains"""
    return 1.0 / (1.0 + signal_var * g)


def roc_curve(g: float, signal_var: float, pfa_grid: Sequence[float]) -> List[float]:
    """Analytic PD at each false-alarm target"""
    return [analytic_roc(g, signal_var, threshold_for_pfa(g, signal_var, pfa)).pd for pfa in pfa_grid]


def build_detector(g: float, signal_var: float, target_pfa: float) -> DetectorConfig:
    return DetectorConfig(
        g_value=g,
        signal_var=signal_var,
        target_pfa=target_pfa,
        threshold=threshold_for_pfa(g, signal_var, target_pfa),
    )


def decide(statistic: float, threshold: float) -> Hypothesis:
    """H1 iff the statistic strictly exceeds the threshold; ties go to H0"""
    return Hypothesis.H1 if statistic > threshold else Hypothesis.H0


def count_exceedances(statistics: np.ndarray, threshold: float) -> int:
    """Number of H1 decisions in a batch, same tie rule as decide"""
    return int(np.count_nonzero(np.asarray(statistics) > threshold))
