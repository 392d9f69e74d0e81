"""Sensor gain allocation under the sum constraint a^H a = P"""
from app.models.errors import AllocationError, ConfigurationError, DomainError
from app.models.schemas import ChannelRealization, GainVector, NetworkParams, WaterfillSolution
from scipy.linalg import cho_factor, cho_solve
from typing import Tuple
import numpy as np
import logging

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 200
LEVEL_RTOL = 1e-6


def _check_budget(power_budget: float) -> None:
    if not power_budget > 0 or not np.isfinite(power_budget):
        raise DomainError(f"Power budget must be a positive finite number, got {power_budget}")


def _powers_at_level(water_level: float, params: NetworkParams) -> np.ndarray:
    """x_i(lambda) = (sqrt(M c_i / lambda) - c_i)^+ / (M sigma_v,i^2), c_i = sigma_n^2 d_i^{2 alpha}"""
    M = params.n_antennas
    floor = params.noise_floor
    excess = np.sqrt(M * floor / water_level) - floor
    return np.maximum(excess, 0.0) / (M * params.meas_noise)


def kkt_marginals(x: np.ndarray, params: NetworkParams) -> np.ndarray:
    """Per-sensor derivative of g_asymptotic: M c_i / (c_i + M sigma_v,i^2 x_i)^2"""
    M = params.n_antennas
    floor = params.noise_floor
    return M * floor / (floor + M * params.meas_noise * np.asarray(x, dtype=float)) ** 2


def waterfill_solution(params: NetworkParams, power_budget: float) -> WaterfillSolution:
    """Water-filling maximizer of g_asymptotic over {x >= 0, sum x = P}.

    Sum of x_i(lambda) is continuous and strictly decreasing wherever a sensor
    is active, so lambda is found by bisection (in log scale) between a level
    that switches every sensor off and one that gives every sensor at least P.
    """
    _check_budget(power_budget)
    M = params.n_antennas
    floor = params.noise_floor

    # every sensor off above `high`, every sensor above P below `low`; the factor 2 keeps
    # both strict once x_i(lambda) is rounded
    high = 2.0 * float(np.max(M / floor))
    low = 0.5 * float(np.min(M * floor / (floor + M * params.meas_noise * power_budget) ** 2))
    if not (np.sum(_powers_at_level(low, params)) > power_budget > np.sum(_powers_at_level(high, params))):
        raise AllocationError(f"Failed to bracket the water level for P={power_budget}")

    level = np.sqrt(low * high)
    iterations = 0
    for iterations in range(1, MAX_BISECTIONS + 1):
        level = np.sqrt(low * high)
        total = np.sum(_powers_at_level(level, params))
        if abs(total - power_budget) <= 1e-13 * power_budget or high <= np.nextafter(low, np.inf):
            break
        if total > power_budget:
            low = level
        else:
            high = level

    powers = _powers_at_level(level, params)
    total = float(np.sum(powers))
    error = abs(total - power_budget) / power_budget
    if not error <= LEVEL_RTOL:
        raise AllocationError(f"Water level search stopped at relative budget error {error:.3e}")
    # sqrt(M c_i / lambda) - c_i cancels when x_i << c_i; the rescale restores sum x = P
    powers *= power_budget / total

    logger.debug(f"Water level {level:.6e} after {iterations} bisections, "
                 f"{int(np.count_nonzero(powers))}/{params.n_sensors} sensors active")
    return WaterfillSolution(gains=GainVector.from_powers(powers), water_level=float(level), iterations=iterations)


def waterfill_massive(params: NetworkParams, power_budget: float) -> GainVector:
    """Closed-form KKT gains for the massive-antenna regime (real, non-negative)"""
    return waterfill_solution(params, power_budget).gains


def single_antenna_gains(channel: ChannelRealization, params: NetworkParams, power_budget: float) -> GainVector:
    """Optimal single-antenna gains a = sqrt(P / h^H B^{-2} h) B^{-1} h, B = F V F^H + (sigma_n^2/P) I"""
    if not channel.is_single_antenna:
        raise ConfigurationError(f"Single-antenna gains need M = 1, channel has M = {channel.n_antennas}")
    if channel.n_sensors != params.n_sensors:
        raise ConfigurationError(f"Channel has {channel.n_sensors} sensors, params declare {params.n_sensors}")
    _check_budget(power_budget)

    h = channel.h
    B = np.diag(np.abs(h) ** 2 * params.meas_noise + params.fc_noise_var / power_budget).astype(np.complex128)
    factor = cho_factor(B, lower=True, check_finite=False)
    b_inv_h = cho_solve(factor, h, check_finite=False)
    b_inv2_h = cho_solve(factor, b_inv_h, check_finite=False)
    scale = np.sqrt(power_budget / np.real(np.vdot(h, b_inv2_h)))
    return GainVector(gains=scale * b_inv_h)


def equal_power_gains(params: NetworkParams, power_budget: float) -> GainVector:
    """Every sensor gets P/N"""
    _check_budget(power_budget)
    return GainVector.from_powers(np.full(params.n_sensors, power_budget / params.n_sensors))


def low_power_suboptimal_gains(params: NetworkParams) -> Tuple[GainVector, float]:
    """|a_i|^2 = sigma_n^2 d_i^{2 alpha} / (2 M sigma_v,i^2), reaching a third of the g upper bound"""
    powers = params.noise_floor / (2.0 * params.n_antennas * params.meas_noise)
    return GainVector.from_powers(powers), float(np.sum(powers))
