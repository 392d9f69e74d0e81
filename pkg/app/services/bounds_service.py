"""Closed-form detection bounds for the multi- and single-antenna fusion centers"""
from app.models.errors import ConfigurationError, DomainError
from app.models.schemas import ChannelRealization, NetworkParams, SingleAntennaBounds
import numpy as np
import logging

logger = logging.getLogger(__name__)


def pd_bound(pfa: float, g: float, signal_var: float) -> float:
    """pfa^{1/(1 + sigma_theta^2 g)}, the PD reached at quality g"""
    if not 0.0 < pfa < 1.0:
        raise DomainError(f"False-alarm probability must lie in (0, 1), got {pfa}")
    if signal_var < 0 or g < 0:
        raise DomainError("Signal variance and g must be non-negative")
    return float(pfa ** (1.0 / (1.0 + signal_var * g)))


def g_upper_bound(params: NetworkParams) -> float:
    """sum_i 1/sigma_v,i^2"""
    return float(np.sum(1.0 / params.meas_noise))


def implied_low_power_budget(params: NetworkParams) -> float:
    """P = (1/2M) sum_i sigma_n^2 d_i^{2 alpha} / sigma_v,i^2"""
    return float(np.sum(params.noise_floor / params.meas_noise) / (2.0 * params.n_antennas))


def pd_bound_high_power(params: NetworkParams, pfa: float) -> float:
    """Upper bound on PD as P grows without limit"""
    return pd_bound(pfa, g_upper_bound(params), params.signal_var)


def pd_bound_low_power(params: NetworkParams, pfa: float) -> float:
    """Lower bound on PD at the optimal gains for the implied low-power budget"""
    return pd_bound(pfa, g_upper_bound(params) / 3.0, params.signal_var)


def single_antenna_pd_bounds(
    params: NetworkParams,
    channel: ChannelRealization,
    power_budget: float,
    pfa: float,
) -> SingleAntennaBounds:
    """High- and low-power PD bounds of the single-antenna FC"""
    if not channel.is_single_antenna:
        raise ConfigurationError(f"Single-antenna bounds need M = 1, channel has M = {channel.n_antennas}")
    channel_energy = float(np.real(np.vdot(channel.h, channel.h)))
    low_power_g = power_budget / params.fc_noise_var * channel_energy
    return SingleAntennaBounds(
        high_power_bound=pd_bound_high_power(params, pfa),
        low_power_bound=pd_bound(pfa, low_power_g, params.signal_var),
    )
