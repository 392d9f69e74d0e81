"""Signal model: channel draws, noise covariance and the detection-quality functional g(a)

All functions are pure given their inputs; randomness enters only through
explicitly passed numpy Generators.
"""
from app.models.errors import ConfigurationError, DomainError, PreconditionViolation
from app.models.schemas import (
    ChannelRealization,
    GainVector,
    Hypothesis,
    HypothesisSample,
    NetworkParams,
    StreamLabel,
)
from dataclasses import dataclass
from scipy.linalg import cho_factor, cho_solve
from typing import Tuple
import numpy as np
import logging

logger = logging.getLogger(__name__)


# ==================== RANDOM STREAMS ====================

def random_stream(base_seed: int, label: StreamLabel, *indices: int) -> np.random.Generator:
    """Counter-based generator for one named stream.

    Streams are keyed by (label, *indices) under the base seed, so the channel
    draws of realization k never depend on how many trials another stream consumed.
    """
    seed_sequence = np.random.SeedSequence(base_seed, spawn_key=(int(label), *map(int, indices)))
    return np.random.Generator(np.random.Philox(seed_sequence))


@dataclass(frozen=True)
class TrialStreams:
    """Signal and noise generators for the trials run on one channel"""
    signal: np.random.Generator
    meas_noise: np.random.Generator
    fc_noise: np.random.Generator

    @classmethod
    def derive(cls, base_seed: int, *indices: int) -> "TrialStreams":
        return cls(
            signal=random_stream(base_seed, StreamLabel.SIGNAL, *indices),
            meas_noise=random_stream(base_seed, StreamLabel.MEAS_NOISE, *indices),
            fc_noise=random_stream(base_seed, StreamLabel.FC_NOISE, *indices),
        )


def complex_gaussian(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly symmetric CN(0, variance): real and imaginary parts each variance/2.

    Real and imaginary parts are interleaved in the stream, so drawing a batch
    in consecutive chunks yields the same numbers as drawing it at once.
    """
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    parts = rng.standard_normal(shape + (2,))
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return (parts[..., 0] + 1j * parts[..., 1]) * scale


# ==================== NETWORK / CHANNEL ====================

def sample_network(
    n_sensors: int,
    n_antennas: int,
    signal_var: float,
    fc_noise_var: float,
    path_loss_exp: float,
    distance_range: Tuple[float, float],
    meas_noise_range: Tuple[float, float],
    rng: np.random.Generator,
) -> NetworkParams:
    """Network with d_i and sigma_v,i^2 drawn uniformly from the given ranges"""
    distances = rng.uniform(distance_range[0], distance_range[1], n_sensors)
    meas_noise_vars = rng.uniform(meas_noise_range[0], meas_noise_range[1], n_sensors)
    return NetworkParams(
        n_sensors=n_sensors,
        n_antennas=n_antennas,
        signal_var=signal_var,
        fc_noise_var=fc_noise_var,
        meas_noise_vars=tuple(float(v) for v in meas_noise_vars),
        distances=tuple(float(d) for d in distances),
        path_loss_exp=path_loss_exp,
    )


def draw_channel(params: NetworkParams, rng: np.random.Generator) -> ChannelRealization:
    """Rayleigh channel h_i = h~_i / d_i^alpha with h~_i ~ CN(0, I_M)"""
    fading = complex_gaussian(rng, (params.n_antennas, params.n_sensors))
    return ChannelRealization(matrix=fading / params.distance ** params.path_loss_exp)


def gram_deviation(channel: ChannelRealization, params: NetworkParams) -> float:
    """Frobenius distance of (1/M) H^H H from its almost-sure limit diag(d_i^{-2 alpha})"""
    _check_dimensions(channel, GainVector.zeros(params.n_sensors), params)
    H = channel.matrix
    gram = H.conj().T @ H / channel.n_antennas
    return float(np.linalg.norm(gram - np.diag(params.path_gain), ord="fro"))


def _check_dimensions(channel: ChannelRealization, gains: GainVector, params: NetworkParams) -> None:
    if channel.n_sensors != params.n_sensors or len(gains) != params.n_sensors:
        raise ConfigurationError(
            f"Sensor count mismatch: channel has {channel.n_sensors} columns, "
            f"gains have {len(gains)} entries, params declare N={params.n_sensors}"
        )
    if channel.n_antennas != params.n_antennas:
        raise ConfigurationError(
            f"Antenna count mismatch: channel has {channel.n_antennas} rows, params declare M={params.n_antennas}"
        )


# ==================== SIGNAL MODEL ====================

def draw_received(
    channel: ChannelRealization,
    gains: GainVector,
    params: NetworkParams,
    hypothesis: Hypothesis,
    trials: int,
    streams: TrialStreams,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batch of received vectors, one per row.

    Returns (theta, v, n, Y) with Y[t] = H a theta[t] + H D v[t] + n[t];
    theta is zero under H0.
    """
    _check_dimensions(channel, gains, params)
    H = channel.matrix
    a = gains.gains
    if hypothesis == Hypothesis.H1:
        theta = complex_gaussian(streams.signal, trials, params.signal_var)
    else:
        theta = np.zeros(trials, dtype=np.complex128)
    v = complex_gaussian(streams.meas_noise, (trials, params.n_sensors), params.meas_noise)
    n = complex_gaussian(streams.fc_noise, (trials, params.n_antennas), params.fc_noise_var)
    received = np.outer(theta, H @ a) + (v * a) @ H.T + n
    return theta, v, n, received


def draw_hypothesis_sample(
    channel: ChannelRealization,
    gains: GainVector,
    params: NetworkParams,
    hypothesis: Hypothesis,
    streams: TrialStreams,
) -> HypothesisSample:
    """Single realization of the received signal"""
    theta, v, n, received = draw_received(channel, gains, params, hypothesis, 1, streams)
    return HypothesisSample(
        hypothesis=hypothesis,
        theta=complex(theta[0]),
        meas_noise=v[0],
        fc_noise=n[0],
        received=received[0],
    )


def noise_covariance(channel: ChannelRealization, gains: GainVector, params: NetworkParams) -> np.ndarray:
    """C_w = H D V D^H H^H + sigma_n^2 I_M"""
    _check_dimensions(channel, gains, params)
    HD = channel.matrix * gains.gains[np.newaxis, :]
    covariance = (HD * params.meas_noise[np.newaxis, :]) @ HD.conj().T
    covariance += params.fc_noise_var * np.eye(channel.n_antennas)
    # exact Hermitian symmetry
    return (covariance + covariance.conj().T) / 2.0


@dataclass(frozen=True)
class SteeringSolution:
    """g(a) and the whitened steering vector w = C_w^{-1} H a from one factorization"""
    g_value: float
    weights: np.ndarray


def steering_solution(channel: ChannelRealization, gains: GainVector, params: NetworkParams) -> SteeringSolution:
    covariance = noise_covariance(channel, gains, params)
    steering = channel.matrix @ gains.gains
    factor = cho_factor(covariance, lower=True, check_finite=False)
    weights = cho_solve(factor, steering, check_finite=False)
    g_value = max(float(np.real(np.vdot(steering, weights))), 0.0)
    return SteeringSolution(g_value=g_value, weights=weights)


def g_exact(channel: ChannelRealization, gains: GainVector, params: NetworkParams) -> float:
    """g(a) = a^H H^H C_w^{-1} H a"""
    return steering_solution(channel, gains, params).g_value


def g_via_lemma(channel: ChannelRealization, gains: GainVector, params: NetworkParams) -> float:
    """g(a) through the matrix inversion lemma; needs every |a_i| > 0 so that E^{-1} exists"""
    _check_dimensions(channel, gains, params)
    powers = gains.powers
    if np.any(powers == 0):
        zero = np.flatnonzero(powers == 0).tolist()
        raise PreconditionViolation(
            f"Sensors {zero} have zero gain; drop them from the model before using the lemma form"
        )
    H = channel.matrix
    a = gains.gains
    sigma2 = params.fc_noise_var
    gram = H.conj().T @ H
    projected = gram @ a
    inner = np.diag(1.0 / (powers * params.meas_noise)) + gram / sigma2
    factor = cho_factor((inner + inner.conj().T) / 2.0, lower=True, check_finite=False)
    correction = np.real(np.vdot(projected, cho_solve(factor, projected, check_finite=False)))
    value = np.real(np.vdot(a, projected)) / sigma2 - correction / sigma2 ** 2
    return max(float(value), 0.0)


def g_asymptotic(x: np.ndarray, params: NetworkParams) -> float:
    """Almost-sure large-M limit of g: sum_i M x_i / (sigma_n^2 d_i^{2 alpha} + M x_i sigma_v,i^2)"""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.n_sensors,):
        raise ConfigurationError(f"Expected {params.n_sensors} powers, got shape {x.shape}")
    if np.any(x < 0):
        raise DomainError("Transmit powers x_i = |a_i|^2 must be non-negative")
    M = params.n_antennas
    return float(np.sum(M * x / (params.noise_floor + M * x * params.meas_noise)))


def single_antenna_quality(channel: ChannelRealization, gains: GainVector, params: NetworkParams) -> float:
    """g_s(a) = |h^H a|^2 / (a^H F V F^H a + sigma_n^2) for y = a^H h theta + a^H F v + n"""
    if not channel.is_single_antenna:
        raise ConfigurationError(f"Single-antenna quality needs M = 1, channel has M = {channel.n_antennas}")
    if channel.n_sensors != len(gains):
        raise ConfigurationError(f"Channel has {channel.n_sensors} sensors, gains have {len(gains)}")
    h = channel.h
    a = gains.gains
    signal = np.abs(np.vdot(h, a)) ** 2
    interference = np.sum(gains.powers * np.abs(h) ** 2 * params.meas_noise)
    return float(signal / (interference + params.fc_noise_var))
