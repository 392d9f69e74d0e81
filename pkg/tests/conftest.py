"""Shared fixtures for the simulator tests"""
import os

# Run Monte Carlo in-process unless a test asks for a pool
os.environ.setdefault("SENSORNET_WORKERS", "1")

import numpy as np
import pytest

from app.models.schemas import NetworkParams
from app.services.model_service import sample_network

TARGET_PFA = 0.05


def make_params(n_sensors=1, n_antennas=1, signal_var=1.0, fc_noise_var=0.3,
                meas_noise_vars=None, distances=None, path_loss_exp=1.0) -> NetworkParams:
    return NetworkParams(
        n_sensors=n_sensors,
        n_antennas=n_antennas,
        signal_var=signal_var,
        fc_noise_var=fc_noise_var,
        meas_noise_vars=tuple(meas_noise_vars if meas_noise_vars is not None else [0.5] * n_sensors),
        distances=tuple(distances if distances is not None else [1.0] * n_sensors),
        path_loss_exp=path_loss_exp,
    )


def random_params(rng: np.random.Generator, n_sensors: int, n_antennas: int) -> NetworkParams:
    """Random but well-conditioned network"""
    return make_params(
        n_sensors=n_sensors,
        n_antennas=n_antennas,
        signal_var=float(rng.uniform(0.5, 2.0)),
        fc_noise_var=float(rng.uniform(0.1, 1.0)),
        meas_noise_vars=rng.uniform(0.2, 1.0, n_sensors).tolist(),
        distances=rng.uniform(1.0, 4.0, n_sensors).tolist(),
        path_loss_exp=float(rng.uniform(0.5, 1.5)),
    )


def default_network(n_antennas: int = 50, seed: int = 2014) -> NetworkParams:
    """N = 10, sigma_theta^2 = 1, sigma_n^2 = 0.3, alpha = 1, d ~ U[2, 10], sigma_v^2 ~ U[0.25, 0.5]"""
    return sample_network(
        n_sensors=10,
        n_antennas=n_antennas,
        signal_var=1.0,
        fc_noise_var=0.3,
        path_loss_exp=1.0,
        distance_range=(2.0, 10.0),
        meas_noise_range=(0.25, 0.5),
        rng=np.random.default_rng(seed),
    )


@pytest.fixture
def scalar_params() -> NetworkParams:
    """M = N = 1, sigma_v^2 = 0.5, sigma_n^2 = 0.3, d = 1"""
    return make_params()


@pytest.fixture
def network_params() -> NetworkParams:
    return default_network()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
