"""Pydantic models for the detection simulator's domain types"""
from app.config import get_settings
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, Dict, Any, List, Tuple
from enum import Enum, IntEnum
import numpy as np


class Hypothesis(str, Enum):
    """Binary hypothesis"""
    H0 = "H0"  # measurement noise only
    H1 = "H1"  # Gaussian signal present


class StreamLabel(IntEnum):
    """Named random streams derived from one base seed"""
    PARAMS = 0
    CHANNEL = 1
    SINGLE_CHANNEL = 2
    SIGNAL = 3
    MEAS_NOISE = 4
    FC_NOISE = 5


class ExperimentType(str, Enum):
    """Experiments the command layer can run"""
    SWEEP_POWER = "sweep-power"
    SWEEP_ANTENNAS = "sweep-antennas"
    OPTIMIZE = "optimize"
    ROC = "roc"
    BOUNDS = "bounds"


def _frozen_array(value: Any, dtype, ndim: int, name: str) -> np.ndarray:
    array = np.array(value, dtype=dtype)
    if array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
    array.setflags(write=False)
    return array


# ==================== NETWORK MODEL ====================

class NetworkParams(BaseModel):
    """Fixed scalars and per-sensor vectors of the sensor network"""
    model_config = ConfigDict(frozen=True)

    n_sensors: int = Field(..., gt=0, description="Number of sensors N")
    n_antennas: int = Field(..., gt=0, description="Fusion center antennas M")
    signal_var: float = Field(..., gt=0, description="Signal variance sigma_theta^2")
    fc_noise_var: float = Field(..., gt=0, description="FC receiver noise variance sigma_n^2")
    meas_noise_vars: Tuple[float, ...] = Field(..., description="Per-sensor measurement noise variances")
    distances: Tuple[float, ...] = Field(..., description="Sensor to FC distances d_i")
    path_loss_exp: float = Field(..., gt=0, description="Path-loss exponent alpha")

    @field_validator("meas_noise_vars", "distances")
    @classmethod
    def _strictly_positive(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not np.isfinite(v) or v <= 0 for v in value):
            raise ValueError("every entry must be finite and strictly positive")
        return value

    @model_validator(mode="after")
    def _lengths_match(self) -> "NetworkParams":
        for name in ("meas_noise_vars", "distances"):
            length = len(getattr(self, name))
            if length != self.n_sensors:
                raise ValueError(f"{name} has length {length}, expected n_sensors={self.n_sensors}")
        return self

    @property
    def meas_noise(self) -> np.ndarray:
        return np.asarray(self.meas_noise_vars, dtype=float)

    @property
    def distance(self) -> np.ndarray:
        return np.asarray(self.distances, dtype=float)

    @property
    def path_gain(self) -> np.ndarray:
        """Large-scale power gain d_i^{-2 alpha}"""
        return self.distance ** (-2.0 * self.path_loss_exp)

    @property
    def noise_floor(self) -> np.ndarray:
        """sigma_n^2 d_i^{2 alpha}, the FC noise referred back to each sensor"""
        return self.fc_noise_var * self.distance ** (2.0 * self.path_loss_exp)

    def with_antennas(self, n_antennas: int) -> "NetworkParams":
        """Same network seen by a fusion center with a different antenna count"""
        return NetworkParams.model_validate({**self.model_dump(), "n_antennas": n_antennas})


class ChannelRealization(BaseModel):
    """One draw of the M x N channel matrix H (columns h_i)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, np.complex128, 2, "matrix")

    @property
    def n_antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_single_antenna(self) -> bool:
        return self.n_antennas == 1

    @property
    def h(self) -> np.ndarray:
        """Channel vector h = [h_1..h_N] of a single-antenna FC"""
        return self.matrix[0]


class GainVector(BaseModel):
    """Sensor transmission gains a"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    gains: np.ndarray

    @field_validator("gains", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, np.complex128, 1, "gains")

    @classmethod
    def from_powers(cls, powers: np.ndarray) -> "GainVector":
        """Real non-negative gains with |a_i|^2 = powers[i]"""
        return cls(gains=np.sqrt(np.asarray(powers, dtype=float)))

    @classmethod
    def zeros(cls, n_sensors: int) -> "GainVector":
        return cls(gains=np.zeros(n_sensors))

    def __len__(self) -> int:
        return self.gains.shape[0]

    @property
    def powers(self) -> np.ndarray:
        """x_i = |a_i|^2"""
        return np.abs(self.gains) ** 2

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers))

    @property
    def diagonal(self) -> np.ndarray:
        """D = diag(a)"""
        return np.diag(self.gains)

    def conjugate(self) -> "GainVector":
        return GainVector(gains=np.conj(self.gains))


class HypothesisSample(BaseModel):
    """One received vector y = H a theta + H D v + n and its ingredients"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    hypothesis: Hypothesis
    theta: complex = 0j
    meas_noise: np.ndarray
    fc_noise: np.ndarray
    received: np.ndarray


# ==================== DETECTOR MODELS ====================

class DetectorConfig(BaseModel):
    """Threshold test on the scalar statistic, parameterized by gamma'"""
    model_config = ConfigDict(frozen=True)

    g_value: float = Field(..., ge=0)
    signal_var: float = Field(..., gt=0)
    target_pfa: float = Field(..., gt=0, lt=1)
    threshold: float = Field(..., ge=0)


class RocPoint(BaseModel):
    """Analytic (PD, PFA) pair"""
    model_config = ConfigDict(frozen=True)

    pd: float = Field(..., ge=0.0, le=1.0)
    pfa: float = Field(..., ge=0.0, le=1.0)
    degenerate: bool = False  # g = 0: the detector never declares H1


class DetectionOutcome(BaseModel):
    """Empirical and analytic detection performance for one (channel, gains) pair"""
    model_config = ConfigDict(frozen=True)

    trials: int
    detections: int
    false_alarms: int
    pd_empirical: float = Field(..., ge=0.0, le=1.0)
    pfa_empirical: float = Field(..., ge=0.0, le=1.0)
    pd_analytic: float = Field(..., ge=0.0, le=1.0)
    pfa_analytic: float = Field(..., ge=0.0, le=1.0)
    g_value: float
    threshold: float
    degenerate: bool = False

    @property
    def pd_sigma_band(self) -> float:
        """3 binomial standard deviations around the analytic PD"""
        pd = self.pd_analytic
        return 3.0 * float(np.sqrt(pd * (1.0 - pd) / self.trials))

    @property
    def resolution_allowance(self) -> float:
        """One detection out of T, the step of the empirical PD"""
        return 1.0 / self.trials

    @property
    def pd_agrees(self) -> bool:
        return abs(self.pd_empirical - self.pd_analytic) <= self.pd_sigma_band + self.resolution_allowance


# ==================== ALLOCATOR / BOUND MODELS ====================

class WaterfillSolution(BaseModel):
    """KKT water-filling allocation for the massive-antenna objective"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    gains: GainVector
    water_level: float = Field(..., gt=0, description="Lagrange multiplier lambda")
    iterations: int

    @property
    def active(self) -> np.ndarray:
        return self.gains.powers > 0


class SingleAntennaBounds(BaseModel):
    """PD bounds of the single-antenna FC in the two power regimes"""
    model_config = ConfigDict(frozen=True)

    high_power_bound: float
    low_power_bound: float


# ==================== MONTE CARLO MODELS ====================

class TrialPlan(BaseModel):
    """How many detection tests per channel and how many channels"""
    model_config = ConfigDict(frozen=True)

    trials_per_channel: int = Field(default_factory=lambda: get_settings().default_trials_per_channel, ge=1)
    channel_realizations: int = Field(default_factory=lambda: get_settings().default_channel_realizations, ge=1)
    base_seed: int = 0


class ChannelResult(BaseModel):
    """Outcomes of the multi- and single-antenna FCs on one channel realization"""
    model_config = ConfigDict(frozen=True)

    channel_index: int
    multi: DetectionOutcome
    single: DetectionOutcome
    single_low_power_bound: float


class SweepResult(BaseModel):
    """Per-grid-point averages of a parameter sweep"""
    grid: List[float]
    power: List[float]
    antennas: List[int]
    pd_multi: List[float]
    pd_single: List[float]
    pd_analytic_multi: List[float]
    pd_analytic_single: List[float]
    pfa_multi: List[float]
    pfa_single: List[float]
    bound_overlays: Dict[str, List[float]] = Field(default_factory=dict)
    agreement_fraction: float = Field(default=1.0, ge=0.0, le=1.0)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self) -> "SweepResult":
        length = len(self.grid)
        columns = {
            "power": self.power, "antennas": self.antennas,
            "pd_multi": self.pd_multi, "pd_single": self.pd_single,
            "pd_analytic_multi": self.pd_analytic_multi,
            "pd_analytic_single": self.pd_analytic_single,
            "pfa_multi": self.pfa_multi, "pfa_single": self.pfa_single,
            **self.bound_overlays,
        }
        for name, values in columns.items():
            if len(values) != length:
                raise ValueError(f"{name} has {len(values)} entries, grid has {length}")
        for name in ("pd_multi", "pd_single", "pd_analytic_multi", "pd_analytic_single",
                     "pfa_multi", "pfa_single"):
            if any(not 0.0 <= v <= 1.0 for v in columns[name]):
                raise ValueError(f"{name} must contain probabilities in [0, 1]")
        return self


# ==================== EXPERIMENT CONFIG ====================

def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class Violation(BaseModel):
    """One broken configuration rule"""
    field: str
    rule: str
    line: Optional[int] = None

    def __str__(self) -> str:
        prefix = f"line {self.line}: " if self.line is not None else ""
        return f"{prefix}{self.field}: {self.rule}"


class ExperimentConfig(BaseModel):
    """Flat experiment description; defaults describe the reference 10-sensor network"""
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentType = ExperimentType.SWEEP_POWER

    # Network
    n_sensors: int = Field(default=10, gt=0)
    n_antennas: int = Field(default=50, gt=0)
    signal_var: float = Field(default=1.0, gt=0)
    fc_noise_var: float = Field(default=0.3, gt=0)
    path_loss_exp: float = Field(default=1.0, gt=0)
    meas_noise_vars: Optional[List[float]] = Field(default=None, description="Explicit sigma_v,i^2")
    meas_noise_range: Tuple[float, float] = (0.25, 0.5)
    distances: Optional[List[float]] = Field(default=None, description="Explicit d_i")
    distance_range: Tuple[float, float] = (2.0, 10.0)

    # Trial plan
    trials_per_channel: int = Field(default_factory=lambda: get_settings().default_trials_per_channel, ge=1)
    channel_realizations: int = Field(default_factory=lambda: get_settings().default_channel_realizations, ge=1)
    seed: int = 0

    # Experiment
    grid: Optional[List[float]] = None
    target_pfa: float = Field(default=0.05, gt=0, lt=1)
    power_budget: float = Field(default=1.0, gt=0)
    output_path: str = "results/experiment.csv"

    @field_validator("meas_noise_vars", "distances", "grid", "meas_noise_range", "distance_range",
                     mode="before")
    @classmethod
    def _comma_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("meas_noise_vars", "distances")
    @classmethod
    def _positive_entries(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(not np.isfinite(v) or v <= 0 for v in value):
            raise ValueError("every entry must be finite and strictly positive")
        return value

    @field_validator("meas_noise_range", "distance_range")
    @classmethod
    def _positive_interval(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not low > 0:
            raise ValueError("lower bound must be strictly positive")
        if high < low:
            raise ValueError("interval must be nonempty (upper >= lower)")
        return value

    @field_validator("grid")
    @classmethod
    def _increasing_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is None:
            return value
        if not value:
            raise ValueError("grid must be nonempty")
        if any(not np.isfinite(v) for v in value):
            raise ValueError("grid values must be finite")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("grid must be strictly increasing")
        return value

    @property
    def resolved_grid(self) -> List[float]:
        if self.grid is not None:
            return list(self.grid)
        defaults = {
            ExperimentType.SWEEP_POWER: [float(p) for p in np.logspace(-2, 2, 9)],
            ExperimentType.SWEEP_ANTENNAS: [float(m) for m in range(50, 501, 50)],
            ExperimentType.OPTIMIZE: [0.1, 1.0, 10.0],
            ExperimentType.ROC: [0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
            ExperimentType.BOUNDS: [self.target_pfa],
        }
        return defaults[self.experiment]

    def consistency_violations(self) -> List[Violation]:
        """Rules spanning several fields"""
        violations = []
        for name in ("meas_noise_vars", "distances"):
            values = getattr(self, name)
            if values is not None and len(values) != self.n_sensors:
                violations.append(Violation(
                    field=name,
                    rule=f"length must equal n_sensors ({self.n_sensors}), got {len(values)}",
                ))
        grid = self.resolved_grid
        if self.experiment == ExperimentType.SWEEP_ANTENNAS:
            if any(m < 1 or m != int(m) for m in grid):
                violations.append(Violation(field="grid", rule="antenna counts must be positive integers"))
        elif self.experiment == ExperimentType.ROC:
            if any(not 0 < p < 1 for p in grid):
                violations.append(Violation(field="grid", rule="false-alarm targets must lie in (0, 1)"))
        elif self.experiment in (ExperimentType.SWEEP_POWER, ExperimentType.OPTIMIZE):
            if any(p <= 0 for p in grid):
                violations.append(Violation(field="grid", rule="power budgets must be strictly positive"))
        return violations

    @property
    def plan(self) -> TrialPlan:
        return TrialPlan(
            trials_per_channel=self.trials_per_channel,
            channel_realizations=self.channel_realizations,
            base_seed=self.seed,
        )
