"""Experiment runner: flat config files in, CSV results and a resolved-config sidecar out"""
from app import __version__
from app.models.errors import InvalidConfigError, NonFiniteResultError
from app.models.schemas import ExperimentConfig, ExperimentType, NetworkParams, StreamLabel, Violation
from app.services.allocator_service import equal_power_gains, waterfill_massive
from app.services.bounds_service import (
    g_upper_bound,
    implied_low_power_budget,
    pd_bound_high_power,
    pd_bound_low_power,
)
from app.services.model_service import g_asymptotic, random_stream, sample_network
from app.services.montecarlo_service import MonteCarloService, get_montecarlo_service
from dotenv import dotenv_values
from pathlib import Path
from pydantic import BaseModel, ValidationError
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import numpy as np
import csv
import logging
import re

logger = logging.getLogger(__name__)

_KEY_PATTERN = re.compile(r"^\s*(?:export\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=")

Row = List[Any]


class ConfigDocument(BaseModel):
    """Raw key/value pairs of a config file and the line each key sits on"""
    values: Dict[str, Optional[str]]
    lines: Dict[str, int] = {}
    source: Optional[str] = None


class RunReport(BaseModel):
    """Where a run wrote its results"""
    experiment: ExperimentType
    csv_path: str
    metadata_path: str
    rows: int
    agreement_fraction: Optional[float] = None


def load_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> ConfigDocument:
    """Parse a dotenv-style config file; overrides replace file values and carry no line number"""
    text = Path(path).read_text(encoding="utf-8")
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = _KEY_PATTERN.match(line)
        if match:
            lines[match.group(1).lower()] = number
    values = {key.lower(): value for key, value in dotenv_values(path, interpolate=False).items()}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = str(value)
            lines.pop(key, None)
    return ConfigDocument(values=values, lines=lines, source=str(path))


def _rule(message: str) -> str:
    return message.removeprefix("Value error, ")


def validate(config: ConfigDocument) -> List[Violation]:
    """Every broken rule of the config; empty iff it is runnable"""
    missing = [key for key, value in config.values.items() if value is None]
    violations = [Violation(field=key, rule="missing value", line=config.lines.get(key)) for key in missing]
    raw = {key: value for key, value in config.values.items() if value is not None}
    try:
        parsed = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        for error in e.errors():
            loc = error.get("loc") or ("config",)
            violations.append(Violation(
                field=".".join(str(part) for part in loc),
                rule=_rule(error["msg"]),
                line=config.lines.get(str(loc[0])),
            ))
        return violations
    for violation in parsed.consistency_violations():
        violations.append(violation.model_copy(update={"line": config.lines.get(violation.field)}))
    return violations


def parse_config(config: ConfigDocument) -> ExperimentConfig:
    violations = validate(config)
    if violations:
        raise InvalidConfigError(violations)
    return ExperimentConfig.model_validate({k: v for k, v in config.values.items() if v is not None})


def resolve_network(config: ExperimentConfig) -> NetworkParams:
    """Explicit per-sensor vectors win; missing ones are drawn from the seed's parameter stream"""
    sampled = sample_network(
        n_sensors=config.n_sensors,
        n_antennas=config.n_antennas,
        signal_var=config.signal_var,
        fc_noise_var=config.fc_noise_var,
        path_loss_exp=config.path_loss_exp,
        distance_range=config.distance_range,
        meas_noise_range=config.meas_noise_range,
        rng=random_stream(config.seed, StreamLabel.PARAMS),
    )
    return NetworkParams(
        n_sensors=config.n_sensors,
        n_antennas=config.n_antennas,
        signal_var=config.signal_var,
        fc_noise_var=config.fc_noise_var,
        meas_noise_vars=tuple(config.meas_noise_vars or sampled.meas_noise_vars),
        distances=tuple(config.distances or sampled.distances),
        path_loss_exp=config.path_loss_exp,
    )


def format_value(value: Any) -> str:
    """CSV cell: integers as-is, floats positionally as the shortest round-trip digits, padded to 10 significant"""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return np.format_float_positional(float(value), unique=True, fractional=False, trim="k", min_digits=10)


def _config_value(value: Any) -> str:
    if isinstance(value, ExperimentType):
        return value.value
    if isinstance(value, (list, tuple)):
        return ",".join(_config_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if re.search(r"[\s#'\"]", text):
        return "'" + text.replace("'", "") + "'"
    return text


class ExperimentService:
    """Dispatches experiments and persists their results"""

    def __init__(self, montecarlo: Optional[MonteCarloService] = None):
        self.montecarlo = montecarlo or get_montecarlo_service()

    def run(self, config: ExperimentConfig) -> RunReport:
        params = resolve_network(config)
        grid = config.resolved_grid
        logger.info(f"Running {config.experiment.value}: N={params.n_sensors}, M={params.n_antennas}, "
                    f"seed={config.seed}, grid of {len(grid)} point(s)")

        runner = {
            ExperimentType.SWEEP_POWER: self._sweep_power,
            ExperimentType.SWEEP_ANTENNAS: self._sweep_antennas,
            ExperimentType.OPTIMIZE: self._optimize,
            ExperimentType.ROC: self._roc,
            ExperimentType.BOUNDS: self._bounds,
        }[config.experiment]
        header, rows, agreement = runner(config, params, grid)
        self._check_finite(header, rows)

        csv_path = Path(config.output_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([format_value(v) for v in row] for row in rows)

        metadata_path = self.write_metadata(config, params, grid, csv_path, agreement)
        logger.info(f"Wrote {len(rows)} row(s) to {csv_path} (metadata: {metadata_path})")
        return RunReport(
            experiment=config.experiment,
            csv_path=str(csv_path),
            metadata_path=str(metadata_path),
            rows=len(rows),
            agreement_fraction=agreement,
        )

    @staticmethod
    def metadata_path_for(csv_path: Path) -> Path:
        return csv_path.with_name(f"{csv_path.stem}.meta.cfg")

    def write_metadata(
        self,
        config: ExperimentConfig,
        params: NetworkParams,
        grid: Sequence[float],
        csv_path: Path,
        agreement: Optional[float],
    ) -> Path:
        """Resolved config in the input format, so re-running it reproduces the CSV"""
        resolved = config.model_copy(update={
            "meas_noise_vars": list(params.meas_noise_vars),
            "distances": list(params.distances),
            "grid": [float(v) for v in grid],
        })
        path = self.metadata_path_for(csv_path)
        lines = [
            f"# Resolved configuration for {csv_path.name}",
            f"# simulator version {__version__}",
        ]
        if agreement is not None:
            lines.append(f"# empirical/analytic PD agreement (3 sigma): {agreement:.4f}")
        for key, value in resolved.model_dump().items():
            if value is not None:
                lines.append(f"{key}={_config_value(value)}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def _check_finite(header: Sequence[str], rows: Sequence[Row]) -> None:
        for row in rows:
            for column, value in zip(header, row):
                if not np.isfinite(float(value)):
                    logger.warning(f"Nonfinite {column} at grid point {row[0]}")
                    raise NonFiniteResultError(float(row[0]), column)

    # ==================== EXPERIMENTS ====================

    def _sweep_power(self, config: ExperimentConfig, params: NetworkParams, grid: List[float]):
        result = self.montecarlo.sweep_power(params, grid, config.plan, config.target_pfa)
        header = ["P", "pd_multi", "pd_single", "pd_analytic", "pd_analytic_single", "ub_multi"]
        rows = [
            [p, pd, pd_s, pd_a, pd_as, ub]
            for p, pd, pd_s, pd_a, pd_as, ub in zip(
                result.power, result.pd_multi, result.pd_single, result.pd_analytic_multi,
                result.pd_analytic_single, result.bound_overlays["ub_multi"],
            )
        ]
        return header, rows, result.agreement_fraction

    def _sweep_antennas(self, config: ExperimentConfig, params: NetworkParams, grid: List[float]):
        antennas = [int(m) for m in grid]
        result = self.montecarlo.sweep_antennas(params, antennas, config.plan, config.target_pfa)
        header = ["M", "P", "pd_multi", "pd_single", "pd_analytic", "lb_multi", "ub_single"]
        rows = [
            [m, p, pd, pd_s, pd_a, lb, ub]
            for m, p, pd, pd_s, pd_a, lb, ub in zip(
                result.antennas, result.power, result.pd_multi, result.pd_single,
                result.pd_analytic_multi, result.bound_overlays["lb_multi"], result.bound_overlays["ub_single"],
            )
        ]
        return header, rows, result.agreement_fraction

    def _roc(self, config: ExperimentConfig, params: NetworkParams, grid: List[float]):
        result = self.montecarlo.sweep_pfa(params, grid, config.power_budget, config.plan)
        header = ["target_pfa", "pfa_multi", "pd_multi", "pd_analytic", "pfa_single", "pd_single",
                  "pd_analytic_single"]
        rows = [
            list(values)
            for values in zip(
                result.grid, result.pfa_multi, result.pd_multi, result.pd_analytic_multi,
                result.pfa_single, result.pd_single, result.pd_analytic_single,
            )
        ]
        return header, rows, result.agreement_fraction

    def _optimize(self, config: ExperimentConfig, params: NetworkParams, grid: List[float]):
        header = ["P", "sensor", "distance", "meas_noise_var", "x_waterfill", "x_equal",
                  "g_waterfill", "g_equal", "g_upper"]
        ceiling = g_upper_bound(params)
        rows = []
        for budget in grid:
            optimal = waterfill_massive(params, budget).powers
            equal = equal_power_gains(params, budget).powers
            g_optimal = g_asymptotic(optimal, params)
            g_equal = g_asymptotic(equal, params)
            logger.debug(f"P={budget:.4g}: g_waterfill={g_optimal:.6f}, g_equal={g_equal:.6f}")
            for sensor in range(params.n_sensors):
                rows.append([
                    budget, sensor, params.distances[sensor], params.meas_noise_vars[sensor],
                    optimal[sensor], equal[sensor], g_optimal, g_equal, ceiling,
                ])
        return header, rows, None

    def _bounds(self, config: ExperimentConfig, params: NetworkParams, grid: List[float]):
        header = ["target_pfa", "g_upper", "pd_ub_multi", "pd_lb_multi", "p_low_power"]
        pfa = config.target_pfa
        row = [pfa, g_upper_bound(params), pd_bound_high_power(params, pfa),
               pd_bound_low_power(params, pfa), implied_low_power_budget(params)]
        return header, [row], None


# Global instance
_experiment_service: "ExperimentService" = None  # type: ignore


def get_experiment_service() -> ExperimentService:
    """Get or create the Experiment service instance"""
    global _experiment_service
    if _experiment_service is None:
        _experiment_service = ExperimentService()
    return _experiment_service


def run(config: ExperimentConfig) -> RunReport:
    return get_experiment_service().run(config)


def run_file(path: str, overrides: Optional[Mapping[str, Any]] = None) -> Tuple[ExperimentConfig, RunReport]:
    """Load, validate and run a config file"""
    config = parse_config(load_config(path, overrides))
    return config, run(config)
