"""
Monte Carlo harness.

A trial builds the N-copy ensemble (dark-count chain or i.i.d.), samples a
uniform M-subset, runs every selected protocol on the sampled copies and
compares its estimate with the exact average fidelity of the unsampled
copies. All protocols in a trial see the same ensemble and subset; each has
its own round stream, so adding a protocol never changes another's draws.

Random streams per trial (see ``utils.helpers.make_rng``):
    (seed, trial, STREAM_ENSEMBLE)            dark-count chain
    (seed, trial, STREAM_SUBSET)              sampled subset
    (seed, trial, STREAM_ROUNDS, protocol)    measurement rounds
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from core import __version__, constants
from core.algebra import DensityMatrix
from core.config_manager import ConfigManager
from core.exceptions import ConfigError
from core.noise import Ensemble, constant_ensemble, dark_count_ensemble
from core.protocols import (FidelityProtocol, RoundDistribution,
                            cumulative_table, error_lower_bound, get_protocol)
from core.workers import run_batches
from models.experiment_config import ExperimentConfig
from models.records import SweepRow, TrialResult
from models.run_manifest import RunManifest
from utils.helpers import format_time, make_rng
from utils.logger import get_logger

logger = get_logger(__name__)


# ---------------------- Subset sampling ----------------------


def sample_subset(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of a uniformly random m-subset of range(n)."""
    if m < 0 or n < 0:
        raise ValueError(f"Sizes must be non-negative, got n={n}, m={m}")
    if m > n:
        raise ValueError(f"Cannot sample {m} copies out of {n}")
    if m == n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=m, replace=False))


def unsampled_mask(n: int, subset: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[subset] = False
    return mask


# ---------------------- Trial setup ----------------------


@dataclass(frozen=True)
class ProtocolTables:
    """Per-palette round laws of one protocol, ready for vectorized sampling."""

    protocol: FidelityProtocol
    stream: int
    tables: tuple[RoundDistribution, ...]
    cdf: np.ndarray
    variances: np.ndarray


@dataclass(frozen=True)
class ExperimentSetup:
    """Everything a trial needs that does not depend on the trial index."""

    config: ExperimentConfig
    palette: tuple[DensityMatrix, ...]
    palette_fidelities: np.ndarray
    protocols: tuple[ProtocolTables, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.protocol.name for p in self.protocols)


def build_setup(config: ExperimentConfig) -> ExperimentSetup:
    """Validate ``config`` and precompute palette states and outcome tables."""
    config.validate()
    template = _ensemble(config, 0, n=1)
    palette, fidelities = template.palette, template.palette_fidelities

    protocols = []
    for name in constants.PROTOCOL_NAMES:
        if name not in config.protocols:
            continue
        protocol = get_protocol(name, population_share=config.guhne_share)
        tables = tuple(protocol.outcome_distribution(rho, config.target) for rho in palette)
        protocols.append(ProtocolTables(
            protocol=protocol,
            stream=constants.PROTOCOL_NAMES.index(name),
            tables=tables,
            cdf=cumulative_table(tables),
            variances=np.array([t.variance for t in tables]),
        ))
    logger.debug(f"🎲 Setup: palette fidelities {np.round(fidelities, 6).tolist()}, "
                 f"protocols {[p.protocol.name for p in protocols]}")
    return ExperimentSetup(config, palette, fidelities, tuple(protocols))


def _ensemble(config: ExperimentConfig, trial_index: int, n: Optional[int] = None) -> Ensemble:
    n = config.N if n is None else n
    if config.noise_model == "iid":
        return constant_ensemble(n, config.f, config.target, config.noise)
    rng = make_rng(config.seed, trial_index, constants.STREAM_ENSEMBLE)
    return dark_count_ensemble(config.dark_count_model(), n, config.target, config.noise, rng)


def build_ensemble(config: ExperimentConfig, trial_index: int) -> Ensemble:
    """The N-copy ensemble of one trial."""
    return _ensemble(config, trial_index)


# ---------------------- Trials ----------------------


@dataclass(frozen=True)
class TrialOutcome:
    """All protocols of one trial plus the analytic columns."""

    results: dict[str, TrialResult]
    analytic_variance: dict[str, float]
    lower_bound: float
    rounds: dict[str, int]


def _run_trial_all(setup: ExperimentSetup, trial_index: int) -> TrialOutcome:
    config = setup.config
    if config.noise_model == "iid":
        indices = np.zeros(config.N, dtype=np.intp)
    else:
        indices = _ensemble(config, trial_index).indices
    fidelities = setup.palette_fidelities[indices]

    subset = sample_subset(config.N, config.M, make_rng(config.seed, trial_index, constants.STREAM_SUBSET))
    sampled = indices[subset]
    fbar_sampled = float(fidelities[subset].mean())
    fbar_unsampled = float(fidelities[unsampled_mask(config.N, subset)].mean())
    lower_bound = error_lower_bound(fidelities, config.M, config.N)

    results, variances, rounds = {}, {}, {}
    for entry in setup.protocols:
        name = entry.protocol.name
        rng = make_rng(config.seed, trial_index, constants.STREAM_ROUNDS, entry.stream)
        if config.vectorized:
            summary = entry.protocol.sample_estimate(entry.tables, sampled, rng, entry.cdf)
        else:
            copies = [setup.palette[i] for i in sampled]
            summary = entry.protocol.estimate(copies, config.target, rng)
        results[name] = TrialResult(name, summary.f_hat, fbar_sampled, fbar_unsampled)
        variances[name] = float(entry.variances[sampled].sum()) / config.M ** 2
        rounds[name] = summary.m
    return TrialOutcome(results, variances, lower_bound, rounds)


def run_trial(
    config: Union[ExperimentConfig, ExperimentSetup],
    trial_index: int,
    protocol: Optional[str] = None,
) -> TrialResult:
    """
    One trial of one protocol (default: the first selected one).

    The result does not depend on which other protocols are selected.
    """
    setup = config if isinstance(config, ExperimentSetup) else build_setup(config)
    name = setup.names[0] if protocol is None else protocol
    if name not in setup.names:
        raise ConfigError(f"Protocol {name!r} is not part of this experiment {setup.names}")
    return _run_trial_all(setup, trial_index).results[name]


# ---------------------- Accumulation ----------------------

_QUANTITIES = ("squared_error", "bias", "f_hat", "measurement", "sampling", "cross",
               "analytic_variance", "lower_bound")


@dataclass
class TrialAccumulator:
    """Sums and sums of squares over trials of one protocol; merge is commutative."""

    protocol: str
    count: int = 0
    rounds: int = 0
    sums: dict[str, float] = field(default_factory=lambda: dict.fromkeys(_QUANTITIES, 0.0))
    squares: dict[str, float] = field(default_factory=lambda: dict.fromkeys(_QUANTITIES, 0.0))

    def add(self, result: TrialResult, analytic_variance: float = 0.0,
            lower_bound: float = 0.0, rounds: int = 0):
        values = {
            "squared_error": result.squared_error,
            "bias": result.f_hat - result.fbar_unsampled,
            "f_hat": result.f_hat,
            "measurement": result.measurement_error_term,
            "sampling": result.sampling_error_term,
            "cross": result.cross_term,
            "analytic_variance": analytic_variance,
            "lower_bound": lower_bound,
        }
        for key, value in values.items():
            self.sums[key] += value
            self.squares[key] += value * value
        self.count += 1
        self.rounds += rounds

    def merge(self, other: TrialAccumulator) -> TrialAccumulator:
        if other.protocol != self.protocol:
            raise ValueError(f"Cannot merge {other.protocol} into {self.protocol}")
        merged = TrialAccumulator(self.protocol, self.count + other.count, self.rounds + other.rounds)
        for key in _QUANTITIES:
            merged.sums[key] = self.sums[key] + other.sums[key]
            merged.squares[key] = self.squares[key] + other.squares[key]
        return merged

    def mean(self, key: str) -> float:
        return self.sums[key] / self.count if self.count else math.nan

    def variance(self, key: str) -> float:
        """Unbiased sample variance across trials."""
        if self.count < 2:
            return math.nan
        mean = self.mean(key)
        return max(0.0, (self.squares[key] - self.count * mean * mean) / (self.count - 1))

    def stderr(self, key: str) -> float:
        if self.count < 2:
            return math.nan
        return math.sqrt(self.variance(key) / self.count)

    def to_row(self, config: ExperimentConfig, parameter: str = "", value: float = math.nan) -> SweepRow:
        return SweepRow(
            protocol=self.protocol,
            parameter=parameter,
            value=value,
            L=config.L,
            N=config.N,
            M=config.M,
            p_dark=config.p_dark,
            delta=config.delta,
            trials=self.count,
            mse=self.mean("squared_error"),
            mse_stderr=self.stderr("squared_error"),
            bias=self.mean("bias"),
            bias_stderr=self.stderr("bias"),
            analytic_variance=self.mean("analytic_variance"),
            lower_bound=self.mean("lower_bound"),
            measurement_mse=self.mean("measurement"),
            measurement_stderr=self.stderr("measurement"),
            sampling_mse=self.mean("sampling"),
            cross=self.mean("cross"),
            cross_stderr=self.stderr("cross"),
        )


def run_batch(setup: ExperimentSetup, start: int, stop: int) -> dict[str, TrialAccumulator]:
    """Trials start..stop-1 accumulated per protocol."""
    accumulators = {name: TrialAccumulator(name) for name in setup.names}
    for trial_index in range(start, stop):
        outcome = _run_trial_all(setup, trial_index)
        for name, result in outcome.results.items():
            accumulators[name].add(result, outcome.analytic_variance[name],
                                   outcome.lower_bound, outcome.rounds[name])
    return accumulators


def run_trials(
    config: ExperimentConfig,
    workers: Union[int, str, None] = None,
    progress: Optional[bool] = None,
) -> dict[str, TrialAccumulator]:
    """
    All ``config.trials`` trials, merged per protocol.

    Batches are merged in trial order, so the sums are bit-identical for
    any worker count.
    """
    setup = build_setup(config)
    workers = config.workers if workers is None else workers
    if progress is None:
        progress = bool(ConfigManager.get_instance().get("execution.progress", True))

    started = time.perf_counter()
    batches = run_batches(partial(run_batch, setup), config.trials, config.batch_size,
                          workers=workers, progress=progress)
    merged = {name: TrialAccumulator(name) for name in setup.names}
    for batch in batches:
        for name, accumulator in batch.items():
            merged[name] = merged[name].merge(accumulator)
    logger.debug(f"📊 {config.trials} trials in {format_time(time.perf_counter() - started)}")
    return merged


# ---------------------- Sweeps ----------------------


def run_sweep(
    config: ExperimentConfig,
    parameter: str,
    values: Sequence[float],
    workers: Union[int, str, None] = None,
    progress: Optional[bool] = None,
) -> list[SweepRow]:
    """
    One row per value per selected protocol.

    Args:
        config: Base experiment.
        parameter: "p_dark", "delta", "f" (i.i.d. noise only) or "M".
        values: Grid of values for ``parameter``.

    Raises:
        ConfigError: on an unknown parameter or an invalid grid point.
    """
    if parameter not in constants.SWEEP_PARAMETERS:
        raise ConfigError(f"Unknown sweep parameter {parameter!r}; expected {constants.SWEEP_PARAMETERS}")
    if parameter == "f" and config.noise_model != "iid":
        raise ConfigError("Sweeping f needs noise.model = iid")
    if parameter in ("p_dark", "delta") and config.noise_model != "dark-count":
        raise ConfigError(f"Sweeping {parameter} needs noise.model = dark-count")

    rows: list[SweepRow] = []
    for value in values:
        if parameter == "M":
            if float(value) != int(value):
                raise ConfigError(f"M must be an integer, got {value}")
            value = int(value)
        point = config.with_overrides(**{parameter: value})
        accumulators = run_trials(point, workers=workers, progress=progress)
        point_rows = [accumulators[name].to_row(point, parameter, float(value))
                      for name in constants.PROTOCOL_NAMES if name in accumulators]
        rows.extend(point_rows)
        logger.info(f"📊 {parameter}={value:g}: " + ", ".join(
            f"{r.protocol} mse={r.mse:.3e}±{r.mse_stderr:.1e}" for r in point_rows))
    return rows


# ---------------------- Output ----------------------


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: Iterable[SweepRow], path: Union[str, Path]) -> Path:
    """
    Write rows with the fixed column order; floats use their shortest exact repr.

    Raises:
        OSError: if the file cannot be written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(constants.CSV_COLUMNS)
        for row in rows:
            record = row.csv_record()
            writer.writerow([_format_cell(record[column]) for column in constants.CSV_COLUMNS])
    logger.info(f"💾 CSV written: {path}")
    return path


def load_csv(path: Union[str, Path]) -> list[dict]:
    """Read a CSV written by ``emit_csv`` back into typed dicts."""
    integer_columns = {"L", "N", "M", "trials"}
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for record in csv.DictReader(f):
            typed = {}
            for key, text in record.items():
                if key == "protocol":
                    typed[key] = text
                elif key in integer_columns:
                    typed[key] = int(text)
                else:
                    typed[key] = float(text)
            rows.append(typed)
    return rows


_AXIS_LABELS = {
    "p_dark": "dark count probability $P_d$",
    "delta": r"correlation $1-\delta$",
    "f": "copy fidelity $f$",
    "M": "sampled copies $M$",
}


def emit_svg(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    """Line chart of MSE against the swept parameter, one series per protocol."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parameter = rows[0].parameter if rows else ""

    figure = Figure(figsize=(6.4, 4.2))
    axes = figure.add_subplot(1, 1, 1)
    for name in constants.PROTOCOL_NAMES:
        series = [r for r in rows if r.protocol == name]
        if not series:
            continue
        x = [r.correlation if parameter == "delta" else r.value for r in series]
        order = np.argsort(x)
        axes.errorbar(np.asarray(x)[order], np.asarray([r.mse for r in series])[order],
                      yerr=np.nan_to_num(np.asarray([r.mse_stderr for r in series])[order]),
                      marker="o", capsize=3, label=name)
    axes.set_xlabel(_AXIS_LABELS.get(parameter, parameter or "value"))
    axes.set_ylabel("mean squared error")
    axes.ticklabel_format(axis="y", style="sci", scilimits=(0, 0))
    axes.grid(True, alpha=0.3)
    if rows:
        axes.legend()
        first = rows[0]
        axes.set_title(f"L={first.L}, N={first.N}, M={first.M}, trials={first.trials}")
    figure.tight_layout()

    with matplotlib.rc_context({"svg.hashsalt": "ghz-fidelity", "svg.fonttype": "none"}):
        figure.savefig(path, format="svg", metadata={"Date": None})
    logger.info(f"💾 SVG written: {path}")
    return path


def write_manifest(
    csv_path: Union[str, Path],
    config: ExperimentConfig,
    parameter: str,
    values: Sequence[float],
    elapsed: float,
) -> Path:
    """JSON sidecar next to ``csv_path`` describing how it was produced."""
    manifest = RunManifest.for_output(csv_path)
    manifest.update_meta({
        "version": __version__,
        "parameter": parameter,
        "values": [float(v) for v in values],
        "config": config.to_dict(),
        "elapsed_seconds": round(elapsed, 3),
        "csv": Path(csv_path).name,
    })
    return manifest.meta_path


# ---------------------- Row checks ----------------------


def _term(row: SweepRow, term: str) -> tuple[float, float]:
    """(mean, standard error) of ``term`` in ``row``."""
    if term == "measurement":
        return row.measurement_mse, row.measurement_stderr
    return row.mse, row.mse_stderr


def _within(lower: SweepRow, upper: SweepRow, sigmas: float, term: str = "mse") -> bool:
    """lower <= upper on ``term`` up to ``sigmas`` combined standard errors."""
    low, low_err = _term(lower, term)
    high, high_err = _term(upper, term)
    slack = sigmas * math.hypot(low_err, high_err)
    return low <= high + slack


def ordering_violations(
    rows: Sequence[SweepRow],
    order: Sequence[str] = constants.PROTOCOL_NAMES,
    sigmas: float = 3.0,
) -> list[str]:
    """Grid points where MSE does not follow ``order`` (smallest first)."""
    violations = []
    for value in sorted({r.value for r in rows}):
        point = {r.protocol: r for r in rows if r.value == value}
        present = [name for name in order if name in point]
        for better, worse in zip(present, present[1:]):
            if not _within(point[better], point[worse], sigmas):
                violations.append(f"{rows[0].parameter}={value:g}: {better} "
                                  f"{point[better].mse:.3e} > {worse} {point[worse].mse:.3e}")
    return violations


def monotonicity_violations(
    rows: Sequence[SweepRow],
    increasing: bool = True,
    use_correlation: bool = False,
    sigmas: float = 3.0,
    term: str = "mse",
) -> list[str]:
    """
    Adjacent grid points (per protocol) that break the expected trend.

    Args:
        rows: One sweep.
        increasing: Expected direction along the swept axis.
        use_correlation: Order points by 1 - delta instead of the swept value.
        sigmas: Allowed slack in combined standard errors.
        term: "mse" for the total error, "measurement" for
            (f_hat - fbar_sampled)^2 alone. In a p_dark sweep only the
            measurement term grows; the sampling term shrinks as
            p_dark (1 - p_dark) does.

    Raises:
        ValueError: on an unknown ``term``.
    """
    if term not in constants.TREND_TERMS:
        raise ValueError(f"Unknown trend term {term!r}; expected {constants.TREND_TERMS}")
    violations = []
    for name in constants.PROTOCOL_NAMES:
        series = [r for r in rows if r.protocol == name]
        series.sort(key=lambda r: r.correlation if use_correlation else r.value)
        for first, second in zip(series, series[1:]):
            ok = (_within(first, second, sigmas, term) if increasing
                  else _within(second, first, sigmas, term))
            if not ok:
                x = "correlation" if use_correlation else first.parameter
                violations.append(f"{name}: {term} {_term(first, term)[0]:.3e} -> "
                                  f"{_term(second, term)[0]:.3e} breaks the "
                                  f"{'increasing' if increasing else 'decreasing'} trend in {x}")
    return violations
