"""
Plain records passed between the protocol, experiment and verify layers.

No numerics live here beyond the invariants each record guarantees about
itself.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional, Union

from core import constants
from core.algebra import BitString
from core.exceptions import InvalidLabelError


@dataclass(frozen=True)
class RoundSettings:
    """Basis-class draw ``a`` (0 = z basis, 1 = x/y basis) and the even-parity string ``k``."""

    a: int
    k: Optional[BitString] = None

    def __post_init__(self):
        if self.a not in (0, 1):
            raise InvalidLabelError(f"Setting a must be 0 or 1, got {self.a}")
        if self.a == 1:
            if self.k is None:
                raise InvalidLabelError("x/y round needs a string k")
            if self.k.parity != 0:
                raise InvalidLabelError(f"x/y string must have even parity, got {self.k}")

    @property
    def is_z_round(self) -> bool:
        return self.a == 0

    def __str__(self) -> str:
        return "z" if self.a == 0 else f"xy[{self.k}]"


@dataclass(frozen=True)
class RoundRecord:
    """One measured copy: settings, raw outcome and the recorded error bit."""

    copy_index: int
    settings: RoundSettings
    raw_outcome: Union[BitString, int]
    error_bit: int

    def __post_init__(self):
        if self.error_bit not in (0, 1):
            raise InvalidLabelError(f"error_bit must be 0 or 1, got {self.error_bit}")
        if self.settings.is_z_round and not isinstance(self.raw_outcome, BitString):
            raise InvalidLabelError("z round outcome must be a bit string")
        if not self.settings.is_z_round and self.raw_outcome not in (-1, 1):
            raise InvalidLabelError(f"x/y round outcome must be +/-1, got {self.raw_outcome}")


@dataclass(frozen=True)
class EstimateSummary:
    """Rounds, errors, QBER and the fidelity estimate.

    For the proposed protocol f_hat = 1 - 1.5 * qber exactly. Baselines
    report their own estimate; their ``e`` counts rounds whose outcome
    disagreed with the ideal GHZ outcome (informational only).
    """

    m: int
    e: int
    qber: float
    f_hat: float
    protocol: str = "proposed"

    @classmethod
    def from_errors(cls, m: int, e: int) -> "EstimateSummary":
        qber = e / m
        return cls(m=m, e=e, qber=qber, f_hat=1.0 - constants.ERROR_SCALE * qber)


@dataclass(frozen=True)
class TrialResult:
    """One Monte Carlo trial of one protocol.

    squared_error = (f_hat - fbar_unsampled)^2,
    measurement_error_term = (f_hat - fbar_sampled)^2,
    sampling_error_term = (fbar_sampled - fbar_unsampled)^2.
    The remainder is the cross term, zero in expectation.
    """

    protocol: str
    f_hat: float
    fbar_sampled: float
    fbar_unsampled: float

    @property
    def squared_error(self) -> float:
        return (self.f_hat - self.fbar_unsampled) ** 2

    @property
    def measurement_error_term(self) -> float:
        return (self.f_hat - self.fbar_sampled) ** 2

    @property
    def sampling_error_term(self) -> float:
        return (self.fbar_sampled - self.fbar_unsampled) ** 2

    @property
    def cross_term(self) -> float:
        return 2.0 * (self.f_hat - self.fbar_sampled) * (self.fbar_sampled - self.fbar_unsampled)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.update(
            squared_error=self.squared_error,
            measurement_error_term=self.measurement_error_term,
            sampling_error_term=self.sampling_error_term,
        )
        return data


@dataclass(frozen=True)
class SweepRow:
    """Aggregated statistics of one protocol at one grid point."""

    protocol: str
    parameter: str
    value: float
    L: int
    N: int
    M: int
    p_dark: float
    delta: float
    trials: int
    mse: float
    mse_stderr: float
    bias: float
    bias_stderr: float
    analytic_variance: float
    lower_bound: float
    measurement_mse: float = 0.0
    measurement_stderr: float = 0.0
    sampling_mse: float = 0.0
    cross: float = 0.0
    cross_stderr: float = 0.0

    @property
    def correlation(self) -> float:
        return 1.0 - self.delta

    def csv_record(self) -> dict:
        """Values for ``constants.CSV_COLUMNS`` in order."""
        return {
            "protocol": self.protocol,
            "L": self.L,
            "N": self.N,
            "M": self.M,
            "p_dark": self.p_dark,
            "delta": self.delta,
            "correlation": self.correlation,
            "trials": self.trials,
            "mse": self.mse,
            "mse_stderr": self.mse_stderr,
            "bias": self.bias,
            "bias_stderr": self.bias_stderr,
            "analytic_variance": self.analytic_variance,
            "lower_bound": self.lower_bound,
            "measurement_error": self.measurement_mse,
            "measurement_stderr": self.measurement_stderr,
            "sampling_error": self.sampling_mse,
            "cross_term": self.cross,
            "cross_stderr": self.cross_stderr,
        }


@dataclass
class OracleReport:
    """Outcome of one exact check; ``passed`` iff deviation <= tolerance."""

    name: str
    max_deviation: float
    tolerance: float
    elapsed: float = 0.0
    details: list[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.max_deviation <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = (f"{status} {self.name:<32} dev={self.max_deviation:.3e} "
                f"tol={self.tolerance:.1e} t={self.elapsed:.2f}s")
        if self.error:
            text += f" error={self.error}"
        return text
