"""
Experiment description: sizes, target, protocols, noise and seeding.

Config files are flat ``key = value`` text:

    # three-protocol comparison
    L = 3
    N = 2000
    M = 1000
    target = +000
    protocol = all
    noise.model = dark-count
    noise.kind = white
    p_dark = 0.5
    delta = 0.5
    trials = 10000
    seed = 20240601

``guhne_share`` is the population-round share q of the guhne baseline.

Precedence: CLI flags (``with_overrides``) > file values > ConfigManager
defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from core import constants
from core.algebra import BitString, GhzLabel
from core.config_manager import ConfigManager
from core.exceptions import ConfigError, GhzFidelityError
from core.noise import DarkCountModel, NoiseSpec
from utils.logger import get_logger

logger = get_logger(__name__)

_INT_KEYS = ("L", "N", "M", "trials", "seed", "batch_size")
_FLOAT_KEYS = ("p_dark", "delta", "f", "guhne_share")
_NOISE_PARAMS = ("coherence", "white", "dephased", "minus", "baseline_fidelity")


def _parse_protocols(value: Union[str, tuple, list]) -> tuple[str, ...]:
    if isinstance(value, (tuple, list)):
        names = [str(v).strip() for v in value]
    else:
        names = [v.strip() for v in str(value).split(",") if v.strip()]
    if names == ["all"]:
        return constants.PROTOCOL_NAMES
    return tuple(names)


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"Not a boolean: {value!r}")


def parse_config_text(text: str, source: str = "<text>") -> dict[str, str]:
    """Split ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            logger.warning(f"⚠️ {source}:{lineno}: '{key}' set twice, last value wins")
        values[key] = value
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: N copies, M sampled, ``trials`` repetitions."""

    L: int = 3
    N: int = 2000
    M: int = 1000
    target: Optional[GhzLabel] = None
    protocols: tuple[str, ...] = ("proposed",)
    noise_model: str = "dark-count"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    p_dark: float = 0.5
    delta: float = 0.5
    f: float = 0.8
    guhne_share: float = 0.5
    trials: int = 10000
    seed: int = 0
    workers: Union[int, str] = "auto"
    batch_size: int = 500
    vectorized: bool = True

    def __post_init__(self):
        if self.target is None:
            object.__setattr__(self, "target", GhzLabel(1, BitString.zeros(self.L)))

    # ---------------------- Construction ----------------------

    @classmethod
    def defaults(cls) -> ExperimentConfig:
        """Values from the application settings (ConfigManager)."""
        config = ConfigManager.get_instance()
        return cls(
            L=int(config.get("experiment.L", 3)),
            N=int(config.get("experiment.N", 2000)),
            M=int(config.get("experiment.M", 1000)),
            protocols=_parse_protocols(config.get("experiment.protocol", "proposed")),
            noise_model=config.get("noise.model", "dark-count"),
            noise=NoiseSpec(config.get("noise.kind", "white")),
            p_dark=float(config.get("noise.p_dark", 0.5)),
            delta=float(config.get("noise.delta", 0.5)),
            f=float(config.get("noise.f", 0.8)),
            guhne_share=float(config.get("protocols.guhne_population_share", 0.5)),
            trials=int(config.get("experiment.sweep_trials", 10000)),
            seed=int(config.get("experiment.seed", 0)),
            workers=config.get("execution.workers", "auto"),
            batch_size=int(config.get("execution.batch_size", 500)),
        )

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
        """
        Apply flat string values (as read from a config file) on top of ``base``.

        Raises:
            ConfigError: on unknown keys or unparsable values.
        """
        base = cls.defaults() if base is None else base
        changes: dict[str, Any] = {}
        noise_kind = base.noise.kind
        noise_params = dict(base.noise.parameters)
        sign, t = None, None

        for key, value in values.items():
            try:
                if key in _INT_KEYS:
                    changes[key] = int(value)
                elif key in _FLOAT_KEYS:
                    changes[key] = float(value)
                elif key in ("protocol", "protocols"):
                    changes["protocols"] = _parse_protocols(value)
                elif key == "target":
                    label = value if isinstance(value, GhzLabel) else GhzLabel.parse(str(value))
                    sign, t = label.sign, label.t
                elif key == "target.sign":
                    sign = str(value).strip()
                elif key == "target.t":
                    t = BitString.from_str(str(value))
                elif key == "noise.model":
                    changes["noise_model"] = str(value).strip()
                elif key == "noise.kind":
                    noise_kind = str(value).strip()
                elif key.startswith("noise.") and key[6:] in _NOISE_PARAMS:
                    noise_params[key[6:]] = float(value)
                elif key == "workers":
                    changes["workers"] = value if str(value) == "auto" else int(value)
                elif key == "vectorized":
                    changes["vectorized"] = _parse_bool(value)
                else:
                    raise ConfigError(f"Unknown config key '{key}'")
            except ConfigError:
                raise
            except (ValueError, GhzFidelityError) as e:
                raise ConfigError(f"Bad value for '{key}': {value!r} ({e})") from e

        try:
            changes["noise"] = NoiseSpec(noise_kind, tuple(noise_params.items()))
        except GhzFidelityError as e:
            raise ConfigError(f"Bad noise settings: {e}") from e
        length = int(changes.get("L", base.L))
        if sign is not None or t is not None:
            sign = base.target.sign if sign is None else sign
            t = BitString.zeros(length) if t is None else t
            changes["target"] = GhzLabel(sign, t)
        elif length != base.L:
            if base.target.t.popcount:
                raise ConfigError(f"Changing L to {length} would drop target {base.target}; "
                                  f"set target as well")
            changes["target"] = GhzLabel(base.target.sign, BitString.zeros(length))
        return replace(base, **changes)

    @classmethod
    def from_file(cls, path: Union[str, Path], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        config = cls.from_mapping(parse_config_text(text, str(path)), base)
        logger.info(f"📋 Loaded experiment config from {path}")
        return config

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """CLI flags on top of this config; ``None`` values are ignored."""
        values = {k: v for k, v in overrides.items() if v is not None}
        if not values:
            return self
        return ExperimentConfig.from_mapping({k: v for k, v in values.items()}, base=self)

    # ---------------------- Validation ----------------------

    def validate(self) -> ExperimentConfig:
        """
        Check sizes, names and noise admissibility; returns self for chaining.

        Raises:
            ConfigError: for sizes, names or target mismatches.
            NoiseModelError: for inadmissible noise parameters.
        """
        if not 2 <= self.L <= constants.MAX_QUBITS:
            raise ConfigError(f"L must lie in 2..{constants.MAX_QUBITS}, got {self.L}")
        if not 1 <= self.M < self.N:
            raise ConfigError(f"Need 1 <= M < N, got M={self.M}, N={self.N}")
        if self.trials < 1:
            raise ConfigError(f"trials must be positive, got {self.trials}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.target.num_qubits != self.L:
            raise ConfigError(f"Target {self.target} does not have L={self.L} qubits")
        if not self.protocols:
            raise ConfigError("No protocol selected")
        unknown = [p for p in self.protocols if p not in constants.PROTOCOL_NAMES]
        if unknown:
            raise ConfigError(f"Unknown protocol(s) {unknown}; expected {constants.PROTOCOL_NAMES}")
        if not 0.0 < self.guhne_share < 1.0:
            raise ConfigError(f"guhne_share must lie in (0, 1), got {self.guhne_share}")
        if self.noise_model not in constants.NOISE_MODELS:
            raise ConfigError(f"Unknown noise model {self.noise_model!r}; expected {constants.NOISE_MODELS}")
        if self.noise_model == "dark-count":
            self.dark_count_model()
        else:
            self.noise.mixture_for(self.f, self.target)
        return self

    def dark_count_model(self) -> DarkCountModel:
        return DarkCountModel(self.p_dark, self.delta, self.seed)

    @property
    def correlation(self) -> float:
        return 1.0 - self.delta

    def to_dict(self) -> dict:
        data = asdict(self)
        data["target"] = str(self.target)
        data["protocols"] = list(self.protocols)
        data["noise"] = {"kind": self.noise.kind, **dict(self.noise.parameters)}
        return data
