"""
Noisy GHZ copies.

Three ingredients:
- ``DarkCountModel``: the two-state Markov chain of detector dark counts,
  column-stochastic transition matrix
      [[1 - delta*P, delta*(1 - P)],
       [delta*P,     1 - delta*(1 - P)]]
  started from its stationary law (1 - P, P).
- ``NoiseSpec``: what a degraded copy looks like (white, dephased,
  opposite-sign GHZ, or a mixture of those).
- ``Ensemble``: N copies stored as a small palette of distinct states plus
  one palette index per copy. The joint 2^(NL) matrix is never built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from core import constants
from core.algebra import (DensityMatrix, GhzLabel, fidelity, ghz_density,
                          ghz_labels)
from core.exceptions import NoiseModelError
from utils.helpers import make_rng
from utils.logger import get_logger

logger = get_logger(__name__)


# ---------------------- Dark-count Markov chain ----------------------


@dataclass(frozen=True)
class DarkCountModel:
    """Dark-count process with mean rate ``p_dark`` and lag-1 correlation 1 - delta."""

    p_dark: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_dark <= 1.0:
            raise NoiseModelError(f"p_dark must lie in [0, 1], got {self.p_dark}")
        if not 0.0 < self.delta <= self.max_delta(self.p_dark) + 1e-12:
            raise NoiseModelError(
                f"delta must lie in (0, {self.max_delta(self.p_dark):g}] for "
                f"p_dark={self.p_dark}, got {self.delta}"
            )
        if self.seed < 0:
            raise NoiseModelError(f"seed must be non-negative, got {self.seed}")

    @staticmethod
    def max_delta(p_dark: float) -> float:
        bounds = [1.0 / p for p in (p_dark, 1.0 - p_dark) if p > 0]
        return min(bounds) if bounds else math.inf

    @classmethod
    def from_correlation(cls, p_dark: float, correlation: float, seed: int = 0) -> DarkCountModel:
        return cls(p_dark=p_dark, delta=1.0 - correlation, seed=seed)

    @property
    def leave_probabilities(self) -> tuple[float, float]:
        """Pr[0 -> 1] and Pr[1 -> 0]."""
        return self.delta * self.p_dark, self.delta * (1.0 - self.p_dark)

    def transition_matrix(self) -> np.ndarray:
        """Column-stochastic: entry [i, j] = Pr[D_(n+1) = i | D_n = j]."""
        up, down = self.leave_probabilities
        return np.array([[1.0 - up, down],
                         [up, 1.0 - down]])

    def stationary(self) -> np.ndarray:
        return np.array([1.0 - self.p_dark, self.p_dark])

    def lag1_correlation(self) -> float:
        return 1.0 - self.delta


def dark_count_chain(
    model: DarkCountModel,
    n: int,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Sample n consecutive dark-count states.

    The chain is drawn as alternating geometric sojourn times, which is exact
    in law for a two-state chain and avoids a Python loop over n steps.

    Args:
        model: Chain parameters.
        n: Number of states.
        rng: Generator to draw from; defaults to the stream of ``model.seed``.

    Returns:
        int8 array of 0/1 of length n.
    """
    if n < 0:
        raise NoiseModelError(f"Chain length must be non-negative, got {n}")
    rng = make_rng(model.seed, constants.STREAM_ENSEMBLE) if rng is None else rng
    chain = np.empty(n, dtype=np.int8)
    if n == 0:
        return chain

    state = int(rng.random() < model.p_dark)
    leave = model.leave_probabilities
    position = 0
    # Expected sojourns per chunk keep the number of numpy calls small
    mean_run = min(n, 0.5 * sum(1.0 / p if p > 0 else n for p in leave))
    chunk = max(16, int(2 * n / max(mean_run, 1.0)) + 1)
    chunk += chunk % 2
    while position < n:
        lengths = np.empty(chunk, dtype=np.int64)
        for parity in (0, 1):
            p_leave = leave[state ^ parity]
            if p_leave > 0:
                lengths[parity::2] = rng.geometric(p_leave, size=len(lengths[parity::2]))
            else:
                lengths[parity::2] = n
        states = (state ^ (np.arange(chunk) & 1)).astype(np.int8)
        run = np.repeat(states, np.minimum(lengths, n - position))
        take = min(len(run), n - position)
        chain[position:position + take] = run[:take]
        position += take
        # chunk length is even, so the next chunk starts in the same state
    return chain


# ---------------------- Degraded-state specifications ----------------------


def _canonical_kind(kind: str) -> str:
    kind = constants.NOISE_KIND_ALIASES.get(kind, kind)
    if kind not in constants.NOISE_KINDS:
        raise NoiseModelError(
            f"Unknown noise kind {kind!r}; expected one of "
            f"{constants.NOISE_KINDS + tuple(constants.NOISE_KIND_ALIASES)}"
        )
    return kind


@dataclass(frozen=True)
class NoiseSpec:
    """
    Shape of the noise on a degraded copy.

    Kinds and parameters:
        perfect            no noise at all
        white              I / 2^L (alias: dark-replaced)
        dephased           coherence c in [0, 1]: ((1+c)/2) G^s + ((1-c)/2) G^(-s)
        adversarial-minus  the opposite-sign GHZ state G^(-s)_t
        custom-mixture     weights ``white``, ``dephased``, ``minus`` (normalized)

    Every kind accepts ``baseline_fidelity`` (default 1): the fidelity of a
    copy that did not see a dark count.
    """

    kind: str = "white"
    parameters: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "kind", _canonical_kind(self.kind))
        params = self.parameters
        if isinstance(params, Mapping):
            params = params.items()
        params = tuple(sorted((str(k), float(v)) for k, v in params))
        object.__setattr__(self, "parameters", params)
        self._validate()

    @classmethod
    def of(cls, kind: str, **parameters: float) -> NoiseSpec:
        return cls(kind, tuple(parameters.items()))

    def param(self, name: str, default: float = 0.0) -> float:
        return dict(self.parameters).get(name, default)

    def _validate(self):
        if not 0.0 <= self.param("baseline_fidelity", 1.0) <= 1.0:
            raise NoiseModelError("baseline_fidelity must lie in [0, 1]")
        if self.kind == "dephased" and not 0.0 <= self.param("coherence") <= 1.0:
            raise NoiseModelError("dephased coherence must lie in [0, 1]")
        if self.kind == "custom-mixture":
            weights = self._mixture_weights()
            if any(w < 0 for w in weights.values()) or sum(weights.values()) <= 0:
                raise NoiseModelError(f"custom-mixture needs non-negative weights, got {weights}")

    def _mixture_weights(self) -> dict[str, float]:
        return {name: self.param(name) for name in ("white", "dephased", "minus")}

    # ---------------------- Closed forms ----------------------

    def degraded_state(self, target: GhzLabel) -> DensityMatrix:
        num_qubits = target.num_qubits
        if self.kind == "perfect":
            return ghz_density(target)
        if self.kind == "white":
            return DensityMatrix.maximally_mixed(num_qubits)
        if self.kind == "adversarial-minus":
            return ghz_density(target.flipped())
        if self.kind == "dephased":
            c = self.param("coherence")
            return DensityMatrix.mixture([
                ((1 + c) / 2, ghz_density(target)),
                ((1 - c) / 2, ghz_density(target.flipped())),
            ])
        weights = self._mixture_weights()
        total = sum(weights.values())
        parts = {
            "white": NoiseSpec("white"),
            "dephased": NoiseSpec("dephased"),
            "minus": NoiseSpec("adversarial-minus"),
        }
        return DensityMatrix.mixture(
            (w / total, parts[name].degraded_state(target))
            for name, w in weights.items() if w > 0
        )

    def degraded_fidelity(self, num_qubits: int) -> float:
        """Closed-form fidelity of ``degraded_state`` to its target."""
        if self.kind == "perfect":
            return 1.0
        if self.kind == "white":
            return 2.0 ** -num_qubits
        if self.kind == "adversarial-minus":
            return 0.0
        if self.kind == "dephased":
            return (1.0 + self.param("coherence")) / 2.0
        weights = self._mixture_weights()
        total = sum(weights.values())
        return (weights["white"] * 2.0 ** -num_qubits + weights["dephased"] * 0.5) / total

    def mixture_for(self, f: float, target: GhzLabel) -> DensityMatrix:
        """w G + (1 - w) D with w chosen so that the fidelity is exactly f.

        Raises:
            NoiseModelError: if f is below the degraded state's own fidelity.
        """
        if not 0.0 <= f <= 1.0:
            raise NoiseModelError(f"Fidelity must lie in [0, 1], got {f}")
        if f == 1.0:
            return ghz_density(target)
        floor = self.degraded_fidelity(target.num_qubits)
        if floor >= 1.0 or f < floor - constants.EXACT_TOL:
            raise NoiseModelError(
                f"Fidelity {f} is not reachable with {self.kind} noise "
                f"(minimum {floor:.6g}, L={target.num_qubits})"
            )
        weight = min(1.0, max(0.0, (f - floor) / (1.0 - floor)))
        return DensityMatrix.mixture([
            (weight, ghz_density(target)),
            (1.0 - weight, self.degraded_state(target)),
        ])

    def baseline_state(self, target: GhzLabel) -> DensityMatrix:
        return self.mixture_for(self.param("baseline_fidelity", 1.0), target)


def copy_state(dark_bit: int, target: GhzLabel, spec: NoiseSpec) -> DensityMatrix:
    """Baseline copy for dark_bit = 0, degraded copy for dark_bit = 1."""
    if dark_bit not in (0, 1):
        raise NoiseModelError(f"dark_bit must be 0 or 1, got {dark_bit}")
    return spec.degraded_state(target) if dark_bit else spec.baseline_state(target)


def noise_component(rho: DensityMatrix, target: GhzLabel, f: Optional[float] = None) -> np.ndarray:
    """N = (rho - f G) / (1 - f); f defaults to the state's fidelity."""
    f = fidelity(rho, target) if f is None else f
    if f >= 1.0:
        raise NoiseModelError("A fidelity-1 copy has no noise component")
    return (rho.entries - f * ghz_density(target).entries) / (1.0 - f)


def random_orthogonal_noise(target: GhzLabel, rng: np.random.Generator) -> DensityMatrix:
    """GHZ-diagonal state with Dirichlet weights on every label except the target."""
    others = [g for g in ghz_labels(target.num_qubits) if g != target]
    weights = rng.dirichlet(np.ones(len(others)))
    return DensityMatrix.mixture(zip(weights, (ghz_density(g) for g in others)))


def iid_ensemble(
    n: int,
    f: float,
    target: GhzLabel,
    spec: NoiseSpec,
    seed: int = 0,
    randomize: bool = False,
) -> list[DensityMatrix]:
    """
    n copies with fidelity exactly f.

    With ``randomize`` every copy gets its own random noise component
    (independent Dirichlet draw on stream (seed, copy index)); otherwise all
    copies are the same ``spec.mixture_for(f)`` state.
    """
    if n < 0:
        raise NoiseModelError(f"Ensemble size must be non-negative, got {n}")
    if not randomize:
        state = spec.mixture_for(f, target)
        return [state] * n
    if not 0.0 <= f <= 1.0:
        raise NoiseModelError(f"Fidelity must lie in [0, 1], got {f}")
    copies = []
    for index in range(n):
        noise = random_orthogonal_noise(target, make_rng(seed, constants.STREAM_ENSEMBLE, index))
        copies.append(DensityMatrix.mixture([(f, ghz_density(target)), (1.0 - f, noise)]))
    return copies


# ---------------------- Palette ensembles ----------------------


@dataclass(frozen=True)
class Ensemble:
    """N copies as palette states plus a palette index per copy."""

    palette: tuple[DensityMatrix, ...]
    indices: np.ndarray
    palette_fidelities: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)

    def fidelities(self) -> np.ndarray:
        return self.palette_fidelities[self.indices]

    def states(self, positions: Optional[Sequence[int]] = None) -> list[DensityMatrix]:
        positions = range(self.size) if positions is None else positions
        return [self.palette[self.indices[i]] for i in positions]


def dark_count_ensemble(
    model: DarkCountModel,
    n: int,
    target: GhzLabel,
    spec: NoiseSpec,
    rng: Optional[np.random.Generator] = None,
) -> Ensemble:
    palette = (copy_state(0, target, spec), copy_state(1, target, spec))
    chain = dark_count_chain(model, n, rng)
    return Ensemble(palette, chain.astype(np.intp),
                    np.array([fidelity(rho, target) for rho in palette]))


def constant_ensemble(n: int, f: float, target: GhzLabel, spec: NoiseSpec) -> Ensemble:
    state = spec.mixture_for(f, target)
    return Ensemble((state,), np.zeros(n, dtype=np.intp), np.array([fidelity(state, target)]))
