"""
Fidelity estimation protocols on noisy GHZ copies.

``proposed`` is the local-Pauli QBER protocol:
  - with probability 1/3 measure every qubit in z and flag the round when the
    outcome is neither t nor its complement;
  - otherwise pick an even-parity k uniformly, measure sigma_xy(k) and flag
    c = (-1)^(|k|/2 + k.t - 1) for s = + (exponent without the -1 for s = -);
  - f_hat = 1 - 1.5 * errors / M.

Two baselines share the same one-measurement-per-copy budget:
  - ``guhne``: population (z basis) plus coherence rounds measuring
    cos(theta) X + sin(theta) Y on every qubit, theta = k pi / L;
  - ``dfe``: a uniformly random element of the target's stabilizer group.

Every protocol also exposes ``outcome_distribution``: the exact law of a
single round's contribution to the estimate for a given copy. The Monte
Carlo harness samples from these tables, which is the same law as playing
the rounds one by one through ``run_protocol``/``estimate``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from core import constants
from core.algebra import (BitString, DensityMatrix, GhzLabel, PauliString,
                          even_parity_strings, ghz_density, pauli_expectation,
                          pauli_matrix, sigma_xy, stabilizer_group)
from core.config_manager import ConfigManager
from core.exceptions import ConfigError, DimensionError, InvalidLabelError
from models.records import EstimateSummary, RoundRecord, RoundSettings
from utils.logger import get_logger

logger = get_logger(__name__)


# ---------------------- Proposed-protocol rounds ----------------------


@lru_cache(maxsize=None)
def _even_strings(num_qubits: int) -> tuple[BitString, ...]:
    return tuple(even_parity_strings(num_qubits))


def draw_settings(num_qubits: int, rng: np.random.Generator) -> RoundSettings:
    """a = 0 with probability 1/3; otherwise a uniform even-parity k."""
    if num_qubits < 2:
        raise DimensionError(f"Protocol needs at least 2 qubits, got {num_qubits}")
    if rng.random() < constants.PROB_Z_ROUND:
        return RoundSettings(a=0)
    strings = _even_strings(num_qubits)
    return RoundSettings(a=1, k=strings[rng.integers(len(strings))])


def flagged_outcome(k: BitString, target: GhzLabel) -> int:
    """The x/y outcome recorded as an error for string k."""
    exponent = k.popcount // 2 + k.dot(target.t) - (1 if target.sign == 1 else 0)
    return (-1) ** exponent


def _check_pair(rho: DensityMatrix, target: GhzLabel):
    if rho.num_qubits != target.num_qubits:
        raise DimensionError(f"{target.num_qubits}-qubit target for a {rho.num_qubits}-qubit copy")


def z_round(
    rho: DensityMatrix,
    target: GhzLabel,
    rng: np.random.Generator,
    copy_index: int = 0,
) -> RoundRecord:
    """Measure every qubit in z; error iff the string is not t or its complement."""
    _check_pair(rho, target)
    index = int(rng.choice(rho.dim, p=rho.diagonal()))
    outcome = BitString.from_int(index, rho.num_qubits)
    error = int(outcome not in (target.t, target.t.complement()))
    return RoundRecord(copy_index, RoundSettings(a=0), outcome, error)


def xy_round(
    rho: DensityMatrix,
    target: GhzLabel,
    k: BitString,
    rng: np.random.Generator,
    copy_index: int = 0,
) -> RoundRecord:
    """Measure sigma_xy(k); c = +1 with probability (1 + <sigma_xy(k)>) / 2."""
    _check_pair(rho, target)
    settings = RoundSettings(a=1, k=k)  # rejects odd parity
    expectation = pauli_expectation(rho, sigma_xy(k))
    p_plus = min(1.0, max(0.0, (1.0 + expectation) / 2.0))
    outcome = 1 if rng.random() < p_plus else -1
    error = int(outcome == flagged_outcome(k, target))
    return RoundRecord(copy_index, settings, outcome, error)


def play_round(
    rho: DensityMatrix,
    target: GhzLabel,
    rng: np.random.Generator,
    copy_index: int = 0,
) -> RoundRecord:
    settings = draw_settings(rho.num_qubits, rng)
    if settings.is_z_round:
        return z_round(rho, target, rng, copy_index)
    return xy_round(rho, target, settings.k, rng, copy_index)


def run_protocol(
    copies: Sequence[DensityMatrix],
    target: GhzLabel,
    rng: np.random.Generator,
    records: Optional[list[RoundRecord]] = None,
) -> EstimateSummary:
    """
    One round per copy, then f_hat = 1 - 1.5 * e / M.

    Args:
        copies: The M sampled copies.
        target: Target GHZ label.
        rng: Generator for settings and outcomes.
        records: Optional list that receives every RoundRecord.

    Raises:
        ValueError: if ``copies`` is empty.
    """
    if len(copies) == 0:
        raise ValueError("run_protocol needs at least one copy")
    errors = 0
    for index, rho in enumerate(copies):
        record = play_round(rho, target, rng, index)
        errors += record.error_bit
        if records is not None:
            records.append(record)
    return EstimateSummary.from_errors(len(copies), errors)


def error_probability(rho: DensityMatrix, target: GhzLabel) -> float:
    """Exact Pr[r = 1] of one proposed-protocol round on ``rho``."""
    _check_pair(rho, target)
    populations = rho.entries.diagonal().real
    in_pair = populations[target.t.to_int()] + populations[target.t.complement().to_int()]
    strings = _even_strings(target.num_qubits)
    xy_error = np.mean([
        (1.0 + flagged_outcome(k, target) * pauli_expectation(rho, sigma_xy(k))) / 2.0
        for k in strings
    ])
    return constants.PROB_Z_ROUND * (1.0 - in_pair) + (1.0 - constants.PROB_Z_ROUND) * xy_error


# ---------------------- Analytic formulas ----------------------


def per_round_error_probability(f: float) -> float:
    """(2/3)(1 - f)."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"Fidelity must lie in [0, 1], got {f}")
    return constants.DISTINGUISH_C * (1.0 - f)


def per_round_variance(f: float) -> float:
    """Var[r] = (2f + 1)(2 - 2f) / 9."""
    return (2 * f + 1) * (2 - 2 * f) / 9.0


def theoretical_conditional_variance(fidelities: Sequence[float], m: Optional[int] = None) -> float:
    """Sum over sampled copies of (2 f_n + 1)(1 - f_n) / (2 M^2)."""
    f = np.asarray(fidelities, dtype=float)
    m = len(f) if m is None else m
    if m != len(f):
        raise ValueError(f"M={m} does not match {len(f)} fidelities")
    if m == 0:
        raise ValueError("Need at least one fidelity")
    return float(np.sum((2 * f + 1) * (1 - f)) / (2 * m ** 2))


def error_lower_bound(fidelities: Sequence[float], m: int, n: Optional[int] = None) -> float:
    """Minimum mean squared error: sum over all N copies of (2f+1)(1-f) / (2MN)."""
    f = np.asarray(fidelities, dtype=float)
    n = len(f) if n is None else n
    if n != len(f):
        raise ValueError(f"N={n} does not match {len(f)} fidelities")
    if m < 1 or m > n:
        raise ValueError(f"Need 1 <= M <= N, got M={m}, N={n}")
    return float(np.sum((2 * f + 1) * (1 - f)) / (2 * m * n))


def theoretical_sampling_error(fidelities: Sequence[float], m: int) -> float:
    """
    E[(fbar_sampled - fbar_unsampled)^2] for a uniform M-subset of N copies.

    Equals N^2 sigma^2 / (M (N - M)(N - 1)) with sigma^2 the population
    variance of the N fidelities.
    """
    f = np.asarray(fidelities, dtype=float)
    n = len(f)
    if not 1 <= m < n:
        raise ValueError(f"Need 1 <= M < N, got M={m}, N={n}")
    sigma2 = float(np.var(f))
    return n ** 2 * sigma2 / (m * (n - m) * (n - 1))


# ---------------------- Round distributions ----------------------


@dataclass(frozen=True)
class RoundDistribution:
    """Exact law of one round: contribution ``values[i]`` with ``probs[i]``."""

    values: np.ndarray
    probs: np.ndarray
    error_flags: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.probs @ self.values)

    @property
    def variance(self) -> float:
        return float(self.probs @ self.values ** 2) - self.mean ** 2

    @property
    def error_probability(self) -> float:
        return float(self.probs @ self.error_flags)


def cumulative_table(tables: Sequence[RoundDistribution]) -> np.ndarray:
    """Row-wise CDFs of a palette's round distributions, last column pinned to 1."""
    cdf = np.cumsum(np.vstack([t.probs for t in tables]), axis=1)
    cdf[:, -1] = 1.0
    return cdf


def _binary_probs(expectation: float) -> tuple[float, float]:
    p_plus = min(1.0, max(0.0, (1.0 + expectation) / 2.0))
    return p_plus, 1.0 - p_plus


def _finish(values, probs, flags) -> RoundDistribution:
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return RoundDistribution(np.asarray(values, dtype=float), probs / probs.sum(),
                             np.asarray(flags, dtype=np.int64))


class FidelityProtocol(ABC):
    """Common interface of the three estimators."""

    name: str = ""

    @abstractmethod
    def outcome_distribution(self, rho: DensityMatrix, target: GhzLabel) -> RoundDistribution:
        """Exact per-round law on ``rho``."""

    @abstractmethod
    def estimate(self, copies: Sequence[DensityMatrix], target: GhzLabel,
                 rng: np.random.Generator) -> EstimateSummary:
        """Play one round per copy and return the estimate."""

    def summarize(self, m: int, errors: int, total: float) -> EstimateSummary:
        return EstimateSummary(m=m, e=errors, qber=errors / m, f_hat=total / m, protocol=self.name)

    def sample_estimate(
        self,
        tables: Sequence[RoundDistribution],
        indices: np.ndarray,
        rng: np.random.Generator,
        cdf: Optional[np.ndarray] = None,
    ) -> EstimateSummary:
        """
        Vectorized rounds: copy i follows ``tables[indices[i]]``.

        One uniform per round, inverted through the table's CDF.

        Args:
            tables: One distribution per palette state.
            indices: Palette index of every measured copy.
            rng: Round generator.
            cdf: Precomputed ``cumulative_table(tables)``.
        """
        m = len(indices)
        if m == 0:
            raise ValueError("Need at least one sampled copy")
        cdf = cumulative_table(tables) if cdf is None else cdf
        u = rng.random(m)
        outcome = np.minimum((u[:, None] >= cdf[indices]).sum(axis=1), cdf.shape[1] - 1)
        values = tables[0].values
        errors = int(tables[0].error_flags[outcome].sum())
        return self.summarize(m, errors, float(values[outcome].sum()))


class ProposedProtocol(FidelityProtocol):
    """Round contribution 1 - 1.5 r."""

    name = "proposed"
    VALUES = (1.0, 1.0 - constants.ERROR_SCALE)

    def outcome_distribution(self, rho, target):
        p_error = error_probability(rho, target)
        return _finish(self.VALUES, (1.0 - p_error, p_error), (0, 1))

    def estimate(self, copies, target, rng):
        return run_protocol(copies, target, rng)

    def summarize(self, m, errors, total):
        return EstimateSummary.from_errors(m, errors)


@lru_cache(maxsize=64)
def _guhne_operators(target: GhzLabel) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """
    Population projector and the L coherence observables for ``target``.

    The decomposition G = P/2 + s/(2L) sum_k (-1)^k O_k is checked against
    the GHZ projector before it is handed out.
    """
    num_qubits = target.num_qubits
    dim = 2 ** num_qubits
    population = np.zeros((dim, dim), dtype=complex)
    for bits in (target.t, target.t.complement()):
        population[bits.to_int(), bits.to_int()] = 1.0

    coherences = []
    for k in range(num_qubits):
        theta = k * math.pi / num_qubits
        local = []
        for bit in target.t:
            # conjugation by X flips the angle on qubits where t_l = 1
            angle = -theta if bit else theta
            local.append(math.cos(angle) * pauli_matrix("X") + math.sin(angle) * pauli_matrix("Y"))
        operator = local[0]
        for factor in local[1:]:
            operator = np.kron(operator, factor)
        coherences.append(operator)

    rebuilt = population / 2 + target.sign / (2 * num_qubits) * sum(
        (-1) ** k * op for k, op in enumerate(coherences))
    deviation = float(np.max(np.abs(rebuilt - ghz_density(target).entries)))
    if deviation > constants.EXACT_TOL:
        raise RuntimeError(f"Population/coherence decomposition off by {deviation:.3e} for {target}")
    return population, tuple(coherences)


def _real_expectation(rho: DensityMatrix, operator: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", rho.entries, operator).real)


class GuhneProtocol(FidelityProtocol):
    """
    Population/coherence estimator.

    A share q of rounds measures populations (contribution ok / (2q)); the
    rest measures O_k for a uniform k in 0..L-1 (contribution
    s (-1)^k c / (2(1 - q))).
    """

    name = "guhne"

    def __init__(self, population_share: Optional[float] = None):
        if population_share is None:
            population_share = ConfigManager.get_instance().get(
                "protocols.guhne_population_share", 0.5)
        if not 0.0 < population_share < 1.0:
            raise ConfigError(f"population_share must lie in (0, 1), got {population_share}")
        self.population_share = float(population_share)

    def _values(self) -> tuple[float, ...]:
        q = self.population_share
        return (1 / (2 * q), 0.0, 1 / (2 * (1 - q)), -1 / (2 * (1 - q)))

    def outcome_distribution(self, rho, target):
        _check_pair(rho, target)
        population, coherences = _guhne_operators(target)
        q = self.population_share
        p_pair = min(1.0, max(0.0, _real_expectation(rho, population)))
        p_good = p_bad = 0.0
        for k, operator in enumerate(coherences):
            p_plus, p_minus = _binary_probs(_real_expectation(rho, operator))
            ideal = target.sign * (-1) ** k
            p_good += (p_plus if ideal == 1 else p_minus) / len(coherences)
            p_bad += (p_minus if ideal == 1 else p_plus) / len(coherences)
        probs = (q * p_pair, q * (1 - p_pair), (1 - q) * p_good, (1 - q) * p_bad)
        return _finish(self._values(), probs, (0, 1, 0, 1))

    def estimate(self, copies, target, rng):
        if len(copies) == 0:
            raise ValueError("guhne estimate needs at least one copy")
        if target.num_qubits < 2:
            raise DimensionError("Protocol needs at least 2 qubits")
        population, coherences = _guhne_operators(target)
        q = self.population_share
        values = self._values()
        total, errors = 0.0, 0
        for rho in copies:
            _check_pair(rho, target)
            if rng.random() < q:
                index = int(rng.choice(rho.dim, p=rho.diagonal()))
                ok = population[index, index].real > 0.5
                total += values[0] if ok else values[1]
                errors += int(not ok)
            else:
                k = int(rng.integers(len(coherences)))
                p_plus, _ = _binary_probs(_real_expectation(rho, coherences[k]))
                c = 1 if rng.random() < p_plus else -1
                signed = target.sign * (-1) ** k * c
                total += values[2] if signed == 1 else values[3]
                errors += int(signed != 1)
        return self.summarize(len(copies), errors, total)


class DfeProtocol(FidelityProtocol):
    """Uniform stabilizer sampling: contribution sign(S) * c, mean = fidelity."""

    name = "dfe"
    VALUES = (1.0, -1.0)

    def outcome_distribution(self, rho, target):
        _check_pair(rho, target)
        group = stabilizer_group(target)
        mean = float(np.mean([pauli_expectation(rho, s) for s in group]))
        p_plus, p_minus = _binary_probs(mean)
        return _finish(self.VALUES, (p_plus, p_minus), (0, 1))

    def estimate(self, copies, target, rng):
        if len(copies) == 0:
            raise ValueError("dfe estimate needs at least one copy")
        group = stabilizer_group(target)
        total, errors = 0.0, 0
        for rho in copies:
            _check_pair(rho, target)
            element = group[rng.integers(len(group))]
            bare = PauliString(element.letters)
            p_plus, _ = _binary_probs(pauli_expectation(rho, bare))
            c = 1 if rng.random() < p_plus else -1
            signed = int(round(element.coefficient)) * c
            total += signed
            errors += int(signed != 1)
        return self.summarize(len(copies), errors, total)


def guhne_estimate(copies: Sequence[DensityMatrix], target: GhzLabel, rng: np.random.Generator,
                   population_share: Optional[float] = None) -> EstimateSummary:
    return GuhneProtocol(population_share).estimate(copies, target, rng)


def dfe_estimate(copies: Sequence[DensityMatrix], target: GhzLabel,
                 rng: np.random.Generator) -> EstimateSummary:
    return DfeProtocol().estimate(copies, target, rng)


_REGISTRY = {
    "proposed": ProposedProtocol,
    "guhne": GuhneProtocol,
    "dfe": DfeProtocol,
}


def get_protocol(name: str, population_share: Optional[float] = None) -> FidelityProtocol:
    """
    Instantiate a protocol by name ("proposed", "guhne", "dfe").

    ``population_share`` only applies to ``guhne``; None reads
    ``protocols.guhne_population_share`` from the settings.
    """
    try:
        protocol_class = _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"Unknown protocol {name!r}; expected one of {constants.PROTOCOL_NAMES}"
        ) from None
    if protocol_class is GuhneProtocol:
        return GuhneProtocol(population_share)
    return protocol_class()
