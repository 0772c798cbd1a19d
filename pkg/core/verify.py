"""
Sampling-free oracles for every identity the estimators rely on.

The helpers at the top of this module rebuild GHZ vectors, local
measurement bases and error predicates from plain integers and numpy, without
going through ``core.protocols``. Agreement between the two paths is what the
checks assert.

Every check returns an ``OracleReport``; ``run_all`` runs the whole suite and
keeps going past failures.
"""

from __future__ import annotations

import time
from functools import reduce
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from core import constants
from core.algebra import (DensityMatrix, GhzLabel, bloch_sum, bloch_terms,
                          fidelity, ghz_basis_matrix, ghz_density,
                          ghz_labels, random_density_matrix,
                          stabilizer_group)
from core.noise import NoiseSpec, noise_component
from core.protocols import (DfeProtocol, GuhneProtocol, ProposedProtocol,
                            error_lower_bound, error_probability,
                            theoretical_conditional_variance)
from core.twirl import full_twirl
from models.records import OracleReport
from utils.error_handler import ErrorAccumulator
from utils.helpers import make_rng
from utils.logger import get_logger

logger = get_logger(__name__)

MAX_COUNT_QUBITS = 20
MAX_ENUMERATION_QUBITS = 5

# ---------------------- Naive building blocks ----------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
# columns: +1 eigenvector, -1 eigenvector
_EIGENBASIS = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


def _bits(value: int, length: int) -> list[int]:
    return [(value >> (length - 1 - i)) & 1 for i in range(length)]


def _naive_ghz(sign: int, t: int, length: int) -> np.ndarray:
    vec = np.zeros(2 ** length, dtype=complex)
    vec[t] = 1.0
    vec[(2 ** length - 1) ^ t] = sign
    return vec / np.sqrt(2)


def _naive_fidelity(matrix: np.ndarray, sign: int, t: int, length: int) -> float:
    vec = _naive_ghz(sign, t, length)
    return float((vec.conj() @ matrix @ vec).real)


def _local_outcome_law(matrix: np.ndarray, letters: str) -> tuple[np.ndarray, np.ndarray]:
    """Born probabilities of every local outcome string and the product of the +/-1 outcomes."""
    basis = reduce(np.kron, (_EIGENBASIS[ch] for ch in letters))
    probs = np.clip(np.einsum("ij,jk,ki->i", basis.conj().T, matrix, basis).real, 0.0, None)
    length = len(letters)
    products = np.array([(-1) ** sum(_bits(i, length)) for i in range(2 ** length)])
    return probs, products


def _even_strings(length: int) -> list[int]:
    return [k for k in range(2 ** length) if bin(k).count("1") % 2 == 0]


def _xy_letters(k: int, length: int) -> str:
    return "".join("Y" if b else "X" for b in _bits(k, length))


def naive_error_probability(matrix: np.ndarray, sign: int, t: int, length: int) -> float:
    """Pr[r = 1] by enumerating settings and local outcomes."""
    complement = (2 ** length - 1) ^ t
    z_probs, _ = _local_outcome_law(matrix, "Z" * length)
    z_error = sum(p for outcome, p in enumerate(z_probs) if outcome not in (t, complement))

    strings = _even_strings(length)
    xy_error = 0.0
    for k in strings:
        probs, products = _local_outcome_law(matrix, _xy_letters(k, length))
        weight = bin(k).count("1") // 2 + bin(k & t).count("1")
        flagged = (-1) ** (weight - 1) if sign == 1 else (-1) ** weight
        xy_error += probs[products == flagged].sum() / len(strings)
    total_z = z_probs.sum()
    return (z_error / total_z) / 3 + 2 * xy_error / 3


# ---------------------- Report plumbing ----------------------


def _report(name: str, tolerance: float, check: Callable[[list[str]], float],
            errors: Optional[ErrorAccumulator] = None) -> OracleReport:
    details: list[str] = []
    started = time.perf_counter()
    errors = ErrorAccumulator() if errors is None else errors
    before = errors.count()
    deviation = float("inf")
    with errors.catch(name):
        deviation = float(check(details))
    report = OracleReport(name, deviation, tolerance, time.perf_counter() - started, details)
    if errors.count() > before:
        report.error = str(errors.get_errors()[-1][1])
    elif any(line.startswith("FAIL") for line in details):
        report.error = next(line for line in details if line.startswith("FAIL"))
    return report


# ---------------------- Checks ----------------------


def check_subset_counts(l_max: int = MAX_COUNT_QUBITS) -> OracleReport:
    """
    Even-parity counts by exhaustive popcount scan.

    For every L <= l_max: 2^(L-1) even subsets of L elements, and for a
    fixed T with |T| < L, 2^(L-|T|-1) even and as many odd supersets of T.
    """
    if not 1 <= l_max <= MAX_COUNT_QUBITS:
        raise ValueError(f"l_max must lie in 1..{MAX_COUNT_QUBITS}, got {l_max}")

    def run(details):
        deviation = 0
        popcounts = np.zeros(1, dtype=np.int8)
        for length in range(1, l_max + 1):
            popcounts = np.concatenate([popcounts, popcounts + 1])
            values = np.arange(2 ** length, dtype=np.int64)
            even = int(np.count_nonzero(popcounts % 2 == 0))
            deviation = max(deviation, abs(even - 2 ** (length - 1)))
            for size in range(length):
                fixed = (1 << size) - 1
                supersets = (values & fixed) == fixed
                even_sup = int(np.count_nonzero(supersets & (popcounts % 2 == 0)))
                odd_sup = int(np.count_nonzero(supersets & (popcounts % 2 == 1)))
                expected = 2 ** (length - size - 1)
                deviation = max(deviation, abs(even_sup - expected), abs(odd_sup - expected))
        details.append(f"L<= {l_max}: max count deviation {deviation}")
        return deviation

    return _report(f"subset_counts(L<={l_max})", 0.0, run)


def check_bloch(num_qubits: int) -> OracleReport:
    """Bloch expansion reproduces every GHZ projector."""
    _check_enumeration_size(num_qubits)

    def run(details):
        return max(float(np.max(np.abs(bloch_sum(bloch_terms(g)) - ghz_density(g).entries)))
                   for g in ghz_labels(num_qubits))

    return _report(f"bloch(L={num_qubits})", constants.EXACT_TOL, run)


def weighted_xy_observable(t: int, length: int) -> np.ndarray:
    """2^-(L-1) sum over even k of (-1)^(|k|/2 + k.t) sigma_xy(k)."""
    strings = _even_strings(length)
    total = np.zeros((2 ** length, 2 ** length), dtype=complex)
    for k in strings:
        sign = (-1) ** (bin(k).count("1") // 2 + bin(k & t).count("1"))
        total += sign * reduce(np.kron, (_Y if b else _X for b in _bits(k, length)))
    return total / len(strings)


def check_weighted_observables(num_qubits: int) -> OracleReport:
    """The weighted x/y observable of string t is +/-1 on G^+/-_t and 0 on every other label."""
    _check_enumeration_size(num_qubits)

    def run(details):
        deviation = 0.0
        for j in ghz_labels(num_qubits)[: 2 ** (num_qubits - 1)]:
            observable = weighted_xy_observable(j.t.to_int(), num_qubits)
            for label in ghz_labels(num_qubits):
                value = np.trace(observable @ ghz_density(label).entries)
                expected = label.sign if label.t == j.t else 0.0
                deviation = max(deviation, abs(value - expected))
        return deviation

    return _report(f"weighted_observables(L={num_qubits})", constants.EXACT_TOL, run)


def check_twirl(num_qubits: int, copies: int = 1, samples: int = 1000, seed: int = 0) -> OracleReport:
    """
    Twirled random states are GHZ-diagonal with unchanged diagonal.

    For copies > 1 the joint state must be diagonal in the product GHZ
    basis, i.e. a classical mixture of GHZ products.
    """
    if copies > 1 and num_qubits * copies > 4:
        raise ValueError("Joint twirl checks are limited to 4 qubits in total")

    def run(details):
        basis = reduce(np.kron, [ghz_basis_matrix(num_qubits)] * copies)
        off_diagonal = diagonal_change = 0.0
        for index in range(samples):
            rho = random_density_matrix(num_qubits * copies, make_rng(seed, copies, index))
            twirled = full_twirl(rho, copy_qubits=num_qubits)
            before = basis.conj().T @ rho.entries @ basis
            after = basis.conj().T @ twirled.entries @ basis
            off_diagonal = max(off_diagonal, float(np.max(np.abs(after - np.diag(np.diag(after))))))
            diagonal_change = max(diagonal_change, float(np.max(np.abs(np.diag(after) - np.diag(before)))))
        details.append(f"max off-diagonal {off_diagonal:.3e}, max fidelity change {diagonal_change:.3e}")
        if diagonal_change > constants.EXACT_TOL:
            details.append(f"FAIL fidelity changed by {diagonal_change:.3e}")
        return off_diagonal

    return _report(f"twirl(L={num_qubits}, copies={copies})", constants.TWIRL_OFFDIAG_TOL, run)


def exact_estimate_moments(rho: DensityMatrix, target: GhzLabel) -> tuple[float, float]:
    """(E[f_hat], Pr[r = 1]) of a single round, by enumeration."""
    p_error = naive_error_probability(rho.entries, target.sign, target.t.to_int(), target.num_qubits)
    return 1.0 - constants.ERROR_SCALE * p_error, p_error


def check_exact_unbiasedness(
    num_qubits: int,
    states: Sequence[DensityMatrix],
    target: GhzLabel,
) -> OracleReport:
    """E[f_hat] = fidelity and Pr[r = 1] = (2/3)(1 - f) for every state."""
    if num_qubits > 4:
        raise ValueError("Enumeration oracle is limited to L <= 4")

    def run(details):
        deviation = 0.0
        for rho in states:
            f = _naive_fidelity(rho.entries, target.sign, target.t.to_int(), num_qubits)
            mean, p_error = exact_estimate_moments(rho, target)
            deviation = max(deviation, abs(mean - f),
                            abs(p_error - constants.DISTINGUISH_C * (1 - f)))
        details.append(f"{len(states)} states against {target}")
        return deviation

    return _report(f"exact_unbiasedness(L={num_qubits}, {target})", constants.EXACT_TOL, run)


def check_variance_formula(num_qubits: int, f_grid: Sequence[float]) -> OracleReport:
    """Bernoulli variance of r from enumeration equals (2f+1)(2-2f)/9."""
    if num_qubits > 4:
        raise ValueError("Enumeration oracle is limited to L <= 4")

    def run(details):
        dim = 2 ** num_qubits
        target = _naive_ghz(1, 0, num_qubits)
        projector = np.outer(target, target.conj())
        orthogonal = (np.eye(dim) - projector) / (dim - 1)
        deviation = 0.0
        for f in f_grid:
            matrix = f * projector + (1 - f) * orthogonal
            p = naive_error_probability(matrix, 1, 0, num_qubits)
            formula = (2 * f + 1) * (2 - 2 * f) / 9
            one_round = theoretical_conditional_variance([f], 1)
            deviation = max(deviation, abs(p * (1 - p) - formula),
                            abs(constants.ERROR_SCALE ** 2 * p * (1 - p) - one_round))
            details.append(f"f={f:g}: Var[r]={p * (1 - p):.15f} formula={formula:.15f}")
        return deviation

    return _report(f"variance_formula(L={num_qubits})", constants.EXACT_TOL, run)


def check_lower_bound_formula() -> OracleReport:
    """Measuring every copy turns the bound into the conditional variance; worked values."""

    def run(details):
        cases = [
            (error_lower_bound([0.9] * 2000, 1000, 2000), 1.4e-4),
            (error_lower_bound([0.8] * 2000, 1000, 2000), 2.6e-4),
            (theoretical_conditional_variance([0.8] * 1000, 1000), 2.6e-4),
            (theoretical_conditional_variance([0.5], 1), 0.5),
            (theoretical_conditional_variance([1.0] * 10, 10), 0.0),
        ]
        rng = make_rng(0, 99)
        for size in (1, 7, 50):
            f = list(rng.uniform(0, 1, size))
            equal = [f[0]] * size
            cases.append((error_lower_bound(equal, size, size),
                          theoretical_conditional_variance(equal, size)))
        return max(abs(a - b) for a, b in cases)

    return _report("lower_bound_formula", constants.EXACT_TOL, run)


def _noise_specs() -> list[NoiseSpec]:
    return [
        NoiseSpec("white"),
        NoiseSpec.of("dephased", coherence=0.3),
        NoiseSpec("adversarial-minus"),
        NoiseSpec.of("custom-mixture", white=0.5, dephased=0.2, minus=0.3),
    ]


def check_noise_constraints(num_qubits: int = 3) -> OracleReport:
    """
    Noise components of generated copies: tr N = 1, tr(G N) = 0 and
    (I - G) N (I - G) PSD; closed-form fidelities match.
    """

    def run(details):
        deviation = 0.0
        for target in (GhzLabel(1, ghz_labels(num_qubits)[0].t), ghz_labels(num_qubits)[-1]):
            g = ghz_density(target).entries
            complement = np.eye(g.shape[0]) - g
            for spec in _noise_specs():
                floor = spec.degraded_fidelity(num_qubits)
                degraded = spec.degraded_state(target)
                deviation = max(deviation, abs(fidelity(degraded, target) - floor))
                for f in (floor, (1 + floor) / 2, 0.95):
                    rho = spec.mixture_for(f, target)
                    n = noise_component(rho, target, f)
                    psd = float(linalg.eigvalsh(complement @ n @ complement)[0])
                    deviation = max(deviation, abs(np.trace(n) - 1), abs(np.trace(g @ n)),
                                    abs(fidelity(rho, target) - f), max(0.0, -psd - 1e-10))
            details.append(f"{target}: {len(_noise_specs())} noise kinds")
        return deviation

    return _report(f"noise_constraints(L={num_qubits})", 1e-10, run)


def check_stabilizer_sum(num_qubits: int) -> OracleReport:
    """2^-L times the sum of the stabilizer group equals the GHZ projector."""
    _check_enumeration_size(num_qubits)

    def run(details):
        deviation = 0.0
        for label in ghz_labels(num_qubits):
            group = stabilizer_group(label)
            total = sum(s.matrix() for s in group) / len(group)
            deviation = max(deviation, float(np.max(np.abs(total - ghz_density(label).entries))))
        return deviation

    return _report(f"stabilizer_sum(L={num_qubits})", constants.EXACT_TOL, run)


def check_protocol_distributions(num_qubits: int = 3, samples: int = 20, seed: int = 0) -> OracleReport:
    """
    Fast outcome tables against the enumeration path.

    Proposed: Pr[r = 1] and the table mean match enumeration. Baselines:
    table mean equals the naive fidelity on every state.
    """

    def run(details):
        protocols = (ProposedProtocol(), GuhneProtocol(), DfeProtocol())
        deviation = 0.0
        for label in ghz_labels(num_qubits):
            states = [ghz_density(label), ghz_density(label.flipped()),
                      DensityMatrix.maximally_mixed(num_qubits)]
            states += [random_density_matrix(num_qubits, make_rng(seed, 7, i)) for i in range(samples)]
            for rho in states:
                f = _naive_fidelity(rho.entries, label.sign, label.t.to_int(), num_qubits)
                naive_p = naive_error_probability(rho.entries, label.sign, label.t.to_int(), num_qubits)
                deviation = max(deviation, abs(error_probability(rho, label) - naive_p))
                for protocol in protocols:
                    table = protocol.outcome_distribution(rho, label)
                    deviation = max(deviation, abs(table.mean - f))
        details.append(f"{len(ghz_labels(num_qubits))} targets x {samples + 3} states x 3 protocols")
        return deviation

    return _report(f"protocol_distributions(L={num_qubits})", 1e-10, run)


def _check_enumeration_size(num_qubits: int):
    if not 1 <= num_qubits <= MAX_ENUMERATION_QUBITS:
        raise ValueError(f"Exact checks support 1..{MAX_ENUMERATION_QUBITS} qubits, got {num_qubits}")


# ---------------------- Suite ----------------------


def run_all(seed: int = 0, quick: bool = False) -> list[OracleReport]:
    """
    Every oracle in a fixed order.

    Args:
        seed: Seed of the random test states.
        quick: Smaller sample counts (used by the fast test run).
    """
    samples = 50 if quick else 1000
    unbiased_states = 10 if quick else 100
    errors = ErrorAccumulator()
    reports: list[OracleReport] = []

    def add(name: str, factory: Callable[[], OracleReport]):
        with errors.catch(name):
            reports.append(factory())
            return
        reports.append(OracleReport(name, float("inf"), 0.0, error=str(errors.get_errors()[-1][1])))

    add("subset_counts", lambda: check_subset_counts(12 if quick else MAX_COUNT_QUBITS))
    for length in range(2, 6):
        add(f"bloch({length})", lambda length=length: check_bloch(length))
        add(f"weighted_observables({length})", lambda length=length: check_weighted_observables(length))
    for length in range(2, 5):
        add(f"stabilizer_sum({length})", lambda length=length: check_stabilizer_sum(length))
    add("twirl(3)", lambda: check_twirl(3, 1, samples, seed))
    add("twirl(2x2)", lambda: check_twirl(2, 2, max(10, samples // 20), seed))

    for target in (GhzLabel.parse("+000"), GhzLabel.parse("-010"), GhzLabel.parse("+011")):
        states = [random_density_matrix(3, make_rng(seed, 11, i)) for i in range(unbiased_states)]
        states += [ghz_density(target), ghz_density(target.flipped())]
        add(f"exact_unbiasedness({target})",
            lambda target=target, states=states: check_exact_unbiasedness(3, states, target))
    add("variance_formula", lambda: check_variance_formula(3, (0.0, 0.25, 0.5, 0.8, 1.0)))
    add("lower_bound_formula", check_lower_bound_formula)
    add("noise_constraints", lambda: check_noise_constraints(3))
    add("protocol_distributions", lambda: check_protocol_distributions(3, 5 if quick else 20, seed))

    errors.log_all()
    failed = [r for r in reports if not r.passed]
    if failed:
        logger.error(f"❌ {len(failed)}/{len(reports)} checks failed: {[r.name for r in failed]}")
    else:
        logger.info(f"✅ All {len(reports)} checks passed")
    return reports
