"""
Exact dense algebra for small qubit registers.

GHZ states, Pauli strings, density matrices, expectations and GHZ-basis
coefficient extraction. Everything here is a pure function over immutable
values; matrices handed out are read-only numpy arrays.

Qubit ordering: bit 1 of a string is the most significant bit of the
computational-basis index, so |j1 j2 ... jL> is basis vector int("j1j2...jL", 2).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from core import constants
from core.exceptions import DimensionError, InvalidLabelError, InvalidStateError

# ---------------------- Bit strings ----------------------


@dataclass(frozen=True)
class BitString:
    """Ordered L-bit string, 1 <= L <= 12."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) < constants.MIN_QUBITS:
            raise InvalidLabelError("BitString needs at least one bit")
        if len(bits) > constants.MAX_QUBITS:
            raise DimensionError(
                f"BitString of length {len(bits)} exceeds the {constants.MAX_QUBITS}-qubit cap"
            )
        if any(b not in (0, 1) for b in bits):
            raise InvalidLabelError(f"Bits must be 0 or 1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_str(cls, text: str) -> BitString:
        text = text.strip()
        if not text or any(ch not in "01" for ch in text):
            raise InvalidLabelError(f"Not a bit string: {text!r}")
        return cls(tuple(int(ch) for ch in text))

    @classmethod
    def from_int(cls, value: int, length: int) -> BitString:
        if value < 0 or value >= 2 ** length:
            raise InvalidLabelError(f"{value} does not fit in {length} bits")
        return cls(tuple((value >> (length - 1 - i)) & 1 for i in range(length)))

    @classmethod
    def zeros(cls, length: int) -> BitString:
        return cls((0,) * length)

    def to_int(self) -> int:
        return reduce(lambda acc, b: (acc << 1) | b, self.bits, 0)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    @property
    def parity(self) -> int:
        return self.popcount % 2

    def complement(self) -> BitString:
        return BitString(tuple(1 - b for b in self.bits))

    def dot(self, other: BitString) -> int:
        """Inner product k·j as an integer count (not reduced mod 2)."""
        if len(other) != len(self):
            raise DimensionError(f"Length mismatch: {len(self)} vs {len(other)}")
        return sum(a & b for a, b in zip(self.bits, other.bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __getitem__(self, index: int) -> int:
        return self.bits[index]

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def all_bitstrings(length: int) -> list[BitString]:
    """All strings of the given length in lexicographic order."""
    return [BitString(bits) for bits in itertools.product((0, 1), repeat=length)]


def even_parity_strings(length: int) -> list[BitString]:
    """The 2^(L-1) even-popcount strings, lexicographic."""
    return [b for b in all_bitstrings(length) if b.parity == 0]


# ---------------------- GHZ labels ----------------------


@dataclass(frozen=True)
class GhzLabel:
    """Identifies G^s_t = (|t> + s|t~>)/sqrt(2) with t[0] = 0."""

    sign: int
    t: BitString

    def __post_init__(self):
        sign = self.sign
        if sign in ("+", "-"):
            sign = 1 if sign == "+" else -1
        if sign not in (1, -1):
            raise InvalidLabelError(f"GHZ sign must be + or -, got {self.sign!r}")
        t = self.t if isinstance(self.t, BitString) else BitString.from_str(str(self.t))
        if t[0] != 0:
            raise InvalidLabelError(f"GHZ label string must start with 0, got {t}")
        object.__setattr__(self, "sign", sign)
        object.__setattr__(self, "t", t)

    @classmethod
    def parse(cls, text: str) -> GhzLabel:
        """Parse "+010" / "-00" style labels."""
        text = text.strip()
        if len(text) < 2 or text[0] not in "+-":
            raise InvalidLabelError(f"Label must look like '+010', got {text!r}")
        return cls(text[0], BitString.from_str(text[1:]))

    @property
    def num_qubits(self) -> int:
        return len(self.t)

    @property
    def sign_char(self) -> str:
        return "+" if self.sign == 1 else "-"

    def flipped(self) -> GhzLabel:
        """Same string, opposite sign."""
        return GhzLabel(-self.sign, self.t)

    def __str__(self) -> str:
        return f"{self.sign_char}{self.t}"


def ghz_labels(num_qubits: int) -> list[GhzLabel]:
    """Canonical basis order: every + label by t, then every - label by t."""
    strings = [BitString((0,) + b.bits) for b in all_bitstrings(num_qubits - 1)] \
        if num_qubits > 1 else [BitString((0,))]
    return [GhzLabel(1, t) for t in strings] + [GhzLabel(-1, t) for t in strings]


def ghz_vector(label: GhzLabel) -> np.ndarray:
    dim = 2 ** label.num_qubits
    vec = np.zeros(dim, dtype=complex)
    vec[label.t.to_int()] = 1.0
    vec[label.t.complement().to_int()] = label.sign
    return vec / np.sqrt(2.0)


@lru_cache(maxsize=None)
def _ghz_basis(num_qubits: int) -> np.ndarray:
    basis = np.column_stack([ghz_vector(g) for g in ghz_labels(num_qubits)])
    basis.setflags(write=False)
    return basis


def ghz_basis_matrix(num_qubits: int) -> np.ndarray:
    """Unitary whose columns are the GHZ vectors in ``ghz_labels`` order."""
    _check_qubits(num_qubits)
    return _ghz_basis(num_qubits)


# ---------------------- Pauli strings ----------------------

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
for _m in _PAULI.values():
    _m.setflags(write=False)


@lru_cache(maxsize=4096)
def pauli_matrix(letters: str) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, first letter = most significant qubit."""
    matrix = reduce(np.kron, (_PAULI[ch] for ch in letters))
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True)
class PauliString:
    """Letters over {I, X, Y, Z} with a real coefficient."""

    letters: str
    coefficient: float = 1.0

    def __post_init__(self):
        letters = str(self.letters).upper()
        if not letters or any(ch not in _PAULI for ch in letters):
            raise InvalidLabelError(f"Pauli letters must be from IXYZ, got {self.letters!r}")
        if len(letters) > constants.MAX_QUBITS:
            raise DimensionError(f"Pauli string on {len(letters)} qubits exceeds the cap")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    def matrix(self) -> np.ndarray:
        return self.coefficient * pauli_matrix(self.letters)

    def scaled(self, factor: float) -> PauliString:
        return PauliString(self.letters, self.coefficient * factor)

    def __str__(self) -> str:
        return self.letters if self.coefficient == 1.0 else f"{self.coefficient:+g}*{self.letters}"


def sigma_iz(k: BitString) -> PauliString:
    """Z where k_l = 1, identity where k_l = 0."""
    return PauliString("".join("Z" if b else "I" for b in k))


def sigma_xy(k: BitString) -> PauliString:
    """Y where k_l = 1, X where k_l = 0."""
    return PauliString("".join("Y" if b else "X" for b in k))


# ---------------------- Density matrices ----------------------


class DensityMatrix:
    """Hermitian, trace-1, positive semidefinite matrix on 2^L dimensions.

    Invariants are checked at construction; violations raise
    InvalidStateError. The stored array is read-only.
    """

    __slots__ = ("_entries", "_num_qubits")

    def __init__(self, entries: Union[np.ndarray, Sequence[Sequence[complex]]]):
        matrix = np.array(entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"Density matrix must be square, got shape {matrix.shape}")
        dim = matrix.shape[0]
        num_qubits = dim.bit_length() - 1
        if dim < 2 or 2 ** num_qubits != dim:
            raise DimensionError(f"Dimension {dim} is not a power of two")
        _check_qubits(num_qubits)

        hermitian_dev = float(np.max(np.abs(matrix - matrix.conj().T)))
        if hermitian_dev > constants.HERMITIAN_TOL:
            raise InvalidStateError(f"Matrix is not Hermitian (max deviation {hermitian_dev:.3e})")
        trace = np.trace(matrix)
        if abs(trace - 1.0) > constants.TRACE_TOL:
            raise InvalidStateError(f"Trace must be 1, got {trace:.15g}")
        min_eig = float(linalg.eigvalsh(matrix)[0])
        if min_eig < constants.PSD_FLOOR:
            raise InvalidStateError(f"Matrix is not PSD (min eigenvalue {min_eig:.3e})")

        matrix.setflags(write=False)
        self._entries = matrix
        self._num_qubits = num_qubits

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> DensityMatrix:
        _check_qubits(num_qubits)
        dim = 2 ** num_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def from_pure(cls, vector: np.ndarray) -> DensityMatrix:
        vec = np.asarray(vector, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def basis_state(cls, bits: BitString) -> DensityMatrix:
        dim = 2 ** len(bits)
        matrix = np.zeros((dim, dim), dtype=complex)
        matrix[bits.to_int(), bits.to_int()] = 1.0
        return cls(matrix)

    @classmethod
    def mixture(cls, components: Iterable[tuple[float, DensityMatrix]]) -> DensityMatrix:
        """Convex combination sum_i w_i rho_i; weights must be >= 0 and sum to 1."""
        components = list(components)
        if not components:
            raise InvalidStateError("Empty mixture")
        weights = np.array([w for w, _ in components], dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > constants.TRACE_TOL:
            raise InvalidStateError(f"Mixture weights must be a distribution, got {weights}")
        dims = {rho.dim for _, rho in components}
        if len(dims) != 1:
            raise DimensionError(f"Mixture of states with different dimensions {sorted(dims)}")
        return cls(sum(w * rho.entries for w, rho in components))

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def num_qubits(self) -> int:
        return self._num_qubits

    def diagonal(self) -> np.ndarray:
        """Computational-basis populations (real, clipped at 0, renormalized)."""
        probs = np.clip(self._entries.diagonal().real, 0.0, None)
        return probs / probs.sum()

    def __eq__(self, other) -> bool:
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self._entries, other._entries)

    def __hash__(self) -> int:
        return hash(self._entries.tobytes())

    def __repr__(self) -> str:
        return f"<DensityMatrix qubits={self._num_qubits}>"


def _check_qubits(num_qubits: int):
    if num_qubits < constants.MIN_QUBITS or num_qubits > constants.MAX_QUBITS:
        raise DimensionError(
            f"{num_qubits} qubits outside the supported range "
            f"{constants.MIN_QUBITS}..{constants.MAX_QUBITS}"
        )


def _real_trace(value: complex, what: str) -> float:
    if abs(value.imag) > constants.IMAG_TOL:
        raise InvalidStateError(f"{what} has imaginary part {value.imag:.3e}")
    return float(value.real)


# ---------------------- Operations ----------------------


def ghz_density(label: GhzLabel) -> DensityMatrix:
    """Projector onto (|t> +/- |t~>)/sqrt(2)."""
    _check_qubits(label.num_qubits)
    vec = ghz_vector(label)
    return DensityMatrix(np.outer(vec, vec.conj()))


def bloch_terms(label: GhzLabel) -> list[tuple[float, PauliString]]:
    """Weighted Pauli strings summing to the GHZ projector.

    For every even-parity k (lexicographic) two terms are emitted:
    (-1)^(k.t) / 2^L * sigma_Iz(k) and s (-1)^(|k|/2 + k.t) / 2^L * sigma_xy(k).
    """
    num_qubits = label.num_qubits
    scale = 1.0 / 2 ** num_qubits
    terms = []
    for k in even_parity_strings(num_qubits):
        phase = (-1) ** k.dot(label.t)
        terms.append((phase * scale, sigma_iz(k)))
        terms.append((label.sign * (-1) ** (k.popcount // 2) * phase * scale, sigma_xy(k)))
    return terms


def bloch_sum(terms: Iterable[tuple[float, PauliString]]) -> np.ndarray:
    return sum(weight * pauli.matrix() for weight, pauli in terms)


def pauli_expectation(rho: DensityMatrix, p: PauliString) -> float:
    """tr(rho P) times the string's coefficient."""
    if p.num_qubits != rho.num_qubits:
        raise DimensionError(f"{p.num_qubits}-qubit Pauli on a {rho.num_qubits}-qubit state")
    value = np.einsum("ij,ji->", rho.entries, pauli_matrix(p.letters))
    return p.coefficient * _real_trace(value, f"tr(rho {p.letters})")


def ghz_overlap_matrix(rho: DensityMatrix) -> np.ndarray:
    """c_ab = <G_a|rho|G_b> over ``ghz_labels`` order."""
    basis = ghz_basis_matrix(rho.num_qubits)
    return basis.conj().T @ rho.entries @ basis


def from_ghz_overlap(coefficients: np.ndarray) -> np.ndarray:
    """Inverse of ``ghz_overlap_matrix``: sum_ab c_ab |G_a><G_b|."""
    coefficients = np.asarray(coefficients, dtype=complex)
    num_qubits = coefficients.shape[0].bit_length() - 1
    basis = ghz_basis_matrix(num_qubits)
    if basis.shape != coefficients.shape:
        raise DimensionError(f"Coefficient matrix shape {coefficients.shape} is not 2^L square")
    return basis @ coefficients @ basis.conj().T


def fidelity(rho: DensityMatrix, target: GhzLabel) -> float:
    """<G|rho|G>, asserted to lie in [0, 1] up to the PSD tolerance."""
    if rho.num_qubits != target.num_qubits:
        raise DimensionError(f"{target.num_qubits}-qubit target for a {rho.num_qubits}-qubit state")
    vec = ghz_vector(target)
    value = _real_trace(vec.conj() @ rho.entries @ vec, "fidelity")
    if value < constants.PSD_FLOOR or value > 1.0 - constants.PSD_FLOOR:
        raise InvalidStateError(f"Fidelity {value:.15g} outside [0, 1]")
    return value


def partial_trace(matrix: np.ndarray, dim_a: int, dim_b: int, keep: int = 0) -> np.ndarray:
    """Reduced matrix of subsystem A (keep=0) or B (keep=1) of an A(x)B operator."""
    tensor = np.asarray(matrix).reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == 0:
        return np.trace(tensor, axis1=1, axis2=3)
    if keep == 1:
        return np.trace(tensor, axis1=0, axis2=2)
    raise DimensionError(f"keep must be 0 or 1, got {keep}")


def random_density_matrix(
    num_qubits: int,
    rng: np.random.Generator,
    rank: Optional[int] = None,
) -> DensityMatrix:
    """Ginibre-distributed state of the given rank (full rank by default)."""
    _check_qubits(num_qubits)
    dim = 2 ** num_qubits
    rank = dim if rank is None else rank
    ginibre = (rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))) / np.sqrt(2)
    matrix = ginibre @ ginibre.conj().T
    matrix = (matrix + matrix.conj().T) / 2
    return DensityMatrix(matrix / np.trace(matrix).real)


def stabilizer_group(label: GhzLabel) -> list[PauliString]:
    """The 2^L signed Pauli strings S with S|G> = |G>, identity first.

    Built by multiplying out the generators s * X...X and Z_l Z_(l+1)
    (with the signs fixed by t) and tracking phases exactly.
    """
    num_qubits = label.num_qubits
    t = label.t
    generators: list[tuple[complex, str]] = [(complex(label.sign), "X" * num_qubits)]
    for l in range(num_qubits - 1):
        letters = ["I"] * num_qubits
        letters[l] = letters[l + 1] = "Z"
        generators.append((complex((-1) ** (t[l] ^ t[l + 1])), "".join(letters)))

    group = []
    for choice in itertools.product((0, 1), repeat=num_qubits):
        phase, letters = 1 + 0j, "I" * num_qubits
        for use, (g_phase, g_letters) in zip(choice, generators):
            if use:
                phase, letters = _multiply_paulis(phase * g_phase, letters, g_letters)
        if abs(phase.imag) > constants.IMAG_TOL:
            raise InvalidStateError(f"Non-Hermitian stabilizer element {letters}")
        group.append(PauliString(letters, phase.real))
    return group


_SINGLE_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


def _multiply_paulis(phase: complex, left: str, right: str) -> tuple[complex, str]:
    letters = []
    for a, b in zip(left, right):
        factor, letter = _SINGLE_PRODUCT[(a, b)]
        phase *= factor
        letters.append(letter)
    return phase, "".join(letters)
