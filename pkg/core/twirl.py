"""
Probabilistic multirotation channel.

Each mask k with |k| in {0, 2} defines the Pauli rotation
U_k = sigma_xy(k) and the channel rho -> (rho + U_k rho U_k^dag) / 2.
Applying every mask once removes all off-diagonal GHZ-basis coefficients
while leaving the diagonal (and hence every GHZ fidelity) untouched.

The channel is applied as an exact average over its two Kraus branches,
never by sampling a branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.algebra import BitString, DensityMatrix, all_bitstrings, pauli_matrix, sigma_xy
from core.exceptions import DimensionError, InvalidLabelError


@dataclass(frozen=True)
class RotationMask:
    """Bit string with popcount 0 or 2."""

    k: BitString

    def __post_init__(self):
        if self.k.popcount not in (0, 2):
            raise InvalidLabelError(f"Rotation mask needs popcount 0 or 2, got {self.k}")

    @classmethod
    def parse(cls, text: str) -> RotationMask:
        return cls(BitString.from_str(text))

    @property
    def num_qubits(self) -> int:
        return len(self.k)

    def __str__(self) -> str:
        return str(self.k)


def rotation_masks(num_qubits: int) -> list[RotationMask]:
    """All 1 + L(L-1)/2 masks in lexicographic order."""
    return [RotationMask(k) for k in all_bitstrings(num_qubits) if k.popcount in (0, 2)]


def multirotation_unitary(mask: RotationMask) -> np.ndarray:
    """sigma_y where k_l = 1, sigma_x where k_l = 0 (Hermitian and unitary)."""
    return pauli_matrix(sigma_xy(mask.k).letters)


def _copy_operator(unitary: np.ndarray, copy_index: int, copies: int) -> np.ndarray:
    """Embed a one-copy operator into a register of ``copies`` equal groups."""
    group_dim = unitary.shape[0]
    left = np.eye(group_dim ** copy_index)
    right = np.eye(group_dim ** (copies - copy_index - 1))
    return np.kron(np.kron(left, unitary), right)


def _conjugate_average(matrix: np.ndarray, unitary: np.ndarray) -> np.ndarray:
    averaged = (matrix + unitary @ matrix @ unitary.conj().T) / 2
    return (averaged + averaged.conj().T) / 2


def twirl_step(rho: DensityMatrix, mask: RotationMask) -> DensityMatrix:
    """(rho + U rho U^dag) / 2 for U = multirotation_unitary(mask)."""
    if rho.num_qubits != mask.num_qubits:
        raise DimensionError(
            f"{mask.num_qubits}-qubit mask applied to a {rho.num_qubits}-qubit state"
        )
    return DensityMatrix(_conjugate_average(rho.entries, multirotation_unitary(mask)))


def full_twirl(
    rho: DensityMatrix,
    copy_qubits: Optional[int] = None,
    masks: Optional[Sequence[RotationMask]] = None,
) -> DensityMatrix:
    """Compose ``twirl_step`` over every mask of T_all.

    Args:
        rho: State on one copy, or a joint state of several equal copies.
        copy_qubits: Qubits per copy. Defaults to the whole register
            (single copy). For a joint state the twirl runs independently
            on every copy group.
        masks: Override the mask sequence (defaults to lexicographic T_all);
            used to check order independence.

    Raises:
        DimensionError: if the register is not a whole number of copies.
    """
    copy_qubits = rho.num_qubits if copy_qubits is None else copy_qubits
    if copy_qubits < 1 or rho.num_qubits % copy_qubits != 0:
        raise DimensionError(
            f"{rho.num_qubits}-qubit register is not a multiple of {copy_qubits}-qubit copies"
        )
    copies = rho.num_qubits // copy_qubits
    masks = rotation_masks(copy_qubits) if masks is None else list(masks)
    if any(mask.num_qubits != copy_qubits for mask in masks):
        raise DimensionError("Mask length does not match the copy size")

    matrix = rho.entries
    for copy_index in range(copies):
        for mask in masks:
            unitary = multirotation_unitary(mask)
            if copies > 1:
                unitary = _copy_operator(unitary, copy_index, copies)
            matrix = _conjugate_average(matrix, unitary)
    return DensityMatrix(matrix)


def apply_to_copy(rho: DensityMatrix, mask: RotationMask, copy_index: int, copies: int) -> DensityMatrix:
    """One twirl step on copy group ``copy_index`` of a joint state of ``copies`` groups."""
    if not 0 <= copy_index < copies or rho.num_qubits != mask.num_qubits * copies:
        raise DimensionError(
            f"Copy {copy_index} of {copies} x {mask.num_qubits} qubits on a {rho.num_qubits}-qubit state"
        )
    unitary = _copy_operator(multirotation_unitary(mask), copy_index, copies)
    return DensityMatrix(_conjugate_average(rho.entries, unitary))
