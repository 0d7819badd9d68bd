"""Truncated resonator-plus-qubits Hilbert space and its elementary operators.

Tensor order is fixed: resonator, then the USC qubits in list order, then the
probe qubit (when present). The Fock index varies slowest. Each qubit uses the
local basis ``(|g>, |e>)`` so that ``sigma_z = diag(-1, +1)`` and
``sigma_z |e> = +|e>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


class LayoutError(ValueError):
    """Raised for an invalid space layout or an out-of-range subsystem."""


@dataclass(frozen=True)
class SpaceLayout:
    """Shape of the composite space.

    Subsystem 0 is the resonator; subsystems ``1..n_qubits`` are the USC
    qubits; the probe, if any, is the last subsystem.
    """

    fock_cutoff: int
    n_qubits: int = 0
    has_probe: bool = False

    def __post_init__(self):
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise LayoutError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff!r}")
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 0:
            raise LayoutError(f"n_qubits must be a non-negative integer, got {self.n_qubits!r}")

    @property
    def n_two_level(self) -> int:
        return self.n_qubits + int(self.has_probe)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.fock_cutoff,) + (2,) * self.n_two_level

    @property
    def total_dim(self) -> int:
        return self.fock_cutoff * 2**self.n_two_level

    @property
    def probe_subsystem(self) -> int:
        if not self.has_probe:
            raise LayoutError("layout has no probe qubit")
        return self.n_two_level

    def qubit_subsystem(self, qubit_index: int) -> int:
        """Subsystem index of two-level system ``qubit_index`` (probe is last)."""
        if not 0 <= qubit_index < self.n_two_level:
            raise LayoutError(
                f"qubit index {qubit_index} out of range for {self.n_two_level} two-level systems"
            )
        return qubit_index + 1


def embed(layout: SpaceLayout, subsystem: int, local_op) -> np.ndarray:
    """Return ``1 x ... x local_op x ... x 1`` on the full space."""
    dims = layout.dims
    if not 0 <= subsystem < len(dims):
        raise LayoutError(f"subsystem {subsystem} out of range (have {len(dims)})")
    local_op = np.asarray(local_op, dtype=complex)
    d = dims[subsystem]
    if local_op.shape != (d, d):
        raise LayoutError(
            f"operator of shape {local_op.shape} does not fit subsystem {subsystem} of dimension {d}"
        )
    # identities on either side collapse to a single Kronecker product each
    left = int(np.prod(dims[:subsystem], dtype=int))
    right = int(np.prod(dims[subsystem + 1 :], dtype=int))
    return reduce(np.kron, (np.eye(left), local_op, np.eye(right)))


def destroy_local(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def annihilation(layout: SpaceLayout) -> np.ndarray:
    """Resonator lowering operator on the full space."""
    return embed(layout, 0, destroy_local(layout.fock_cutoff))


def number(layout: SpaceLayout) -> np.ndarray:
    a = annihilation(layout)
    return a.conj().T @ a


def field_quadrature(layout: SpaceLayout) -> np.ndarray:
    """X = a + a^dagger."""
    a = annihilation(layout)
    return a + a.conj().T


def pauli(layout: SpaceLayout, qubit_index: int, axis: str) -> np.ndarray:
    """Pauli ``x`` or ``z`` on two-level system ``qubit_index``.

    Indices ``0..n_qubits-1`` address the USC qubits; ``n_qubits`` addresses
    the probe when the layout has one.
    """
    local = {"x": SIGMA_X, "z": SIGMA_Z}.get(axis)
    if local is None:
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    return embed(layout, layout.qubit_subsystem(qubit_index), local)


def excited_projector(layout: SpaceLayout, qubit_index: int) -> np.ndarray:
    return embed(layout, layout.qubit_subsystem(qubit_index), EXCITED)


def parity_operator(layout: SpaceLayout) -> np.ndarray:
    """exp(i pi [a^dag a + sum_j (sigma_z^(j) + 1)/2]) as a diagonal matrix."""
    # excitation count of every basis state, Fock index slowest
    counts = np.arange(layout.fock_cutoff)
    for _ in range(layout.n_two_level):
        counts = (counts[:, None] + np.array([0, 1])[None, :]).ravel()
    return np.diag(np.where(counts % 2 == 0, 1.0, -1.0)).astype(complex)
