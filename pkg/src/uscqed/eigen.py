"""Dressed basis: diagonalization, ground-state field moments, parity analysis
and the positive/negative-frequency split of system operators.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import hilbert
from .model import SystemSpec, build_static_hamiltonian

HERMITIAN_TOL = 1e-10
DEGENERACY_WINDOW = 1e-9


class DiagonalizationError(ValueError):
    pass


def _check_hermitian(h: np.ndarray) -> None:
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DiagonalizationError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.abs(h).max(initial=0.0)))
    err = float(np.abs(h - h.conj().T).max(initial=0.0))
    if err > HERMITIAN_TOL * scale:
        raise DiagonalizationError(f"matrix is not Hermitian (max |H - H^dag| = {err:.3e})")


def fix_gauge(states: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive.

    Near-ties in magnitude are broken by the lowest index so the choice does
    not depend on rounding noise.
    """
    states = np.array(states, dtype=complex, copy=True)
    mags = np.abs(states)
    for col in range(states.shape[1]):
        m = mags[:, col]
        idx = int(np.flatnonzero(m >= m.max() * (1 - 1e-9))[0])
        phase = states[idx, col] / abs(states[idx, col])
        states[:, col] /= phase
        states[idx, col] = abs(states[idx, col])
    return states


def _clusters(energies: np.ndarray, window: float) -> list[slice]:
    out, start = [], 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > window:
            out.append(slice(start, i))
            start = i
    return out


@dataclass(frozen=True)
class EigenSystem:
    """Ascending energies and orthonormal eigenvectors (columns)."""

    energies: np.ndarray
    states: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def ground_state(self) -> np.ndarray:
        return self.states[:, 0]

    def to_dressed(self, op: np.ndarray, levels: int | None = None) -> np.ndarray:
        """Matrix elements <j|op|k>, optionally restricted to the lowest ``levels``."""
        u = self.states if levels is None else self.states[:, :levels]
        return u.conj().T @ op @ u

    def to_bare(self, op_dressed: np.ndarray) -> np.ndarray:
        m = op_dressed.shape[0]
        u = self.states[:, :m]
        return u @ op_dressed @ u.conj().T

    def expect(self, op: np.ndarray, j: int = 0) -> complex:
        v = self.states[:, j]
        return complex(v.conj() @ op @ v)


def diagonalize(h: np.ndarray, parity: np.ndarray | None = None) -> EigenSystem:
    """Full spectrum of a Hermitian matrix with deterministic gauge.

    Eigenvectors whose energies lie within ``DEGENERACY_WINDOW`` are rotated
    onto parity eigenstates when ``parity`` is given and commutes with ``h``;
    otherwise they are left in solver order.
    """
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    h = 0.5 * (h + h.conj().T)
    energies, states = np.linalg.eigh(h)
    if parity is not None and np.abs(h @ parity - parity @ h).max() < 1e-12 * max(1.0, np.abs(h).max()):
        for sl in _clusters(energies, DEGENERACY_WINDOW):
            if sl.stop - sl.start < 2:
                continue
            block = states[:, sl]
            p_local = block.conj().T @ parity @ block
            pvals, rot = np.linalg.eigh(0.5 * (p_local + p_local.conj().T))
            order = np.argsort(-np.round(pvals), kind="stable")
            states[:, sl] = block @ rot[:, order]
    return EigenSystem(energies, fix_gauge(states))


def spec_eigensystem(spec: SystemSpec) -> EigenSystem:
    layout = spec.layout
    return diagonalize(build_static_hamiltonian(spec), hilbert.parity_operator(layout))


def ground_vev(spec: SystemSpec, basis: EigenSystem | None = None) -> float:
    """v = <G|a + a^dag|G>.

    The sign is fixed by the external flux when theta > 0; for a
    quasi-degenerate ground doublet either sign may come out, so sweeps report
    |v|.
    """
    basis = basis or spec_eigensystem(spec)
    val = basis.expect(hilbert.field_quadrature(spec.layout))
    if abs(val.imag) > 1e-10:
        raise DiagonalizationError(f"<G|X|G> has imaginary part {val.imag:.3e}")
    return val.real


def ground_photon_number(spec: SystemSpec, basis: EigenSystem | None = None) -> float:
    basis = basis or spec_eigensystem(spec)
    return max(basis.expect(hilbert.number(spec.layout)).real, 0.0)


def ground_field_amplitude(spec: SystemSpec, basis: EigenSystem | None = None) -> complex:
    basis = basis or spec_eigensystem(spec)
    return basis.expect(hilbert.annihilation(spec.layout))


def first_order_coherence(spec: SystemSpec, basis: EigenSystem | None = None) -> float:
    """|<G|a|G>|^2 / <G|a^dag a|G>, defined as 1 when the ground state holds no photons."""
    basis = basis or spec_eigensystem(spec)
    n = ground_photon_number(spec, basis)
    if n < 1e-300:
        return 1.0
    return abs(ground_field_amplitude(spec, basis)) ** 2 / n


@dataclass(frozen=True)
class DressedOperator:
    """Hermitian operator split as plus + minus + diagonal in a dressed basis.

    ``plus`` holds the elements <j|O|k> with k > j (strictly upper triangular)
    and lowers the energy; ``minus`` is its adjoint.
    """

    plus: np.ndarray
    minus: np.ndarray
    diagonal: np.ndarray
    basis: EigenSystem

    @property
    def dim(self) -> int:
        return self.plus.shape[0]

    def restrict(self, levels: int) -> "DressedOperator":
        """Keep the lowest ``levels`` dressed states.

        Exact for products like minus @ plus, because plus only maps higher
        levels onto lower ones.
        """
        s = slice(0, levels)
        return DressedOperator(self.plus[s, s], self.minus[s, s], self.diagonal[s], self.basis)

    def plus_bare(self) -> np.ndarray:
        return self.basis.to_bare(self.plus)

    def reconstruct(self) -> np.ndarray:
        return self.plus + self.minus + np.diag(self.diagonal)


def dressed_decompose(op: np.ndarray, basis: EigenSystem) -> DressedOperator:
    op = np.asarray(op, dtype=complex)
    if op.shape != (basis.dim, basis.dim):
        raise ValueError(f"operator shape {op.shape} does not match basis dimension {basis.dim}")
    m = basis.to_dressed(op)
    plus = np.triu(m, 1)
    return DressedOperator(plus, plus.conj().T.copy(), np.diag(m).copy(), basis)


def parity_labels(basis: EigenSystem, parity: np.ndarray) -> np.ndarray:
    """+1/-1 per eigenstate from the sign of <j|Pi|j>.

    Exact at theta = 0; for theta != 0 this is the label the state carries
    adiabatically from the uncoupled limit while mixing stays below one half.
    """
    vals = np.einsum("ij,ik,kj->j", basis.states.conj(), parity, basis.states).real
    return np.where(vals >= 0, 1, -1)


def same_parity_elements(op_dressed: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Absolute matrix elements between states of equal parity label (others zeroed)."""
    mask = labels[:, None] == labels[None, :]
    return np.where(mask, np.abs(op_dressed), 0.0)


@dataclass(frozen=True)
class ConvergenceReport:
    quantity: str
    cutoffs: tuple[int, int]
    values: tuple[float, float]
    abs_change: float
    rel_change: float
    flagged: bool


def _quantity(spec: SystemSpec, quantity: str) -> float:
    if quantity == "vev":
        return ground_vev(spec)
    if quantity == "ground_energy":
        return float(spec_eigensystem(spec).energies[0])
    raise ValueError(f"unknown quantity {quantity!r}; expected 'vev' or 'ground_energy'")


def convergence_check(
    spec: SystemSpec,
    quantity: Literal["vev", "ground_energy"] = "vev",
    step: int = 5,
    threshold: float = 1e-6,
) -> ConvergenceReport:
    """Compare ``quantity`` at the spec's cutoff N and at N + step."""
    n = spec.resonator.fock_cutoff
    a = _quantity(spec, quantity)
    b = _quantity(spec.with_cutoff(n + step), quantity)
    abs_change = abs(b - a)
    ref = max(abs(a), abs(b))
    rel_change = abs_change / ref if ref > 1e-12 else abs_change
    return ConvergenceReport(quantity, (n, n + step), (a, b), abs_change, rel_change, rel_change > threshold)
