"""Detection quantities evaluated on dressed-basis density matrices.

Photodetection in the ultrastrong regime must use the positive-frequency part
X+ of the field in the dressed basis: the bare <a^dag a> is nonzero in the
ground state and would predict photons streaming out of the vacuum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert
from .eigen import DressedOperator, EigenSystem
from .model import SystemSpec


@dataclass(frozen=True)
class EmissionRecord:
    """Output photon flux in units of the cavity loss rate."""

    total: float
    coherent: float

    @property
    def incoherent(self) -> float:
        return self.total - self.coherent

    @property
    def coherent_fraction(self) -> float:
        return self.coherent / self.total if self.total > 0 else 0.0


def _check_dims(rho: np.ndarray, op: DressedOperator) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (op.dim, op.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match operator dimension {op.dim}")
    return rho


def emission_rate(rho: np.ndarray, x_dressed: DressedOperator) -> EmissionRecord:
    """total = tr(rho X- X+), coherent = |tr(rho X+)|^2."""
    rho = _check_dims(rho, x_dressed)
    total = np.trace(rho @ x_dressed.minus @ x_dressed.plus).real
    coherent = abs(np.trace(rho @ x_dressed.plus)) ** 2
    return EmissionRecord(float(total), float(coherent))


def emission_operators(x_dressed: DressedOperator) -> dict[str, np.ndarray]:
    """Observables whose window averages give the time-averaged emission."""
    return {"emission": x_dressed.minus @ x_dressed.plus, "field_plus": x_dressed.plus}


def qubit_emission(rho: np.ndarray, sx_dressed: DressedOperator) -> float:
    """tr(rho sx- sx+), proportional to the photon flux radiated by a qubit."""
    rho = _check_dims(rho, sx_dressed)
    return float(np.trace(rho @ sx_dressed.minus @ sx_dressed.plus).real)


def probe_projector(spec: SystemSpec) -> np.ndarray:
    if spec.probe is None:
        raise ValueError("spec has no probe qubit")
    layout = spec.layout
    return hilbert.excited_projector(layout, len(spec.qubits))


def probe_population(rho: np.ndarray, spec: SystemSpec, basis: EigenSystem | None = None) -> float:
    """Population of the bare probe excited state.

    ``rho`` is in the bare product basis when ``basis`` is None, otherwise in
    the dressed basis of ``basis`` (possibly truncated to its lowest levels).
    """
    proj = probe_projector(spec)
    rho = np.asarray(rho, dtype=complex)
    if basis is not None:
        proj = basis.to_dressed(proj, rho.shape[0])
    if rho.shape != proj.shape:
        raise ValueError(f"density matrix shape {rho.shape} does not match {proj.shape}")
    return float(np.trace(rho @ proj).real)
