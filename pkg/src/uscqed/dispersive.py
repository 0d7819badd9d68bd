"""Closed-form results valid in the dispersive regime.

These serve as independent oracles for the full numerics: the displaced
oscillator estimate of the vacuum field, the effective two-level Hamiltonian
seen by the probe, and the leading-order two-photon absorption line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .model import ProbeSpec, QubitSpec


def analytic_vev(qubits: Iterable[QubitSpec], omega_c: float = 1.0) -> float:
    """2 sum_j g_j sin(theta_j) / omega_c.

    Valid when every qubit sits well above the resonator (positive detuning)
    and stays in its ground state, so that the resonator only feels a static
    force -g_j sin(theta_j) X.
    """
    return 2.0 * sum(q.g * math.sin(q.theta) for q in qubits) / omega_c


@dataclass(frozen=True)
class ProbeEffective:
    omega_q_prime: float
    alpha: float
    v_used: float

    @property
    def sin_alpha(self) -> float:
        return math.sin(self.alpha)


def probe_effective(probe: ProbeSpec, v: float) -> ProbeEffective:
    """Diagonalize D' sz'/2 + g' v sx' for the probe."""
    if not probe.delta > 0:
        raise ValueError(f"probe gap must be positive, got {probe.delta}")
    bias = 2.0 * probe.g * v
    return ProbeEffective(math.hypot(probe.delta, bias), math.atan2(bias, probe.delta), v)


@dataclass(frozen=True)
class TwoPhotonLine:
    """Delta-function line reported as its position and integrated weight."""

    resonance: float
    weight: float


def two_photon_rate_coefficient(eff: ProbeEffective, amplitude: float) -> TwoPhotonLine:
    """pi E0^2 sin^2(2 alpha) / w'^2, located at drive frequency w'/2."""
    if amplitude < 0:
        raise ValueError(f"drive amplitude must be >= 0, got {amplitude}")
    w = eff.omega_q_prime
    return TwoPhotonLine(0.5 * w, math.pi * amplitude**2 * math.sin(2 * eff.alpha) ** 2 / w**2)
