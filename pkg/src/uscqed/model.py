"""System description and Hamiltonian assembly.

All frequencies and energies are in units of the resonator frequency with
hbar = 1. The static Hamiltonian is

    H = w_c (a^dag a + 1/2)
        + sum_j [ w_q^(j) sz_j / 2 + g_j X (cos th_j sx_j + sin th_j sz_j) ]
        + D' sz' / 2 + g' X sx'

with X = a + a^dag. The zero-point term w_c/2 is kept; it is a constant shift
that drops out of every observable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import hilbert
from .hilbert import SpaceLayout


class SpecError(ValueError):
    """Raised when a system description is physically or structurally invalid."""


@dataclass(frozen=True)
class ResonatorSpec:
    omega_c: float = 1.0
    fock_cutoff: int = 30

    def __post_init__(self):
        if not self.omega_c > 0:
            raise SpecError(f"omega_c must be positive, got {self.omega_c}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise SpecError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")


@dataclass(frozen=True)
class QubitSpec:
    """Flux qubit coupled to the resonator.

    ``delta`` is the tunnel gap and ``epsilon`` the flux-bias energy 2 I_p f.
    The transition frequency is sqrt(delta^2 + epsilon^2) and the mixing
    angle satisfies cos(theta) = delta / omega_q.
    """

    delta: float
    epsilon: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise SpecError(f"qubit gap must be non-negative, got {self.delta}")
        if self.omega_q == 0:
            raise SpecError("qubit transition frequency is zero")

    @classmethod
    def from_frequency(cls, omega_q: float, theta: float, g: float = 0.0) -> "QubitSpec":
        if not omega_q > 0:
            raise SpecError(f"omega_q must be positive, got {omega_q}")
        return cls(delta=omega_q * math.cos(theta), epsilon=omega_q * math.sin(theta), g=g)

    @classmethod
    def from_detuning(cls, detuning: float, theta: float, g: float = 0.0, omega_c: float = 1.0):
        return cls.from_frequency(omega_c + detuning, theta, g)

    @property
    def omega_q(self) -> float:
        return math.hypot(self.delta, self.epsilon)

    @property
    def theta(self) -> float:
        return math.atan2(self.epsilon, self.delta)


@dataclass(frozen=True)
class ProbeSpec:
    """Even-potential probe qubit: no sigma_z coupling term by construction."""

    delta: float
    g: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise SpecError(f"probe gap must be positive, got {self.delta}")


@dataclass(frozen=True)
class DriveSpec:
    """Microwave drive E(t) = amplitude * sin(frequency * t) on the probe sigma_x."""

    amplitude: float
    frequency: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise SpecError(f"drive amplitude must be >= 0, got {self.amplitude}")
        if not self.frequency > 0:
            raise SpecError(f"drive frequency must be positive, got {self.frequency}")


@dataclass(frozen=True)
class ModulationSpec:
    """Coupling modulation g(t) = g0 + g1 sin(frequency * t).

    Every USC qubit coupling is scaled by g(t)/g0; the probe coupling is left
    alone.
    """

    g0: float
    g1: float
    frequency: float

    def __post_init__(self):
        if self.g1 < 0:
            raise SpecError(f"modulation amplitude g1 must be >= 0, got {self.g1}")
        if self.g0 == 0 and self.g1 != 0:
            raise SpecError("g0 = 0 with g1 != 0 leaves the coupling scale undefined")
        if self.g0 < self.g1:
            raise SpecError(f"need g0 >= g1 so the coupling stays non-negative (g0={self.g0}, g1={self.g1})")
        if not self.frequency > 0:
            raise SpecError(f"modulation frequency must be positive, got {self.frequency}")

    @property
    def relative_amplitude(self) -> float:
        return self.g1 / self.g0 if self.g0 else 0.0


@dataclass(frozen=True)
class LossSpec:
    """Bare damping rates. ``qubit`` is a single rate for all USC qubits or one per qubit."""

    cavity: float = 0.0
    qubit: float | tuple[float, ...] = 0.0
    probe: float = 0.0

    def __post_init__(self):
        rates = [self.cavity, self.probe]
        rates += list(self.qubit) if isinstance(self.qubit, tuple) else [self.qubit]
        if any(r < 0 for r in rates):
            raise SpecError(f"loss rates must be >= 0, got {self}")

    def qubit_rate(self, j: int) -> float:
        if isinstance(self.qubit, tuple):
            return self.qubit[j]
        return self.qubit


@dataclass(frozen=True)
class SystemSpec:
    resonator: ResonatorSpec = field(default_factory=ResonatorSpec)
    qubits: tuple[QubitSpec, ...] = ()
    probe: ProbeSpec | None = None
    drive: DriveSpec | None = None
    modulation: ModulationSpec | None = None
    losses: LossSpec = field(default_factory=LossSpec)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if isinstance(self.losses.qubit, tuple) and len(self.losses.qubit) != len(self.qubits):
            raise SpecError(
                f"{len(self.losses.qubit)} qubit loss rates given for {len(self.qubits)} qubits"
            )
        if self.drive is not None and self.probe is None:
            raise SpecError("a drive acts on the probe qubit, but no probe is defined")

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout(self.resonator.fock_cutoff, len(self.qubits), self.probe is not None)

    def with_cutoff(self, fock_cutoff: int) -> "SystemSpec":
        return replace(self, resonator=replace(self.resonator, fock_cutoff=fock_cutoff))

    def scaled(self, factor: float) -> "SystemSpec":
        """Same system with every frequency multiplied by ``factor``."""
        f = factor
        return replace(
            self,
            resonator=replace(self.resonator, omega_c=self.resonator.omega_c * f),
            qubits=tuple(QubitSpec(q.delta * f, q.epsilon * f, q.g * f) for q in self.qubits),
            probe=None if self.probe is None else ProbeSpec(self.probe.delta * f, self.probe.g * f),
            drive=None if self.drive is None else DriveSpec(self.drive.amplitude * f, self.drive.frequency * f),
            modulation=None
            if self.modulation is None
            else ModulationSpec(self.modulation.g0 * f, self.modulation.g1 * f, self.modulation.frequency * f),
        )


def equal_qubits(n: int, omega_q: float, theta: float, g: float) -> tuple[QubitSpec, ...]:
    return (QubitSpec.from_frequency(omega_q, theta, g),) * n


def modulated_emitter_spec(theta: float, modulation_frequency: float = 1.0, fock_cutoff: int = 30) -> SystemSpec:
    """Single modulated qubit at detuning 0.7, g0 = 0.15, g1 = 9e-4, gamma = 1e-3."""
    return SystemSpec(
        resonator=ResonatorSpec(1.0, fock_cutoff),
        qubits=equal_qubits(1, 1.7, theta, 0.15),
        modulation=ModulationSpec(0.15, 9e-4, modulation_frequency),
        losses=LossSpec(cavity=1e-3, qubit=1e-3),
    )


def probe_readout_spec(
    theta: float = math.pi / 4,
    g_probe: float = 0.2,
    drive: DriveSpec | None = None,
    fock_cutoff: int = 30,
) -> SystemSpec:
    """USC qubit (g = 0.5, detuning 0.7) plus probe (detuning -0.6), gamma = 5e-4."""
    return SystemSpec(
        resonator=ResonatorSpec(1.0, fock_cutoff),
        qubits=equal_qubits(1, 1.7, theta, 0.5),
        probe=ProbeSpec(0.4, g_probe),
        drive=drive,
        losses=LossSpec(cavity=5e-4, qubit=5e-4, probe=5e-4),
    )


def _bare_part(spec: SystemSpec, layout: SpaceLayout) -> np.ndarray:
    wc = spec.resonator.omega_c
    h = wc * (hilbert.number(layout) + 0.5 * np.eye(layout.total_dim))
    for j, q in enumerate(spec.qubits):
        h += 0.5 * q.omega_q * hilbert.pauli(layout, j, "z")
    if spec.probe is not None:
        h += 0.5 * spec.probe.delta * hilbert.pauli(layout, len(spec.qubits), "z")
    return h


def coupling_hamiltonian(spec: SystemSpec) -> np.ndarray:
    """USC qubit-resonator coupling, the part scaled by the modulation."""
    layout = spec.layout
    x = hilbert.field_quadrature(layout)
    h = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for j, q in enumerate(spec.qubits):
        th = q.theta
        qubit_op = math.cos(th) * hilbert.pauli(layout, j, "x") + math.sin(th) * hilbert.pauli(layout, j, "z")
        h += q.g * (x @ qubit_op)
    return h


def probe_coupling_hamiltonian(spec: SystemSpec) -> np.ndarray:
    layout = spec.layout
    if spec.probe is None:
        return np.zeros((layout.total_dim,) * 2, dtype=complex)
    sx = hilbert.pauli(layout, len(spec.qubits), "x")
    return spec.probe.g * (hilbert.field_quadrature(layout) @ sx)


def build_static_hamiltonian(spec: SystemSpec) -> np.ndarray:
    layout = spec.layout
    return _bare_part(spec, layout) + coupling_hamiltonian(spec) + probe_coupling_hamiltonian(spec)


@dataclass(frozen=True)
class PeriodicTerm:
    """H_t = amplitude * sin(frequency * t) * operator."""

    name: str
    operator: np.ndarray
    amplitude: float
    frequency: float


def periodic_terms(spec: SystemSpec) -> list[PeriodicTerm]:
    """Time-dependent pieces added to the static Hamiltonian."""
    terms = []
    m = spec.modulation
    if m is not None and m.g1 > 0:
        terms.append(PeriodicTerm("modulation", coupling_hamiltonian(spec), m.relative_amplitude, m.frequency))
    d = spec.drive
    if d is not None and d.amplitude > 0:
        sx = hilbert.pauli(spec.layout, len(spec.qubits), "x")
        terms.append(PeriodicTerm("drive", sx, d.amplitude, d.frequency))
    return terms


def hamiltonian_at(spec: SystemSpec, t: float) -> np.ndarray:
    """Static Hamiltonian plus modulation and drive evaluated at time ``t``."""
    h = build_static_hamiltonian(spec)
    for term in periodic_terms(spec):
        h = h + term.amplitude * math.sin(term.frequency * t) * term.operator
    return h


def driving_frequencies(spec: SystemSpec) -> list[float]:
    return [t.frequency for t in periodic_terms(spec)]


def with_qubits(spec: SystemSpec, qubits: Sequence[QubitSpec]) -> SystemSpec:
    return replace(spec, qubits=tuple(qubits))
