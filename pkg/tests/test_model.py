import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uscqed import hilbert
from uscqed.model import (
    DriveSpec,
    LossSpec,
    ModulationSpec,
    ProbeSpec,
    QubitSpec,
    ResonatorSpec,
    SpecError,
    SystemSpec,
    build_static_hamiltonian,
    coupling_hamiltonian,
    hamiltonian_at,
    modulated_emitter_spec,
    periodic_terms,
    probe_readout_spec,
)


@given(st.floats(0.1, 3.0), st.floats(0.0, math.pi / 2), st.floats(0.0, 1.0))
def test_qubit_frequency_and_angle_round_trip(omega_q, theta, g):
    q = QubitSpec.from_frequency(omega_q, theta, g)
    assert math.isclose(q.omega_q, omega_q, rel_tol=1e-12)
    assert math.isclose(q.theta, theta, rel_tol=1e-12, abs_tol=1e-12)


def test_detuning_sets_frequency_above_resonator():
    assert math.isclose(QubitSpec.from_detuning(0.7, 0.3).omega_q, 1.7)


@pytest.mark.parametrize(
    "make",
    [
        lambda: ResonatorSpec(omega_c=0.0),
        lambda: ResonatorSpec(fock_cutoff=1),
        lambda: QubitSpec(delta=-1.0),
        lambda: QubitSpec(delta=0.0, epsilon=0.0),
        lambda: ProbeSpec(delta=0.0),
        lambda: DriveSpec(amplitude=-0.1, frequency=1.0),
        lambda: ModulationSpec(g0=0.0, g1=0.1, frequency=1.0),
        lambda: ModulationSpec(g0=0.1, g1=0.2, frequency=1.0),
        lambda: LossSpec(cavity=-1e-3),
        lambda: SystemSpec(qubits=(QubitSpec(1.0),), drive=DriveSpec(0.1, 1.0)),
        lambda: SystemSpec(qubits=(QubitSpec(1.0),), losses=LossSpec(qubit=(1e-3, 1e-3))),
    ],
)
def test_invalid_specs_are_rejected(make):
    with pytest.raises(SpecError):
        make()


def test_uncoupled_spectrum_is_sum_of_parts():
    spec = SystemSpec(ResonatorSpec(1.0, 6), (QubitSpec.from_frequency(1.7, 0.4),), ProbeSpec(0.4))
    energies = np.linalg.eigvalsh(build_static_hamiltonian(spec))
    expected = sorted(n + 0.5 + s1 * 0.85 + s2 * 0.2 for n in range(6) for s1 in (-1, 1) for s2 in (-1, 1))
    assert np.allclose(energies, expected)


@given(st.floats(0.0, 1.0), st.floats(0.0, math.pi / 2))
def test_static_hamiltonian_is_hermitian(g, theta):
    spec = probe_readout_spec(theta=theta, fock_cutoff=6)
    spec = SystemSpec(spec.resonator, (QubitSpec.from_frequency(1.7, theta, g),), spec.probe)
    h = build_static_hamiltonian(spec)
    assert np.allclose(h, h.conj().T, atol=1e-14)


def test_flux_angle_zero_conserves_parity():
    spec = SystemSpec(ResonatorSpec(1.0, 8), (QubitSpec.from_frequency(1.7, 0.0, 0.4),), ProbeSpec(0.4, 0.2))
    h = build_static_hamiltonian(spec)
    p = hilbert.parity_operator(spec.layout)
    assert np.allclose(h @ p, p @ h)


def test_flux_angle_breaks_parity():
    spec = SystemSpec(ResonatorSpec(1.0, 8), (QubitSpec.from_frequency(1.7, 0.3, 0.4),))
    h = build_static_hamiltonian(spec)
    p = hilbert.parity_operator(spec.layout)
    assert not np.allclose(h @ p, p @ h)


def test_modulation_scales_only_the_usc_coupling():
    spec = modulated_emitter_spec(math.pi / 10, modulation_frequency=0.9, fock_cutoff=6)
    t = 0.37
    expected = build_static_hamiltonian(spec) + (9e-4 / 0.15) * math.sin(0.9 * t) * coupling_hamiltonian(spec)
    assert np.allclose(hamiltonian_at(spec, t), expected)
    assert np.allclose(hamiltonian_at(spec, 0.0), build_static_hamiltonian(spec))


def test_drive_acts_on_probe_sigma_x():
    spec = probe_readout_spec(drive=DriveSpec(0.02, 0.3), fock_cutoff=5)
    (term,) = periodic_terms(spec)
    assert term.name == "drive" and term.amplitude == 0.02 and term.frequency == 0.3
    assert np.allclose(term.operator, hilbert.pauli(spec.layout, 1, "x"))


def test_scaling_all_frequencies_scales_the_spectrum():
    spec = probe_readout_spec(fock_cutoff=8)
    e1 = np.linalg.eigvalsh(build_static_hamiltonian(spec))
    e2 = np.linalg.eigvalsh(build_static_hamiltonian(spec.scaled(2.5)))
    assert np.allclose(e2, 2.5 * e1)
