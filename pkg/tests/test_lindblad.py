import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uscqed import hilbert
from uscqed.eigen import spec_eigensystem
from uscqed.lindblad import (
    DressedSystem,
    IntegrationError,
    build_channels,
    channel_sources,
    check_state,
    dissipator,
    evolve,
    lindblad_rhs,
    rate_matrix,
    steady_response,
)
from uscqed.model import (
    DriveSpec,
    LossSpec,
    ProbeSpec,
    QubitSpec,
    ResonatorSpec,
    SystemSpec,
    modulated_emitter_spec,
    probe_readout_spec,
)
from uscqed.observables import emission_operators, probe_projector


def random_density(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def test_uncoupled_cavity_recovers_standard_damping():
    spec = SystemSpec(ResonatorSpec(1.0, 6), losses=LossSpec(cavity=1e-3))
    basis = spec_eigensystem(spec)
    channels = build_channels(spec, basis)
    assert {(c.j, c.k) for c in channels} == {(n - 1, n) for n in range(1, 6)}
    for c in channels:
        assert math.isclose(c.rate, 1e-3 * c.k, rel_tol=1e-12)
        assert c.source == "cavity"


def test_rates_match_independent_evaluation():
    spec = probe_readout_spec(fock_cutoff=10)
    basis = spec_eigensystem(spec)
    channels = build_channels(spec, basis)
    totals = rate_matrix(channels, basis.dim).sum(axis=0)
    e = basis.energies
    x = hilbert.field_quadrature(spec.layout)
    sx = hilbert.pauli(spec.layout, 0, "x")
    sxp = hilbert.pauli(spec.layout, 1, "x")
    for k in (1, 4, 9):
        expected = 0.0
        for j in range(k):
            vj, vk = basis.states[:, j], basis.states[:, k]
            for op, w in ((x, 1.0), (sx, 1.7), (sxp, 0.4)):
                expected += 5e-4 * ((e[k] - e[j]) / w) ** 2 * abs(vj.conj() @ op @ vk) ** 2
        assert math.isclose(totals[k], expected, rel_tol=1e-9)


def test_only_downward_channels_exist():
    spec = probe_readout_spec(fock_cutoff=8)
    channels = build_channels(spec, spec_eigensystem(spec))
    assert channels and all(c.k > c.j and c.rate >= 0 for c in channels)


def test_rate_vanishes_for_degenerate_pair():
    # two identical uncoupled qubits: the singly excited states are degenerate
    spec = SystemSpec(ResonatorSpec(1.0, 3), (QubitSpec.from_frequency(1.7, 0.0, 0.0),) * 2,
                      losses=LossSpec(qubit=1e-3))
    basis = spec_eigensystem(spec)
    for c in build_channels(spec, basis):
        assert abs(basis.energies[c.k] - basis.energies[c.j]) > 1e-9 or c.rate < 1e-20


def test_probe_channel_uses_bare_probe_gap():
    spec = probe_readout_spec(fock_cutoff=5)
    names = [(name, w) for name, _, w, _ in channel_sources(spec)]
    assert names == [("cavity", 1.0), ("qubit_0", pytest.approx(1.7)), ("probe", 0.4)]


@given(st.integers(0, 1000))
def test_liouvillian_preserves_trace_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    system = DressedSystem.from_spec(probe_readout_spec(drive=DriveSpec(0.02, 0.47), fock_cutoff=10))
    rho = random_density(rng, system.levels)
    out = system.rhs(rho, rng.uniform(0, 10))
    assert abs(np.trace(out)) < 1e-10
    assert np.allclose(out, out.conj().T, atol=1e-12)


def test_structured_kernel_matches_explicit_jump_operators():
    system = DressedSystem.from_spec(probe_readout_spec(drive=DriveSpec(0.05, 0.47), fock_cutoff=10))
    rng = np.random.default_rng(0)
    rho0 = random_density(rng, system.levels)
    traj = evolve(system, rho0, (0.0, 2.0), record_every=10_000)
    # reference: RK4 on the explicit dissipator sum, same step
    n = round(2.0 / system.max_step + 0.5)
    dt = 2.0 / n
    rho = rho0.copy()
    for i in range(n):
        t = i * dt
        k1 = system.rhs(rho, t)
        k2 = system.rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = system.rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = system.rhs(rho + dt * k3, t + dt)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert np.allclose(traj.states[-1], rho, atol=1e-10)


def test_ground_state_is_stationary_without_drive():
    system = DressedSystem.from_spec(probe_readout_spec(fock_cutoff=15))
    traj = evolve(system, system.ground_density(), (0.0, 50.0), record_every=1000)
    assert np.all(np.abs(traj.states[:, 1:, 1:].diagonal(axis1=1, axis2=2)) < 1e-10)
    assert np.allclose(lindblad_rhs(np.diag(system.energies), system.channels, system.ground_density()), 0)


def test_bare_cavity_damping_pumps_the_dressed_ground_state():
    # D[a] applied to |G><G| of a USC system is not zero: the naive equation excites the vacuum
    spec = probe_readout_spec(fock_cutoff=15)
    basis = spec_eigensystem(spec)
    a = hilbert.annihilation(spec.layout)
    g = np.outer(basis.ground_state, basis.ground_state.conj())
    drift = basis.to_dressed(dissipator(a, g))
    assert drift[0, 0].real < -1e-3
    assert np.trace(drift[1:, 1:]).real > 1e-3


def test_unitary_limit_conserves_purity():
    spec = probe_readout_spec(drive=DriveSpec(0.05, 0.47), fock_cutoff=10)
    spec = SystemSpec(spec.resonator, spec.qubits, spec.probe, spec.drive)
    system = DressedSystem.from_spec(spec)
    psi = np.zeros(system.levels, dtype=complex)
    psi[:3] = [0.6, 0.64, 0.48]
    traj = evolve(system, np.outer(psi, psi.conj()), (0.0, 20.0))
    purity = np.einsum("tij,tji->t", traj.states, traj.states).real
    assert np.allclose(purity, 1.0, atol=1e-8)


def first_order_excitation(e0, omega, gap, t, n=20001):
    """|int_0^t E0 sin(w s) exp(i gap s) ds|^2, first-order amplitude without rotating-wave approximation."""
    s = np.linspace(0.0, t, n)
    f = e0 * np.sin(omega * s) * np.exp(1j * gap * s)
    return abs(np.sum(0.5 * (f[1:] + f[:-1])) * (s[1] - s[0])) ** 2


def test_weak_resonant_drive_follows_two_level_perturbation_theory():
    # uncoupled probe under H = D' sz/2 + E0 sin(w t) sx at w = D'
    e0, gap = 2e-3, 0.4
    spec = SystemSpec(ResonatorSpec(1.0, 3), probe=ProbeSpec(gap, 0.0), drive=DriveSpec(e0, gap))
    system = DressedSystem.from_spec(spec)
    proj = system.dressed(probe_projector(spec))
    traj = evolve(system, system.ground_density(), (0.0, 150.0), record_every=1000, observables={"p": proj})
    for t, p in zip(traj.times[1:], traj.expectations["p"][1:].real):
        expected = first_order_excitation(e0, gap, gap, t)
        assert abs(p - expected) < 0.05 * expected
    # the rotating-wave Rabi law sin^2(E0 t / 2) is the envelope of the same rise
    assert abs(traj.expectations["p"][-1].real - math.sin(e0 * 150 / 2) ** 2) < 0.1 * math.sin(e0 * 150 / 2) ** 2


def test_step_above_stability_bound_is_rejected():
    system = DressedSystem.from_spec(probe_readout_spec(fock_cutoff=8))
    with pytest.raises(ValueError):
        evolve(system, system.ground_density(), (0, 1), dt=10 * system.max_step)


def test_check_state_detects_trace_drift_and_negativity():
    with pytest.raises(IntegrationError, match="trace"):
        check_state(np.diag([0.5, 0.4]).astype(complex), 1.0)
    with pytest.raises(IntegrationError, match="eigenvalue"):
        check_state(np.diag([1.1, -0.1]).astype(complex), 1.0)


def test_trajectory_csv_columns(tmp_path):
    system = DressedSystem.from_spec(probe_readout_spec(drive=DriveSpec(0.02, 0.47), fock_cutoff=8))
    obs = {"probe": system.dressed(probe_projector(system.spec))}
    traj = evolve(system, system.ground_density(), (0.0, 1.0), record_every=20, observables=obs)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,probe"
    assert len(lines) == len(traj.times) + 1
    assert "e" in lines[1].split(",")[1]


def test_steady_response_without_drive_emits_nothing():
    system = DressedSystem.from_spec(probe_readout_spec(fock_cutoff=10))
    r = steady_response(system, emission_operators(system.field_op))
    assert r["emission"] == 0.0
    assert r.converged


def test_steady_response_matches_direct_integration():
    spec = probe_readout_spec(drive=DriveSpec(0.02, 0.4682), fock_cutoff=10)
    spec = SystemSpec(spec.resonator, spec.qubits, spec.probe, spec.drive, losses=LossSpec(0.02, 0.02, 0.02))
    system = DressedSystem.from_spec(spec)
    proj = system.dressed(probe_projector(spec))
    period = system.common_period()
    r = steady_response(system, {"p": proj}, transient=20 * period, window=5 * period)
    traj = evolve(system, system.ground_density(), (0.0, 25 * period), dt=r.dt, record_every=1,
                  observables={"p": proj})
    tail = traj.expectations["p"][traj.times >= 20 * period - 1e-9][:-1].real
    assert math.isclose(r["p"], tail.mean(), rel_tol=1e-9)


def test_commensurate_frequencies_share_a_period():
    spec = modulated_emitter_spec(0.3, modulation_frequency=1.0, fock_cutoff=6)
    system = DressedSystem.from_spec(spec)
    assert math.isclose(system.common_period(), 2 * math.pi)


def test_off_resonant_modulation_emission_is_negligible():
    peak_system = DressedSystem.from_spec(modulated_emitter_spec(math.pi / 10, 0.965383514241, fock_cutoff=20))
    peak = steady_response(peak_system, emission_operators(peak_system.field_op))["emission"]
    # far below every line: 0.3 against a cavity-like transition at 0.965
    off_system = DressedSystem.from_spec(modulated_emitter_spec(math.pi / 10, 0.3, fock_cutoff=20))
    off = steady_response(off_system, emission_operators(off_system.field_op))["emission"]
    assert off < 1e-6 * peak
