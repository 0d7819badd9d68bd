"""Fast cross-validation of the numerics against closed-form limits.

Each check returns a ``CheckResult``; ``run_checks`` runs them all. The whole
suite takes a few seconds and backs the ``uscqed check`` command.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import hilbert, kernel
from .dispersive import analytic_vev
from .eigen import (
    dressed_decompose,
    ground_photon_number,
    ground_vev,
    parity_labels,
    same_parity_elements,
    spec_eigensystem,
)
from .lindblad import DressedSystem, evolve
from .model import LossSpec, QubitSpec, ResonatorSpec, SystemSpec, probe_readout_spec
from .observables import emission_rate


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def random_dispersive_spec(rng: np.random.Generator, n_max: int = 2, cutoff: int = 12) -> SystemSpec:
    """Weakly coupled qubits well above the resonator, where the displaced-oscillator estimate holds."""
    n = int(rng.integers(1, n_max + 1))
    qubits = tuple(
        QubitSpec.from_detuning(rng.uniform(0.5, 1.0), rng.uniform(0, math.pi / 2), rng.uniform(0.005, 0.05))
        for _ in range(n)
    )
    return SystemSpec(ResonatorSpec(1.0, cutoff), qubits)


def random_usc_spec(rng: np.random.Generator, cutoff: int = 20) -> SystemSpec:
    n = int(rng.integers(1, 3))
    qubits = tuple(
        QubitSpec.from_detuning(rng.uniform(-0.5, 1.0), rng.uniform(0, math.pi / 2), rng.uniform(0.0, 0.5))
        for _ in range(n)
    )
    return SystemSpec(ResonatorSpec(1.0, cutoff), qubits)


def check_dispersive_vev(seed: int = 0, count: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        spec = random_dispersive_spec(rng)
        exact = ground_vev(spec)
        approx = analytic_vev(spec.qubits)
        if abs(approx) < 1e-12:
            continue
        worst = max(worst, abs(abs(exact) - abs(approx)) / abs(approx))
    return CheckResult("dispersive vev", worst < 0.05, f"max relative deviation {worst:.2e} (limit 5e-02)")


def check_parity_selection(couplings=(0.1, 0.3)) -> CheckResult:
    worst_v = worst_x = 0.0
    for g in couplings:
        spec = SystemSpec(ResonatorSpec(1.0, 20), (QubitSpec.from_detuning(0.7, 0.0, g),))
        basis = spec_eigensystem(spec)
        worst_v = max(worst_v, abs(ground_vev(spec, basis)))
        x = basis.to_dressed(hilbert.field_quadrature(spec.layout))
        labels = parity_labels(basis, hilbert.parity_operator(spec.layout))
        worst_x = max(worst_x, float(same_parity_elements(x, labels).max()))
    ok = worst_v < 1e-10 and worst_x < 1e-10
    return CheckResult("parity selection", ok, f"|v| {worst_v:.1e}, same-parity |X| {worst_x:.1e} (limit 1e-10)")


def check_positive_frequency_field(seed: int = 0, count: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(count):
        spec = random_usc_spec(rng)
        basis = spec_eigensystem(spec)
        xp = dressed_decompose(hilbert.field_quadrature(spec.layout), basis).plus_bare()
        worst = max(worst, float(np.linalg.norm(xp @ basis.ground_state)))
    return CheckResult("X+ annihilates ground", worst < 1e-12, f"max |X+ G| {worst:.1e} (limit 1e-12)")


def check_ground_emission(g: float = 0.3) -> CheckResult:
    spec = SystemSpec(ResonatorSpec(1.0, 20), (QubitSpec.from_detuning(0.7, math.pi / 4, g),))
    basis = spec_eigensystem(spec)
    x = dressed_decompose(hilbert.field_quadrature(spec.layout), basis)
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    rho[0, 0] = 1.0
    emitted = emission_rate(rho, x).total
    bare = ground_photon_number(spec, basis)
    ok = abs(emitted) < 1e-12 and bare > 1e-3
    return CheckResult("ground emission", ok, f"dressed {emitted:.1e} vs bare photons {bare:.3e}")


def check_ground_stationary(t_final: float = 100.0) -> CheckResult:
    system = DressedSystem.from_spec(probe_readout_spec(fock_cutoff=20))
    traj = evolve(system, system.ground_density(), (0.0, t_final), record_every=1000)
    leak = float(1.0 - traj.states[-1][0, 0].real)
    return CheckResult("ground stationary", abs(leak) < 1e-8, f"excited population {leak:.1e} after t = {t_final:g}")


def check_backends(seed: int = 0) -> CheckResult:
    if "compiled" not in kernel.BACKENDS:
        return CheckResult("kernel backends", True, "compiled kernel not built; python backend only")
    rng = np.random.default_rng(seed + 2)
    d = 6
    energies = np.sort(rng.uniform(0, 3, d))
    energies -= energies[0]
    rates = np.triu(rng.uniform(0, 1e-2, (d, d)), 1)
    op = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    ops = (op + op.conj().T)[None]
    rho0 = np.zeros((1, d, d), dtype=complex)
    rho0[0, 0, 0] = 1.0
    out = {}
    for name in ("python", "compiled"):
        rho = rho0.copy()
        kernel.propagate(rho, energies, rates, ops, np.array([0.05]), np.array([1.3]), 0.0, 0.005, 400, backend=name)
        out[name] = rho
    diff = float(np.abs(out["python"] - out["compiled"]).max())
    return CheckResult("kernel backends", diff < 1e-10, f"max difference {diff:.1e} (limit 1e-10)")


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "dispersive_vev": check_dispersive_vev,
    "parity_selection": check_parity_selection,
    "positive_frequency_field": check_positive_frequency_field,
    "ground_emission": check_ground_emission,
    "ground_stationary": check_ground_stationary,
    "backends": check_backends,
}


def run_checks(seed: int = 0) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        kwargs = {"seed": seed} if "seed" in fn.__code__.co_varnames[: fn.__code__.co_argcount] else {}
        results.append(fn(**kwargs))
    return results
