"""Zero-temperature master equation in the dressed basis.

Each system operator s coupled to a bath (X for the resonator, sigma_x for
every qubit) produces one jump |j><k| per pair of dressed levels k > j with
rate

    Gamma^{jk}_s = gamma_s * ((w_k - w_j) / w_s)^2 * |<j|s|k>|^2

where w_s is the bare frequency of the channel. Jumps only go down in energy,
so the dressed ground state is stationary when nothing drives the system.

Dynamics run in a truncated dressed basis: the lowest ``levels`` eigenstates
of the static Hamiltonian. Drive and coupling modulation enter through their
dressed matrix elements; the dissipators are fixed by the static spectrum.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import hilbert, kernel
from .eigen import DressedOperator, EigenSystem, dressed_decompose, spec_eigensystem
from .model import SystemSpec, periodic_terms

STEP_FACTOR = 0.02
COUPLING_FLOOR = 1e-10
TRACE_TOL = 1e-6
NEGATIVITY_TOL = 1e-6


class IntegrationError(RuntimeError):
    """Trace drift or loss of positivity during propagation."""


@dataclass(frozen=True)
class LindbladChannel:
    j: int
    k: int
    rate: float
    source: str
    dim: int

    @property
    def jump(self) -> np.ndarray:
        op = np.zeros((self.dim, self.dim), dtype=complex)
        op[self.j, self.k] = 1.0
        return op


def channel_sources(spec: SystemSpec) -> list[tuple[str, np.ndarray, float, float]]:
    """(name, system operator s + s^dag, bare frequency, bare rate) per bath."""
    layout = spec.layout
    out = [("cavity", hilbert.field_quadrature(layout), spec.resonator.omega_c, spec.losses.cavity)]
    for j, q in enumerate(spec.qubits):
        out.append((f"qubit_{j}", hilbert.pauli(layout, j, "x"), q.omega_q, spec.losses.qubit_rate(j)))
    if spec.probe is not None:
        out.append(("probe", hilbert.pauli(layout, len(spec.qubits), "x"), spec.probe.delta, spec.losses.probe))
    return out


def build_channels(spec: SystemSpec, basis: EigenSystem, levels: int | None = None) -> list[LindbladChannel]:
    m = basis.dim if levels is None else levels
    energies = basis.energies[:m]
    gaps = energies[None, :] - energies[:, None]
    channels = []
    for name, op, omega_s, gamma in channel_sources(spec):
        if gamma == 0:
            continue
        c = np.abs(basis.to_dressed(op, m))
        rates = gamma * (gaps / omega_s) ** 2 * c**2
        for j, k in zip(*np.nonzero(np.triu(c > COUPLING_FLOOR, 1))):
            channels.append(LindbladChannel(int(j), int(k), float(rates[j, k]), name, m))
    return channels


def rate_matrix(channels: Sequence[LindbladChannel], dim: int) -> np.ndarray:
    """rates[j, k] summed over baths."""
    out = np.zeros((dim, dim))
    for ch in channels:
        out[ch.j, ch.k] += ch.rate
    return out


def dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """D[O] rho = O rho O^dag - (O^dag O rho + rho O^dag O) / 2."""
    od = op.conj().T
    n = od @ op
    return op @ rho @ od - 0.5 * (n @ rho + rho @ n)


def lindblad_rhs(h: np.ndarray, channels: Sequence[LindbladChannel], rho: np.ndarray) -> np.ndarray:
    """Generic form -i[H, rho] + sum Gamma D[|j><k|] rho with explicit jump matrices."""
    out = -1j * (h @ rho - rho @ h)
    for ch in channels:
        out += ch.rate * dissipator(ch.jump, rho)
    return out


@dataclass(frozen=True)
class DressedTerm:
    name: str
    operator: np.ndarray
    amplitude: float
    frequency: float


def default_max_energy(frequencies: Sequence[float]) -> float:
    """Highest dressed excitation energy kept when the level count is not given."""
    if not frequencies:
        return 2.0
    return 2.0 * max(frequencies) + 0.5


@dataclass
class DressedSystem:
    """Static dressed spectrum, dissipators and periodic terms for one spec."""

    spec: SystemSpec
    basis: EigenSystem
    levels: int
    energies: np.ndarray
    channels: list[LindbladChannel]
    rates: np.ndarray
    terms: list[DressedTerm]
    field_op: DressedOperator = field(repr=False)

    @classmethod
    def from_spec(
        cls,
        spec: SystemSpec,
        levels: int | None = None,
        max_energy: float | None = None,
        basis: EigenSystem | None = None,
    ) -> "DressedSystem":
        basis = basis or spec_eigensystem(spec)
        raw_terms = periodic_terms(spec)
        if levels is None:
            cap = max_energy if max_energy is not None else default_max_energy([t.frequency for t in raw_terms])
            levels = int(np.count_nonzero(basis.energies - basis.energies[0] <= cap))
        levels = max(2, min(int(levels), basis.dim))
        energies = basis.energies[:levels] - basis.energies[0]
        channels = build_channels(spec, basis, levels)
        terms = [
            DressedTerm(t.name, basis.to_dressed(t.operator, levels), t.amplitude, t.frequency) for t in raw_terms
        ]
        x = dressed_decompose(hilbert.field_quadrature(spec.layout), basis).restrict(levels)
        return cls(spec, basis, levels, energies, channels, rate_matrix(channels, levels), terms, x)

    @property
    def span(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    @property
    def frequencies(self) -> list[float]:
        return [t.frequency for t in self.terms]

    @property
    def decay_rates(self) -> np.ndarray:
        """Total outgoing rate of every level."""
        return self.rates.sum(axis=0)

    @property
    def max_step(self) -> float:
        return STEP_FACTOR / max(self.span, *self.frequencies, 1e-300)

    def dressed(self, op: np.ndarray) -> np.ndarray:
        return self.basis.to_dressed(op, self.levels)

    def decompose(self, op: np.ndarray) -> DressedOperator:
        return dressed_decompose(op, self.basis).restrict(self.levels)

    def ground_density(self) -> np.ndarray:
        rho = np.zeros((self.levels, self.levels), dtype=complex)
        rho[0, 0] = 1.0
        return rho

    def hamiltonian(self, t: float) -> np.ndarray:
        h = np.diag(self.energies).astype(complex)
        for term in self.terms:
            h += term.amplitude * math.sin(term.frequency * t) * term.operator
        return h

    def rhs(self, rho: np.ndarray, t: float) -> np.ndarray:
        """Master-equation right-hand side via explicit jump operators."""
        return lindblad_rhs(self.hamiltonian(t), self.channels, rho)

    def _kernel_args(self):
        d = self.levels
        if self.terms:
            ops = np.array([t.operator for t in self.terms])
            amps = np.array([t.amplitude for t in self.terms])
            freqs = np.array([t.frequency for t in self.terms])
        else:
            ops, amps, freqs = np.zeros((0, d, d), complex), np.zeros(0), np.zeros(0)
        return self.energies, self.rates, ops, amps, freqs

    def common_period(self) -> float:
        """Shortest T with every drive frequency an integer multiple of 2 pi / T."""
        freqs = self.frequencies
        if not freqs:
            return 2.0 * math.pi / self.spec.resonator.omega_c
        base = min(freqs)
        lcm = 1
        for f in freqs:
            ratio = Fraction(f / base).limit_denominator(64)
            if abs(float(ratio) - f / base) > 1e-9 * (f / base):
                raise ValueError(f"drive frequencies {freqs} are not commensurate; use evolve() instead")
            lcm = lcm * ratio.denominator // math.gcd(lcm, ratio.denominator)
        return 2.0 * math.pi * lcm / base


def check_state(rho: np.ndarray, t: float, trace_tol: float = TRACE_TOL, neg_tol: float = NEGATIVITY_TOL) -> None:
    drift = abs(np.trace(rho) - 1.0)
    if drift > trace_tol:
        raise IntegrationError(f"trace drifted by {drift:.3e} at t = {t:.6g}")
    herm = 0.5 * (rho + rho.conj().T)
    low = float(np.linalg.eigvalsh(herm)[0])
    if low < -neg_tol:
        raise IntegrationError(f"density matrix eigenvalue {low:.3e} < 0 at t = {t:.6g}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    expectations: dict[str, np.ndarray]

    def to_csv(self, path) -> None:
        """Columns: t, then one column per named expectation value (real part)."""
        names = list(self.expectations)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *names])
            for i, t in enumerate(self.times):
                w.writerow([f"{t:.17e}", *(f"{self.expectations[n][i].real:.17e}" for n in names)])


def _resolve(system) -> DressedSystem:
    return system if isinstance(system, DressedSystem) else DressedSystem.from_spec(system)


def evolve(
    system: DressedSystem | SystemSpec,
    rho0: np.ndarray,
    t_span: tuple[float, float],
    dt: float | None = None,
    record_every: int = 100,
    observables: Mapping[str, np.ndarray] | None = None,
    backend: str | None = None,
) -> Trajectory:
    """Fixed-step RK4 integration in the dressed basis.

    ``rho0`` and the observables are ``levels x levels`` dressed-basis
    matrices. States are recorded every ``record_every`` steps and at the end;
    each record is checked for trace drift and negativity.
    """
    system = _resolve(system)
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    dt_max = system.max_step
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt = {dt} exceeds the stability bound {dt_max:.4g} for this spectrum")
    n_total = int(math.ceil((t1 - t0) / dt - 1e-9))
    dt = (t1 - t0) / n_total if n_total else dt
    d = system.levels
    rho = np.array(rho0, dtype=complex).reshape(1, d, d).copy()
    check_state(rho[0], t0)
    obs = dict(observables or {})
    args = system._kernel_args()

    times, states = [t0], [rho[0].copy()]
    step = 0
    while step < n_total:
        n = min(record_every, n_total - step)
        kernel.propagate(rho, *args, t0 + step * dt, dt, n, backend=backend)
        step += n
        t = t0 + step * dt
        check_state(rho[0], t)
        times.append(t)
        states.append(rho[0].copy())
    states = np.array(states)
    expectations = {name: np.einsum("tij,ji->t", states, op) for name, op in obs.items()}
    return Trajectory(np.array(times), states, expectations)


@dataclass(frozen=True)
class SteadyResponse:
    """Window averages of observables in the periodic steady state."""

    values: dict[str, complex]
    lockin: dict[str, complex]
    converged: bool
    window_change: dict[str, float]
    period: float
    dt: float
    transient: float
    window: float
    levels: int

    def __getitem__(self, name: str) -> float:
        return self.values[name].real


def period_map(system: DressedSystem, dt: float, period: float, observables: np.ndarray, lock_freq: float, backend=None):
    """One-period RK4 propagator and per-period observable functionals.

    Returns ``(P, avg, lock)`` with ``P`` acting on row-major flattened
    density matrices, and ``avg[b, k]`` / ``lock[b, k]`` the period averages
    of tr(rho O_k) and tr(rho O_k) exp(i w t) starting from basis matrix b.
    """
    d = system.levels
    n = int(round(period / dt))
    batch = np.zeros((d * d, d, d), dtype=complex)
    batch.reshape(d * d, d * d)[np.arange(d * d), np.arange(d * d)] = 1.0
    sums, lock = kernel.propagate(batch, *system._kernel_args(), 0.0, dt, n, observables, lock_freq, backend=backend)
    return batch.reshape(d * d, d * d).T.copy(), sums / n, lock / n


def steady_response(
    system: DressedSystem | SystemSpec,
    observables: Mapping[str, np.ndarray],
    transient: float | None = None,
    window: float | None = None,
    dt: float | None = None,
    rho0: np.ndarray | None = None,
    lock_freq: float | None = None,
    backend: str | None = None,
) -> SteadyResponse:
    """Time-averaged observables after a transient, for periodic driving.

    The transient and the averaging window are whole numbers of drive periods
    integrated with fixed-step RK4. Because the equation is linear and
    periodic, the RK4 map over one period is computed once and the transient
    is applied as its matrix power, which gives the same result as stepping
    through every period.

    Defaults: transient = 10 / (slowest coherence damping rate), where a
    coherence with level k decays at half the total outgoing rate of k;
    window = 20 periods. The result is flagged unconverged when doubling the window
    moves any average by more than 1 %.
    """
    system = _resolve(system)
    d = system.levels
    period = system.common_period()
    dt_max = system.max_step
    if dt is not None and dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt = {dt} exceeds the stability bound {dt_max:.4g} for this spectrum")
    n_steps = int(math.ceil(period / (dt or dt_max) - 1e-9))
    dt = period / n_steps
    if transient is None:
        decay = system.decay_rates[1:]
        decay = decay[decay > 0]
        transient = 10.0 / (0.5 * decay.min()) if decay.size else 0.0
    if window is None:
        window = 20 * period
    n_transient = int(math.ceil(transient / period - 1e-9))
    n_window = max(1, int(round(window / period)))
    if lock_freq is None:
        lock_freq = system.frequencies[0] if system.terms else 0.0

    names = list(observables)
    obs = np.array([observables[n] for n in names], dtype=complex).reshape(len(names), d, d)
    prop, avg, lock = period_map(system, dt, period, obs, lock_freq, backend)

    x = (system.ground_density() if rho0 is None else np.asarray(rho0, dtype=complex)).reshape(-1)
    x = np.linalg.matrix_power(prop, n_transient) @ x if n_transient else x
    check_state(x.reshape(d, d), n_transient * period)

    vals = np.zeros((2 * n_window, len(names)), dtype=complex)
    locks = np.zeros_like(vals)
    for p in range(2 * n_window):
        vals[p] = x @ avg
        locks[p] = x @ lock
        x = prop @ x
    check_state(x.reshape(d, d), (n_transient + 2 * n_window) * period)

    single, double = vals[:n_window].mean(0), vals.mean(0)
    change = {}
    for i, n in enumerate(names):
        diff = abs(double[i] - single[i])
        ref = max(abs(single[i]), abs(double[i]))
        change[n] = diff / ref if ref > 0 else 0.0
    converged = all(c <= 0.01 or abs(double[i] - single[i]) < 1e-14 for i, c in enumerate(change.values()))
    lock_single = locks[:n_window].mean(0)
    return SteadyResponse(
        values={n: complex(single[i]) for i, n in enumerate(names)},
        lockin={n: complex(lock_single[i]) for i, n in enumerate(names)},
        converged=converged,
        window_change=change,
        period=period,
        dt=dt,
        transient=n_transient * period,
        window=n_window * period,
        levels=d,
    )
