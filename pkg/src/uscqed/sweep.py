"""Declarative parameter sweeps over a base system.

A plan names one or two axes (dotted parameter names, see ``set_parameter``)
and a kind that fixes what is computed at every grid point:

``vev_contour``          ground-state |<X>| and related static quantities
``emission_spectrum``    steady extracavity emission under coupling modulation
``absorption_spectrum``  steady probe excitation under a microwave drive
``custom_scalar``        any of the named scalars in ``SCALARS``

Points are independent and run in a process pool; results are gathered in
grid order so the output does not depend on the number of workers. Spectra
along a drive or modulation frequency axis additionally get a peak search
that refines grid maxima and dressed transition frequencies.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import __version__, hilbert, kernel
from .config import Config, Numerics, PLAN_KINDS, PlanConfig, config_items
from .eigen import (
    DiagonalizationError,
    first_order_coherence,
    ground_photon_number,
    ground_vev,
    spec_eigensystem,
)
from .lindblad import DressedSystem, IntegrationError, channel_sources, steady_response
from .model import ModulationSpec, QubitSpec, SpecError, SystemSpec, periodic_terms
from .observables import emission_operators, probe_projector

FAILURE_LIMIT = 0.10
FREQUENCY_AXES = ("drive.frequency", "modulation.frequency")

DEFAULT_OUTPUTS = {
    "vev_contour": ("vev",),
    "emission_spectrum": ("total", "coherent", "incoherent"),
    "absorption_spectrum": ("probe_population", "probe_excess"),
    "custom_scalar": ("vev",),
}
PEAK_COLUMN = {"emission_spectrum": "total", "absorption_spectrum": "probe_excess"}

STATIC_SCALARS = ("vev", "vev_signed", "photon_number", "coherence", "ground_energy", "ground_probe_population")
STEADY_SCALARS = (
    "total",
    "coherent",
    "incoherent",
    "coherent_fraction",
    "probe_population",
    "probe_excess",
    "photon_number_steady",
)
SCALARS = STATIC_SCALARS + STEADY_SCALARS


class PlanError(ValueError):
    """A plan that cannot run: unknown parameter, kind or output."""


class SweepFailure(RuntimeError):
    """More than the tolerated fraction of sweep points failed."""


# ---------------------------------------------------------------- parameters


def _replace_qubit(spec: SystemSpec, idx: Sequence[int], fn: Callable[[QubitSpec], QubitSpec]) -> SystemSpec:
    qubits = list(spec.qubits)
    for i in idx:
        qubits[i] = fn(qubits[i])
    return replace(spec, qubits=tuple(qubits))


def _qubit_field(spec: SystemSpec, idx: Sequence[int], name: str, value: float) -> SystemSpec:
    wc = spec.resonator.omega_c
    if name == "g":
        out = _replace_qubit(spec, idx, lambda q: replace(q, g=value))
        if spec.modulation is not None and len({q.g for q in out.qubits}) == 1:
            m = spec.modulation
            out = replace(out, modulation=ModulationSpec(value, m.g1, m.frequency))
        return out
    if name == "theta":
        return _replace_qubit(spec, idx, lambda q: QubitSpec.from_frequency(q.omega_q, value, q.g))
    if name == "omega_q":
        return _replace_qubit(spec, idx, lambda q: QubitSpec.from_frequency(value, q.theta, q.g))
    if name == "detuning":
        return _replace_qubit(spec, idx, lambda q: QubitSpec.from_frequency(wc + value, q.theta, q.g))
    if name in ("delta", "epsilon"):
        return _replace_qubit(spec, idx, lambda q: replace(q, **{name: value}))
    raise PlanError(f"unknown qubit parameter {name!r}")


def set_parameter(spec: SystemSpec, name: str, value: float) -> SystemSpec:
    """Return ``spec`` with the dotted parameter ``name`` set to ``value``.

    ``g``, ``theta``, ``detuning``, ``omega_q``, ``delta`` and ``epsilon``
    without a prefix act on every USC qubit; ``qubit.N.<field>`` on one.
    Setting ``theta`` keeps the qubit frequency fixed.
    """
    parts = name.split(".")
    value = float(value)
    if len(parts) == 1:
        if not spec.qubits:
            raise PlanError(f"parameter {name!r} needs at least one qubit")
        return _qubit_field(spec, range(len(spec.qubits)), name, value)
    head = parts[0]
    if head == "qubit" and len(parts) == 3 and parts[1].isdigit():
        i = int(parts[1])
        if i >= len(spec.qubits):
            raise PlanError(f"{name!r}: spec has {len(spec.qubits)} qubits")
        return _qubit_field(spec, [i], parts[2], value)
    if len(parts) != 2:
        raise PlanError(f"unknown parameter {name!r}")
    key = parts[1]
    if head == "resonator" and key == "omega_c":
        return replace(spec, resonator=replace(spec.resonator, omega_c=value))
    if head == "probe" and spec.probe is not None and key in ("delta", "g", "detuning"):
        if key == "detuning":
            key, value = "delta", spec.resonator.omega_c + value
        return replace(spec, probe=replace(spec.probe, **{key: value}))
    if head == "drive" and spec.drive is not None and key in ("amplitude", "frequency"):
        return replace(spec, drive=replace(spec.drive, **{key: value}))
    if head == "modulation" and spec.modulation is not None and key in ("g0", "g1", "frequency"):
        return replace(spec, modulation=replace(spec.modulation, **{key: value}))
    if head == "losses" and key in ("cavity", "qubit", "probe"):
        return replace(spec, losses=replace(spec.losses, **{key: value}))
    raise PlanError(f"unknown parameter {name!r} for this system")


# ---------------------------------------------------------------- plans


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 2:
            raise PlanError(f"axis {self.name!r}: count must be an integer >= 2, got {self.count}")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.count))


@dataclass(frozen=True)
class SweepPlan:
    kind: str
    axes: tuple[Axis, ...]
    base: SystemSpec
    outputs: tuple[str, ...] = ()
    numerics: Numerics = field(default_factory=Numerics)
    peaks: bool = True
    min_contrast: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "outputs", tuple(self.outputs) or DEFAULT_OUTPUTS.get(self.kind, ()))
        if self.kind not in PLAN_KINDS:
            raise PlanError(f"unknown plan kind {self.kind!r}")
        if not 1 <= len(self.axes) <= 2:
            raise PlanError(f"a plan needs one or two axes, got {len(self.axes)}")
        unknown = [o for o in self.outputs if o not in SCALARS]
        if unknown:
            raise PlanError(f"unknown outputs {unknown}; available: {', '.join(SCALARS)}")
        if self.kind == "vev_contour" and any(o in STEADY_SCALARS for o in self.outputs):
            raise PlanError("vev_contour computes ground-state quantities only")
        needs_drive = self.kind == "absorption_spectrum" or any(o.startswith("probe") for o in self.outputs)
        if needs_drive and self.base.probe is None:
            raise PlanError(f"{self.kind} with outputs {self.outputs} needs a probe qubit")
        if self.kind == "absorption_spectrum" and self.base.drive is None:
            raise PlanError("absorption_spectrum needs a drive")
        if self.kind == "emission_spectrum" and self.base.modulation is None:
            raise PlanError("emission_spectrum needs a coupling modulation")
        # resolve every axis name once so typos fail before any work starts
        for ax in self.axes:
            set_parameter(self.base, ax.name, ax.start)

    @classmethod
    def from_config(cls, cfg: Config, plan: PlanConfig | None = None) -> "SweepPlan":
        plan = plan or cfg.plan
        if plan is None:
            raise PlanError("config has no plan section")
        axes = tuple(Axis(a.name, a.start, a.stop, a.count) for a in plan.axes)
        return cls(plan.kind, axes, cfg.spec, plan.outputs, cfg.numerics, plan.peaks, plan.min_contrast)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(a.count) for a in self.axes)

    def points(self) -> list[tuple[float, ...]]:
        grids = np.meshgrid(*(a.values for a in self.axes), indexing="ij")
        return [tuple(float(g.flat[i]) for g in grids) for i in range(grids[0].size)]

    def spec_at(self, point: Sequence[float]) -> SystemSpec:
        spec = self.base
        for ax, value in zip(self.axes, point):
            spec = set_parameter(spec, ax.name, value)
        if self.numerics.cutoff is not None:
            spec = spec.with_cutoff(self.numerics.cutoff)
        return spec


# ---------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class PointResult:
    values: dict[str, float]
    converged: bool
    error: str | None = None


def _static_values(spec: SystemSpec, outputs: Sequence[str]) -> dict[str, float]:
    basis = spec_eigensystem(spec)
    out = {}
    for name in outputs:
        if name == "vev":
            out[name] = abs(ground_vev(spec, basis))
        elif name == "vev_signed":
            out[name] = ground_vev(spec, basis)
        elif name == "photon_number":
            out[name] = ground_photon_number(spec, basis)
        elif name == "coherence":
            out[name] = first_order_coherence(spec, basis)
        elif name == "ground_energy":
            out[name] = float(basis.energies[0])
        elif name == "ground_probe_population":
            out[name] = float(basis.expect(probe_projector(spec)).real)
    return out


def _steady_values(spec: SystemSpec, outputs: Sequence[str], numerics: Numerics) -> tuple[dict[str, float], bool]:
    system = DressedSystem.from_spec(spec, levels=numerics.levels)
    ops = {}
    wants = set(outputs)
    if wants & {"total", "coherent", "incoherent", "coherent_fraction"}:
        ops.update(emission_operators(system.field_op))
    if wants & {"probe_population", "probe_excess"}:
        ops["probe"] = system.dressed(probe_projector(spec))
    if "photon_number_steady" in wants:
        ops["photons"] = system.dressed(hilbert.number(spec.layout))
    if not system.terms:
        # nothing drives the system: it rests in its dressed ground state
        values = {k: complex(v[0, 0]) for k, v in ops.items()}
        lock = {k: 0j for k in ops}
        converged = True
    else:
        r = steady_response(system, ops, numerics.transient, numerics.window, numerics.dt)
        values, lock, converged = r.values, r.lockin, r.converged
    out = {}
    if "emission" in ops:
        total = values["emission"].real
        coherent = abs(lock["field_plus"]) ** 2
        out.update(total=total, coherent=coherent, incoherent=total - coherent,
                   coherent_fraction=coherent / total if total > 0 else 0.0)
    if "probe" in ops:
        out["probe_population"] = values["probe"].real
        out["probe_excess"] = values["probe"].real - float(system.basis.expect(probe_projector(spec)).real)
    if "photons" in ops:
        out["photon_number_steady"] = values["photons"].real
    return out, converged


def evaluate_point(plan: SweepPlan, point: Sequence[float]) -> PointResult:
    """All plan outputs at one grid point. Physics failures are captured, not raised."""
    try:
        spec = plan.spec_at(point)
        static = [o for o in plan.outputs if o in STATIC_SCALARS]
        steady = [o for o in plan.outputs if o in STEADY_SCALARS]
        values = _static_values(spec, static) if static else {}
        converged = True
        if steady:
            extra, converged = _steady_values(spec, steady, plan.numerics)
            values.update(extra)
        return PointResult({o: float(values[o]) for o in plan.outputs}, converged)
    except (IntegrationError, DiagonalizationError, SpecError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return PointResult({o: math.nan for o in plan.outputs}, False, f"{type(exc).__name__}: {exc}")


def _evaluate(args):
    plan, point = args
    return evaluate_point(plan, point)


def _map(plan: SweepPlan, points: Sequence[Sequence[float]], parallelism: int) -> list[PointResult]:
    jobs = [(plan, tuple(p)) for p in points]
    if parallelism <= 1 or len(jobs) <= 1:
        return [_evaluate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        # map preserves input order regardless of completion order
        return list(pool.map(_evaluate, jobs, chunksize=1))


# ---------------------------------------------------------------- peaks


@dataclass(frozen=True)
class Peak:
    location: float
    height: float
    baseline: float
    slice_index: int = 0

    @property
    def contrast(self) -> float:
        return self.height - self.baseline


def transition_seeds(
    spec: SystemSpec, lo: float, hi: float, orders: Sequence[int] = (1, 2), min_ratio: float = 1e-2
) -> list[float]:
    """Drive frequencies (E_j - E_0) / n in [lo, hi] that can show a visible line.

    A line is kept when its effective Rabi frequency, first order for n = 1
    and second order through intermediate levels for n = 2, reaches
    ``min_ratio`` times the decay rate of level j. Weaker lines stay below
    the peak contrast threshold anyway.
    """
    basis = spec_eigensystem(spec)
    e = basis.energies - basis.energies[0]
    v = np.zeros((basis.dim, basis.dim), dtype=complex)
    for term in periodic_terms(spec):
        v += 0.5 * term.amplitude * basis.to_dressed(term.operator)
    decay = np.zeros(basis.dim)
    for _, op, omega_s, gamma in channel_sources(spec):
        c = np.abs(basis.to_dressed(op))
        gaps = e[None, :] - e[:, None]
        decay += (gamma * (gaps / omega_s) ** 2 * c**2 * (gaps > 0)).sum(axis=0)
    seeds = set()
    for j in range(1, basis.dim):
        for n in orders:
            w = e[j] / n
            if not lo <= w <= hi:
                continue
            if n == 1:
                rabi = abs(v[j, 0])
            elif n == 2:
                denom = e - w
                ok = np.abs(denom) > 1e-9
                rabi = abs(np.sum(v[j, ok] * v[ok, 0] / denom[ok]))
            else:
                raise ValueError(f"order {n} not supported")
            if rabi >= min_ratio * max(decay[j], 1e-300):
                seeds.add(round(float(w), 12))
    return sorted(seeds)


def refine_peak(
    fn: Callable[[float], float],
    center: float,
    half_width: float,
    lo: float,
    hi: float,
    xtol: float,
    samples: int = 11,
    rounds: int = 2,
) -> tuple[float, float, float]:
    """Zoom in on the maximum of ``fn`` near ``center``.

    ``rounds`` local scans of ``samples`` points each shrink the bracket
    around the best sample, which locates lines narrower than the starting
    bracket; a bounded scalar search then polishes the location to ``xtol``.
    Returns (location, height, baseline) with the baseline taken as the
    smaller edge value of the first scan.
    """
    a, b = max(lo, center - half_width), min(hi, center + half_width)
    baseline = None
    best_x, best_y = center, -math.inf
    for _ in range(rounds):
        xs = np.linspace(a, b, samples)
        ys = np.array([fn(x) for x in xs])
        if baseline is None:
            baseline = float(min(ys[0], ys[-1]))
        i = int(np.nanargmax(ys))
        if ys[i] > best_y:
            best_x, best_y = float(xs[i]), float(ys[i])
        step = xs[1] - xs[0]
        a, b = max(lo, xs[i] - step), min(hi, xs[i] + step)
        if b - a <= 2 * xtol:
            break
    res = minimize_scalar(lambda x: -fn(x), bounds=(a, b), method="bounded", options={"xatol": xtol})
    if res.success and -res.fun > best_y:
        best_x, best_y = float(res.x), float(-res.fun)
    return best_x, best_y, baseline


def find_peaks(
    fn: Callable[[float], float],
    xs: np.ndarray,
    ys: np.ndarray,
    seeds: Sequence[float] = (),
    min_contrast: float = 1e-3,
    xtol: float | None = None,
) -> list[Peak]:
    """Peaks of a sampled curve, refined by re-evaluating ``fn``.

    Candidates are interior grid maxima plus ``seeds`` (expected line
    positions, which catch lines narrower than the grid step). A refined
    candidate counts as a peak when it rises above its local baseline by at
    least ``min_contrast`` times the largest such rise.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    lo, hi = float(xs[0]), float(xs[-1])
    step = float(xs[1] - xs[0])
    xtol = xtol or 1e-5 * max(abs(lo), abs(hi))
    centers = [float(xs[i]) for i in range(1, len(xs) - 1) if ys[i] > ys[i - 1] and ys[i] >= ys[i + 1]]
    centers += [float(s) for s in seeds if lo < s < hi]
    found: list[Peak] = []
    for c in sorted(set(centers)):
        a, b = max(lo, c - step), min(hi, c + step)
        x, y, base = refine_peak(fn, c, step, lo, hi, xtol)
        # a maximum on the edge of its own bracket is a slope, not a line
        if y <= base or (a > lo and x - a < 2 * xtol) or (b < hi and b - x < 2 * xtol):
            continue
        if not lo < x < hi:
            continue
        if any(abs(p.location - x) <= 10 * xtol for p in found):
            continue
        found.append(Peak(x, y, base))
    if not found:
        return []
    top = max(p.contrast for p in found)
    return sorted((p for p in found if p.contrast >= min_contrast * top), key=lambda p: p.location)


# ---------------------------------------------------------------- results


@dataclass
class SweepResult:
    """Tabular sweep output plus the metadata needed to reproduce any row."""

    axis_names: tuple[str, ...]
    output_names: tuple[str, ...]
    rows: list[dict[str, float]]
    meta: dict
    peaks: list[Peak] = field(default_factory=list)

    @property
    def columns(self) -> tuple[str, ...]:
        return (*self.axis_names, *self.output_names, "converged", "failed", "peak_location", "peak_height")

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    @property
    def failed_fraction(self) -> float:
        return float(np.mean([row["failed"] for row in self.rows])) if self.rows else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{c: _json_value(row[c]) for c in self.columns} for row in self.rows]
        peaks = [{k: _json_value(v) for k, v in asdict(p).items()} for p in self.peaks]
        return json.dumps({"meta": self.meta, "columns": list(self.columns), "rows": rows, "peaks": peaks}, indent=2)


def _fmt(value: float) -> str:
    if isinstance(value, (bool, int, np.integer)) and not isinstance(value, float):
        return str(int(value))
    return "nan" if math.isnan(value) else f"{value:.17e}"


def _json_value(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _assign_peaks(rows: list[dict], xs: np.ndarray, offset: int, peaks: Sequence[Peak]) -> None:
    """Write each peak onto the nearest grid row that does not already hold one."""
    order = sorted(peaks, key=lambda p: -p.contrast)
    for p in order:
        for i in np.argsort(np.abs(xs - p.location), kind="stable"):
            row = rows[offset + int(i)]
            if math.isnan(row["peak_location"]):
                row["peak_location"], row["peak_height"] = p.location, p.height
                break


def run_plan(plan: SweepPlan, parallelism: int = 1) -> SweepResult:
    """Evaluate every grid point, then search for peaks along frequency axes.

    Raises SweepFailure when more than 10 % of points failed; the partial
    result is attached as ``exc.result``.
    """
    points = plan.points()
    results = _map(plan, points, parallelism)
    rows = []
    failures = []
    for point, res in zip(points, results):
        row = {ax.name: v for ax, v in zip(plan.axes, point)}
        row.update(res.values)
        row.update(converged=int(res.converged), failed=int(res.error is not None),
                   peak_location=math.nan, peak_height=math.nan)
        rows.append(row)
        if res.error is not None:
            failures.append({"point": list(point), "error": res.error})

    peaks: list[Peak] = []
    inner = plan.axes[-1]
    target = PEAK_COLUMN.get(plan.kind)
    if plan.peaks and target in plan.outputs and inner.name in FREQUENCY_AXES:
        xs = inner.values
        n_inner = int(inner.count)
        outer = [()] if len(plan.axes) == 1 else [(v,) for v in plan.axes[0].values]
        for s, prefix in enumerate(outer):
            block = rows[s * n_inner : (s + 1) * n_inner]
            if any(r["failed"] for r in block):
                continue
            ys = np.array([r[target] for r in block])

            def fn(x, prefix=prefix):
                return evaluate_point(replace(plan, outputs=(target,)), (*prefix, x)).values[target]

            spec0 = plan.spec_at((*prefix, xs[0]))
            seeds = transition_seeds(spec0, xs[0], xs[-1])
            found = [replace(p, slice_index=s) for p in find_peaks(fn, xs, ys, seeds, plan.min_contrast)]
            _assign_peaks(rows, xs, s * n_inner, found)
            peaks += found

    meta = {
        "version": __version__,
        "kind": plan.kind,
        "axes": [asdict(a) for a in plan.axes],
        "outputs": list(plan.outputs),
        "spec": dict(config_items(Config(plan.base, plan.numerics))),
        "numerics": asdict(plan.numerics),
        "kernel": kernel.BACKEND,
        "peak_search": {"enabled": plan.peaks, "column": target, "min_contrast": plan.min_contrast},
        "failures": failures,
        "unconverged": int(sum(1 for r in rows if not r["converged"] and not r["failed"])),
    }
    result = SweepResult(tuple(a.name for a in plan.axes), plan.outputs, rows, meta, peaks)
    if result.failed_fraction > FAILURE_LIMIT:
        exc = SweepFailure(f"{len(failures)} of {len(rows)} sweep points failed")
        exc.result = result
        raise exc
    return result
