"""Flat dotted-key configuration files.

A config is a list of ``dotted.key = value`` lines, which is also valid TOML,
so it is parsed with a TOML reader and flattened back to dotted keys::

    resonator.omega_c = 1.0
    qubit.0.g = 0.5
    qubit.0.theta = 0.7853981633974483
    qubit.0.detuning = 0.7
    probe.detuning = -0.6
    probe.g = 0.2
    drive.amplitude = 0.02
    drive.frequency = 0.3
    losses.cavity = 5e-4
    numerics.cutoff = 30
    plan.kind = "absorption_spectrum"
    plan.axis.0.name = "drive.frequency"
    plan.axis.0.start = 0.15
    plan.axis.0.stop = 1.4
    plan.axis.0.count = 126

A qubit is given either by ``delta`` and ``epsilon`` or by ``theta`` plus one
of ``detuning`` / ``omega_q``. The probe takes ``delta`` or ``detuning``.
"""
from __future__ import annotations

import math
import re
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .model import (
    DriveSpec,
    LossSpec,
    ModulationSpec,
    ProbeSpec,
    QubitSpec,
    ResonatorSpec,
    SpecError,
    SystemSpec,
)

PLAN_KINDS = ("vev_contour", "emission_spectrum", "absorption_spectrum", "custom_scalar")


class ConfigError(ValueError):
    """Invalid config; carries the offending field and its line when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None, source: str = "config"):
        self.field = field
        self.line = line
        self.source = source
        where = source + (f":{line}" if line else "")
        prefix = f"{where}: {field}: " if field else f"{where}: "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Numerics:
    """Integrator and truncation knobs. ``None`` selects the library default."""

    cutoff: int | None = None
    dt: float | None = None
    transient: float | None = None
    window: float | None = None
    levels: int | None = None


@dataclass(frozen=True)
class AxisConfig:
    name: str
    start: float
    stop: float
    count: int


@dataclass(frozen=True)
class PlanConfig:
    kind: str
    axes: tuple[AxisConfig, ...]
    outputs: tuple[str, ...] = ()
    peaks: bool = True
    min_contrast: float = 1e-3


@dataclass(frozen=True)
class Config:
    spec: SystemSpec
    numerics: Numerics = field(default_factory=Numerics)
    plan: PlanConfig | None = None


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _line_index(text: str) -> dict[str, int]:
    """First line number of every dotted key assigned in ``text``."""
    index = {}
    pattern = re.compile(r"^\s*([A-Za-z0-9_.\-\s\"']+?)\s*=")
    for lineno, line in enumerate(text.splitlines(), 1):
        m = pattern.match(line)
        if m:
            key = ".".join(part.strip().strip("\"'") for part in m.group(1).split("."))
            index.setdefault(key, lineno)
    return index


class _Reader:
    """Typed access to the flat key table with line-aware errors."""

    def __init__(self, flat: dict[str, Any], lines: dict[str, int], source: str):
        self.flat = flat
        self.lines = lines
        self.source = source
        self.used: set[str] = set()

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, key, self.lines.get(key), self.source)

    @contextmanager
    def section(self, prefix: str):
        """Report SpecError raised while building ``prefix`` at its first line."""
        try:
            yield
        except SpecError as exc:
            lines = [n for k, n in self.lines.items() if k == prefix or k.startswith(prefix + ".")]
            raise ConfigError(str(exc), prefix, min(lines) if lines else None, self.source) from exc

    def has(self, key: str) -> bool:
        return key in self.flat

    def number(self, key: str, default: float | None = None, required: bool = False) -> float | None:
        if key not in self.flat:
            if required:
                raise ConfigError("missing required field", key, None, self.source)
            return default
        self.used.add(key)
        value = self.flat[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise self.error(key, f"expected a finite number, got {value!r}")
        return float(value)

    def integer(self, key: str, default: int | None = None) -> int | None:
        if key not in self.flat:
            return default
        self.used.add(key)
        value = self.flat[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key, f"expected an integer, got {value!r}")
        return value

    def string(self, key: str, default: str | None = None) -> str | None:
        if key not in self.flat:
            return default
        self.used.add(key)
        value = self.flat[key]
        if not isinstance(value, str):
            raise self.error(key, f"expected a string, got {value!r}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        if key not in self.flat:
            return default
        self.used.add(key)
        value = self.flat[key]
        if not isinstance(value, bool):
            raise self.error(key, f"expected true or false, got {value!r}")
        return value

    def strings(self, key: str) -> tuple[str, ...]:
        if key not in self.flat:
            return ()
        self.used.add(key)
        value = self.flat[key]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise self.error(key, f"expected a list of strings, got {value!r}")
        return tuple(value)

    def indices(self, prefix: str) -> list[int]:
        found = set()
        for key in self.flat:
            if key.startswith(prefix + "."):
                head = key[len(prefix) + 1 :].split(".", 1)[0]
                if not head.isdigit():
                    raise self.error(key, f"expected {prefix}.<index>.<field>")
                found.add(int(head))
        out = sorted(found)
        if out != list(range(len(out))):
            raise ConfigError(f"{prefix} indices must be 0..n-1, got {out}", prefix, None, self.source)
        return out


def _qubit(r: _Reader, i: int, omega_c: float) -> QubitSpec:
    p = f"qubit.{i}"
    g = r.number(f"{p}.g", 0.0)
    by_gap = r.has(f"{p}.delta") or r.has(f"{p}.epsilon")
    by_angle = r.has(f"{p}.theta") or r.has(f"{p}.detuning") or r.has(f"{p}.omega_q")
    if by_gap and by_angle:
        raise r.error(f"{p}.theta" if r.has(f"{p}.theta") else f"{p}.delta",
                      "give either delta/epsilon or theta with detuning/omega_q, not both")
    if by_gap:
        return QubitSpec(r.number(f"{p}.delta", required=True), r.number(f"{p}.epsilon", 0.0), g)
    theta = r.number(f"{p}.theta", 0.0)
    if r.has(f"{p}.detuning") and r.has(f"{p}.omega_q"):
        raise r.error(f"{p}.omega_q", "give detuning or omega_q, not both")
    if r.has(f"{p}.omega_q"):
        omega_q = r.number(f"{p}.omega_q")
    elif r.has(f"{p}.detuning"):
        omega_q = omega_c + r.number(f"{p}.detuning")
    else:
        raise ConfigError("missing qubit frequency (detuning, omega_q or delta)", p, None, r.source)
    return QubitSpec.from_frequency(omega_q, theta, g)


def _spec(r: _Reader) -> SystemSpec:
    omega_c = r.number("resonator.omega_c", 1.0)
    cutoff = r.integer("resonator.fock_cutoff", 30)
    with r.section("resonator"):
        resonator = ResonatorSpec(omega_c, cutoff)
    qubits = []
    for i in r.indices("qubit"):
        with r.section(f"qubit.{i}"):
            qubits.append(_qubit(r, i, omega_c))

    probe = None
    if any(k.startswith("probe.") for k in r.flat):
        if r.has("probe.delta") and r.has("probe.detuning"):
            raise r.error("probe.detuning", "give delta or detuning, not both")
        if r.has("probe.delta"):
            delta = r.number("probe.delta")
        else:
            delta = omega_c + r.number("probe.detuning", required=True)
        with r.section("probe"):
            probe = ProbeSpec(delta, r.number("probe.g", 0.0))

    drive = None
    if any(k.startswith("drive.") for k in r.flat):
        with r.section("drive"):
            drive = DriveSpec(r.number("drive.amplitude", required=True), r.number("drive.frequency", required=True))

    modulation = None
    if any(k.startswith("modulation.") for k in r.flat):
        gs = {q.g for q in qubits}
        if r.has("modulation.g0"):
            g0 = r.number("modulation.g0")
        elif len(gs) == 1:
            g0 = gs.pop()
        else:
            raise ConfigError("needed when qubits have different couplings", "modulation.g0", None, r.source)
        with r.section("modulation"):
            modulation = ModulationSpec(
                g0, r.number("modulation.g1", required=True), r.number("modulation.frequency", required=True)
            )

    with r.section("losses"):
        losses = LossSpec(r.number("losses.cavity", 0.0), r.number("losses.qubit", 0.0), r.number("losses.probe", 0.0))
    with r.section("drive"):
        return SystemSpec(resonator, tuple(qubits), probe, drive, modulation, losses)


def _numerics(r: _Reader) -> Numerics:
    n = Numerics(
        cutoff=r.integer("numerics.cutoff"),
        dt=r.number("numerics.dt"),
        transient=r.number("numerics.transient"),
        window=r.number("numerics.window"),
        levels=r.integer("numerics.levels"),
    )
    if n.cutoff is not None and n.cutoff < 2:
        raise r.error("numerics.cutoff", "must be >= 2")
    if n.levels is not None and n.levels < 2:
        raise r.error("numerics.levels", "must be >= 2")
    for key in ("dt", "transient", "window"):
        value = getattr(n, key)
        if value is not None and value <= 0 and not (key == "transient" and value == 0):
            raise r.error(f"numerics.{key}", "must be positive")
    return n


def _plan(r: _Reader) -> PlanConfig | None:
    if not any(k.startswith("plan.") for k in r.flat):
        return None
    kind = r.string("plan.kind")
    if kind is None:
        raise ConfigError("missing required field", "plan.kind", None, r.source)
    if kind not in PLAN_KINDS:
        raise r.error("plan.kind", f"unknown kind {kind!r}; expected one of {', '.join(PLAN_KINDS)}")
    axes = []
    for i in r.indices("plan.axis"):
        p = f"plan.axis.{i}"
        name = r.string(f"{p}.name")
        if name is None:
            raise ConfigError("missing required field", f"{p}.name", None, r.source)
        count = r.integer(f"{p}.count")
        if count is None or count < 2:
            raise ConfigError("count must be an integer >= 2", f"{p}.count", r.lines.get(f"{p}.count"), r.source)
        axes.append(AxisConfig(name, r.number(f"{p}.start", required=True), r.number(f"{p}.stop", required=True), count))
    if not 1 <= len(axes) <= 2:
        raise ConfigError(f"a plan needs one or two axes, got {len(axes)}", "plan.axis", None, r.source)
    contrast = r.number("plan.peaks.min_contrast", 1e-3)
    return PlanConfig(kind, tuple(axes), r.strings("plan.outputs"), r.boolean("plan.peaks.enabled", True), contrast)


def parse_config(text: str, source: str = "config") -> Config:
    """Parse config text. Raises ConfigError naming the field and line."""
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", None, int(m.group(1)) if m else None, source) from exc
    r = _Reader(_flatten(tree), _line_index(text), source)
    try:
        spec = _spec(r)
        numerics = _numerics(r)
        plan = _plan(r)
    except SpecError as exc:
        raise ConfigError(str(exc), None, None, source) from exc
    unknown = sorted(set(r.flat) - r.used)
    if unknown:
        key = unknown[0]
        raise r.error(key, "unknown field")
    return Config(spec, numerics, plan)


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", None, None, str(path)) from exc
    return parse_config(text, str(path))


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def config_items(cfg: Config) -> list[tuple[str, Any]]:
    """Dotted key/value pairs that parse back to ``cfg``."""
    s = cfg.spec
    items: list[tuple[str, Any]] = [
        ("resonator.omega_c", float(s.resonator.omega_c)),
        ("resonator.fock_cutoff", int(s.resonator.fock_cutoff)),
    ]
    for i, q in enumerate(s.qubits):
        items += [(f"qubit.{i}.delta", float(q.delta)), (f"qubit.{i}.epsilon", float(q.epsilon)), (f"qubit.{i}.g", float(q.g))]
    if s.probe is not None:
        items += [("probe.delta", float(s.probe.delta)), ("probe.g", float(s.probe.g))]
    if s.drive is not None:
        items += [("drive.amplitude", float(s.drive.amplitude)), ("drive.frequency", float(s.drive.frequency))]
    if s.modulation is not None:
        m = s.modulation
        items += [("modulation.g0", float(m.g0)), ("modulation.g1", float(m.g1)), ("modulation.frequency", float(m.frequency))]
    if isinstance(s.losses.qubit, tuple):
        raise ConfigError("per-qubit loss rates have no flat-config representation", "losses.qubit")
    items += [
        ("losses.cavity", float(s.losses.cavity)),
        ("losses.qubit", float(s.losses.qubit)),
        ("losses.probe", float(s.losses.probe)),
    ]
    n = cfg.numerics
    for key in ("cutoff", "dt", "transient", "window", "levels"):
        value = getattr(n, key)
        if value is not None:
            items.append((f"numerics.{key}", value))
    p = cfg.plan
    if p is not None:
        items.append(("plan.kind", p.kind))
        if p.outputs:
            items.append(("plan.outputs", list(p.outputs)))
        items += [("plan.peaks.enabled", p.peaks), ("plan.peaks.min_contrast", float(p.min_contrast))]
        for i, a in enumerate(p.axes):
            items += [
                (f"plan.axis.{i}.name", a.name),
                (f"plan.axis.{i}.start", float(a.start)),
                (f"plan.axis.{i}.stop", float(a.stop)),
                (f"plan.axis.{i}.count", int(a.count)),
            ]
    return items


def serialize_config(cfg: Config) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in config_items(cfg))
