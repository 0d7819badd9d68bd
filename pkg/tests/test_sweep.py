import json
import math

import numpy as np
import pytest

from uscqed import sweep
from uscqed.config import Numerics
from uscqed.lindblad import IntegrationError
from uscqed.model import (
    DriveSpec,
    QubitSpec,
    ResonatorSpec,
    SystemSpec,
    equal_qubits,
    modulated_emitter_spec,
    probe_readout_spec,
)
from uscqed.sweep import Axis, PlanError, SweepFailure, SweepPlan, find_peaks, run_plan, set_parameter


def three_qubits(cutoff=20):
    return SystemSpec(ResonatorSpec(1.0, cutoff), equal_qubits(3, 1.7, 0.0, 0.0))


def test_theta_axis_holds_qubit_frequency():
    spec = set_parameter(three_qubits(), "theta", 0.4)
    assert all(math.isclose(q.omega_q, 1.7) and math.isclose(q.theta, 0.4) for q in spec.qubits)


def test_single_qubit_and_section_parameters():
    spec = set_parameter(three_qubits(), "qubit.1.g", 0.2)
    assert [q.g for q in spec.qubits] == [0.0, 0.2, 0.0]
    spec = set_parameter(probe_readout_spec(drive=DriveSpec(0.02, 0.3)), "probe.detuning", -0.5)
    assert math.isclose(spec.probe.delta, 0.5)
    spec = set_parameter(spec, "drive.frequency", 0.7)
    assert spec.drive.frequency == 0.7


def test_coupling_axis_moves_modulation_reference():
    spec = set_parameter(modulated_emitter_spec(0.3), "g", 0.2)
    assert spec.qubits[0].g == 0.2 and spec.modulation.g0 == 0.2


@pytest.mark.parametrize("name", ["colour", "qubit.5.g", "drive.frequency", "resonator.q", "qubit.0.spin"])
def test_unknown_parameters_are_rejected(name):
    with pytest.raises(PlanError):
        set_parameter(three_qubits(), name, 1.0)


def test_plan_validation():
    with pytest.raises(PlanError):
        SweepPlan("spiral", (Axis("g", 0, 1, 3),), three_qubits())
    with pytest.raises(PlanError):
        SweepPlan("vev_contour", (Axis("g", 0, 1, 3),) * 3, three_qubits())
    with pytest.raises(PlanError):
        Axis("g", 0, 1, 1)
    with pytest.raises(PlanError):
        SweepPlan("absorption_spectrum", (Axis("g", 0, 1, 3),), three_qubits())
    with pytest.raises(PlanError):
        SweepPlan("vev_contour", (Axis("g", 0, 1, 3),), three_qubits(), outputs=("total",))


def test_vev_grid_has_expected_shape_and_order():
    plan = SweepPlan("vev_contour", (Axis("g", 0.0, 0.8, 3), Axis("theta", 0.0, math.pi / 2, 3)), three_qubits(40))
    result = run_plan(plan)
    assert len(result.rows) == 9
    assert [r["g"] for r in result.rows] == [0.0] * 3 + [0.4] * 3 + [0.8] * 3
    v = result.column("vev").reshape(3, 3)
    assert np.all(v[0] == 0) and np.all(v[:, 0] < 1e-10)
    assert np.all(np.diff(v[:, 2]) > 0) and np.all(np.diff(v[2]) > 0)
    assert math.isclose(v[2, 2], 4.8, rel_tol=1e-6)
    assert all(r["converged"] == 1 and r["failed"] == 0 for r in result.rows)


def small_absorption_plan(**kw):
    spec = probe_readout_spec(drive=DriveSpec(0.02, 0.3), fock_cutoff=10)
    return SweepPlan("absorption_spectrum", (Axis("drive.frequency", 0.44, 0.5, 7),), spec, **kw)


def test_output_is_identical_across_worker_counts():
    plan = SweepPlan("vev_contour", (Axis("g", 0.0, 0.5, 3), Axis("theta", 0.0, 1.0, 2)), three_qubits(12),
                     outputs=("vev", "photon_number", "coherence"))
    assert run_plan(plan, 1).to_csv() == run_plan(plan, 3).to_csv()
    spectrum = small_absorption_plan(peaks=False)
    assert run_plan(spectrum, 1).to_csv() == run_plan(spectrum, 2).to_csv()


def test_absorption_peak_lands_in_peak_column():
    result = run_plan(small_absorption_plan())
    locs = result.column("peak_location")
    found = locs[~np.isnan(locs)]
    assert any(abs(x - 0.4682) < 0.002 for x in found)
    assert result.peaks and all(p.contrast > 0 for p in result.peaks)


def test_csv_and_json_layout():
    result = run_plan(small_absorption_plan(peaks=False))
    lines = result.to_csv().splitlines()
    assert lines[0] == "drive.frequency,probe_population,probe_excess,converged,failed,peak_location,peak_height"
    first = lines[1].split(",")
    assert first[0] == f"{0.44:.17e}" and "e-01" in first[0]
    assert first[3] in ("0", "1") and first[5] == "nan"
    doc = json.loads(result.to_json())
    assert doc["meta"]["kind"] == "absorption_spectrum"
    assert doc["meta"]["spec"]["drive.amplitude"] == 0.02
    assert len(doc["rows"]) == 7 and doc["rows"][0]["peak_location"] is None


def test_failed_points_are_marked_and_sweep_continues(monkeypatch):
    calls = {"n": 0}
    real = sweep._steady_values

    def flaky(spec, outputs, numerics):
        calls["n"] += 1
        if math.isclose(spec.drive.frequency, 0.46):
            raise IntegrationError("synthetic failure")
        return real(spec, outputs, numerics)

    monkeypatch.setattr(sweep, "_steady_values", flaky)
    plan = SweepPlan("absorption_spectrum", (Axis("drive.frequency", 0.3, 0.6, 16),),
                     probe_readout_spec(drive=DriveSpec(0.02, 0.3), fock_cutoff=6), peaks=False)
    result = run_plan(plan)
    failed = [r for r in result.rows if r["failed"]]
    assert len(failed) == 1 and math.isnan(failed[0]["probe_population"])
    assert result.meta["failures"][0]["error"].startswith("IntegrationError")


def test_too_many_failures_raise(monkeypatch):
    def broken(spec, outputs, numerics):
        raise IntegrationError("synthetic failure")

    monkeypatch.setattr(sweep, "_steady_values", broken)
    plan = small_absorption_plan(peaks=False)
    with pytest.raises(SweepFailure) as info:
        run_plan(plan)
    assert info.value.result.failed_fraction == 1.0


def test_numerics_override_cutoff():
    plan = SweepPlan("vev_contour", (Axis("g", 0.0, 0.1, 2),), three_qubits(40), numerics=Numerics(cutoff=7))
    assert plan.spec_at((0.1,)).resonator.fock_cutoff == 7


def lorentz(x, x0, w, h):
    return h * w**2 / ((x - x0) ** 2 + w**2)


def test_find_peaks_refines_broad_and_seeded_narrow_lines():
    def fn(x):
        return lorentz(x, 0.503, 0.02, 1.0) + lorentz(x, 0.7071, 5e-4, 0.3)

    xs = np.linspace(0.3, 1.0, 36)
    ys = np.array([fn(x) for x in xs])
    without_seed = find_peaks(fn, xs, ys)
    assert [round(p.location, 4) for p in without_seed] == [0.503]
    with_seed = find_peaks(fn, xs, ys, seeds=[0.7075])
    assert len(with_seed) == 2
    assert abs(with_seed[1].location - 0.7071) < 1e-5
    assert math.isclose(with_seed[1].height, fn(0.7071), rel_tol=1e-3)


def test_find_peaks_applies_contrast_threshold():
    def fn(x):
        return lorentz(x, 0.4, 0.02, 1.0) + lorentz(x, 0.8, 0.005, 2e-3)

    xs = np.linspace(0.2, 1.0, 41)
    ys = np.array([fn(x) for x in xs])
    assert len(find_peaks(fn, xs, ys, min_contrast=1e-3)) == 2
    assert len(find_peaks(fn, xs, ys, min_contrast=1e-2)) == 1


def test_seeds_follow_dressed_transitions():
    spec = probe_readout_spec(drive=DriveSpec(0.02, 0.3), fock_cutoff=20)
    seeds = sweep.transition_seeds(spec, 0.15, 1.4)
    assert any(abs(s - 0.4682) < 1e-3 for s in seeds)
    assert any(abs(s - 0.2341) < 1e-3 for s in seeds)
    # parity forbids the one-photon line reached at half the frequency at theta = 0
    sym = sweep.transition_seeds(probe_readout_spec(theta=0.0, drive=DriveSpec(0.02, 0.3), fock_cutoff=20), 0.15, 1.4)
    assert not any(abs(s - 0.2341) < 5e-3 for s in sym)
