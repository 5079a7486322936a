import dataclasses
import math

import numpy as np
import pytest

from optosync.classical import IntegratorConfig
from optosync.errors import MaxIterations, NoSignChange, ParameterError
from optosync.model import SyncMetrics, SystemParams
from optosync.sweep import (SweepRow, SweepSpec, detect_jumps, evaluate,
                            find_threshold, not_synchronized, phase_beyond,
                            run_point, run_sweep, validate_spec)

SHORT = IntegratorConfig(t_end=600.0)


def toy_point(value, spec):
    """Stand-in evaluator: 'synchronised' exactly when value <= 3."""
    ok = value <= 3.0
    m = SyncMetrics(phi_stat=math.pi if ok else 0.0, phi_amp=0.0,
                    synchronized=ok)
    return SweepRow(value=value, metrics=m,
                    status="ok" if ok else "not_synchronized")


def test_toy_bisection():
    spec = SweepSpec(values=(0.0, 10.0))
    th = find_threshold(spec, not_synchronized, 1e-6, point=toy_point)
    assert th.value == pytest.approx(3.0, abs=1e-6)
    lo, hi = th.bracket
    assert lo <= 3.0 < hi and hi - lo < 1e-6
    assert th.iterations == math.ceil(math.log2(10 / 1e-6))


def test_scan_finds_first_flip_only():
    def two_windows(value, spec):
        ok = value <= 3.0 or value >= 6.0
        return SweepRow(value=value, metrics=None,
                        status="ok" if ok else "not_synchronized")
    spec = SweepSpec(values=(0.0, 2.0, 4.0, 8.0))
    th = find_threshold(spec, not_synchronized, 1e-3, point=two_windows)
    assert th.value == pytest.approx(3.0, abs=1e-3)
    assert [r.value for r in th.rows[:3]] == [0.0, 2.0, 4.0]
    # plain bisection between the end points sees no flip at all
    with pytest.raises(NoSignChange):
        find_threshold(spec.replace(values=(0.0, 8.0)), not_synchronized,
                       1e-3, point=two_windows)


def test_bisection_iteration_cap():
    with pytest.raises(MaxIterations):
        find_threshold(SweepSpec(values=(0.0, 10.0)), not_synchronized,
                       1e-6, max_iter=5, point=toy_point)


def test_threshold_needs_positive_tolerance():
    with pytest.raises(ParameterError):
        find_threshold(SweepSpec(values=(0.0, 10.0)), not_synchronized, 0.0,
                       point=toy_point)


def test_phase_beyond_predicate():
    pred = phase_beyond(3 * math.pi / 4)
    assert pred(toy_point(1.0, None))
    assert not pred(toy_point(5.0, None))
    low = SweepRow(value=0, status="ok",
                   metrics=SyncMetrics(phi_stat=-1.0, phi_amp=0.0,
                                       synchronized=True))
    assert not pred(low)


def test_axis_mapping():
    base = SystemParams(eta=3000.0)
    spec = SweepSpec(base=base, axis="coupling_ratio")
    assert spec.params_at(12.0).g == pytest.approx((1e-5, 1.2e-4))
    assert spec.replace(axis="eta").params_at(700).eta == 700.0
    assert spec.replace(axis="domega").params_at(0.004).omega[1] == \
        pytest.approx(0.996)
    assert spec.replace(axis="temperature").params_at(5.0).temp == (5.0, 5.0)


@pytest.mark.parametrize("changes", [
    {"axis": "kappa"},
    {"values": ()},
    {"values": (1.0, 3.0, 2.0)},
    {"outputs": ("phase", "entropy")},
    {"transient_cut": 1e9},
    {"axis": "eta", "values": (-5.0,)},
])
def test_validate_spec_rejects(changes):
    with pytest.raises(ParameterError):
        validate_spec(SweepSpec(**changes))


def test_cut_defaults_to_final_window():
    spec = SweepSpec(window_fraction=0.25)
    assert spec.cut(1000.0) == 750.0
    assert spec.replace(transient_cut=10.0).cut(1000.0) == 10.0


def test_detect_jumps():
    def row(v, phi):
        return SweepRow(value=v, status="ok",
                        metrics=SyncMetrics(phi_stat=phi, phi_amp=0.0,
                                            synchronized=True))
    rows = [row(1, -1.0), row(2, -1.1), row(3, -2.8), row(4, 3.1),
            row(5, -3.1)]
    assert detect_jumps(rows) == [2.5]


def test_sweep_rows_follow_values():
    spec = SweepSpec(values=(3600.0, 3000.0), integrator=SHORT,
                     extend_near_jumps=False)
    result = run_sweep(spec)
    assert [r.value for r in result.rows] == [3600.0, 3000.0]
    assert all(r.status in ("ok", "not_synchronized") for r in result.rows)
    assert result.column("phi_stat").shape == (2,)


def test_failed_point_becomes_error_row():
    spec = SweepSpec(values=(3600.0,),
                     integrator=IntegratorConfig(t_end=600.0, max_steps=50))
    row = run_point(3600.0, spec)
    assert row.status == "error" and "MaxStepsExceeded" in row.error
    assert row.metrics is None


def test_single_point_matches_direct_evaluation():
    spec = SweepSpec(values=(3600.0,), integrator=SHORT,
                     outputs=("phase", "variance", "discord", "negativity"))
    fields, traj = evaluate(spec.params_at(3600.0), spec)
    row = run_sweep(spec).rows[0]
    assert row.metrics == fields["metrics"]
    m = row.metrics
    assert m.var_avg >= 0 and m.discord_a_avg >= 0 and m.discord_b_avg >= 0
    assert m.window == (480.0, 600.0)
    assert traj.cov is not None


def test_classical_sweep_skips_quantum_outputs():
    spec = SweepSpec(values=(3600.0,), integrator=SHORT)
    m = run_sweep(spec).rows[0].metrics
    assert math.isnan(m.var_avg) and math.isnan(m.e_max)


def test_parallel_sweep_matches_serial():
    spec = SweepSpec(values=(3000.0, 3600.0),
                     integrator=IntegratorConfig(t_end=200.0),
                     extend_near_jumps=False)
    serial = run_sweep(spec, workers=1)
    parallel = run_sweep(spec, workers=2)
    for a, b in zip(serial.rows, parallel.rows):
        np.testing.assert_equal(dataclasses.astuple(a.metrics),
                                dataclasses.astuple(b.metrics))


def test_extension_near_jumps(monkeypatch):
    import optosync.sweep as sweep_mod

    calls = []

    def fake(value, spec, cfg=None):
        t_end = (cfg or spec.integrator).t_end
        calls.append((value, t_end))
        phi = -1.0 if value < 1700 else -2.8
        ok = value != 1690 or t_end > spec.integrator.t_end
        return SweepRow(value=value, t_end=t_end,
                        status="ok" if ok else "not_synchronized",
                        metrics=SyncMetrics(phi_stat=phi, phi_amp=0.0,
                                            synchronized=ok))
    monkeypatch.setattr(sweep_mod, "run_point", fake)
    spec = SweepSpec(values=(1600.0, 1650.0, 1690.0, 1750.0, 1800.0),
                     integrator=IntegratorConfig(t_end=1000.0))
    rows = sweep_mod.run_sweep(spec).rows
    assert rows[2].extended and rows[2].synchronized
    assert rows[2].t_end == 2000.0
    assert (1690.0, 2000.0) in calls
    assert not any(r.extended for i, r in enumerate(rows) if i != 2)
