import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numba import njit
from scipy.integrate import solve_ivp

from optosync.classical import (IntegratorConfig, PhaseSeries, derivatives,
                                instantaneous_phase, integrate,
                                phase_difference, phase_lock,
                                poincare_amplitudes, run_kernel,
                                stationary_phase, transient_time, wrap)
from optosync.errors import (NonFinite, NotSynchronized, ParameterError,
                             PhaseUndefined, StepSizeUnderflow,
                             UndersampledPhase)
from optosync.model import ClassicalState, SystemParams, Trajectory


def test_derivatives_at_origin_only_drive_survives():
    zero = ClassicalState(q=(0, 0), p=(0, 0), a_re=0, a_im=0)
    d = derivatives(zero, SystemParams(eta=3600.0))
    np.testing.assert_array_equal(d, [0, 0, 0, 0, 3600.0, 0])


def test_decoupled_cavity_fixed_point():
    params = SystemParams(g=(0.0, 0.0), eta=3600.0)
    a = 3600.0 * (0.05 + 1j) / (0.05 ** 2 + 1)
    assert a == pytest.approx(3600.0 / (0.05 - 1j))
    state = ClassicalState(q=(0, 0), p=(0, 0), a_re=a.real, a_im=a.imag)
    np.testing.assert_allclose(derivatives(state, params), 0.0, atol=1e-9)


def test_derivatives_match_equations_by_hand():
    params = SystemParams(eta=10.0, g=(0.3, 0.2), gamma=(0.01, 0.02),
                          omega=(1.0, 0.9), delta=0.7, kappa=0.1)
    s = ClassicalState(q=(0.4, -0.3), p=(0.2, 0.5), a_re=1.5, a_im=-0.5)
    a = s.a
    adot = (1j * 0.7 - 0.1 - 1j * (0.3 * 0.4 + 0.2 * -0.3)) * a + 10.0
    expected = [0.2, -0.4 - 0.3 * abs(a) ** 2 - 0.01 * 0.2,
                0.9 * 0.5, 0.9 * 0.3 - 0.2 * abs(a) ** 2 - 0.02 * 0.5,
                adot.real, adot.imag]
    np.testing.assert_allclose(derivatives(s, params), expected, rtol=1e-14)


def test_integrate_matches_finite_difference(baseline_params):
    cfg = IntegratorConfig(t_end=200.0, sample_dt=0.01)
    traj = integrate(ClassicalState.seed(), baseline_params, cfg)
    dt = cfg.sample_dt
    for k in (5000, 12345, 19000):
        fd = (traj.states[k + 1] - traj.states[k - 1]) / (2 * dt)
        exact = derivatives(traj.state(k), baseline_params)
        # centred difference error ~ dt^2 |y'''| / 6
        third = (traj.states[k + 2] - 2 * traj.states[k + 1]
                 + 2 * traj.states[k - 1] - traj.states[k - 2]) / (2 * dt ** 3)
        bound = dt ** 2 * np.abs(third) / 6 * 2 + 1e-6 * np.abs(exact) + 1e-6
        assert np.all(np.abs(fd - exact) <= bound)


def test_undriven_origin_stays_at_rest():
    zero = ClassicalState(q=(0, 0), p=(0, 0), a_re=0, a_im=0)
    traj = integrate(zero, SystemParams(eta=0.0), IntegratorConfig(t_end=50))
    assert np.all(traj.states == 0)


def test_damped_oscillator_energy_decay():
    gamma = 1e-3
    params = SystemParams(eta=0.0, g=(0.0, 0.0), gamma=(gamma, gamma))
    init = ClassicalState(q=(1.0, 0.0), p=(0.0, 0.0), a_re=0, a_im=0)
    traj = integrate(init, params, IntegratorConfig(t_end=2000.0))
    energy = traj.states[:, 0] ** 2 + traj.states[:, 1] ** 2
    # closed form for q'' + gamma q' + q = 0 with q(0)=1, q'(0)=0
    w = math.sqrt(1 - gamma ** 2 / 4)
    t = traj.t
    q = np.exp(-gamma * t / 2) * (np.cos(w * t)
                                  + gamma / (2 * w) * np.sin(w * t))
    np.testing.assert_allclose(traj.states[:, 0], q, atol=1e-6)
    np.testing.assert_allclose(energy, np.exp(-gamma * t), rtol=0.01)
    # cycle averages decay monotonically
    per = int(round(2 * math.pi / 0.5))
    avg = [energy[i:i + per].mean() for i in range(0, len(energy) - per, per)]
    assert np.all(np.diff(avg) < 0)


@njit(cache=True)
def _lorenz(t, y, par, out):
    out[0] = par[0] * (y[1] - y[0])
    out[1] = y[0] * (par[1] - y[2]) - y[1]
    out[2] = y[0] * y[1] - par[2] * y[2]


def test_kernel_matches_reference_solver():
    par = np.array([10.0, 28.0, 8.0 / 3.0])
    y0 = np.array([1.0, 1.0, 1.0])
    cfg = IntegratorConfig(t_end=2.0, sample_dt=0.01, rel_tol=1e-11,
                           max_step=0.01)
    t, out, _, _ = run_kernel(_lorenz, y0, par, np.full(3, 1e-12), cfg)

    def f(t, y):
        o = np.empty(3)
        _lorenz(t, y, par, o)
        return o
    ref = solve_ivp(f, (0, 2.0), y0, method="DOP853", t_eval=t, rtol=1e-13,
                    atol=1e-13)
    np.testing.assert_allclose(out, ref.y.T, rtol=1e-7, atol=1e-7)


@njit(cache=True)
def _blow_up(t, y, par, out):
    out[0] = y[0] * y[0]


def test_finite_time_blow_up_is_reported():
    cfg = IntegratorConfig(t_end=2.0, sample_dt=0.1)
    with pytest.raises((NonFinite, StepSizeUnderflow)):
        run_kernel(_blow_up, np.array([1.0]), np.zeros(1), np.full(1, 1e-9),
                   cfg)


def test_integrate_is_deterministic():
    cfg = IntegratorConfig(t_end=300.0)
    a = integrate(ClassicalState.seed(), SystemParams(), cfg)
    b = integrate(ClassicalState.seed(), SystemParams(), cfg)
    assert np.array_equal(a.states, b.states)


def test_sampling_limit_enforced():
    with pytest.raises(ParameterError, match="sample_dt"):
        integrate(ClassicalState.seed(), SystemParams(),
                  IntegratorConfig(t_end=100.0, sample_dt=2.0))


def test_config_rejects_bad_values():
    with pytest.raises(ParameterError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ParameterError):
        IntegratorConfig(t_end=-1.0)
    with pytest.raises(ParameterError):
        IntegratorConfig(abs_tol=-1.0)
    cfg = IntegratorConfig()
    assert cfg.resolved_abs_tol(SystemParams(eta=3600)) == pytest.approx(
        1e-9 * 3600 / 0.05)
    assert cfg.resolved_abs_tol(SystemParams(eta=0.01)) == 1e-9


@pytest.mark.parametrize("q, p, phi, n", [
    (1.0, 0.0, 0.0, 0.5),
    (0.0, 1.0, math.pi / 2, 0.5),
    (-math.sqrt(2), 0.0, math.pi, 1.0),
    (-1.0, -0.0, math.pi, 0.5),
])
def test_instantaneous_phase_definition(q, p, phi, n):
    s = ClassicalState(q=(q, q), p=(p, p), a_re=0, a_im=0)
    phi1, phi2, n1, n2 = instantaneous_phase(s)
    assert phi1 == pytest.approx(phi) and phi2 == pytest.approx(phi)
    assert n1 == pytest.approx(n) and n2 == pytest.approx(n)


def test_instantaneous_phase_undefined_near_origin():
    s = ClassicalState(q=(1e-4, 1.0), p=(0.0, 0.0), a_re=0, a_im=0)
    with pytest.raises(PhaseUndefined):
        instantaneous_phase(s)


def test_identical_membranes_have_zero_phase_difference():
    params = SystemParams(omega=(1.0, 1.0), eta=3600.0)
    traj = integrate(ClassicalState.seed(), params,
                     IntegratorConfig(t_end=2000.0))
    series = phase_difference(traj)
    np.testing.assert_array_equal(series.dphi, 0.0)


def _series(t, dphi):
    ones = np.ones_like(t)
    return PhaseSeries(t=t, dphi=dphi, n1=ones, n2=ones, phi1=dphi,
                       phi2=0 * t)


def test_stationary_phase_constant():
    t = np.linspace(0, 100, 1001)
    phi, amp = stationary_phase(_series(t, np.full_like(t, math.pi)))
    assert abs(phi) == pytest.approx(math.pi)
    assert amp == 0.0


def test_stationary_phase_small_oscillation():
    t = np.linspace(0, 1000, 100001)
    phi, amp = stationary_phase(_series(t, math.pi + 0.05 * np.sin(t)))
    assert abs(wrap(phi - math.pi)) < 1e-3
    assert amp == pytest.approx(0.05, rel=1e-3)


def test_drifting_phase_not_synchronized():
    t = np.linspace(0, 1000, 10001)
    with pytest.raises(NotSynchronized) as info:
        stationary_phase(_series(t, 0.01 * t))
    assert info.value.drift > 0.2
    lock = phase_lock(_series(t, 0.01 * t))
    assert not lock.synchronized


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0, 0.15),
       st.floats(0.7, 3.0))
def test_phase_lock_recovers_offset(offset, amp, w):
    t = np.linspace(0, 500, 20001)
    lock = phase_lock(_series(t, offset + amp * np.sin(w * t)))
    assert lock.synchronized
    # a partial period in the 100-long window biases the mean by <= 2a/(w T)
    assert abs(wrap(lock.phi_stat - offset)) < 2 * amp / (w * 100) + 1e-6
    assert lock.phi_amp <= amp + 1e-12


def test_unwrap_removes_branch_cuts():
    t = np.arange(400) * 0.5
    phi1 = wrap(-t * 1.0)
    phi2 = wrap(-t * 0.99 + math.pi)
    states = np.zeros((len(t), 6))
    states[:, 0], states[:, 1] = np.cos(phi1), np.sin(phi1)
    states[:, 2], states[:, 3] = np.cos(phi2), np.sin(phi2)
    series = phase_difference(Trajectory(t=t, states=states))
    expected = -0.01 * t - math.pi
    np.testing.assert_allclose(wrap(series.dphi[0] - expected[0]), 0,
                               atol=1e-12)
    np.testing.assert_allclose(np.diff(series.dphi), np.diff(expected),
                               atol=1e-12)


def test_ambiguous_pi_step_rejected():
    t = np.array([0.0, 0.5, 1.0])
    states = np.zeros((3, 6))
    states[:, 0] = [1.0, -1.0, 1.0]
    states[:, 2] = 1.0
    with pytest.raises(UndersampledPhase):
        phase_difference(Trajectory(t=t, states=states))


def test_phase_difference_requires_limit_cycle():
    t = np.array([0.0, 0.5])
    states = np.zeros((2, 6))
    states[:, 0] = 1.0
    with pytest.raises(PhaseUndefined, match="membrane 2"):
        phase_difference(Trajectory(t=t, states=states))


def test_transient_time():
    t = np.linspace(0, 100, 101)
    d = np.where(t < 40, 1.0, math.pi)
    assert transient_time(_series(t, d), math.pi) == 40.0
    assert transient_time(_series(t, np.full_like(t, math.pi)),
                          math.pi) == 0.0


def test_undriven_system_not_synchronized():
    params = SystemParams.baseline(eta=500.0)
    traj = integrate(ClassicalState.seed(), params, IntegratorConfig())
    with pytest.raises(NotSynchronized):
        stationary_phase(phase_difference(traj))


def test_limit_cycle_closes(baseline_run):
    for j in (0, 1):
        amps = poincare_amplitudes(baseline_run, j)
        late = amps[int(0.8 * len(amps)):]
        assert len(late) > 100
        rel = np.abs(np.diff(late)) / late[1:]
        assert rel.max() < 1e-3


def test_stationary_amplitudes_differ(baseline_run):
    a1 = poincare_amplitudes(baseline_run, 0)[-1]
    a2 = poincare_amplitudes(baseline_run, 1)[-1]
    assert abs(a1 - a2) > 0.01 * max(a1, a2)


def test_intracavity_field_settles(baseline_run):
    n = baseline_run.photon_number
    late = n[int(0.8 * len(n)):]
    half = len(late) // 2
    assert late[:half].max() == pytest.approx(late[half:].max(), rel=1e-2)
    assert late[:half].mean() == pytest.approx(late[half:].mean(), rel=1e-2)
