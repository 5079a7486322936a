"""Mean-field dynamics: integration, limit-cycle phases and phase locking."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from . import _dopri
from .errors import (MaxStepsExceeded, NonFinite, NotSynchronized,
                     ParameterError, PhaseUndefined, StepSizeUnderflow,
                     UndersampledPhase, WindowTooShort)
from .model import ClassicalState, SystemParams, Trajectory, validate

N_MIN = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive-step settings. Times are in units of 1/omega_1.

    ``abs_tol=None`` scales the absolute tolerance with the cavity amplitude
    as ``rel_tol * max(1, eta/kappa)``. ``cov_abs_tol`` applies to the
    covariance entries when they are co-integrated.
    """

    rel_tol: float = 1e-9
    abs_tol: Optional[float] = None
    max_step: float = 0.1 * 2 * math.pi
    t_end: float = 3e4
    sample_dt: float = 0.5
    cov_abs_tol: float = 1e-10
    max_steps: int = 2_000_000_000

    def __post_init__(self):
        for name in ("rel_tol", "max_step", "t_end", "sample_dt",
                     "cov_abs_tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value}")
        if self.abs_tol is not None and not self.abs_tol > 0:
            raise ParameterError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.sample_dt > self.t_end:
            raise ParameterError("sample_dt must not exceed t_end")

    def replace(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)

    def resolved_abs_tol(self, params: SystemParams) -> float:
        if self.abs_tol is not None:
            return self.abs_tol
        return self.rel_tol * max(1.0, params.eta / params.kappa)


@njit(cache=True)
def _classical_rhs(t, y, par, out):
    delta, kappa = par[0], par[1]
    w1, w2, g1, g2 = par[2], par[3], par[4], par[5]
    G1, G2, eta = par[6], par[7], par[8]
    q1, p1, q2, p2, ar, ai = y[0], y[1], y[2], y[3], y[4], y[5]
    # effective detuning shifted by the membrane displacements
    det = delta - G1 * q1 - G2 * q2
    n = ar * ar + ai * ai
    out[0] = w1 * p1
    out[1] = -w1 * q1 - G1 * n - g1 * p1
    out[2] = w2 * p2
    out[3] = -w2 * q2 - G2 * n - g2 * p2
    out[4] = -kappa * ar - det * ai + eta
    out[5] = det * ar - kappa * ai


def derivatives(state: ClassicalState, params: SystemParams) -> np.ndarray:
    """Time derivative of the mean fields, ordered as ``state.to_array()``."""
    out = np.empty(6)
    _classical_rhs(0.0, state.to_array(), params.as_array(), out)
    return out


def check_sampling(params: SystemParams, sample_dt: float) -> None:
    limit = 0.25 * 2 * math.pi / max(params.omega)
    if sample_dt > limit:
        raise ParameterError(
            f"sample_dt={sample_dt} exceeds a quarter period ({limit:.4g}); "
            "phase unwrapping would be ambiguous")


def run_kernel(rhs, y0, par, atol, cfg: IntegratorConfig):
    """Call the compiled integrator and translate its status into errors."""
    status, out, n_acc, n_rej = _dopri.dopri5(
        rhs, np.ascontiguousarray(y0, dtype=np.float64), par,
        float(cfg.t_end), float(cfg.sample_dt), float(cfg.rel_tol),
        np.ascontiguousarray(atol, dtype=np.float64), float(cfg.max_step),
        int(cfg.max_steps))
    if status == _dopri.STEP_UNDERFLOW:
        raise StepSizeUnderflow(
            f"step size underflow after {n_acc} steps (stiffness or blow-up)")
    if status == _dopri.NON_FINITE:
        raise NonFinite(f"state left the finite range after {n_acc} steps")
    if status == _dopri.MAX_STEPS:
        raise MaxStepsExceeded(f"more than {cfg.max_steps} steps requested")
    t = np.arange(out.shape[0]) * cfg.sample_dt
    return t, out, n_acc, n_rej


def integrate(init: ClassicalState, params: SystemParams,
              cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate the mean-field equations from ``t=0`` to ``cfg.t_end``."""
    validate(params)
    check_sampling(params, cfg.sample_dt)
    atol = np.full(6, cfg.resolved_abs_tol(params))
    t, out, n_acc, n_rej = run_kernel(_classical_rhs, init.to_array(),
                                      params.as_array(), atol, cfg)
    return Trajectory(t=t, states=out, n_accepted=n_acc, n_rejected=n_rej)


def phases(states: np.ndarray):
    """Vectorised ``(phi1, phi2, n1, n2)`` for an (N, 6) state array.

    Uses b_j = (q_j + i p_j)/sqrt(2) = sqrt(n_j) exp(i phi_j). Because
    q_dot = omega p and p_dot = -omega q, this phase decreases at rate
    omega_j on a free orbit.
    """
    states = np.asarray(states, dtype=float)
    q1, p1, q2, p2 = (states[..., i] for i in range(4))
    return (np.arctan2(p1, q1), np.arctan2(p2, q2),
            0.5 * (q1 ** 2 + p1 ** 2), 0.5 * (q2 ** 2 + p2 ** 2))


def instantaneous_phase(state: ClassicalState, n_min: float = N_MIN):
    """Phases and actions ``(phi1, phi2, n1, n2)`` of a single state."""
    phi1, phi2, n1, n2 = (float(v) for v in phases(state.to_array()))
    for j, n in ((1, n1), (2, n2)):
        if n < n_min:
            raise PhaseUndefined(f"membrane {j} action {n:.3g} < {n_min:g}")
    # atan2 returns -pi on the negative axis when p == -0.0
    phi1 = math.pi if phi1 == -math.pi else phi1
    phi2 = math.pi if phi2 == -math.pi else phi2
    return phi1, phi2, n1, n2


@dataclass(frozen=True)
class PhaseSeries:
    t: np.ndarray
    dphi: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not all(len(a) == n for a in (self.dphi, self.n1, self.n2,
                                          self.phi1, self.phi2)):
            raise ValueError("phase series arrays differ in length")

    def __len__(self):
        return len(self.t)


def wrap(x):
    """Map angles to [-pi, pi)."""
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def phase_difference(traj: Trajectory, n_min: float = N_MIN,
                     jump_tol: float = 1e-6) -> PhaseSeries:
    """Unwrapped phase difference phi_1 - phi_2 along ``traj``."""
    phi1, phi2, n1, n2 = phases(traj.states)
    for j, n in ((1, n1), (2, n2)):
        low = np.flatnonzero(n < n_min)
        if low.size:
            raise PhaseUndefined(
                f"membrane {j} action below {n_min:g} at t={traj.t[low[0]]:g}")
    raw = phi1 - phi2
    steps = wrap(np.diff(raw))
    ambiguous = np.flatnonzero(np.abs(np.abs(steps) - np.pi) < jump_tol)
    if ambiguous.size:
        raise UndersampledPhase(
            f"phase step of pi at t={traj.t[ambiguous[0]]:g}; "
            "reduce sample_dt")
    dphi = np.concatenate(([wrap(raw[0])], wrap(raw[0]) + np.cumsum(steps)))
    return PhaseSeries(t=traj.t, dphi=dphi, n1=n1, n2=n2, phi1=phi1,
                       phi2=phi2)


class PhaseLock(NamedTuple):
    phi_stat: float
    phi_amp: float
    drift: float
    synchronized: bool
    window: tuple


def _window(t: np.ndarray, window_fraction: float):
    if not 0 < window_fraction <= 1:
        raise ParameterError("window_fraction must lie in (0, 1]")
    t0 = t[-1] - window_fraction * (t[-1] - t[0])
    sel = t >= t0 - 1e-9 * max(1.0, abs(t0))
    if sel.sum() < 3:
        raise WindowTooShort("fewer than 3 samples in the stationary window")
    return sel


def phase_lock(series: PhaseSeries, window_fraction: float = 0.2,
               threshold: float = 0.2) -> PhaseLock:
    """Stationary phase difference without raising on a failed lock.

    The run counts as synchronised when both the half peak-to-peak
    excursion and the linear drift across the final window stay below
    ``threshold`` (radians).
    """
    sel = _window(series.t, window_fraction)
    t = series.t[sel]
    d = series.dphi[sel]
    phi_stat = float(np.angle(np.mean(np.exp(1j * d))))
    phi_amp = float(0.5 * (d.max() - d.min()))
    slope = np.polyfit(t - t[0], d, 1)[0]
    drift = float(abs(slope) * (t[-1] - t[0]))
    sync = phi_amp < threshold and drift < threshold
    return PhaseLock(phi_stat, phi_amp, drift, bool(sync),
                     (float(t[0]), float(t[-1])))


def stationary_phase(series: PhaseSeries, window_fraction: float = 0.2,
                     threshold: float = 0.2):
    """Return ``(phi_stat, phi_amp)``; raise :class:`NotSynchronized` if the
    final window does not show a locked phase difference."""
    lock = phase_lock(series, window_fraction, threshold)
    if not lock.synchronized:
        raise NotSynchronized(
            f"phase difference not locked: excursion {lock.phi_amp:.3g} rad, "
            f"drift {lock.drift:.3g} rad over window {lock.window}",
            lock.phi_stat, lock.phi_amp, lock.drift)
    return lock.phi_stat, lock.phi_amp


def transient_time(series: PhaseSeries, phi_stat: float,
                   tol: float = 0.2) -> float:
    """First time after which Delta phi stays within ``tol`` of ``phi_stat``."""
    off = np.abs(wrap(series.dphi - phi_stat)) >= tol
    idx = np.flatnonzero(off)
    if idx.size == 0:
        return float(series.t[0])
    if idx[-1] == len(series.t) - 1:
        return float("inf")
    return float(series.t[idx[-1] + 1])


def poincare_amplitudes(traj: Trajectory, j: int) -> np.ndarray:
    """Momentum at upward crossings of q_j = 0 (section q_j = 0, p_j > 0).

    On the section |p_j| equals the orbit radius sqrt(q_j^2 + p_j^2), which
    varies slowly along the orbit, so the radius rather than p_j itself
    (stationary there) is interpolated between the bracketing samples.
    """
    q = traj.states[:, 2 * j]
    p = traj.states[:, 2 * j + 1]
    r = np.hypot(q, p)
    k = np.flatnonzero((q[:-1] < 0) & (q[1:] >= 0) & (p[:-1] > 0))
    frac = -q[k] / (q[k + 1] - q[k])
    return r[k] + frac * (r[k + 1] - r[k])
