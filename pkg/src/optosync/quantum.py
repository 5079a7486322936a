"""Linearised fluctuation dynamics around the classical limit cycle.

The covariance matrix V of (dq1, dp1, dq2, dp2, dX, dY) obeys
dV/dt = A(t) V + V A(t)^T + D, with A evaluated on the concurrently
integrated mean fields. The 6 classical and 21 independent CM entries are
advanced as one 27-dimensional system by the same adaptive controller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .classical import (N_MIN, IntegratorConfig, _classical_rhs,
                        check_sampling, phases, run_kernel)
from .errors import ParameterError, PhaseUndefined, PhysicalityLost, WindowTooShort
from .model import (ClassicalState, SystemParams, Trajectory,
                    physicality_margin, validate)

N_CM = 21
IU = np.triu_indices(6)
VAR_FLOOR = 1e-12
PHYSICALITY_RTOL = 1e-6
MIN_AVERAGE_SAMPLES = 100


def pack_cm(cov: np.ndarray) -> np.ndarray:
    """Upper triangle (row-major) of a symmetric 6x6 matrix."""
    cov = np.asarray(cov, dtype=float)
    return cov[..., IU[0], IU[1]]


def unpack_cm(flat: np.ndarray) -> np.ndarray:
    flat = np.asarray(flat, dtype=float)
    out = np.zeros(flat.shape[:-1] + (6, 6))
    out[..., IU[0], IU[1]] = flat
    out[..., IU[1], IU[0]] = flat
    return out


@njit(cache=True)
def _fill_drift(y, par, A):
    delta, kappa = par[0], par[1]
    w1, w2, g1, g2 = par[2], par[3], par[4], par[5]
    G1, G2 = par[6], par[7]
    s2 = np.sqrt(2.0)
    A1 = -G1 * s2 * y[4]
    B1 = -G1 * s2 * y[5]
    A2 = -G2 * s2 * y[4]
    B2 = -G2 * s2 * y[5]
    C = -delta + G1 * y[0] + G2 * y[2]
    for i in range(6):
        for j in range(6):
            A[i, j] = 0.0
    A[0, 1] = w1
    A[1, 0] = -w1
    A[1, 1] = -g1
    A[1, 4] = A1
    A[1, 5] = B1
    A[2, 3] = w2
    A[3, 2] = -w2
    A[3, 3] = -g2
    A[3, 4] = A2
    A[3, 5] = B2
    A[4, 0] = -B1
    A[4, 2] = -B2
    A[4, 4] = -kappa
    A[4, 5] = C
    A[5, 0] = A1
    A[5, 2] = A2
    A[5, 4] = -C
    A[5, 5] = -kappa


@njit(cache=True)
def _cm_rhs(t, y, par, out):
    # par[9], par[10]: mechanical diffusion; par[11] != 0 freezes the
    # classical state so that A is constant
    if par[11] != 0.0:
        for i in range(6):
            out[i] = 0.0
    else:
        _classical_rhs(t, y, par, out)
    A = np.empty((6, 6))
    _fill_drift(y, par, A)
    V = np.empty((6, 6))
    k = 6
    for i in range(6):
        for j in range(i, 6):
            V[i, j] = y[k]
            V[j, i] = y[k]
            k += 1
    M = A @ V
    k = 6
    for i in range(6):
        for j in range(i, 6):
            out[k] = M[i, j] + M[j, i]
            k += 1
    # D = diag(0, D1, 0, D3, kappa, kappa) in packed positions
    out[6 + 6] += par[9]
    out[6 + 15] += par[10]
    out[6 + 18] += par[1]
    out[6 + 20] += par[1]


def drift_matrix(state: ClassicalState, params: SystemParams) -> np.ndarray:
    """6x6 drift matrix of the fluctuations at the given mean-field point."""
    A = np.empty((6, 6))
    _fill_drift(state.to_array(), params.as_array(), A)
    return A


def diffusion_matrix(params: SystemParams) -> np.ndarray:
    return np.diag(params.diffusion_diagonal())


def initial_cm(params: SystemParams) -> np.ndarray:
    """Thermal membranes and optical vacuum (vacuum variance 1/2)."""
    n1, n2 = params.nbar
    return np.diag([n1 + 0.5, n1 + 0.5, n2 + 0.5, n2 + 0.5, 0.5, 0.5])


def propagate_cm(init_cm: np.ndarray, classical_init: ClassicalState,
                 params: SystemParams,
                 cfg: IntegratorConfig = IntegratorConfig(),
                 frozen: bool = False,
                 check_physicality: bool = True) -> Trajectory:
    """Co-integrate mean fields and covariance matrix.

    With ``frozen=True`` the classical state is held at ``classical_init``
    and only V evolves under the constant drift matrix.

    Raises :class:`PhysicalityLost` if at any sample the smallest
    eigenvalue of V + i/2 Omega falls below ``-1e-6 * ||V||``.
    """
    validate(params)
    check_sampling(params, cfg.sample_dt)
    init_cm = np.asarray(init_cm, dtype=float)
    if init_cm.shape != (6, 6):
        raise ParameterError("init_cm must be 6x6")
    if not np.allclose(init_cm, init_cm.T, rtol=0, atol=1e-12):
        raise ParameterError("init_cm must be symmetric")
    y0 = np.concatenate((classical_init.to_array(), pack_cm(init_cm)))
    par = np.concatenate((params.as_array(), [1.0 if frozen else 0.0]))
    atol = np.concatenate((np.full(6, cfg.resolved_abs_tol(params)),
                           np.full(N_CM, cfg.cov_abs_tol)))
    t, out, n_acc, n_rej = run_kernel(_cm_rhs, y0, par, atol, cfg)
    cov = unpack_cm(out[:, 6:])
    margin = np.nan
    if check_physicality:
        margins = physicality_margin(cov)
        scale = np.abs(cov).max(axis=(1, 2))
        bad = np.flatnonzero(margins < -PHYSICALITY_RTOL * scale)
        if bad.size:
            k = bad[0]
            raise PhysicalityLost(
                f"V + i/2 Omega has eigenvalue {margins[k]:.3g} at "
                f"t={t[k]:g} (|V| = {scale[k]:.3g}); tighten tolerances")
        margin = float(margins.min())
    return Trajectory(t=t, states=np.ascontiguousarray(out[:, :6]), cov=cov,
                      n_accepted=n_acc, n_rejected=n_rej,
                      physicality_margin=margin)


def rotated_momentum_moments(cov, phi1, phi2):
    """Second moments (P11, P22, P12) of the rotated momenta
    dp_phi_j = -sin(phi_j) dq_j + cos(phi_j) dp_j."""
    cov = np.asarray(cov, dtype=float)
    s1, c1 = np.sin(phi1), np.cos(phi1)
    s2, c2 = np.sin(phi2), np.cos(phi2)
    V = lambda i, j: cov[..., i, j]  # noqa: E731
    p11 = s1 * s1 * V(0, 0) - 2 * s1 * c1 * V(0, 1) + c1 * c1 * V(1, 1)
    p22 = s2 * s2 * V(2, 2) - 2 * s2 * c2 * V(2, 3) + c2 * c2 * V(3, 3)
    p12 = (s1 * s2 * V(0, 2) - s1 * c2 * V(0, 3) - c1 * s2 * V(1, 2)
           + c1 * c2 * V(1, 3))
    return p11, p22, p12


def phase_diff_variance(cov, phi1, phi2, n1, n2, n_min: float = N_MIN,
                        clamp: bool = True):
    """Variance of dphi_1 - dphi_2 = dp_phi1/sqrt(2 n1) - dp_phi2/sqrt(2 n2).

    Works elementwise on stacks of covariance matrices. Values below
    1e-12 are set to zero when ``clamp`` is true.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    if np.any(n1 < n_min) or np.any(n2 < n_min):
        raise PhaseUndefined(f"oscillator action below {n_min:g}")
    p11, p22, p12 = rotated_momentum_moments(cov, phi1, phi2)
    var = p11 / (2 * n1) + p22 / (2 * n2) - p12 / np.sqrt(n1 * n2)
    if clamp:
        var = np.where(var < VAR_FLOOR, 0.0, var)
    return var


@dataclass(frozen=True)
class PhaseVarianceSeries:
    t: np.ndarray
    var: np.ndarray
    p11: np.ndarray
    p22: np.ndarray
    p12: np.ndarray
    raw_min: float
    n_clamped: int

    def __len__(self):
        return len(self.t)


def phase_variance_series(traj: Trajectory,
                          n_min: float = N_MIN) -> PhaseVarianceSeries:
    """Phase-difference variance at every sample of a propagated run."""
    if traj.cov is None:
        raise ParameterError("trajectory carries no covariance samples")
    phi1, phi2, n1, n2 = phases(traj.states)
    raw = phase_diff_variance(traj.cov, phi1, phi2, n1, n2, n_min,
                              clamp=False)
    p11, p22, p12 = rotated_momentum_moments(traj.cov, phi1, phi2)
    low = raw < VAR_FLOOR
    var = np.where(low, 0.0, raw)
    return PhaseVarianceSeries(t=traj.t, var=var, p11=p11, p22=p22, p12=p12,
                               raw_min=float(raw.min()),
                               n_clamped=int(low.sum()))


def time_average(t, values, transient_cut: float) -> float:
    """Trapezoidal mean of ``values`` over ``[transient_cut, t[-1]]``."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = t >= transient_cut
    if sel.sum() < MIN_AVERAGE_SAMPLES:
        raise WindowTooShort(
            f"only {sel.sum()} samples after t={transient_cut:g}; "
            f"need {MIN_AVERAGE_SAMPLES}")
    ts = t[sel]
    return float(np.trapezoid(values[sel], ts) / (ts[-1] - ts[0]))
