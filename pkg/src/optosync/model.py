"""Domain types, parameter validation and thermal occupation.

All rates and frequencies are in units of the first mechanical frequency
omega_1, and time is in units of 1/omega_1. Kelvin only enters through
:func:`thermal_occupation`, which needs the absolute ``omega1_hz``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy.constants import hbar, k as k_B

from .errors import ParameterError

Pair = Tuple[float, float]

#: quadrature ordering of every 6x6 covariance matrix
CM_LABELS = ("dq1", "dp1", "dq2", "dp2", "dX", "dY")

MIN_QUALITY_FACTOR = 100.0


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, normalised to omega_1.

    ``omega`` is ``(1, omega_2/omega_1)``; ``eta`` is the real drive
    amplitude; ``omega1_hz`` is the absolute omega_1 used only to turn
    ``temp`` (Kelvin, per membrane bath) into phonon occupations.
    """

    delta: float = 1.0
    kappa: float = 0.05
    omega: Pair = (1.0, 0.999)
    gamma: Pair = (5e-6, 5e-6)
    g: Pair = (1e-5, 1e-5)
    eta: float = 3600.0
    omega1_hz: float = 1e7
    temp: Pair = (0.0, 0.0)

    def __post_init__(self):
        for name in ("omega", "gamma", "g", "temp"):
            value = getattr(self, name)
            if np.ndim(value) == 0:
                value = (value, value)
            value = tuple(float(v) for v in value)
            if len(value) != 2:
                raise ParameterError(f"{name} must have two entries")
            object.__setattr__(self, name, value)
        for name in ("delta", "kappa", "eta", "omega1_hz"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def baseline(cls, **overrides) -> "SystemParams":
        """Reference parameter set; ``domega`` sets omega_2 = 1 - domega."""
        domega = overrides.pop("domega", None)
        if domega is not None:
            overrides["omega"] = (1.0, 1.0 - domega)
        return cls(**overrides)

    def replace(self, **changes) -> "SystemParams":
        domega = changes.pop("domega", None)
        if domega is not None:
            changes["omega"] = (self.omega[0], self.omega[0] - domega)
        return replace(self, **changes)

    @property
    def domega(self) -> float:
        """Natural frequency separation (omega_1 - omega_2)/omega_1."""
        return self.omega[0] - self.omega[1]

    @property
    def quality_factors(self) -> Pair:
        return (self.omega[0] / self.gamma[0], self.omega[1] / self.gamma[1])

    @property
    def nbar(self) -> Pair:
        """Thermal phonon numbers of the two baths."""
        return tuple(thermal_occupation(w * self.omega1_hz, T)
                     for w, T in zip(self.omega, self.temp))

    def diffusion_diagonal(self) -> np.ndarray:
        n1, n2 = self.nbar
        g1, g2 = self.gamma
        return np.array([0.0, g1 * (2 * n1 + 1), 0.0, g2 * (2 * n2 + 1),
                         self.kappa, self.kappa])

    def as_array(self) -> np.ndarray:
        """Flat parameter vector consumed by the compiled right-hand sides."""
        d = self.diffusion_diagonal()
        return np.array([self.delta, self.kappa, self.omega[0], self.omega[1],
                         self.gamma[0], self.gamma[1], self.g[0], self.g[1],
                         self.eta, d[1], d[3]], dtype=np.float64)


def validate(params: SystemParams) -> SystemParams:
    """Check every invariant of ``params`` and return it unchanged.

    Raises :class:`ParameterError` naming the offending field. A quality
    factor below 100 only warns, since the white-noise bath model is then
    questionable but the equations remain well defined.
    """
    scalars = {"delta": params.delta, "kappa": params.kappa,
               "eta": params.eta, "omega1_hz": params.omega1_hz}
    for name, value in scalars.items():
        if not math.isfinite(value):
            raise ParameterError(f"{name} must be finite, got {value!r}")
    for name in ("omega", "gamma", "g", "temp"):
        for v in getattr(params, name):
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")

    if params.kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {params.kappa}")
    if any(w <= 0 for w in params.omega):
        raise ParameterError(f"omega must be positive, got {params.omega}")
    if any(gm <= 0 for gm in params.gamma):
        raise ParameterError(f"gamma must be positive, got {params.gamma}")
    if any(gj < 0 for gj in params.g):
        raise ParameterError(f"g must be non-negative, got {params.g}")
    if params.eta < 0:
        raise ParameterError(f"eta must be non-negative, got {params.eta}")
    if params.omega1_hz <= 0:
        raise ParameterError(
            f"omega1_hz must be positive, got {params.omega1_hz}")
    if any(T < 0 for T in params.temp):
        raise ParameterError(f"temp must be non-negative, got {params.temp}")

    for j, Q in enumerate(params.quality_factors, start=1):
        if Q < MIN_QUALITY_FACTOR:
            warnings.warn(f"membrane {j} quality factor {Q:.3g} < "
                          f"{MIN_QUALITY_FACTOR:g}; Brownian noise model "
                          "assumes Q >> 1", stacklevel=2)
    return params


def thermal_occupation(omega_hz: float, temp: float) -> float:
    """Bose-Einstein mean phonon number at angular frequency ``omega_hz``."""
    if not omega_hz > 0:
        raise ParameterError(f"omega_hz must be positive, got {omega_hz}")
    if temp < 0:
        raise ParameterError(f"temp must be non-negative, got {temp}")
    if temp == 0:
        return 0.0
    x = hbar * omega_hz / (k_B * temp)
    if x > 700.0:
        return math.exp(-x)
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class ClassicalState:
    """Mean-field phase-space point (q, p per membrane, cavity field)."""

    q: Pair = (0.0, 0.0)
    p: Pair = (0.0, 0.0)
    a_re: float = 0.0
    a_im: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "a_re", float(self.a_re))
        object.__setattr__(self, "a_im", float(self.a_im))
        if not np.all(np.isfinite(self.to_array())):
            raise ParameterError("classical state entries must be finite")

    @classmethod
    def seed(cls) -> "ClassicalState":
        """Default start: unit displacement of both membranes, empty cavity."""
        return cls(q=(1.0, 1.0), p=(0.0, 0.0))

    @classmethod
    def from_array(cls, y) -> "ClassicalState":
        y = np.asarray(y, dtype=float)
        return cls(q=(y[0], y[2]), p=(y[1], y[3]), a_re=y[4], a_im=y[5])

    def to_array(self) -> np.ndarray:
        return np.array([self.q[0], self.p[0], self.q[1], self.p[1],
                         self.a_re, self.a_im], dtype=np.float64)

    @property
    def a(self) -> complex:
        return complex(self.a_re, self.a_im)


def symplectic_form(n_modes: int) -> np.ndarray:
    """Omega for (q1, p1, q2, p2, ...) ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def physicality_margin(cov: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of V + i/2 Omega, batched over leading axes.

    Non-negative for every physical covariance matrix in the convention
    where the vacuum variance is 1/2.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[-1]
    omega = symplectic_form(n // 2)
    return np.linalg.eigvalsh(cov + 0.5j * omega)[..., 0]


def vacuum_cm(n: int = 6) -> np.ndarray:
    return 0.5 * np.eye(n)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: classical states and, optionally, covariances.

    ``states`` has shape (N, 6) in (q1, p1, q2, p2, Re a, Im a) order and
    ``cov`` shape (N, 6, 6).
    """

    t: np.ndarray
    states: np.ndarray
    cov: Optional[np.ndarray] = None
    n_accepted: int = 0
    n_rejected: int = 0
    physicality_margin: float = float("nan")

    def __post_init__(self):
        if len(self.states) != len(self.t):
            raise ValueError("states and t lengths differ")
        if self.cov is not None and len(self.cov) != len(self.t):
            raise ValueError("cov and t lengths differ")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> ClassicalState:
        return ClassicalState.from_array(self.states[k])

    @property
    def photon_number(self) -> np.ndarray:
        return self.states[:, 4] ** 2 + self.states[:, 5] ** 2


@dataclass(frozen=True)
class SyncMetrics:
    """Scalar synchronisation summary of one run."""

    phi_stat: float
    phi_amp: float
    var_avg: float = float("nan")
    discord_a_avg: float = float("nan")
    discord_b_avg: float = float("nan")
    e_max: float = float("nan")
    synchronized: bool = False
    drift: float = float("nan")
    window: Tuple[float, float] = field(default=(float("nan"), float("nan")))
