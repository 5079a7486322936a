"""Two-mode Gaussian correlations of the mechanical subsystem.

Covariance matrices arrive in the vacuum-variance-1/2 convention. Discord
invariants are evaluated on sigma = 2V, where the vacuum has unit
symplectic eigenvalues; the logarithmic negativity -ln(2 nu~_-) is applied
to V directly. All functions broadcast over leading stack dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BranchRadicandNegative, DomainError, UnphysicalState
from .quantum import time_average

TOL = 1e-10
DISCORD_CLAMP = 1e-10


@dataclass(frozen=True)
class ReducedCM:
    """4x4 mechanical block [[V_A, V_C], [V_C^T, V_B]] (possibly stacked)."""

    matrix: np.ndarray

    @property
    def va(self):
        return self.matrix[..., 0:2, 0:2]

    @property
    def vb(self):
        return self.matrix[..., 2:4, 2:4]

    @property
    def vc(self):
        return self.matrix[..., 0:2, 2:4]

    def swapped(self) -> "ReducedCM":
        """Exchange the roles of modes A and B."""
        perm = [2, 3, 0, 1]
        return ReducedCM(self.matrix[..., perm, :][..., :, perm])


class SymplecticInvariants(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray


def reduce(cov) -> ReducedCM:
    """Drop the optical quadratures from a (stack of) 6x6 CM."""
    cov = np.asarray(cov, dtype=float)
    return ReducedCM(np.ascontiguousarray(cov[..., :4, :4]))


def invariants(r: ReducedCM) -> SymplecticInvariants:
    """det sigma_A, det sigma_B, det sigma_C, det sigma with sigma = 2V."""
    s = 2.0 * r.matrix
    return SymplecticInvariants(np.linalg.det(s[..., 0:2, 0:2]),
                                np.linalg.det(s[..., 2:4, 2:4]),
                                np.linalg.det(s[..., 0:2, 2:4]),
                                np.linalg.det(s))


def _eigen_pair(sigma_sum, det, what):
    disc = sigma_sum ** 2 - 4.0 * det
    scale = np.maximum(sigma_sum ** 2, 1.0)
    if np.any(disc < -TOL * scale):
        raise UnphysicalState(f"negative radicand in {what}: {np.min(disc):.3g}")
    root = np.sqrt(np.maximum(disc, 0.0))
    hi = (sigma_sum + root) / 2.0
    if np.any(det < -TOL * scale) or np.any(hi < 0):
        raise UnphysicalState(f"negative squared eigenvalue in {what}")
    # product of the squared eigenvalues is det; avoids cancellation in lo
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(hi > 0, np.maximum(det, 0.0) / hi, 0.0)
    return np.sqrt(hi), np.sqrt(lo)


def symplectic_eigenvalues(r: ReducedCM):
    """``(nu_plus, nu_minus)`` of sigma = 2V; both are 1 for the vacuum."""
    a, b, c, d = invariants(r)
    nu_p, nu_m = _eigen_pair(a + b + 2.0 * c, d, "symplectic spectrum")
    if np.any(nu_m < 1.0 - 1e-7):
        raise UnphysicalState(
            f"symplectic eigenvalue {np.min(nu_m):.12g} below 1")
    return nu_p, nu_m


def log_negativity(r: ReducedCM):
    """``(E, E_N)`` with E = -ln(2 nu~_-), E_N = max(0, E).

    nu~_- is the smaller symplectic eigenvalue of the partially transposed
    CM in the 1/2-vacuum convention, built from
    Sigma_- = det V_A + det V_B - 2 det V_C.
    """
    V = r.matrix
    sigma_minus = (np.linalg.det(V[..., 0:2, 0:2])
                   + np.linalg.det(V[..., 2:4, 2:4])
                   - 2.0 * np.linalg.det(V[..., 0:2, 2:4]))
    det = np.linalg.det(V)
    disc = sigma_minus ** 2 - 4.0 * det
    scale = np.maximum(sigma_minus ** 2, 1.0)
    if np.any(disc < -TOL * scale):
        raise UnphysicalState("negative radicand in partial-transpose spectrum")
    outer = sigma_minus + np.sqrt(np.maximum(disc, 0.0))
    if np.any(outer <= 0):
        raise UnphysicalState("non-positive partial-transpose spectrum")
    # nu~_-^2 = (Sigma - sqrt(.))/2 rewritten as 2 det / (Sigma + sqrt(.))
    nu_t = np.sqrt(2.0 * np.maximum(det, 0.0) / outer)
    with np.errstate(divide="ignore"):
        E = -np.log(2.0 * nu_t)
    return E, np.maximum(0.0, E)


def f_function(x, base: float = 10.0):
    """((x+1)/2) log((x+1)/2) - ((x-1)/2) log((x-1)/2), with f(1) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 1.0 - 1e-9):
        raise DomainError(f"f(x) requires x >= 1, got {np.min(x):.12g}")
    x = np.maximum(x, 1.0)
    up = (x + 1.0) / 2.0
    dn = (x - 1.0) / 2.0
    safe = np.where(dn > 0, dn, 1.0)
    near = up * np.log(up) - np.where(dn > 0, dn * np.log(safe), 0.0)
    # for large x use f = ln(dn) + up ln(1 + 1/dn), free of cancellation
    far = np.log(safe) + up * np.log1p(1.0 / safe)
    out = np.where(dn > 1.0, far, near) / math.log(base)
    return out if out.ndim else float(out)


def _min_conditional_det(a, b, c, d):
    """Minimum over Gaussian measurements on B of det of A's conditional CM."""
    c2 = c * c
    cond = (d - a * b) ** 2 <= (1.0 + b) * c2 * (a + d)
    # gamma = 0 means a product state; there eps = alpha exactly
    product = np.abs(c) <= TOL * np.sqrt(np.abs(a * b))
    bm1 = b - 1.0
    safe_bm1 = np.where(np.abs(bm1) > 1e-14, bm1, 1.0)

    rad1 = c2 + bm1 * (d - a)
    rad2 = c2 * c2 + (d - a * b) ** 2 - 2.0 * c2 * (d + a * b)
    scale = np.maximum(np.maximum(np.abs(d - a * b) ** 2, c2 * c2), 1.0)
    bad1 = cond & ~product & (rad1 < -TOL * np.maximum(c2, 1.0))
    bad2 = ~cond & ~product & (rad2 < -TOL * scale)
    if np.any(bad1 | bad2):
        raise BranchRadicandNegative(
            f"negative radicand in discord minimisation; invariants "
            f"alpha={np.ravel(a)[0]:.6g} beta={np.ravel(b)[0]:.6g} "
            f"gamma={np.ravel(c)[0]:.6g} delta={np.ravel(d)[0]:.6g}")
    eps1 = ((2.0 * c2 + bm1 * (d - a)
             + 2.0 * np.abs(c) * np.sqrt(np.maximum(rad1, 0.0)))
            / safe_bm1 ** 2)
    # (X - sqrt(R)) / 2b with X = ab - c^2 + d and X^2 - R = 4abd
    x = a * b - c2 + d
    eps2 = 2.0 * a * d / (x + np.sqrt(np.maximum(rad2, 0.0)))
    eps = np.where(cond & (np.abs(bm1) > 1e-14), eps1, eps2)
    return np.where(product, a, eps)


def gaussian_discord(r: ReducedCM, direction: str = "A",
                     base: float = 10.0):
    """Gaussian discord; ``direction="B"`` exchanges the roles of A and B.

    The A-discord uses the marginal entropy of mode B, following
    D = f(sqrt(beta)) - f(nu_-) - f(nu_+) + f(sqrt(eps)).
    """
    if direction not in ("A", "B"):
        raise ValueError("direction must be 'A' or 'B'")
    if direction == "B":
        r = r.swapped()
    nu_p, nu_m = symplectic_eigenvalues(r)
    a, b, c, d = invariants(r)
    eps = _min_conditional_det(a, b, c, d)
    if np.any(eps < 1.0 - 1e-7):
        raise UnphysicalState(f"conditional determinant {np.min(eps):.12g} < 1")
    D = (f_function(np.sqrt(b), base) - f_function(nu_m, base)
         - f_function(nu_p, base) + f_function(np.sqrt(np.maximum(eps, 1.0)),
                                               base))
    D = np.asarray(D)
    D = np.where((D < 0) & (D > -DISCORD_CLAMP), 0.0, D)
    return D if D.ndim else float(D)


def discord_time_average(t, values, transient_cut: float) -> float:
    """Trapezoidal time average of a discord series after ``transient_cut``."""
    return time_average(t, values, transient_cut)
