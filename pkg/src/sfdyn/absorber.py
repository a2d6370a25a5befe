"""Absorbing boundary as an imaginary projector potential onto the
instantaneous eigenstates: V_abs = sum_a f_a |chi_a><chi_a| with
f_a = 1/(2 tau_a). Bound states (eps <= 0) get infinite lifetime and are
never absorbed; continuum lifetimes fall smoothly to tau_min at e_ref.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adiabatic import AdiabaticFrame


@dataclass(frozen=True)
class AbsorberSpec:
    tau_min: float = 5.0
    e_ref: float = 0.3
    enabled: bool = True
    include_field: bool = True  # build the frame from the field-dressed H

    def __post_init__(self):
        if self.tau_min <= 0:
            raise ValueError("tau_min must be positive")
        if self.e_ref <= 0:
            raise ValueError("e_ref must be positive")


def lifetime(eps: float, spec: AbsorberSpec) -> float:
    """State lifetime tau(eps); inf for bound states."""
    if eps <= 0.0:
        return math.inf
    if eps >= spec.e_ref:
        return spec.tau_min
    return spec.tau_min / math.sin(eps * math.pi / (2.0 * spec.e_ref)) ** 2


def strength(eps: float, spec: AbsorberSpec) -> float:
    """f = 1/(2 tau)."""
    t = lifetime(eps, spec)
    return 0.0 if math.isinf(t) else 1.0 / (2.0 * t)


def strengths(eps: np.ndarray, spec: AbsorberSpec) -> np.ndarray:
    eps = np.asarray(eps, float)
    f = np.full(eps.shape, 1.0 / (2.0 * spec.tau_min))
    mid = (eps > 0.0) & (eps < spec.e_ref)
    f[mid] = np.sin(eps[mid] * math.pi / (2.0 * spec.e_ref)) ** 2 / (2.0 * spec.tau_min)
    f[eps <= 0.0] = 0.0
    return f


def build_vabs(frame: AdiabaticFrame, spec: AbsorberSpec) -> np.ndarray:
    """V_abs in the local basis: S U^T diag(f) U* S, restricted to states
    with f > 0. Hermitian positive semidefinite by construction.
    """
    n = frame.S.shape[0]
    if not spec.enabled:
        return np.zeros((n, n))
    f = strengths(frame.energies, spec)
    act = f > 0.0
    if not act.any():
        return np.zeros((n, n))
    Ua = frame.U[act]
    SU = frame.S @ Ua.T
    V = (SU * f[act]) @ SU.conj().T
    return 0.5 * (V + V.conj().T)


def norm_decay_rate(coeffs: np.ndarray, vabs: np.ndarray) -> float:
    """dN/dt = -2 a^dag V_abs a for one orbital; always <= 0."""
    return float(-2.0 * np.real(coeffs.conj() @ (vabs @ coeffs)))


def energy_absorption_rate(coeffs: np.ndarray, vabs: np.ndarray, H: np.ndarray,
                           frame: AdiabaticFrame) -> float:
    """Delta_abs = -a^dag (V S^-1 H + H S^-1 V) a; <= 0 when only positive
    energy states are damped. The two terms are conjugate for hermitian
    V and H, so only one contraction is needed.
    """
    ha = frame.apply_sinv(H @ coeffs)
    return float(-2.0 * np.real(coeffs.conj() @ (vabs @ ha)))
