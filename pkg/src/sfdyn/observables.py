"""Probabilities and rates derived from propagation records: ionization,
fragmentation/dissociation, single vs double ionization, orientation fits,
logarithmic decay rates and trajectory-ensemble averages.

Conventions: the surviving norm of a closed-shell record is the product
N1*N2 of the per-spin norms (independent-particle counting), and every
probability defined from it is per trajectory; ensemble quantities average
those over the initial-condition sample.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import rate_au_to_per_second

PLATEAU_DNDT = 1e-8


def channel_norms(record) -> np.ndarray:
    """Per-spin single-particle norms, (nt, n_channels).

    Each occupied spatial orbital contributes one channel per electron it
    carries, so a closed-shell record with one doubly occupied orbital
    yields two identical columns.
    """
    per_orbital = int(round(record.occ))
    return np.repeat(record.norms, per_orbital, axis=1)


def total_survival(record) -> np.ndarray:
    """N(t): product of the per-spin channel norms."""
    return np.prod(channel_norms(record), axis=1)


def _index_at(record, t_final):
    if t_final is None:
        return len(record.t) - 1
    idx = int(np.searchsorted(record.t, t_final - 1e-9))
    if idx >= len(record.t):
        idx = len(record.t) - 1
    return idx


def ionization_probability(record, t_final=None) -> float:
    """P_ion = 1 - N(t_final), not clamped.

    t_final = None reads the end of the record. Warns when the norm is
    still draining there (|dN/dt| above 1e-8), i.e. the caller did not
    leave enough field-free plateau after the pulse.
    """
    idx = _index_at(record, t_final)
    if abs(record.dnorm_dt[idx]) > PLATEAU_DNDT:
        warnings.warn(
            f"norm still changing at t={record.t[idx]:.1f} "
            f"(dN/dt={record.dnorm_dt[idx]:.2e}); ionization probability "
            "read off a non-plateau", stacklevel=2)
    return float(1.0 - total_survival(record)[idx])


def single_double(n1, n2):
    """Single and double ionization from the two per-spin norms.

    P_single = (1-N1) N2 + N1 (1-N2), P_double = (1-N1)(1-N2); together
    with the survival N1 N2 they partition unity.
    """
    n1 = np.asarray(n1, float)
    n2 = np.asarray(n2, float)
    p_single = (1.0 - n1) * n2 + n1 * (1.0 - n2)
    p_double = (1.0 - n1) * (1.0 - n2)
    return p_single, p_double


def fragmentation_dissociation(record, r_d: float = 9.5):
    """Step-function fragmentation on R(t) >= R_D and the dissociation
    probability P_diss = (1 - P_ion) P_frag = N P_frag.
    """
    p_frag = (record.rdist >= r_d).astype(float)
    p_diss = total_survival(record) * p_frag
    return p_frag, p_diss


def positive_energy_population(system, coeffs, lin_dep_threshold=None) -> float:
    """Continuum population by the direct definition: weight of the
    field-free adiabatic states with positive energy. Sums over a stack of
    orbitals; per-spin (not multiplied by occupation).
    """
    from .adiabatic import solve_field_following

    m = system.matrices()
    kwargs = {}
    if lin_dep_threshold is not None:
        kwargs["lin_dep_threshold"] = lin_dep_threshold
    frame = solve_field_following(m.T + m.V, m.S, **kwargs)
    c = np.atleast_2d(np.asarray(coeffs))
    total = 0.0
    for cj in c:
        a = frame.to_adiabatic(cj)
        total += float(np.sum(np.abs(a[frame.energies > 0.0]) ** 2))
    return total


# ---------------------------------------------------------------------------
# orientation fit

def cos2_fit(angles_deg, values):
    """Least-squares fit of P(Theta) = P_par cos^2 + P_perp sin^2.

    Returns (p_par, p_perp, rms_residual). Uniform weights on the given
    angle grid.
    """
    th = np.radians(np.asarray(angles_deg, float))
    y = np.asarray(values, float)
    if th.size != y.size or th.size < 2:
        raise ValueError("need matching angle/value arrays with >= 2 points")
    A = np.stack([np.cos(th) ** 2, np.sin(th) ** 2], axis=1)
    p, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ p - y) ** 2)))
    return float(p[0]), float(p[1]), res


def cos2_fit_errors(angles_deg, sigma):
    """1-sigma parameter errors of cos2_fit for i.i.d. noise of size sigma."""
    th = np.radians(np.asarray(angles_deg, float))
    A = np.stack([np.cos(th) ** 2, np.sin(th) ** 2], axis=1)
    cov = sigma ** 2 * np.linalg.inv(A.T @ A)
    return float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))


# ---------------------------------------------------------------------------
# decay rates

@dataclass(frozen=True)
class RateFit:
    gamma_au: float        # 1/a.u. of time
    gamma_per_s: float
    window: tuple
    n_points: int


def rate_fit(record, window=None, pulse=None, channel=None) -> RateFit:
    """Ionization rate from the logarithmic norm decrease, ln N = -Gamma t.

    window: (t0, t1) in a.u.; when omitted and a pulse is given, the fit
    starts after the ramp plus two optical cycles (skipping the turn-on
    transient) and runs to the end of the record.
    channel: orbital column index for a per-orbital rate; None fits the
    total norm, so a closed-shell record yields Gamma = Gamma_1 + Gamma_2.
    """
    if window is None:
        t0 = 0.0
        if pulse is not None:
            t0 = pulse.ramp_window + 2.0 * 2.0 * np.pi / pulse.omega
        window = (t0, float(record.t[-1]))
    t0, t1 = window
    mask = (record.t >= t0) & (record.t <= t1)
    if mask.sum() < 2:
        raise ValueError(f"rate window [{t0}, {t1}] covers fewer than 2 samples")
    n = (total_survival(record) if channel is None
         else record.norms[:, channel])[mask]
    if np.any(n <= 0.0):
        raise ValueError("norm hit zero inside the rate window")
    slope = np.polyfit(record.t[mask], np.log(n), 1)[0]
    gamma = -float(slope)
    return RateFit(gamma_au=gamma, gamma_per_s=rate_au_to_per_second(gamma),
                   window=(float(t0), float(t1)), n_points=int(mask.sum()))


# ---------------------------------------------------------------------------
# ensembles

def ensemble_average(results, quantity=None):
    """Mean and jackknife standard error of a per-trajectory quantity.

    results: sequence of scalars, or of records/objects combined with
    quantity (a callable, or an attribute/key name).
    """
    if quantity is None:
        x = np.asarray(list(results), float)
    elif callable(quantity):
        x = np.asarray([quantity(r) for r in results], float)
    else:
        x = np.asarray([getattr(r, quantity) if hasattr(r, quantity)
                        else r[quantity] for r in results], float)
    n = x.size
    if n == 0:
        raise ValueError("empty ensemble")
    mean = float(x.mean())
    if n == 1:
        return mean, 0.0
    # jackknife over leave-one-out means; for the plain mean this equals
    # the usual s/sqrt(n) but stays correct if the estimator changes
    loo = (x.sum() - x) / (n - 1)
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return mean, se


@dataclass
class EnsembleResult:
    """Trajectory ensemble with time-resolved averaged probabilities."""

    t: np.ndarray
    p_ion: np.ndarray
    p_ion_se: np.ndarray
    p_frag: np.ndarray
    p_diss: np.ndarray
    p_diss_se: np.ndarray
    n_traj: int
    records: list = field(default_factory=list, repr=False)


def ensemble_probabilities(records, r_d: float = 9.5,
                           keep_records: bool = True) -> EnsembleResult:
    """Average P_ion(t), P_frag(t), P_diss(t) over trajectories sharing one
    time grid.
    """
    if not records:
        raise ValueError("empty ensemble")
    t = records[0].t
    for r in records[1:]:
        if r.t.shape != t.shape or not np.allclose(r.t, t):
            raise ValueError("trajectories do not share a time grid")
    pion = np.stack([1.0 - total_survival(r) for r in records])
    both = [fragmentation_dissociation(r, r_d) for r in records]
    pfrag = np.stack([b[0] for b in both])
    pdiss = np.stack([b[1] for b in both])
    n = len(records)
    sem = (lambda a: a.std(axis=0, ddof=1) / np.sqrt(n)) if n > 1 \
        else (lambda a: np.zeros(a.shape[1]))
    return EnsembleResult(
        t=t, p_ion=pion.mean(axis=0), p_ion_se=sem(pion),
        p_frag=pfrag.mean(axis=0),
        p_diss=pdiss.mean(axis=0), p_diss_se=sem(pdiss),
        n_traj=n, records=list(records) if keep_records else [])
