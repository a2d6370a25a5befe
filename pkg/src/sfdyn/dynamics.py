"""Time propagation of the coupled electron-nuclear system.

Electronic coefficients follow the modified equations of motion
da/dt = -S^-1 (iH + V_abs + B) a with the absorbing projector potential
rebuilt from the instantaneous (field-dressed) eigenframe at every accepted
step. Nuclei, when mobile, move classically on the Ehrenfest mean field with
finite-difference forces.

Two integrators are provided. The default propagates in the adiabatic frame
with an exponential midpoint rule: the stiff diagonal part exp(-(i eps + f) dt)
is applied exactly, which tolerates the ~1e4 hartree eigenvalues of the
tightest Gaussians at ordinary step sizes. The adaptive RK45 pair integrates
the same right-hand side explicitly; it is accurate but its stability limit
makes it practical only for mild spectra or as a cross-check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import absorber as ab
from . import integrals
from .adiabatic import solve_field_following

_log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# laser pulse

@dataclass(frozen=True)
class LaserPulse:
    """E(t) = e0 * f(t) * sin(omega t + phase) * polarization.

    Envelopes: sin2 rises and falls as sin^2(pi t / (2 T)) over (0, 2T);
    quasi_cw ramps over `turn_on` and stays at 1; cw_cycles ramps over
    `n_cycles` optical periods and stays at 1. Ramp shape for the cw kinds
    is sin^2 by default, switchable to linear.
    """

    e0: float
    omega: float
    phase: float = 0.0
    envelope: str = "sin2"
    half_duration: float = 0.0      # T for sin2; support is (0, 2T)
    turn_on: float = 0.0            # ramp window for quasi_cw
    n_cycles: float = 3.0           # ramp length for cw_cycles
    ramp: str = "sin2"
    polarization: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.envelope not in ("sin2", "quasi_cw", "cw_cycles"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if self.ramp not in ("sin2", "linear"):
            raise ValueError(f"unknown ramp {self.ramp!r}")
        if self.envelope == "sin2" and self.half_duration <= 0:
            raise ValueError("sin2 envelope needs half_duration > 0")
        p = np.linalg.norm(self.polarization)
        if abs(p - 1.0) > 1e-9:
            raise ValueError("polarization must be a unit vector")

    @property
    def ramp_window(self) -> float:
        if self.envelope == "quasi_cw":
            return self.turn_on
        return self.n_cycles * 2.0 * math.pi / self.omega

    @property
    def duration(self) -> float:
        """Support of the field; inf for the cw kinds."""
        return 2.0 * self.half_duration if self.envelope == "sin2" else math.inf

    def envelope_value(self, t: float) -> float:
        if self.envelope == "sin2":
            if t <= 0.0 or t >= 2.0 * self.half_duration:
                return 0.0
            s = math.sin(math.pi * t / (2.0 * self.half_duration))
            return s * s
        w = self.ramp_window
        if t <= 0.0:
            return 0.0
        if t >= w:
            return 1.0
        if self.ramp == "linear":
            return t / w
        s = math.sin(math.pi * t / (2.0 * w))
        return s * s

    def scalar(self, t: float) -> float:
        f = self.envelope_value(t)
        return 0.0 if f == 0.0 else self.e0 * f * math.sin(self.omega * t + self.phase)

    def field(self, t: float) -> np.ndarray:
        return self.scalar(t) * np.asarray(self.polarization)

    def scalar_dot(self, t: float) -> float:
        """d/dt of the scalar field, for the energy-balance diagnostics."""
        f = self.envelope_value(t)
        if self.envelope == "sin2":
            T2 = 2.0 * self.half_duration
            df = (math.pi / T2) * math.sin(2.0 * math.pi * t / T2) if 0.0 < t < T2 else 0.0
        else:
            w = self.ramp_window
            if 0.0 < t < w:
                df = (1.0 / w if self.ramp == "linear"
                      else (math.pi / (2.0 * w)) * math.sin(math.pi * t / w))
            else:
                df = 0.0
        s, c = math.sin(self.omega * t + self.phase), math.cos(self.omega * t + self.phase)
        return self.e0 * (df * s + f * self.omega * c)


# ---------------------------------------------------------------------------
# controls and records

@dataclass(frozen=True)
class StepControls:
    integrator: str = "expmid"      # expmid | rk45
    dt: float = 0.25                # expmid step
    rtol: float = 1e-8              # rk45 relative tolerance
    atol: float = 1e-10
    min_dt: float = 1e-9
    max_dt: float = 5.0

    def __post_init__(self):
        if self.integrator not in ("expmid", "rk45"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("step controls must be positive")


@dataclass
class TrajectoryRecord:
    """Time series of the propagation diagnostics. `norms` has one column per
    spatial orbital; `occ` electrons occupy each of them.
    """

    t: np.ndarray
    norms: np.ndarray
    energy: np.ndarray
    rdist: np.ndarray
    dnorm_dt: np.ndarray
    dabs: np.ndarray
    dipole: np.ndarray
    n_kept: np.ndarray
    occ: float = 1.0
    # final state, for chaining runs
    final_coeffs: np.ndarray | None = None
    final_r: float | None = None
    final_rdot: float | None = None

    @property
    def total_norm(self) -> np.ndarray:
        return self.occ * self.norms.sum(axis=1)

    def to_csv(self, path):
        cols = [self.t, *self.norms.T, self.energy, self.rdist,
                self.dnorm_dt, self.dabs, self.dipole, self.n_kept]
        names = (["t_au"] + [f"norm_{j}" for j in range(self.norms.shape[1])]
                 + ["energy_h", "r_bohr", "dnorm_dt", "delta_abs", "dipole", "n_kept"])
        header = f"occ = {self.occ}\n" + " ".join(names)
        np.savetxt(path, np.column_stack(cols), header=header, fmt="%.12e")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            occ = float(fh.readline().split("=")[1])
        data = np.loadtxt(path, skiprows=2, ndmin=2)
        n_orb = data.shape[1] - 7
        return cls(t=data[:, 0], norms=data[:, 1:1 + n_orb],
                   energy=data[:, 1 + n_orb], rdist=data[:, 2 + n_orb],
                   dnorm_dt=data[:, 3 + n_orb], dabs=data[:, 4 + n_orb],
                   dipole=data[:, 5 + n_orb], n_kept=data[:, 6 + n_orb], occ=occ)


# ---------------------------------------------------------------------------
# effective Hamiltonian

def build_heff(m: integrals.OneElectronMatrices, efield: np.ndarray) -> np.ndarray:
    """One-electron effective Hamiltonian in length gauge: T + V + E(t).D."""
    H = m.T + m.V
    for k in range(3):
        if efield[k] != 0.0:
            H = H + efield[k] * m.D[k]
    return H


def electronic_rhs(coeffs, H, vabs, B, frame):
    """da/dt = -S^-1 (iH + V_abs + B) a on the retained subspace."""
    w = 1j * (H @ coeffs)
    w += vabs @ coeffs
    if B is not None:
        w += B @ coeffs
    return -frame.apply_sinv(w)


# ---------------------------------------------------------------------------
# steppers

def _expm_apply(M, v, scale, tol=1e-15, kmax=30):
    """exp(scale * M) @ v by Taylor series; M is small in norm here."""
    w = v.copy()
    term = v.copy()
    for k in range(1, kmax + 1):
        term = (scale / k) * (M @ term)
        w += term
        if np.abs(term).max() <= tol * max(1.0, np.abs(w).max()):
            break
    return w

def expmid_step(coeffs, H_mid, S, spec, dt, B=None, lin_dep_threshold=None):
    """One exponential-midpoint step of length dt.

    Diagonalizes H_mid, applies exp(-(i eps_a + f_a) dt) exactly in the
    adiabatic frame, with the velocity coupling B in a symmetric split around
    it. Exact for a Hamiltonian that is constant over the step, whatever dt.
    Returns (new coefficients, frame, f vector).
    """
    kwargs = {} if lin_dep_threshold is None else {"lin_dep_threshold": lin_dep_threshold}
    frame = solve_field_following(H_mid, S, **kwargs)
    f = (ab.strengths(frame.energies, spec) if spec.enabled
         else np.zeros(frame.n_states))
    single = coeffs.ndim == 1
    a_loc = coeffs[None, :] if single else coeffs
    a_ad = frame.to_adiabatic(a_loc.T)                      # (M, n_orb)
    phase = np.exp(-(1j * frame.energies + f) * dt)[:, None]
    if B is not None:
        Bt = frame.U.conj() @ B @ frame.U.T
        a_ad = _expm_apply(Bt, a_ad, -0.5 * dt)
        a_ad = a_ad * phase
        a_ad = _expm_apply(Bt, a_ad, -0.5 * dt)
    else:
        a_ad = a_ad * phase
    out = frame.from_adiabatic(a_ad).T
    return (out[0] if single else out), frame, f


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def rk45_step(rhs, t, y, dt, rtol, atol):
    """One embedded Dormand-Prince attempt. Returns (y5, error_ratio, k1_next)."""
    k = [rhs(t, y)]
    for s in range(1, 7):
        ys = y + dt * sum(a * ki for a, ki in zip(_DP_A[s], k))
        k.append(rhs(t + _DP_C[s] * dt, ys))
    y5 = y + dt * sum(b * ki for b, ki in zip(_DP_B5, k) if b != 0.0)
    y4 = y + dt * sum(b * ki for b, ki in zip(_DP_B4, k) if b != 0.0)
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
    err = np.sqrt(np.mean((np.abs(y5 - y4) / scale) ** 2))
    return y5, err, k[-1]


# ---------------------------------------------------------------------------
# energies and forces

def _electronic_energy(coeffs, H, occ):
    c = np.atleast_2d(coeffs)
    return occ * float(sum(np.vdot(cj, H @ cj).real for cj in c))


def nuclear_laser_energy(charges, positions, efield):
    """Nuclei in the same length-gauge potential, opposite charge sign."""
    return -float(np.sum(charges * (positions @ efield)))


def total_energy(system, m, coeffs, efield, positions=None, e_twoel=0.0,
                 nuclear_kinetic=0.0):
    pos = system.positions if positions is None else positions
    H = build_heff(m, efield)
    return (_electronic_energy(coeffs, H, system.occ) + e_twoel
            + system.nuclear_repulsion(pos)
            + nuclear_laser_energy(system.charges, pos, efield)
            + nuclear_kinetic)


def _frozen_energy_parts(system, coeffs2d, pos, efield):
    """Per-orbital Rayleigh quotients and norms at a displaced geometry,
    plus the purely nuclear energy terms.
    """
    m = integrals.assemble_step(system.flat, pos, system.charges)
    H = build_heff(m, efield)
    quot = np.empty(len(coeffs2d))
    nrm = np.empty(len(coeffs2d))
    for j, cj in enumerate(coeffs2d):
        nrm[j] = np.vdot(cj, m.S @ cj).real
        quot[j] = np.vdot(cj, H @ cj).real / nrm[j]
    rest = (system.nuclear_repulsion(pos)
            + nuclear_laser_energy(system.charges, pos, efield))
    return quot, nrm, rest


def radial_force(system, axis, R, coeffs, efield, occ=None, delta=1e-3,
                 e_twoel_fn=None):
    """-dE/dR by central differences with frozen coefficients; the anchored
    basis functions move with their nuclei.

    The displaced overlap would let <c|H|c> drift even for a stationary
    state, so the electronic part differentiates the Rayleigh quotient
    <c|H|c>/<c|S|c> and weights it with the surviving norm.
    """
    occ = system.occ if occ is None else occ
    c = np.atleast_2d(coeffs)

    def terms(r):
        pos = np.array([axis * r / 2.0, -axis * r / 2.0])
        quot, nrm, rest = _frozen_energy_parts(system, c, pos, efield)
        if e_twoel_fn is not None:
            rest += e_twoel_fn(coeffs, pos)
        return quot, nrm, rest

    qp, num_p, ep = terms(R + delta)
    qm, num_m, em = terms(R - delta)
    nbar = 0.5 * (num_p + num_m)
    de = occ * float(nbar @ (qp - qm)) + (ep - em)
    return -de / (2.0 * delta)


def nuclear_force(system, positions, coeffs, efield, delta=1e-3):
    """Full per-nucleus finite-difference Ehrenfest force, (n_nuc, 3).
    Same norm-weighted Rayleigh quotient differences as radial_force.
    """
    c = np.atleast_2d(coeffs)
    out = np.zeros_like(positions)
    for A in range(len(positions)):
        for k in range(3):
            dp = positions.copy()
            dp[A, k] += delta
            dm = positions.copy()
            dm[A, k] -= delta
            qp, num_p, ep = _frozen_energy_parts(system, c, dp, efield)
            qm, num_m, em = _frozen_energy_parts(system, c, dm, efield)
            nbar = 0.5 * (num_p + num_m)
            de = system.occ * float(nbar @ (qp - qm)) + (ep - em)
            out[A, k] = -de / (2.0 * delta)
    return out


# ---------------------------------------------------------------------------
# propagation

def propagate(system, pulse, t_end, *, absorber_spec=None, controls=None,
              nuclei="fixed", initial=None, rdot0=0.0, tail=0.0,
              record_every=1, heff_builder=None, lin_dep_threshold=None):
    """Propagate from t = 0 to t_end (+ optional field-free tail).

    nuclei: "fixed" or "radial" (diatomic stretch with frozen center of mass).
    initial: starting coefficients (vector, or (n_orb, N) stack); ground state
    of the field-free Hamiltonian when omitted.
    heff_builder(m, efield, coeffs) overrides the one-electron Hamiltonian,
    used for the mean-field case; it must return (H, e_twoel).
    Returns a TrajectoryRecord.
    """
    spec = absorber_spec if absorber_spec is not None else ab.AbsorberSpec()
    ctl = controls if controls is not None else StepControls()
    if nuclei not in ("fixed", "radial"):
        raise ValueError(f"unknown nuclei mode {nuclei!r}")
    if nuclei == "radial" and len(system.positions) != 2:
        raise ValueError("radial mode needs a diatomic")
    if nuclei == "radial" and system.needs_fock:
        raise NotImplementedError("mean-field forces are not implemented; "
                                  "radial mode is for one-electron systems")

    pos0 = system.positions.copy()
    if nuclei == "radial":
        R = float(np.linalg.norm(pos0[0] - pos0[1]))
        axis = (pos0[0] - pos0[1]) / R
        cm = 0.5 * (pos0[0] + pos0[1])
        if np.linalg.norm(cm) > 1e-9:
            raise ValueError("radial mode expects the center of mass at the origin")
        mu = system.masses[0] * system.masses[1] / system.masses.sum()
        rdot = float(rdot0)
    else:
        R = float(np.linalg.norm(pos0[0] - pos0[1])) if len(pos0) == 2 else math.nan
        axis = None
        mu = 0.0
        rdot = 0.0

    def positions_at(r):
        if nuclei == "radial":
            return np.array([axis * r / 2.0, -axis * r / 2.0])
        return pos0

    def field_at(t):
        return pulse.field(t) if pulse is not None else np.zeros(3)

    m0 = integrals.assemble_step(system.flat, positions_at(R), system.charges)
    if heff_builder is None:
        def heff_builder(m, efield, coeffs):
            return build_heff(m, efield), 0.0

    if initial is None:
        from .systems import ground_state

        c0, _ = ground_state(system, matrices=m0)
        coeffs = c0.astype(complex)
    else:
        coeffs = np.asarray(initial, complex).copy()
    stacked = coeffs.ndim == 2
    pol = (np.asarray(pulse.polarization) if pulse is not None
           else np.array([0.0, 0.0, 1.0]))

    # recording buffers
    rec_t, rec_norm, rec_e, rec_r, rec_dn, rec_da, rec_dip, rec_kept = \
        [], [], [], [], [], [], [], []

    def record(t, m, frame, vabs, e_twoel, nuc_kin):
        c = np.atleast_2d(coeffs)
        norms = [float(np.vdot(cj, m.S @ cj).real) for cj in c]
        ef = field_at(t)
        H = heff_builder(m, ef, coeffs)[0]
        e = (_electronic_energy(coeffs, H, system.occ) + e_twoel
             + system.nuclear_repulsion(positions_at(R))
             + nuclear_laser_energy(system.charges, positions_at(R), ef)
             + nuc_kin)
        dn = system.occ * sum(ab.norm_decay_rate(cj, vabs) for cj in c)
        da = system.occ * sum(ab.energy_absorption_rate(cj, vabs, H, frame) for cj in c)
        dip = system.occ * float(sum(np.vdot(cj, (pol[0] * m.D[0] + pol[1] * m.D[1]
                                                  + pol[2] * m.D[2]) @ cj).real
                                     for cj in c))
        rec_t.append(t)
        rec_norm.append(norms)
        rec_e.append(e)
        rec_r.append(R)
        rec_dn.append(dn)
        rec_da.append(da)
        rec_dip.append(dip)
        rec_kept.append(frame.n_states)

    kwargs = {} if lin_dep_threshold is None else {"lin_dep_threshold": lin_dep_threshold}

    t = 0.0
    nsteps = 0
    if ctl.integrator == "expmid":
        dt = ctl.dt
        m = m0
        if nuclei == "radial":
            force = radial_force(system, axis, R, coeffs, field_at(0.0))
        H0, e20 = heff_builder(m, field_at(0.0), coeffs)
        fr0 = solve_field_following(H0, m.S, **kwargs)
        record(0.0, m, fr0, ab.build_vabs(fr0, spec), e20,
               0.5 * mu * rdot * rdot if nuclei == "radial" else 0.0)
        t_eps = 1e-10 * max(1.0, abs(t_end))
        while t_end - t > t_eps:
            h = min(dt, t_end - t)
            tm = t + 0.5 * h
            if nuclei == "radial":
                rdot_half = rdot + 0.5 * h * force / mu
                R_new = R + h * rdot_half
                R_mid = 0.5 * (R + R_new)
                vel = np.array([axis * rdot_half / 2.0, -axis * rdot_half / 2.0])
                m = integrals.assemble_step(system.flat, positions_at(R_mid),
                                            system.charges, velocities=vel)
                H, e_twoel = heff_builder(m, field_at(tm), coeffs)
                coeffs, frame, f = expmid_step(coeffs, H, m.S, spec, h, B=m.B,
                                               lin_dep_threshold=lin_dep_threshold)
                R = R_new
                force = radial_force(system, axis, R, coeffs, field_at(t + h))
                rdot = rdot_half + 0.5 * h * force / mu
            else:
                H, e_twoel = heff_builder(m, field_at(tm), coeffs)
                coeffs, frame, f = expmid_step(coeffs, H, m.S, spec, h,
                                               lin_dep_threshold=lin_dep_threshold)
            t += h
            nsteps += 1
            if nsteps % record_every == 0 or t_end - t <= t_eps:
                if nuclei == "radial":
                    m_rec = integrals.assemble_step(system.flat, positions_at(R),
                                                    system.charges)
                else:
                    m_rec = m
                Hr, e2r = heff_builder(m_rec, field_at(t), coeffs)
                fr = solve_field_following(Hr, m_rec.S, **kwargs)
                record(t, m_rec, fr, ab.build_vabs(fr, spec), e2r,
                       0.5 * mu * rdot * rdot if nuclei == "radial" else 0.0)
    else:
        if nuclei == "radial":
            raise NotImplementedError("rk45 supports fixed nuclei only; "
                                      "use the expmid integrator for mobile runs")
        m = m0
        dt = min(ctl.dt, ctl.max_dt)
        y = coeffs
        H0, e20 = heff_builder(m, field_at(0.0), coeffs)
        fr0 = solve_field_following(H0, m.S, **kwargs)
        record(0.0, m, fr0, ab.build_vabs(fr0, spec), e20, 0.0)
        t_eps = 1e-10 * max(1.0, abs(t_end))
        while t_end - t > t_eps:
            h = min(dt, t_end - t)
            # frame and absorber frozen over the attempted step
            H_t, e2t = heff_builder(m, field_at(t), y)
            frame = solve_field_following(H_t, m.S, **kwargs)
            vabs = ab.build_vabs(frame, spec)

            def rhs(tt, yy):
                H = heff_builder(m, field_at(tt), yy)[0]
                if stacked:
                    return np.stack([electronic_rhs(yj, H, vabs, None, frame)
                                     for yj in yy])
                return electronic_rhs(yy, H, vabs, None, frame)

            y5, err, _ = rk45_step(rhs, t, y, h, ctl.rtol, ctl.atol)
            if err <= 1.0:
                y = y5
                t += h
                nsteps += 1
                coeffs = y
                if nsteps % record_every == 0 or t_end - t <= t_eps:
                    record(t, m, frame, vabs, e2t, 0.0)
            dt = h * min(5.0, max(0.2, 0.9 * (err + 1e-300) ** -0.2))
            dt = min(dt, ctl.max_dt)
            if dt < ctl.min_dt:
                raise RuntimeError(
                    f"step size underflow at t={t:.3f} (dt={dt:.2e}); the "
                    "spectrum is too stiff for rk45, use expmid")

    if tail > 0.0:
        if pulse is not None and abs(pulse.envelope_value(t + 0.5 * tail)) > 0.0:
            raise ValueError("field-free tail requested while the pulse is on")
        if nuclei == "radial":
            raise ValueError("field-free tail fast-forward needs fixed nuclei")
        H, e_twoel = heff_builder(m, np.zeros(3), coeffs)
        coeffs, frame, f = expmid_step(coeffs, H, m.S, spec, tail,
                                       lin_dep_threshold=lin_dep_threshold)
        t += tail
        Hr, e2r = heff_builder(m, np.zeros(3), coeffs)
        fr = solve_field_following(Hr, m.S, **kwargs)
        record(t, m, fr, ab.build_vabs(fr, spec), e2r, 0.0)

    rec = TrajectoryRecord(
        t=np.asarray(rec_t), norms=np.asarray(rec_norm), energy=np.asarray(rec_e),
        rdist=np.asarray(rec_r), dnorm_dt=np.asarray(rec_dn),
        dabs=np.asarray(rec_da), dipole=np.asarray(rec_dip),
        n_kept=np.asarray(rec_kept, int), occ=system.occ,
        final_coeffs=coeffs, final_r=R if nuclei == "radial" else None,
        final_rdot=rdot if nuclei == "radial" else None,
    )
    return rec


# ---------------------------------------------------------------------------
# ground-state potential curve, vibrational levels, ensemble sampling

def ground_state_curve(r_values, *, aligned=True, angle_deg=0.0):
    """Total ground-state energy E(R) of the one-electron diatomic, including
    nuclear repulsion, on the given grid.
    """
    from . import systems

    r_values = np.asarray(r_values, float)
    sys0 = systems.h2plus(r_values[0], angle_deg=angle_deg, aligned=aligned)
    energies = np.empty(r_values.size)
    for i, r in enumerate(r_values):
        pos = systems.diatomic_positions(r, angle_deg)
        m = integrals.assemble_step(sys0.flat, pos, sys0.charges)
        frame = solve_field_following(m.T + m.V, m.S)
        energies[i] = frame.energies[0] + 1.0 / r
    return energies


class PotentialCurve:
    """Cubic-spline wrapper around sampled E(R) with well analysis helpers."""

    def __init__(self, r, e):
        from scipy.interpolate import CubicSpline

        self.r = np.asarray(r, float)
        self.e = np.asarray(e, float)
        self._spl = CubicSpline(self.r, self.e)
        i = int(np.argmin(self.e))
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(self._spl, bounds=(self.r[max(0, i - 1)],
                                                 self.r[min(len(self.r) - 1, i + 1)]),
                              method="bounded")
        self.r_min = float(res.x)
        self.e_min = float(res.fun)

    def __call__(self, r):
        return self._spl(r)

    def turning_points(self, energy):
        """Inner and outer classical turning points at the given energy."""
        from scipy.optimize import brentq

        if energy <= self.e_min:
            raise ValueError("energy below the well minimum")
        g = lambda r: self._spl(r) - energy
        r_in = brentq(g, self.r[0], self.r_min, xtol=1e-12)
        grid = np.linspace(self.r_min, self.r[-1], 2048)
        vals = g(grid)
        idx = np.nonzero(vals[:-1] * vals[1:] <= 0)[0]
        if idx.size == 0:
            raise ValueError("energy above the dissociation limit of the sampled curve")
        r_out = brentq(g, grid[idx[0]], grid[idx[0] + 1], xtol=1e-12)
        return r_in, r_out


def action_integral(curve, energy, mu, n_quad=96):
    """Radial action 2 * int sqrt(2 mu (E - V)) dR between the turning points.

    The square-root endpoint singularity is absorbed by the substitution
    R = mid + half * sin(theta).
    """
    r1, r2 = curve.turning_points(energy)
    mid, half = 0.5 * (r1 + r2), 0.5 * (r2 - r1)
    x, w = np.polynomial.legendre.leggauss(n_quad)
    th = 0.5 * math.pi * x
    r = mid + half * np.sin(th)
    v = np.maximum(energy - curve(r), 0.0)
    integrand = np.sqrt(2.0 * mu * v) * half * np.cos(th)
    return 2.0 * float(np.sum(w * integrand) * 0.5 * math.pi)


def bohr_sommerfeld_levels(curve, n_max, mu, n_quad=96):
    """Vibrational energies solving the half-integer quantization
    2 int p dR = (n + 1/2) 2 pi.
    """
    from scipy.optimize import brentq

    e_top = float(curve(curve.r[-1]))
    levels = []
    for n in range(n_max + 1):
        target = (n + 0.5) * 2.0 * math.pi

        def g(e):
            return action_integral(curve, e, mu, n_quad) - target

        lo = curve.e_min + 1e-10
        hi = e_top - 1e-9
        if g(hi) < 0:
            raise ValueError(f"level n={n} lies above the sampled well")
        levels.append(brentq(g, lo, hi, xtol=1e-13))
    return np.asarray(levels)


def sample_vibrational_ensemble(curve, energy, count, seed, mu):
    """Classical (R, Rdot) pairs at fixed total energy with spatial density
    proportional to 1/|p(R)| (time-weighted), signs of Rdot equiprobable.
    """
    rng = np.random.default_rng(seed)
    r1, r2 = curve.turning_points(energy)
    # time-weighted position distribution via inverse CDF on the smooth
    # substitution grid (the 1/p singularity integrates to a finite CDF)
    th = np.linspace(-0.5 * math.pi, 0.5 * math.pi, 4001)
    mid, half = 0.5 * (r1 + r2), 0.5 * (r2 - r1)
    r = mid + half * np.sin(th)
    p = np.sqrt(np.maximum(2.0 * mu * (energy - curve(r)), 0.0))
    w = np.where(p > 0, half * np.cos(th) / np.maximum(p, 1e-300), 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(th))])
    cdf /= cdf[-1]
    # one block of draws, two per trajectory, so a shorter run with the same
    # seed reproduces the head of a longer one
    u = rng.random((count, 2))
    rs = np.interp(u[:, 0], cdf, r)
    ps = np.sqrt(np.maximum(2.0 * mu * (energy - curve(rs)), 0.0))
    sign = np.where(u[:, 1] < 0.5, -1.0, 1.0)
    return [(float(ri), float(si * pi / mu)) for ri, si, pi in zip(rs, sign, ps)]
