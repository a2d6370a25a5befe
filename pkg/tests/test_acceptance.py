"""End-to-end acceptance suite: ten headline physics checks.

Each numbered test computes one result from scratch and prints a single
`ACCEPTANCE <n> [PASS|FAIL]` line (visible with -s or -rA). The slow marks
flag the runs that take minutes; the whole module is a few tens of minutes
on one core.
"""

import logging
import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from sfdyn import absorber as ab
from sfdyn import dynamics as dyn
from sfdyn import meanfield as mf
from sfdyn import observables as obs
from sfdyn import systems
from sfdyn.absorber import AbsorberSpec, build_vabs
from sfdyn.adiabatic import solve_field_following
from sfdyn.constants import (AU_TO_FS, FS_TO_AU, PROTON_MASS_AU,
                             field_amplitude, omega_from_wavelength)

pytestmark = pytest.mark.acceptance

MU_H2 = PROTON_MASS_AU / 2.0


def verdict(num, label, ok, detail):
    mark = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:2d} [{mark}] {label}: {detail}", flush=True)
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def h2plus_curve():
    r = np.arange(0.8, 14.0 + 0.025, 0.05)
    return dyn.PotentialCurve(r, dyn.ground_state_curve(r, aligned=True))


def test_criterion_01_potential_curve_minimum():
    res = minimize_scalar(lambda R: dyn.ground_state_curve([R])[0],
                          bounds=(1.7, 2.3), method="bounded",
                          options={"xatol": 1e-6})
    r_min, e_min = float(res.x), float(res.fun)
    ok = abs(r_min - 1.9975) <= 0.002 and abs(e_min + 0.60246) <= 5e-4
    verdict(1, "H2+ potential curve minimum", ok,
            f"R_min = {r_min:.4f} bohr (1.9975 +- 0.002), "
            f"E_min = {e_min:.5f} (-0.60246 +- 5e-4)")


def test_criterion_02_vibrational_ground_level(h2plus_curve):
    e0 = dyn.bohr_sommerfeld_levels(h2plus_curve, 0, MU_H2)[0]
    ok = abs(e0 + 0.59724) <= 1e-4
    verdict(2, "vibrational ground level", ok,
            f"E_0 = {e0:.5f} (-0.59724 +- 1e-4)")


def test_criterion_03_absorber_soundness():
    # batch property test over randomized states, bases and parameter sets:
    # the absorber may only remove norm and energy, must leave bound-only
    # states untouched, and cannot depend on how degenerate continuum
    # states are mixed
    rng = np.random.default_rng(2024)
    n_cases = 0
    worst = {"dn": 0.0, "de": 0.0, "bound": 0.0, "rot": 0.0}

    for _ in range(800):
        n = int(rng.integers(4, 13))
        A = rng.standard_normal((n, n))
        H = 0.5 * (A + A.T) * rng.uniform(0.2, 3.0)
        B = rng.standard_normal((n, n))
        S = B @ B.T + n * np.eye(n)
        spec = AbsorberSpec(tau_min=rng.uniform(0.5, 20.0),
                            e_ref=rng.uniform(0.05, 1.0))
        frame = solve_field_following(H, S)
        V = build_vabs(frame, spec)
        scale = max(np.linalg.norm(V, 2), 1e-30)

        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst["dn"] = max(worst["dn"], ab.norm_decay_rate(c, V))
        de = ab.energy_absorption_rate(c, V, H, frame)
        worst["de"] = max(worst["de"], de / (scale * np.linalg.norm(H, 2)
                                             * (c.conj() @ c).real))

        bound = frame.U[frame.energies <= 0.0]
        if len(bound):
            w = rng.standard_normal(len(bound)) + 1j * rng.standard_normal(len(bound))
            cb = bound.T @ w
            leak = np.linalg.norm(V @ cb) / (scale * np.linalg.norm(cb))
            worst["bound"] = max(worst["bound"], leak)
        n_cases += 1

    for _ in range(200):
        # exactly degenerate continuum pair, mixed by a random rotation
        n = int(rng.integers(5, 10))
        e = np.sort(rng.uniform(-1.0, 1.0, n))
        k = int(rng.integers(1, n - 1))
        e[k + 1] = e[k] = abs(e[k]) + 0.05
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        H = Q @ np.diag(e) @ Q.T
        spec = AbsorberSpec(tau_min=rng.uniform(0.5, 20.0),
                            e_ref=rng.uniform(0.05, 1.0))
        frame = solve_field_following(H, np.eye(n))
        V1 = build_vabs(frame, spec)
        th = rng.uniform(0.0, 2.0 * math.pi)
        R = np.array([[math.cos(th), -math.sin(th)],
                      [math.sin(th), math.cos(th)]])
        idx = np.argsort(np.abs(frame.energies - e[k]))[:2]
        U2 = frame.U.copy()
        U2[idx] = R @ U2[idx]
        from dataclasses import replace
        V2 = build_vabs(replace(frame, U=U2), spec)
        dev = np.abs(V1 - V2).max()
        worst["rot"] = max(worst["rot"], dev)
        n_cases += 1

    ok = (n_cases >= 1000 and worst["dn"] <= 1e-12 and worst["de"] <= 1e-12
          and worst["bound"] <= 1e-11 and worst["rot"] <= 1e-10)
    verdict(3, "absorber soundness properties", ok,
            f"{n_cases} cases; worst dN/dt = {worst['dn']:.1e} (<= 0), "
            f"worst scaled Delta_abs = {worst['de']:.1e} (<= 0), "
            f"bound-state leak = {worst['bound']:.1e}, "
            f"degenerate-rotation dev = {worst['rot']:.1e} (<= 1e-10)")


@pytest.mark.slow
def test_criterion_04_conservation_and_energy_balance():
    # long field-free, absorber-off run: norm and energy must not drift
    s = systems.h_atom()
    still = dyn.LaserPulse(e0=0.0, omega=1.0, envelope="quasi_cw", turn_on=1.0)
    rec = dyn.propagate(s, still, 1.0e4,
                        absorber_spec=AbsorberSpec(enabled=False),
                        controls=dyn.StepControls(dt=1.0), record_every=20)
    dn = np.abs(rec.total_norm - 1.0).max()
    de = np.abs(rec.energy - rec.energy[0]).max()

    # driven absorbing run: dE/dt must equal the field work on electrons and
    # nuclei plus the absorber drain, each term from an independent channel
    s2 = systems.h2plus(2.0, aligned=True)
    pulse = dyn.LaserPulse(e0=0.08, omega=0.25, envelope="sin2",
                           half_duration=40.0)
    rec2 = dyn.propagate(s2, pulse, 80.0,
                         controls=dyn.StepControls(dt=0.05), record_every=1)
    pol = np.asarray(pulse.polarization)
    nuc = float(np.sum(s2.charges * (s2.positions @ pol)))
    edot = np.array([pulse.scalar_dot(t) for t in rec2.t])
    lhs = np.gradient(rec2.energy, rec2.t)
    rhs = edot * (rec2.dipole - nuc) + rec2.dabs
    resid = np.abs(lhs - rhs)[2:-2].max()
    scale = np.abs(rhs).max()

    ok = dn < 1e-10 and de < 1e-8 and resid < 2e-3 * scale
    verdict(4, "conservation and energy balance", ok,
            f"field-free 1e4 au: |dN| = {dn:.1e} (< 1e-10), "
            f"|dE| = {de:.1e} (< 1e-8); "
            f"driven balance residual = {resid:.2e} (< {2e-3 * scale:.2e})")


def test_criterion_05_two_level_analytics():
    # resonant population transfer against the closed form
    v = 0.05
    H = np.array([[0.0, v], [v, 0.0]])
    S = np.eye(2)
    off = AbsorberSpec(enabled=False)
    a = np.array([1.0, 0.0], complex)
    dt, t = 0.05, 0.0
    err = 0.0
    for _ in range(int(3.0 * math.pi / v / dt)):
        a, _, _ = dyn.expmid_step(a, H, S, off, dt)
        t += dt
        err = max(err, abs(abs(a[1]) ** 2 - math.sin(v * t) ** 2))
    ok_rabi = err < 1e-6

    # a vanishing lifetime on the second state freezes the first: build the
    # generator columnwise from the coefficient EOM and exponentiate exactly
    f2 = ab.strength(1.0, AbsorberSpec(tau_min=1e-4))
    vabs = np.diag([0.0, f2])
    frame = solve_field_following(H, S)
    M = np.zeros((2, 2), complex)
    for j in range(2):
        e = np.zeros(2, complex)
        e[j] = 1.0
        M[:, j] = dyn.electronic_rhs(e, H, vabs, None, frame)
    p1_min = 1.0
    for tt in np.linspace(0.0, 10.0 * math.pi / v, 21):
        a1 = (expm(M * tt) @ np.array([1.0, 0.0]))[0]
        p1_min = min(p1_min, abs(a1) ** 2)
    ok_freeze = p1_min >= 1.0 - 1e-3

    verdict(5, "two-level analytics", ok_rabi and ok_freeze,
            f"Rabi max deviation = {err:.1e} (< 1e-6), "
            f"frozen population min = {p1_min:.6f} (>= 0.999)")


@pytest.mark.slow
def test_criterion_06_hydrogen_ionization_vs_duration():
    s = systems.h_atom()
    ctl = dyn.StepControls(dt=0.25)
    durations = (2.5, 5.0, 10.0, 20.0)
    intensities = (8.78e13, 3.8e15)

    def pion(om, e0, t_fs, spec=None):
        half = 0.5 * t_fs * FS_TO_AU
        pulse = dyn.LaserPulse(e0=e0, omega=om, envelope="sin2",
                               half_duration=half)
        kw = {} if spec is None else {"absorber_spec": spec}
        rec = dyn.propagate(s, pulse, 2.0 * half, tail=250.0, controls=ctl,
                            record_every=10 ** 9, **kw)
        return 1.0 - rec.total_norm[-1], rec

    curves = {}
    for om in (0.55, 0.18):
        for I in intensities:
            e0 = field_amplitude(I)
            curves[(om, I)] = [pion(om, e0, T)[0] for T in durations]

    mono = all(all(b >= a - 1e-10 for a, b in zip(ps, ps[1:]))
               for ps in curves.values())
    stronger = all(curves[(om, 3.8e15)][k] > curves[(om, 8.78e13)][k]
                   for om in (0.55, 0.18) for k in range(len(durations)))

    # absorber-based probability against the positive-energy projection of
    # an undamped run, for the shortest weak pulses
    rels = []
    for T in (2.5, 5.0):
        p_abs, _ = pion(0.55, field_amplitude(8.78e13), T)
        half = 0.5 * T * FS_TO_AU
        pulse = dyn.LaserPulse(e0=field_amplitude(8.78e13), omega=0.55,
                               envelope="sin2", half_duration=half)
        rec = dyn.propagate(s, pulse, 2.0 * half,
                            absorber_spec=AbsorberSpec(enabled=False),
                            controls=ctl, record_every=10 ** 9)
        p_pos = obs.positive_energy_population(s, rec.final_coeffs)
        rels.append(abs(p_abs - p_pos) / p_pos)
    agree = max(rels) <= 0.20

    verdict(6, "hydrogen ionization vs duration", mono and stronger and agree,
            f"monotone in T at 4 parameter sets = {mono}, "
            f"stronger field ionizes more = {stronger}, "
            f"projection agreement = {max(rels):.3f} rel (<= 0.20)")


@pytest.mark.slow
def test_criterion_07_enhanced_ionization_vs_distance():
    om = omega_from_wavelength(266.0)
    pulse = dyn.LaserPulse(e0=field_amplitude(8e13), omega=om,
                           envelope="cw_cycles", n_cycles=3.0)
    ctl = dyn.StepControls(dt=0.25)

    def rate(R, angle, aligned):
        s = systems.h2plus(R, angle_deg=angle, aligned=aligned)
        rec = dyn.propagate(s, pulse, 500.0, controls=ctl, record_every=4)
        return obs.rate_fit(rec, pulse=pulse).gamma_au

    r_par = [2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]
    g_par = [rate(R, 0.0, True) for R in r_par]
    peak = r_par[int(np.argmax(g_par))]
    ratio = g_par[r_par.index(7.0)] / g_par[r_par.index(2.5)]

    r_perp = [5.0, 6.0, 7.0, 8.0, 9.0]
    g_perp = [rate(R, 90.0, False) for R in r_perp]
    local_max = any(
        6.0 <= r_perp[i] <= 8.0
        and g_perp[i] > g_perp[i - 1] and g_perp[i] > g_perp[i + 1]
        for i in range(1, len(r_perp) - 1))

    ok = 6.0 <= peak <= 10.0 and ratio > 3.0 and local_max
    verdict(7, "enhanced ionization at stretched geometries", ok,
            f"rate peak at R = {peak:.1f} (within [6, 10]), "
            f"rate(7)/rate(2.5) = {ratio:.1f} (> 3), "
            f"perpendicular local max in [6, 8] = {local_max}")


@pytest.mark.slow
def test_criterion_08_h2_mean_field_ground_state():
    s = systems.h2(1.39384, aligned=True)
    store = mf.ERIStore.build(s.flat)
    m = s.matrices()
    res = mf.scf_ground_state(mf.FockContext(m.T + m.V, store), m.S,
                              s.nuclear_repulsion())
    below_bound = res.energy < -1.1336
    if below_bound:
        logging.getLogger(__name__).warning(
            "H2 mean-field energy %.6f below the single-determinant "
            "bound -1.1336", res.energy)
    ok = res.converged and abs(res.energy + 1.13608) <= 0.01
    verdict(8, "H2 mean-field ground state", ok,
            f"E = {res.energy:.6f} (-1.13608 +- 0.01), "
            f"converged = {res.converged}, "
            f"variational flag = {'raised' if below_bound else 'clear'}")


@pytest.mark.slow
def test_criterion_09_vibrational_ensemble(h2plus_curve):
    levels = dyn.bohr_sommerfeld_levels(h2plus_curve, 6, MU_H2)
    pairs = dyn.sample_vibrational_ensemble(h2plus_curve, levels[6], 100,
                                            seed=1234, mu=MU_H2)
    pulse = dyn.LaserPulse(e0=field_amplitude(3.5e13), omega=0.21,
                           envelope="quasi_cw", turn_on=1.0 * FS_TO_AU)
    ctl = dyn.StepControls(dt=0.5)
    records = []
    for R0, v0 in pairs:
        s = systems.h2plus(R0, aligned=True)
        records.append(dyn.propagate(s, pulse, 1000.0, nuclei="radial",
                                     rdot0=v0, controls=ctl, record_every=8))
    ens = obs.ensemble_probabilities(records, r_d=9.5, keep_records=False)
    t_fs = ens.t * AU_TO_FS

    ion_mono = bool(np.all(np.diff(ens.p_ion) >= -1e-9))
    slack = 0.02 * ens.p_diss.max() + 1e-12
    diss_mono = bool(np.all(np.diff(ens.p_diss) >= -slack))

    k12 = int(np.searchsorted(t_fs, 12.0))
    rising = ens.p_diss[-1] > 0.05
    early_flat = ens.p_diss[k12] <= 0.2 * ens.p_diss[-1]
    steep_late = t_fs[int(np.argmax(np.gradient(ens.p_diss, ens.t)))] > 12.0

    sel = t_fs >= 12.0
    coef = np.polyfit(ens.t[sel], ens.p_ion[sel], 1)
    resid = ens.p_ion[sel] - np.polyval(coef, ens.t[sel])
    span = float(ens.p_ion[sel].max() - ens.p_ion[sel].min())
    linear = float(np.sqrt(np.mean(resid ** 2))) <= 0.05 * max(span, 1e-3)

    ok = ion_mono and diss_mono and rising and early_flat and steep_late and linear
    verdict(9, "vibrational ensemble dynamics", ok,
            f"P_ion(end) = {ens.p_ion[-1]:.3f}, P_diss(end) = {ens.p_diss[-1]:.3f}; "
            f"monotone ion/diss = {ion_mono}/{diss_mono}, "
            f"late steep dissociation = {early_flat and steep_late}, "
            f"linear late ionization = {linear}")


@pytest.mark.slow
def test_criterion_10_orientation_dependence():
    om = omega_from_wavelength(266.0)
    e0 = field_amplitude(5e14)

    # one-electron molecule: full-length pulse, five orientations, one fit
    half = 0.5 * 50.0 * FS_TO_AU
    pulse = dyn.LaserPulse(e0=e0, omega=om, envelope="sin2",
                           half_duration=half)
    angles = np.array([0.0, 22.5, 45.0, 67.5, 90.0])
    p_h2p = []
    for th in angles:
        s = systems.h2plus(2.0, angle_deg=th, aligned=False)
        rec = dyn.propagate(s, pulse, 2.0 * half, tail=150.0,
                            controls=dyn.StepControls(dt=0.25),
                            record_every=10 ** 9)
        p_h2p.append(1.0 - float(obs.total_survival(rec)[-1]))
    ppar, pperp, rms = obs.cos2_fit(angles, np.array(p_h2p))
    ok_fit = rms <= 0.05 * ppar and ppar > pperp

    # two-electron molecule: the orientation contrast survives a shortened
    # pulse, which keeps the mean-field runs affordable
    half2 = 0.5 * 5.0 * FS_TO_AU
    pulse2 = dyn.LaserPulse(e0=e0, omega=om, envelope="sin2",
                            half_duration=half2)
    p_h2 = []
    for th in (0.0, 90.0):
        s = systems.h2(1.39384, angle_deg=th, aligned=False)
        store = mf.ERIStore.build(s.flat)
        m = s.matrices()
        scf = mf.scf_ground_state(mf.FockContext(m.T + m.V, store), m.S,
                                  s.nuclear_repulsion())
        rec = dyn.propagate(s, pulse2, 2.0 * half2, tail=100.0,
                            controls=dyn.StepControls(dt=0.5),
                            record_every=10 ** 9,
                            initial=scf.coeffs.astype(complex),
                            heff_builder=mf.make_heff_builder(store))
        p_h2.append(1.0 - float(obs.total_survival(rec)[-1]))
        del store
    ok_h2 = p_h2[0] > p_h2[1]

    verdict(10, "orientation dependence of ionization", ok_fit and ok_h2,
            f"H2+: P_par = {ppar:.4f} > P_perp = {pperp:.4f}, "
            f"fit rms = {rms:.2e} ({rms / ppar:.1%} of P_par, <= 5%); "
            f"H2: P(0) = {p_h2[0]:.4f} > P(90) = {p_h2[1]:.4f} = {ok_h2}")
