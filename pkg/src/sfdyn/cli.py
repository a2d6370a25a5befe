"""Batch front end: single runs, angle/distance/duration scans, trajectory
ensembles, basis/spectrum dumps and plot rendering.

Every artifact is a pure function of (config, seed): summaries carry no
timestamps, so repeated runs are byte-identical and interrupted scans resume
from the per-point files already on disk. Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import dynamics as dyn
from . import meanfield as mf
from . import observables as obs
from . import systems
from .config import ConfigError, RunConfig
from .constants import AU_TO_FS, FS_TO_AU, PROTON_MASS_AU


class NumericalFailure(RuntimeError):
    """Propagation failure tagged with the offending point.

    Single-argument constructor keeps the exception picklable across the
    worker pool.
    """


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SFDYN_WORKERS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    n = _workers()
    if n > 1 and len(items) > 1:
        from multiprocessing import Pool

        with Pool(min(n, len(items))) as pool:
            return pool.map(fn, items)
    return [fn(x) for x in items]


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.outdir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_manifest(out: Path, cfg: RunConfig, command: str, points):
    blob = {
        "version": __version__,
        "config_hash": cfg.config_hash,
        "command": command,
        "seed": cfg.seed,
        "points": points,
    }
    (out / "manifest.json").write_text(json.dumps(blob, indent=2) + "\n")


def _write_csv(path: Path, header_lines, columns, names):
    cols = [np.asarray(c, float) for c in columns]
    lines = [f"# {h}" for h in header_lines]
    lines.append("# " + ", ".join(names))
    for row in zip(*cols):
        lines.append(", ".join(f"{x:.12e}" for x in row))
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path):
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


# ---------------------------------------------------------------------------
# single propagation

def _prepare(cfg: RunConfig, system):
    """Initial state and effective-Hamiltonian builder (mean field for H2)."""
    if not system.needs_fock:
        return None, None, ""
    m = system.matrices()
    store = mf.ERIStore.build(system.flat)
    res = mf.scf_ground_state(mf.FockContext(m.T + m.V, store), m.S,
                              system.nuclear_repulsion())
    summary = ("scf: energy = {:.8f} a.u., orbital energy = {:.8f} a.u., "
               "{} iterations (level shift {})\n").format(
                   res.energy, res.orbital_energy, res.n_iter, res.level_shift)
    return res.coeffs.astype(complex), mf.make_heff_builder(store), summary


def _propagate_point(cfg: RunConfig, point_name: str, *, system=None,
                     pulse=None, t_end=None, tail=None, rdot0=0.0,
                     initial=None, heff_builder=None):
    system = system if system is not None else cfgmod.build_system(cfg)
    pulse = pulse if pulse is not None else cfgmod.build_pulse(cfg)
    scf_note = ""
    if system.needs_fock and heff_builder is None:
        initial, heff_builder, scf_note = _prepare(cfg, system)
    if t_end is None:
        t_end = cfgmod.effective_t_end(cfg, pulse)
    try:
        rec = dyn.propagate(
            system, pulse, t_end,
            absorber_spec=cfgmod.build_absorber(cfg),
            controls=cfgmod.build_controls(cfg),
            nuclei=cfg.nuclei, rdot0=rdot0, initial=initial,
            tail=(cfg.tail if tail is None else tail),
            record_every=cfg.record_every, heff_builder=heff_builder)
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as err:
        raise NumericalFailure(f"{point_name}: {err}") from err
    return rec, system, pulse, scf_note


def _summary_text(cfg: RunConfig, system, pulse, rec, scf_note=""):
    n_final = obs.total_survival(rec)[-1]
    lines = [
        f"system: {system.name}  ({system.flat.nfun} basis functions, "
        f"{len(system.flat.alpha)} primitives)",
        f"pulse: envelope={pulse.envelope} omega={pulse.omega:.6f} a.u. "
        f"e0={pulse.e0:.6e} a.u.",
        f"absorber: enabled={cfg.absorber_enabled} tau_min={cfg.tau_min} "
        f"e_ref={cfg.e_ref}",
        f"final time: {rec.t[-1]:.4f} a.u.",
        f"surviving norm: {n_final:.12e}",
        f"ionization probability: {1.0 - n_final:.12e}",
    ]
    if rec.occ == 2.0:
        n1 = rec.norms[-1, 0]
        ps, pd = obs.single_double(n1, n1)
        lines.append(f"per-spin norm: {n1:.12e}")
        lines.append(f"single ionization: {ps:.12e}")
        lines.append(f"double ionization: {pd:.12e}")
    if cfg.nuclei == "radial":
        lines.append(f"final distance: {rec.rdist[-1]:.6f} a.u.")
    return scf_note + "\n".join(lines) + "\n"


def cmd_run(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    rec, system, pulse, scf_note = _propagate_point(cfg, "run")
    rec.to_csv(out / "traj.csv")
    (out / "summary.txt").write_text(_summary_text(cfg, system, pulse, rec,
                                                   scf_note))
    _write_manifest(out, cfg, "run",
                    [{"name": "run", "wall_s": time.perf_counter() - t0}])
    return 0


# ---------------------------------------------------------------------------
# scans

def _point_file(out: Path, kind: str, value: float) -> Path:
    return out / f"{kind}_{value:09.3f}.csv"


def _persisted(pf: Path, compute):
    """Run `compute` unless its point file exists, then reload from disk.

    Fresh and resumed scans both see the CSV-rounded record, so the derived
    files come out byte-identical either way.
    """
    if not pf.exists():
        compute().to_csv(pf)
    return dyn.TrajectoryRecord.from_csv(pf)


def cmd_scan_angle(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    grid = cfg.scan_grid
    points = []
    rows = []
    for th in grid:
        pf = _point_file(out, "angle", th)
        if cfg.synthetic_p is not None:
            # injection mode: exercise the fit and file plumbing without
            # propagation
            p_par, p_perp = cfg.synthetic_p
            rad = np.radians(th)
            pion = p_par * np.cos(rad) ** 2 + p_perp * np.sin(rad) ** 2
            rows.append((th, 1.0 - pion, pion, 0.0, 0.0))
            points.append({"name": f"angle_{th:g}", "wall_s": 0.0})
            continue
        t0 = time.perf_counter()
        rec = _persisted(pf, lambda th=th: _propagate_point(
            cfg, f"angle={th:g} deg",
            system=cfgmod.build_system(cfg, angle_deg=th))[0])
        n = obs.total_survival(rec)[-1]
        if rec.occ == 2.0:
            ps, pd = obs.single_double(rec.norms[-1, 0], rec.norms[-1, 0])
        else:
            ps, pd = 0.0, 0.0
        rows.append((th, n, 1.0 - n, ps, pd))
        points.append({"name": f"angle_{th:g}",
                       "wall_s": time.perf_counter() - t0})

    arr = np.array(rows)
    p_par, p_perp, res = obs.cos2_fit(arr[:, 0], arr[:, 2])
    _write_csv(out / "angle_scan.csv",
               [f"ionization vs orientation; fit P(theta) = "
                f"P_par cos^2 + P_perp sin^2",
                f"p_par = {p_par:.12e}, p_perp = {p_perp:.12e}, "
                f"rms_residual = {res:.12e}",
                "angle in degrees, probabilities dimensionless"],
               [arr[:, k] for k in range(5)],
               ["angle_deg", "norm", "p_ion", "p_single", "p_double"])
    _write_manifest(out, cfg, "scan-angle", points)
    return 0


def cmd_scan_distance(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    pulse = cfgmod.build_pulse(cfg)
    t_end = cfgmod.effective_t_end(cfg, pulse)
    points = []
    rows = []
    for R in cfg.scan_grid:
        pf = _point_file(out, "distance", R)
        t0 = time.perf_counter()
        rec = _persisted(pf, lambda R=R: _propagate_point(
            cfg, f"R={R:g} bohr",
            system=cfgmod.build_system(cfg, distance=R),
            t_end=t_end, tail=0.0)[0])
        fit = obs.rate_fit(rec, pulse=pulse)
        rows.append((R, fit.gamma_au, fit.gamma_per_s))
        points.append({"name": f"distance_{R:g}",
                       "wall_s": time.perf_counter() - t0})
    arr = np.array(rows)
    _write_csv(out / "rates.csv",
               ["ionization rate vs internuclear distance (cw run)",
                f"fit window starts after the ramp plus two cycles"],
               [arr[:, 0], arr[:, 1], arr[:, 2]],
               ["distance_bohr", "gamma_au", "gamma_per_s"])
    _write_manifest(out, cfg, "scan-distance", points)
    return 0


def cmd_scan_duration(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    points = []
    rows = []
    for T_fs in cfg.scan_grid:
        pf = _point_file(out, "duration", T_fs)
        sidecar = pf.with_suffix(".json")   # holds what the CSV cannot
        t0 = time.perf_counter()
        if pf.exists() and sidecar.exists():
            row = json.loads(sidecar.read_text())
        else:
            half = 0.5 * T_fs * FS_TO_AU
            pulse = cfgmod.build_pulse(cfg, half_duration=half)
            rec, system, *_ = _propagate_point(
                cfg, f"T={T_fs:g} fs", pulse=pulse, t_end=pulse.duration)
            rec.to_csv(pf)
            row = {"duration_fs": T_fs,
                   "p_ion": 1.0 - obs.total_survival(rec)[-1],
                   "p_pos": obs.positive_energy_population(
                       system, rec.final_coeffs)}
            sidecar.write_text(json.dumps(row) + "\n")
        rows.append((row["duration_fs"], row["p_ion"], row["p_pos"]))
        points.append({"name": f"duration_{T_fs:g}",
                       "wall_s": time.perf_counter() - t0})
    arr = np.array(rows)
    _write_csv(out / "durations.csv",
               ["ionization probability vs pulse duration",
                "p_pos: positive-energy population of the final state"],
               [arr[:, 0], arr[:, 1], arr[:, 2]],
               ["duration_fs", "p_ion", "p_pos"])
    _write_manifest(out, cfg, "scan-duration", points)
    return 0


# ---------------------------------------------------------------------------
# ensemble

def _ensemble_worker(task):
    # module level so the worker pool can pickle it
    cfg, outdir, idx, R, rdot, t_end = task
    pf = Path(outdir) / f"traj_{idx:04d}.csv"
    t0 = time.perf_counter()
    rec = _persisted(pf, lambda: _propagate_point(
        cfg, f"trajectory {idx} (R0={R:.4f})",
        system=cfgmod.build_system(cfg, distance=R),
        t_end=t_end, tail=0.0, rdot0=rdot)[0])
    return rec, {"name": f"traj_{idx:04d}",
                 "wall_s": time.perf_counter() - t0}


def cmd_ensemble(cfg: RunConfig) -> int:
    if cfg.system != "h2plus" or cfg.nuclei != "radial":
        raise ConfigError(["ensemble: needs system.name = 'h2plus' and "
                           "system.nuclei = 'radial'"])
    if cfg.ensemble_size < 1:
        raise ConfigError(["ensemble.size: must be >= 1 for the ensemble "
                           "command"])
    out = _outdir(cfg)
    pulse = cfgmod.build_pulse(cfg)
    t_end = cfgmod.effective_t_end(cfg, pulse)

    r0, r1, dr = cfg.curve_r
    r_grid = np.arange(r0, r1 + 0.5 * dr, dr)
    e = dyn.ground_state_curve(r_grid, aligned=cfg.aligned,
                               angle_deg=cfg.angle_deg)
    curve = dyn.PotentialCurve(r_grid, e)
    mu = PROTON_MASS_AU / 2.0
    levels = dyn.bohr_sommerfeld_levels(curve, cfg.ensemble_level, mu=mu)
    e_n = levels[cfg.ensemble_level]
    pairs = dyn.sample_vibrational_ensemble(curve, e_n, cfg.ensemble_size,
                                            seed=cfg.seed, mu=mu)

    tasks = [(cfg, str(out), idx, R, rdot, t_end)
             for idx, (R, rdot) in enumerate(pairs)]
    results = _map(_ensemble_worker, tasks)
    records = [r for r, _ in results]
    ens = obs.ensemble_probabilities(records, keep_records=False)
    _write_csv(out / "ensemble.csv",
               [f"trajectory ensemble, level n={cfg.ensemble_level} "
                f"(E_n = {e_n:.8f} a.u.), {ens.n_traj} trajectories, "
                f"seed {cfg.seed}",
                "standard errors from the trajectory scatter"],
               [ens.t, ens.p_ion, ens.p_ion_se, ens.p_frag,
                ens.p_diss, ens.p_diss_se],
               ["t_au", "p_ion", "p_ion_se", "p_frag", "p_diss", "p_diss_se"])
    _write_manifest(out, cfg, "ensemble", [p for _, p in results])
    return 0


# ---------------------------------------------------------------------------
# dumps and plots

def cmd_dump_basis(cfg: RunConfig, dest=None) -> int:
    system = cfgmod.build_system(cfg)
    text = system.basis.table()
    if dest:
        Path(dest).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_dump_spectrum(cfg: RunConfig, dest=None) -> int:
    from .adiabatic import solve_field_following

    system = cfgmod.build_system(cfg)
    m = system.matrices()
    frame = solve_field_following(m.T + m.V, m.S)
    lines = ["# field-free adiabatic spectrum (a.u.)", "# index, energy"]
    lines += [f"{i}, {e:.12e}" for i, e in enumerate(frame.energies)]
    text = "\n".join(lines) + "\n"
    if dest:
        Path(dest).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(outdir) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(outdir)
    made = []

    traj = out / "traj.csv"
    if traj.exists():
        rec = dyn.TrajectoryRecord.from_csv(traj)
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
        ax1.plot(rec.t, obs.total_survival(rec))
        ax1.set_ylabel("norm")
        ax2.plot(rec.t, rec.energy)
        ax2.set_ylabel("energy (a.u.)")
        ax2.set_xlabel("t (a.u.)")
        fig.savefig(out / "trajectory.png", dpi=150)
        plt.close(fig)
        made.append("trajectory.png")

    scan = out / "angle_scan.csv"
    if scan.exists():
        arr = _read_csv(scan)
        p_par, p_perp, _ = obs.cos2_fit(arr[:, 0], arr[:, 2])
        th = np.linspace(0.0, 90.0, 181)
        fig, ax = plt.subplots()
        ax.plot(arr[:, 0], arr[:, 2], "o", label="computed")
        ax.plot(th, p_par * np.cos(np.radians(th)) ** 2
                + p_perp * np.sin(np.radians(th)) ** 2, "-",
                label="cos$^2$ fit")
        ax.set_xlabel("angle (deg)")
        ax.set_ylabel("P$_{ion}$")
        ax.legend()
        fig.savefig(out / "angle_fit.png", dpi=150)
        plt.close(fig)
        made.append("angle_fit.png")

    rates = out / "rates.csv"
    if rates.exists():
        arr = _read_csv(rates)
        fig, ax = plt.subplots()
        ax.semilogy(arr[:, 0], arr[:, 2], "o-")
        ax.set_xlabel("R (bohr)")
        ax.set_ylabel(r"$\Gamma$ (1/s)")
        fig.savefig(out / "rates.png", dpi=150)
        plt.close(fig)
        made.append("rates.png")

    ens = out / "ensemble.csv"
    if ens.exists():
        arr = _read_csv(ens)
        fig, ax = plt.subplots()
        t_fs = arr[:, 0] * AU_TO_FS
        ax.plot(t_fs, arr[:, 1], label="P$_{ion}$")
        ax.plot(t_fs, arr[:, 4], label="P$_{diss}$")
        ax.fill_between(t_fs, arr[:, 1] - arr[:, 2], arr[:, 1] + arr[:, 2],
                        alpha=0.3)
        ax.set_xlabel("t (fs)")
        ax.set_ylabel("probability")
        ax.legend()
        fig.savefig(out / "ensemble.png", dpi=150)
        plt.close(fig)
        made.append("ensemble.png")

    if not made:
        print(f"no plottable files under {out}", file=sys.stderr)
    else:
        print("wrote " + ", ".join(made))
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sfdyn",
        description="Laser-driven electron-nuclear dynamics in Gaussian "
                    "bases with an adiabatic-projector absorbing potential.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="TOML run configuration")
        return p

    with_config("run", "single propagation")
    with_config("scan-angle", "orientation scan with cos^2/sin^2 fit")
    with_config("scan-distance", "ionization rate vs internuclear distance")
    with_config("scan-duration", "ionization probability vs pulse duration")
    with_config("ensemble", "vibrational-ensemble trajectory average")
    p = with_config("dump-basis", "write the basis-set table")
    p.add_argument("-o", "--output", default=None)
    p = with_config("dump-spectrum", "write the field-free spectrum")
    p.add_argument("-o", "--output", default=None)
    p = sub.add_parser("plot", help="render plots from an output directory")
    p.add_argument("outdir")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            return cmd_plot(args.outdir)
        cfg = cfgmod.load_config(args.config)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "scan-angle":
            return cmd_scan_angle(cfg)
        if args.command == "scan-distance":
            return cmd_scan_distance(cfg)
        if args.command == "scan-duration":
            return cmd_scan_duration(cfg)
        if args.command == "ensemble":
            return cmd_ensemble(cfg)
        if args.command == "dump-basis":
            return cmd_dump_basis(cfg, args.output)
        if args.command == "dump-spectrum":
            return cmd_dump_spectrum(cfg, args.output)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as err:
        print(err, file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"cannot read {err.filename}", file=sys.stderr)
        return 2
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
