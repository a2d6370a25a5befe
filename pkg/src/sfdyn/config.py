"""Run configuration: TOML parsing, field validation and unit conversion.

All internal numbers are Hartree atomic units; femtoseconds, nanometers and
W/cm^2 are accepted in the file and converted exactly once, here. Validation
collects every problem before raising so a bad file is fixed in one pass.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dfield

import numpy as np

try:
    import tomllib as _toml          # 3.11+
except ModuleNotFoundError:          # pragma: no cover - version dependent
    import tomli as _toml

from . import absorber as ab
from . import dynamics as dyn
from . import systems
from .constants import FS_TO_AU, field_amplitude, omega_from_wavelength

SYSTEMS = ("h", "h2plus", "h2")
SCAN_AXES = ("none", "angle", "distance", "duration")


class ConfigError(ValueError):
    """All validation failures of one file, one per line."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" +
                         "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class RunConfig:
    # system
    system: str = "h"
    distance: float = 2.0
    angle_deg: float = 0.0
    aligned: bool = True
    nuclei: str = "fixed"
    # pulse (a.u. after conversion)
    envelope: str = "sin2"
    omega: float = 0.2
    e0: float = 0.05
    half_duration: float = 200.0
    turn_on: float = 0.0
    n_cycles: float = 3.0
    phase: float = 0.0
    polarization: tuple = (0.0, 0.0, 1.0)
    # absorber
    absorber_enabled: bool = True
    tau_min: float = 5.0
    e_ref: float = 0.3
    include_field: bool = True
    # propagation
    integrator: str = "expmid"
    dt: float = 0.25
    t_end: float = 0.0          # 0 -> pulse duration
    tail: float = 500.0
    record_every: int = 1
    rtol: float = 1e-8
    atol: float = 1e-10
    min_dt: float = 1e-9
    max_dt: float = 5.0
    # scan
    scan_axis: str = "none"
    scan_grid: tuple = ()
    synthetic_p: tuple | None = None   # injection mode for the angle scan
    # ensemble
    ensemble_size: int = 0
    ensemble_level: int = 6
    seed: int = 1234
    curve_r: tuple = (0.8, 14.0, 0.1)  # sampling-curve grid (min, max, step)
    # output
    outdir: str = "out"
    raw: dict = dfield(default_factory=dict, repr=False)
    config_hash: str = ""

    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict, config_hash: str = "") -> "RunConfig":
        errors = []
        cfg = cls(raw=d, config_hash=config_hash)

        def take(sect, key, types, where, check=None, convert=None):
            if key not in sect:
                return None
            v = sect[key]
            if not isinstance(v, types) or isinstance(v, bool) != (types == bool):
                errors.append(f"{where}.{key}: expected {types}, got {v!r}")
                return None
            if check is not None and not check(v):
                errors.append(f"{where}.{key}: out of range ({v!r})")
                return None
            return convert(v) if convert else v

        num = (int, float)
        sys_s = d.get("system", {})
        v = take(sys_s, "name", str, "system",
                 check=lambda s: s in SYSTEMS)
        if v is not None:
            cfg.system = v
        v = take(sys_s, "distance", num, "system", check=lambda x: x > 0)
        if v is not None:
            cfg.distance = float(v)
        v = take(sys_s, "angle_deg", num, "system")
        if v is not None:
            cfg.angle_deg = float(v)
        v = take(sys_s, "aligned", bool, "system")
        if v is not None:
            cfg.aligned = v
        v = take(sys_s, "nuclei", str, "system",
                 check=lambda s: s in ("fixed", "radial"))
        if v is not None:
            cfg.nuclei = v

        p = d.get("pulse", {})
        v = take(p, "envelope", str, "pulse",
                 check=lambda s: s in ("sin2", "quasi_cw", "cw_cycles"))
        if v is not None:
            cfg.envelope = v
        if "omega_au" in p and "wavelength_nm" in p:
            errors.append("pulse: give omega_au or wavelength_nm, not both")
        v = take(p, "omega_au", num, "pulse", check=lambda x: x > 0)
        if v is not None:
            cfg.omega = float(v)
        v = take(p, "wavelength_nm", num, "pulse", check=lambda x: x > 0,
                 convert=omega_from_wavelength)
        if v is not None:
            cfg.omega = float(v)
        if "e0_au" in p and "intensity_wcm2" in p:
            errors.append("pulse: give e0_au or intensity_wcm2, not both")
        v = take(p, "e0_au", num, "pulse", check=lambda x: x >= 0)
        if v is not None:
            cfg.e0 = float(v)
        v = take(p, "intensity_wcm2", num, "pulse", check=lambda x: x >= 0,
                 convert=field_amplitude)
        if v is not None:
            cfg.e0 = float(v)
        if "duration_fs" in p and "half_duration_au" in p:
            errors.append("pulse: give duration_fs or half_duration_au, not both")
        v = take(p, "duration_fs", num, "pulse", check=lambda x: x > 0,
                 convert=lambda x: 0.5 * x * FS_TO_AU)
        if v is not None:
            cfg.half_duration = float(v)
        v = take(p, "half_duration_au", num, "pulse", check=lambda x: x > 0)
        if v is not None:
            cfg.half_duration = float(v)
        if "turn_on_fs" in p and "turn_on_au" in p:
            errors.append("pulse: give turn_on_fs or turn_on_au, not both")
        v = take(p, "turn_on_fs", num, "pulse", check=lambda x: x >= 0,
                 convert=lambda x: x * FS_TO_AU)
        if v is not None:
            cfg.turn_on = float(v)
        v = take(p, "turn_on_au", num, "pulse", check=lambda x: x >= 0)
        if v is not None:
            cfg.turn_on = float(v)
        v = take(p, "n_cycles", num, "pulse", check=lambda x: x > 0)
        if v is not None:
            cfg.n_cycles = float(v)
        v = take(p, "phase", num, "pulse")
        if v is not None:
            cfg.phase = float(v)
        if "polarization" in p:
            pol = p["polarization"]
            if (not isinstance(pol, list) or len(pol) != 3
                    or not all(isinstance(x, num) for x in pol)):
                errors.append("pulse.polarization: expected 3 numbers")
            elif abs(np.linalg.norm(pol) - 1.0) > 1e-8:
                errors.append("pulse.polarization: must be a unit vector")
            else:
                cfg.polarization = tuple(float(x) for x in pol)

        a = d.get("absorber", {})
        v = take(a, "enabled", bool, "absorber")
        if v is not None:
            cfg.absorber_enabled = v
        v = take(a, "tau_min", num, "absorber", check=lambda x: x > 0)
        if v is not None:
            cfg.tau_min = float(v)
        v = take(a, "e_ref", num, "absorber", check=lambda x: x > 0)
        if v is not None:
            cfg.e_ref = float(v)
        v = take(a, "include_field", bool, "absorber")
        if v is not None:
            cfg.include_field = v

        pr = d.get("propagation", {})
        v = take(pr, "integrator", str, "propagation",
                 check=lambda s: s in ("expmid", "rk45"))
        if v is not None:
            cfg.integrator = v
        for key, attr, chk in (("dt", "dt", lambda x: x > 0),
                               ("t_end_au", "t_end", lambda x: x >= 0),
                               ("tail_au", "tail", lambda x: x >= 0),
                               ("rtol", "rtol", lambda x: x > 0),
                               ("atol", "atol", lambda x: x > 0),
                               ("min_dt", "min_dt", lambda x: x > 0),
                               ("max_dt", "max_dt", lambda x: x > 0)):
            v = take(pr, key, num, "propagation", check=chk)
            if v is not None:
                setattr(cfg, attr, float(v))
        v = take(pr, "record_every", int, "propagation", check=lambda x: x >= 1)
        if v is not None:
            cfg.record_every = v

        sc = d.get("scan", {})
        v = take(sc, "axis", str, "scan", check=lambda s: s in SCAN_AXES)
        if v is not None:
            cfg.scan_axis = v
        if "grid" in sc:
            g = sc["grid"]
            if (not isinstance(g, list) or not g
                    or not all(isinstance(x, num) for x in g)):
                errors.append("scan.grid: expected a non-empty list of numbers")
            elif any(b <= a for a, b in zip(g, g[1:])):
                errors.append("scan.grid: must be strictly increasing")
            else:
                cfg.scan_grid = tuple(float(x) for x in g)
        if cfg.scan_axis != "none" and not cfg.scan_grid:
            errors.append("scan.grid: required when scan.axis is set")
        if "synthetic_p" in sc:
            sp = sc["synthetic_p"]
            if (not isinstance(sp, list) or len(sp) != 2
                    or not all(isinstance(x, num) for x in sp)):
                errors.append("scan.synthetic_p: expected [p_par, p_perp]")
            else:
                cfg.synthetic_p = (float(sp[0]), float(sp[1]))

        en = d.get("ensemble", {})
        v = take(en, "size", int, "ensemble", check=lambda x: x >= 0)
        if v is not None:
            cfg.ensemble_size = v
        v = take(en, "level", int, "ensemble", check=lambda x: x >= 0)
        if v is not None:
            cfg.ensemble_level = v
        v = take(en, "seed", int, "ensemble")
        if v is not None:
            cfg.seed = v
        if "curve_r" in en:
            cr = en["curve_r"]
            if (not isinstance(cr, list) or len(cr) != 3
                    or not all(isinstance(x, num) for x in cr)
                    or not (0 < cr[0] < cr[1] and cr[2] > 0)):
                errors.append("ensemble.curve_r: expected [r_min, r_max, step] "
                              "with 0 < r_min < r_max, step > 0")
            else:
                cfg.curve_r = (float(cr[0]), float(cr[1]), float(cr[2]))

        out = d.get("output", {})
        v = take(out, "directory", str, "output", check=lambda s: len(s) > 0)
        if v is not None:
            cfg.outdir = v

        for sect in d:
            if sect not in ("system", "pulse", "absorber", "propagation",
                            "scan", "ensemble", "output"):
                errors.append(f"unknown section [{sect}]")

        if cfg.nuclei == "radial" and cfg.system == "h2":
            errors.append("system: radial nuclei are not available for h2 "
                          "(mean-field forces not implemented)")
        if cfg.system == "h" and cfg.scan_axis in ("angle", "distance"):
            errors.append(f"scan: {cfg.scan_axis} scan needs a diatomic")

        if errors:
            raise ConfigError(errors)
        return cfg


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        blob = fh.read()
    digest = hashlib.sha256(blob).hexdigest()[:16]
    return RunConfig.from_dict(_toml.loads(blob.decode()), config_hash=digest)


# ---------------------------------------------------------------------------
# builders

def build_system(cfg: RunConfig, distance=None, angle_deg=None) -> systems.System:
    if cfg.system == "h":
        return systems.h_atom()
    R = cfg.distance if distance is None else distance
    th = cfg.angle_deg if angle_deg is None else angle_deg
    if cfg.system == "h2plus":
        return systems.h2plus(R, angle_deg=th, aligned=cfg.aligned)
    return systems.h2(R, angle_deg=th, aligned=cfg.aligned)


def build_pulse(cfg: RunConfig, half_duration=None) -> dyn.LaserPulse:
    return dyn.LaserPulse(
        e0=cfg.e0, omega=cfg.omega, phase=cfg.phase, envelope=cfg.envelope,
        half_duration=(cfg.half_duration if half_duration is None
                       else half_duration),
        turn_on=cfg.turn_on, n_cycles=cfg.n_cycles,
        polarization=cfg.polarization)


def build_absorber(cfg: RunConfig) -> ab.AbsorberSpec:
    return ab.AbsorberSpec(tau_min=cfg.tau_min, e_ref=cfg.e_ref,
                           enabled=cfg.absorber_enabled,
                           include_field=cfg.include_field)


def build_controls(cfg: RunConfig) -> dyn.StepControls:
    return dyn.StepControls(integrator=cfg.integrator, dt=cfg.dt,
                            rtol=cfg.rtol, atol=cfg.atol,
                            min_dt=cfg.min_dt, max_dt=cfg.max_dt)


def effective_t_end(cfg: RunConfig, pulse: dyn.LaserPulse) -> float:
    if cfg.t_end > 0.0:
        return cfg.t_end
    if not np.isfinite(pulse.duration):
        raise ConfigError(["propagation.t_end_au: required for cw envelopes"])
    return pulse.duration
