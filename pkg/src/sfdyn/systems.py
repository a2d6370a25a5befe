"""Prebuilt systems: H atom, H2+ and H2 with their standard basis sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import basis as bs
from . import integrals
from .constants import PROTON_MASS_AU


@dataclass
class System:
    name: str
    basis: bs.BasisSet
    flat: bs.FlatBasis
    charges: np.ndarray
    masses: np.ndarray
    positions: np.ndarray        # (n_nuc, 3)
    occ: float = 1.0             # electrons per occupied spatial orbital
    needs_fock: bool = False     # two-electron mean field required
    eri: np.ndarray | None = None

    @property
    def n_electrons(self) -> float:
        return self.occ

    def matrices(self, positions=None) -> integrals.OneElectronMatrices:
        pos = self.positions if positions is None else np.asarray(positions, float)
        return integrals.assemble_one_electron(self.flat.at_geometry(pos), pos, self.charges)

    def nuclear_repulsion(self, positions=None) -> float:
        pos = self.positions if positions is None else np.asarray(positions, float)
        e = 0.0
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                e += self.charges[i] * self.charges[j] / np.linalg.norm(pos[i] - pos[j])
        return e


def diatomic_positions(R: float, angle_deg: float = 0.0) -> np.ndarray:
    """Nuclei at +-R/2 along an axis tilted by angle_deg from z in the y-z
    plane (the plane of the space-fixed grids).
    """
    th = math.radians(angle_deg)
    axis = np.array([0.0, math.sin(th), math.cos(th)])
    return np.array([axis * R / 2.0, -axis * R / 2.0])


def h_atom() -> System:
    b = bs.assemble_atom_basis()
    return System(
        name="h",
        basis=b,
        flat=b.compile(),
        charges=np.array([1.0]),
        masses=np.array([PROTON_MASS_AU]),
        positions=np.zeros((1, 3)),
        occ=1.0,
    )


def h2plus(R: float, angle_deg: float = 0.0, aligned: bool = True,
           rotation=None) -> System:
    pos = diatomic_positions(R, angle_deg)
    if rotation is not None:
        pos = pos @ np.asarray(rotation).T
    b = bs.assemble_diatomic_basis(pos, aligned=aligned, rotation=rotation)
    return System(
        name="h2plus" if aligned else "h2plus_3d",
        basis=b,
        flat=b.compile(),
        charges=np.array([1.0, 1.0]),
        masses=np.array([PROTON_MASS_AU, PROTON_MASS_AU]),
        positions=pos,
        occ=1.0,
    )


def h2(R: float, angle_deg: float = 0.0, aligned: bool = False,
       rotation=None) -> System:
    sys = h2plus(R, angle_deg, aligned=aligned, rotation=rotation)
    sys.name = "h2" if not aligned else "h2_aligned"
    sys.occ = 2.0
    sys.needs_fock = True
    return sys


def ground_state(system: System, matrices=None) -> tuple[np.ndarray, float]:
    """Lowest field-free eigenvector and eigenvalue for one-electron systems."""
    from .adiabatic import solve_field_following

    m = matrices if matrices is not None else system.matrices()
    frame = solve_field_following(m.T + m.V, m.S)
    return frame.U[0].copy(), float(frame.energies[0])
