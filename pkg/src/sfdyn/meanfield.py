"""Closed-shell two-electron mean field: restricted SCF ground state and the
time-dependent Fock matrix consumed by the propagation loop.

The single doubly occupied orbital makes the density rank one, so the Fock
build reduces to one pass over the packed two-electron store (Coulomb vector
in pair space plus a half-exchanged intermediate); no four-index tensor is
ever materialized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import integrals
from ._kernels import HAVE_NUMBA, jk_packed_kernel

_log = logging.getLogger(__name__)

LIN_DEP_THRESHOLD = 1e-7


class ERIStore:
    """Exact electron-repulsion integrals packed over unordered function
    pairs: a symmetric (npair, npair) matrix, npair = N(N+1)/2.
    """

    def __init__(self, v2: np.ndarray, n: int):
        npair = n * (n + 1) // 2
        if v2.shape != (npair, npair):
            raise ValueError(f"store shape {v2.shape} does not match n={n}")
        self.v2 = v2
        self.n = n
        self.pid = integrals.pair_index_table(n)
        iu, ju = np.triu_indices(n)
        self._qi = iu.astype(np.int64)
        self._qj = ju.astype(np.int64)

    @classmethod
    def build(cls, flat, screen: float = 1e-12) -> "ERIStore":
        return cls(integrals.assemble_eri_packed(flat, screen=screen), flat.nfun)

    @classmethod
    def zeros(cls, n: int) -> "ERIStore":
        npair = n * (n + 1) // 2
        return cls(np.zeros((npair, npair)), n)

    def value(self, i, j, k, l) -> float:
        """Single integral (ij|kl) in chemist notation."""
        return float(self.v2[self.pid[i, j], self.pid[k, l]])

    def coulomb_exchange(self, c: np.ndarray):
        """J and K for the rank-one density c c^dag.

        J is real symmetric, K hermitian; (2J - K) c = J c identically.
        """
        c = np.ascontiguousarray(c, np.complex128)
        d = c[self._qi] * c[self._qj].conj()
        dpack = 2.0 * d.real
        dpack[self._qi == self._qj] *= 0.5
        if HAVE_NUMBA:
            jp, G = jk_packed_kernel(self.v2, self._qi, self._qj, dpack, c)
        else:
            jp, G = self._jk_numpy(dpack, c)
        J = jp[self.pid]
        K = np.einsum("l,mln->mn", c, G[self.pid])
        return J, 0.5 * (K + K.conj().T)

    def _jk_numpy(self, dpack, c):
        # fallback: row-gathered pair blocks, one function at a time
        n = self.n
        jp = self.v2 @ dpack
        G = np.empty((self._qi.size, n), np.complex128)
        cc = c.conj()
        for b in range(n):
            G[:, b] = self.v2[:, self.pid[b]] @ cc
        return jp, G


@dataclass
class FockContext:
    """Core Hamiltonian (including any multiplicative field term) plus the
    two-electron store.
    """

    h: np.ndarray
    store: ERIStore

    def __post_init__(self):
        if self.h.shape != (self.store.n, self.store.n):
            raise ValueError("core matrix does not match the store dimension")


def fock_matrix(ctx: FockContext, c: np.ndarray) -> np.ndarray:
    """Restricted closed-shell Fock matrix F = h + 2J - K for the doubly
    occupied orbital c.
    """
    if c.shape != (ctx.store.n,):
        raise ValueError(f"coefficient shape {c.shape} does not match the store")
    J, K = ctx.store.coulomb_exchange(c)
    F = ctx.h + 2.0 * J - K
    return 0.5 * (F + F.conj().T)


def electronic_energy(ctx: FockContext, c: np.ndarray) -> float:
    """2 <c|h|c> + <c|J|c> (the closed-shell two-electron energy collapses to
    a single Coulomb term for a rank-one density).
    """
    J, _ = ctx.store.coulomb_exchange(c)
    return float(2.0 * np.vdot(c, ctx.h @ c).real + np.vdot(c, J @ c).real)


@dataclass
class SCFResult:
    energy: float          # total, including nuclear repulsion
    coeffs: np.ndarray
    orbital_energy: float
    n_iter: int
    converged: bool
    level_shift: float
    energies: np.ndarray   # iteration history of the total energy


def _orthogonalizer(S, threshold=LIN_DEP_THRESHOLD):
    s, U = np.linalg.eigh(S)
    keep = s > threshold * s[-1]
    return U[:, keep] / np.sqrt(s[keep])


def scf_ground_state(ctx: FockContext, S: np.ndarray, e_nn: float = 0.0, *,
                     e_conv: float = 1e-9, d_conv: float = 1e-7,
                     max_iter: int = 128, diis_depth: int = 8) -> SCFResult:
    """Self-consistent restricted ground state with DIIS; a level-shifted
    retry runs automatically if the plain cycle stalls.
    """
    X = _orthogonalizer(S)
    h = ctx.h

    def solve(F, shift, D):
        if shift:
            F = F + shift * (S - S @ D @ S)
        Fo = X.T.conj() @ F @ X
        eps, V = np.linalg.eigh(0.5 * (Fo + Fo.conj().T))
        return X @ V[:, 0], float(eps[0])

    last_exc = None
    for shift in (0.0, 0.5):
        eps0_F = 0.5 * (h + h.conj().T)
        D0 = np.zeros_like(S)
        c, eps0 = solve(eps0_F, 0.0, D0)
        D = np.outer(c, c.conj())
        e_prev = np.inf
        history = []
        diis_F, diis_err = [], []
        converged = False
        n_done = 0
        for it in range(1, max_iter + 1):
            n_done = it
            J, K = ctx.store.coulomb_exchange(c)
            F = h + 2.0 * J - K
            F = 0.5 * (F + F.conj().T)
            energy = float(2.0 * np.vdot(c, h @ c).real
                           + np.vdot(c, J @ c).real) + e_nn
            history.append(energy)

            err = X.T.conj() @ (F @ D @ S - S @ D @ F) @ X
            diis_F.append(F)
            diis_err.append(err.ravel())
            if len(diis_F) > diis_depth:
                diis_F.pop(0)
                diis_err.pop(0)
            F_use = F
            if len(diis_F) >= 2:
                ne = len(diis_err)
                B = np.empty((ne + 1, ne + 1))
                B[-1, :] = B[:, -1] = -1.0
                B[-1, -1] = 0.0
                for a in range(ne):
                    for b in range(ne):
                        B[a, b] = np.vdot(diis_err[a], diis_err[b]).real
                rhs = np.zeros(ne + 1)
                rhs[-1] = -1.0
                try:
                    w = np.linalg.solve(B, rhs)[:ne]
                    F_use = sum(wi * Fi for wi, Fi in zip(w, diis_F))
                    F_use = 0.5 * (F_use + F_use.conj().T)
                except np.linalg.LinAlgError:
                    pass

            c_new, orb = solve(F_use, shift, D)
            D_new = np.outer(c_new, c_new.conj())
            d_change = float(np.abs(D_new - D).max())
            e_change = abs(energy - e_prev)
            c, D, e_prev = c_new, D_new, energy
            if e_change < e_conv and d_change < d_conv:
                converged = True
                break

        if converged:
            J, _ = ctx.store.coulomb_exchange(c)
            energy = float(2.0 * np.vdot(c, h @ c).real
                           + np.vdot(c, J @ c).real) + e_nn
            _, orb = solve(fock_matrix(ctx, c), 0.0, D)
            if shift:
                _log.warning("SCF converged only with level shift %.2f", shift)
            return SCFResult(energy=energy, coeffs=c, orbital_energy=orb,
                             n_iter=n_done, converged=True, level_shift=shift,
                             energies=np.asarray(history))
        last_exc = RuntimeError(
            f"SCF not converged after {max_iter} iterations "
            f"(level shift {shift}, last dE={e_change:.2e}, dD={d_change:.2e})")
        _log.warning("%s", last_exc)
    raise last_exc


def make_heff_builder(store: ERIStore):
    """Adapter for the propagation loop: returns builder(m, efield, coeffs)
    -> (F, energy_correction). The correction turns the doubled mean-field
    expectation 2<c|F|c> into the true electronic energy 2<c|h|c> + <c|J|c>.
    """

    def builder(m, efield, coeffs):
        c = coeffs[0] if coeffs.ndim == 2 else coeffs
        c = np.asarray(c, np.complex128)
        J, K = store.coulomb_exchange(c)
        h = m.T + m.V
        for k in range(3):
            if efield[k] != 0.0:
                h = h + efield[k] * m.D[k]
        F = h + 2.0 * J - K
        return 0.5 * (F + F.conj().T), -float(np.vdot(c, J @ c).real)

    return builder
