"""Instantaneous eigenstates of the effective Hamiltonian in a nonorthogonal
basis, used as the frame the absorbing potential is built in.

The generalized problem (H - eps S) u = 0 is solved by canonical
orthogonalization; near-degenerate overlap directions below the threshold are
dropped, so all transforms act on the retained subspace only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

LIN_DEP_THRESHOLD = 1e-7

_log = logging.getLogger(__name__)


@dataclass
class AdiabaticFrame:
    """Eigenpairs of (H, S). Row a of U expands state a in the local basis,
    so U S U^dag = I on the retained subspace.
    """

    energies: np.ndarray   # (M,) ascending
    U: np.ndarray          # (M, N)
    S: np.ndarray          # (N, N) overlap this frame was built with
    X: np.ndarray          # (N, M) canonical orthogonalizer, S^-1 ~ X X^T
    n_dropped: int

    @property
    def n_states(self):
        return self.energies.size

    def to_adiabatic(self, a_local: np.ndarray) -> np.ndarray:
        """a_a = sum_{bc} U*_{ab} S_{bc} a_c."""
        return self.U.conj() @ (self.S @ a_local)

    def from_adiabatic(self, a_ad: np.ndarray) -> np.ndarray:
        return self.U.T @ a_ad

    def operator_to_local(self, O_ad: np.ndarray) -> np.ndarray:
        """O_local = S U^T O U* S for an operator given in the eigenbasis."""
        return self.S @ (self.U.T @ O_ad @ self.U.conj()) @ self.S

    def apply_sinv(self, v: np.ndarray) -> np.ndarray:
        """S^-1 v restricted to the retained subspace."""
        return self.X @ (self.X.T @ v)


def solve_field_following(H: np.ndarray, S: np.ndarray,
                          lin_dep_threshold: float = LIN_DEP_THRESHOLD) -> AdiabaticFrame:
    """Diagonalize the (possibly field-dressed) Hamiltonian in the current
    basis. Ordering is ascending in energy; degenerate states span a
    well-defined subspace, which is all downstream projectors depend on.
    """
    if H.shape != S.shape or H.shape[0] != H.shape[1]:
        raise ValueError(f"H {H.shape} and S {S.shape} must be square and equal")
    s, Us = eigh(S)
    if s[0] < -lin_dep_threshold * s[-1]:
        raise ValueError(f"overlap indefinite: lowest eigenvalue {s[0]:.3e}")
    keep = s > lin_dep_threshold * s[-1]
    X = Us[:, keep] / np.sqrt(s[keep])
    Hp = X.T @ H @ X
    Hp = 0.5 * (Hp + Hp.conj().T)
    eps, C = eigh(Hp)
    U = (X @ C).T
    frame = AdiabaticFrame(energies=eps, U=U, S=S, X=X, n_dropped=int((~keep).sum()))
    if frame.n_dropped:
        _log.debug("dropped %d near-dependent overlap directions, kept %d",
                   frame.n_dropped, frame.n_states)
    return frame
