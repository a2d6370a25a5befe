"""Compiled primitive-pair kernels for the per-step matrix assembly.

The propagation loop rebuilds S, T, V, D and the nuclear-velocity coupling at
every step, so these run in a single fused pass over unique primitive pairs.
Falls back to the pure-numpy assembly in integrals.py when numba is missing;
equality of the two paths is enforced by the test suite.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco


@njit(cache=True)
def _boys_fill(nmax, x, F):
    """Boys F_0..F_nmax at scalar x into F; same branches as boys_array."""
    if x < 35.0:
        ex = math.exp(-x)
        term = 1.0 / (2.0 * nmax + 1.0)
        acc = term
        k = 0
        while True:
            term *= x / (nmax + k + 1.5)
            acc += term
            k += 1
            if term < 1e-17 * acc or k > 200:
                break
        F[nmax] = acc * ex
        for n in range(nmax - 1, -1, -1):
            F[n] = (2.0 * x * F[n + 1] + ex) / (2 * n + 1)
    else:
        F[0] = 0.5 * math.sqrt(math.pi / x)
        for n in range(nmax):
            F[n + 1] = (2 * n + 1) * F[n] / (2.0 * x)


@njit(cache=True)
def _fill_axis(E, la, jmax, p, mu, ab, pa, pb):
    """Hermite coefficients E[i, j, t] for one axis, i <= la, j <= jmax."""
    for i in range(la + 1):
        for j in range(jmax + 1):
            for t in range(7):
                E[i, j, t] = 0.0
    E[0, 0, 0] = math.exp(-mu * ab * ab)
    inv2p = 0.5 / p
    for i in range(la + 1):
        for j in range(jmax + 1):
            if i == 0 and j == 0:
                continue
            if j == 0:
                for t in range(i + j + 1):
                    v = pa * E[i - 1, 0, t] + (t + 1) * E[i - 1, 0, t + 1]
                    if t >= 1:
                        v += inv2p * E[i - 1, 0, t - 1]
                    E[i, 0, t] = v
            else:
                for t in range(i + j + 1):
                    v = pb * E[i, j - 1, t] + (t + 1) * E[i, j - 1, t + 1]
                    if t >= 1:
                        v += inv2p * E[i, j - 1, t - 1]
                    E[i, j, t] = v


@njit(cache=True)
def one_electron_kernel(alpha, pows, centers, anchors, nuc, Z, vel, want_b):
    """Primitive-level S, T, V, D (3 components about the origin) and the
    velocity coupling B_ij = sum_k vel[anchor_j, k] * d<i|j>/d(center_j)_k.

    Runs over unique pairs; the lower triangle follows from symmetry, for B
    from translation invariance (the ket-center derivative flips sign).
    """
    P = alpha.shape[0]
    nnuc = nuc.shape[0]
    S = np.zeros((P, P))
    T = np.zeros((P, P))
    V = np.zeros((P, P))
    D = np.zeros((3, P, P))
    B = np.zeros((P, P))
    E3 = np.empty((3, 3, 5, 7))
    F = np.empty(5)
    Ra = np.empty((5, 5, 5))
    Rb = np.empty((5, 5, 5))
    Pc = np.empty(3)
    e0 = np.empty(3)
    t1 = np.empty(3)
    g1 = np.empty(3)
    d1 = np.empty(3)

    for i in range(P):
        ai = alpha[i]
        for j in range(i, P):
            aj = alpha[j]
            p = ai + aj
            mu = ai * aj / p
            ltot = 0
            for k in range(3):
                A = centers[i, k]
                Bc = centers[j, k]
                Pk = (ai * A + aj * Bc) / p
                Pc[k] = Pk
                la = pows[i, k]
                lb = pows[j, k]
                ltot += la + lb
                _fill_axis(E3[k], la, lb + 2, p, mu, A - Bc, Pk - A, Pk - Bc)

            pref = (math.pi / p) ** 1.5
            for k in range(3):
                la = pows[i, k]
                lb = pows[j, k]
                Ek = E3[k]
                e0[k] = Ek[la, lb, 0]
                tv = -2.0 * aj * aj * Ek[la, lb + 2, 0] + aj * (2 * lb + 1) * Ek[la, lb, 0]
                if lb >= 2:
                    tv -= 0.5 * lb * (lb - 1) * Ek[la, lb - 2, 0]
                t1[k] = tv
                gv = 2.0 * aj * Ek[la, lb + 1, 0]
                if lb >= 1:
                    gv -= lb * Ek[la, lb - 1, 0]
                g1[k] = gv
                d1[k] = Ek[la, lb, 1] + Pc[k] * e0[k]

            sv = pref * e0[0] * e0[1] * e0[2]
            S[i, j] = sv
            S[j, i] = sv
            tv = pref * (t1[0] * e0[1] * e0[2] + e0[0] * t1[1] * e0[2]
                         + e0[0] * e0[1] * t1[2])
            T[i, j] = tv
            T[j, i] = tv
            for k in range(3):
                o1 = (k + 1) % 3
                o2 = (k + 2) % 3
                dv = pref * d1[k] * e0[o1] * e0[o2]
                D[k, i, j] = dv
                D[k, j, i] = dv

            if want_b:
                anc_j = anchors[j]
                anc_i = anchors[i]
                for k in range(3):
                    o1 = (k + 1) % 3
                    o2 = (k + 2) % 3
                    gv = pref * g1[k] * e0[o1] * e0[o2]
                    if anc_j >= 0:
                        B[i, j] += vel[anc_j, k] * gv
                    if anc_i >= 0 and j > i:
                        B[j, i] -= vel[anc_i, k] * gv

            # nuclear attraction via Hermite Coulomb recursion per nucleus
            vsum = 0.0
            lx = pows[i, 0] + pows[j, 0]
            ly = pows[i, 1] + pows[j, 1]
            lz = pows[i, 2] + pows[j, 2]
            for A in range(nnuc):
                dx = Pc[0] - nuc[A, 0]
                dy = Pc[1] - nuc[A, 1]
                dz = Pc[2] - nuc[A, 2]
                x = p * (dx * dx + dy * dy + dz * dz)
                _boys_fill(ltot, x, F)
                pw = 1.0
                for _ in range(ltot):
                    pw *= -2.0 * p
                Ra[0, 0, 0] = pw * F[ltot]
                for n in range(ltot - 1, -1, -1):
                    pw = 1.0
                    for _ in range(n):
                        pw *= -2.0 * p
                    Rb[0, 0, 0] = pw * F[n]
                    for s in range(1, ltot - n + 1):
                        for t in range(s + 1):
                            for u in range(s - t + 1):
                                v = s - t - u
                                if t >= 1:
                                    r = dx * Ra[t - 1, u, v]
                                    if t >= 2:
                                        r += (t - 1) * Ra[t - 2, u, v]
                                elif u >= 1:
                                    r = dy * Ra[t, u - 1, v]
                                    if u >= 2:
                                        r += (u - 1) * Ra[t, u - 2, v]
                                else:
                                    r = dz * Ra[t, u, v - 1]
                                    if v >= 2:
                                        r += (v - 1) * Ra[t, u, v - 2]
                                Rb[t, u, v] = r
                    tmp = Ra
                    Ra = Rb
                    Rb = tmp
                acc = 0.0
                for t in range(lx + 1):
                    et = E3[0, pows[i, 0], pows[j, 0], t]
                    if et == 0.0:
                        continue
                    for u in range(ly + 1):
                        eu = et * E3[1, pows[i, 1], pows[j, 1], u]
                        if eu == 0.0:
                            continue
                        for w in range(lz + 1):
                            ew = E3[2, pows[i, 2], pows[j, 2], w]
                            if ew != 0.0:
                                acc += eu * ew * Ra[t, u, w]
                vsum -= Z[A] * acc
            vv = (2.0 * math.pi / p) * vsum
            V[i, j] = vv
            V[j, i] = vv

    return S, T, V, D, B


@njit(cache=True)
def jk_packed_kernel(V2, qi, qj, dpack, c):
    """One pass over the packed two-electron store: Coulomb vector in pair
    space and the half-exchanged intermediate G[p, b] = sum_s c*_s V2[p, (b,s)].

    qi/qj give the function indices of each unordered pair. Only the upper
    triangle of V2 is read; symmetric contributions are accumulated for both
    sides. Screened-out zeros are skipped.
    """
    npair = V2.shape[0]
    n = c.size
    jp = np.zeros(npair)
    G = np.zeros((npair, n), np.complex128)
    cc = np.conj(c)
    for p in range(npair):
        row = V2[p]
        m = qi[p]
        l = qj[p]
        dp = dpack[p]
        ccl = cc[l]
        ccm = cc[m]
        for q in range(p, npair):
            v = row[q]
            if v == 0.0:
                continue
            nq = qi[q]
            sq = qj[q]
            jp[p] += v * dpack[q]
            G[p, nq] += v * cc[sq]
            if nq != sq:
                G[p, sq] += v * cc[nq]
            if q != p:
                jp[q] += v * dp
                G[q, m] += v * ccl
                if m != l:
                    G[q, l] += v * ccm
    return jp, G
