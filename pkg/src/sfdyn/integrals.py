"""Analytic integrals over Cartesian Gaussians via Hermite (McMurchie-Davidson)
expansion: overlap, kinetic, nuclear attraction, dipole, center gradients and
two-electron repulsion. Scalar functions operate on basis.Gaussian pairs;
assemble_* build whole matrices vectorized over primitive pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT_PI = math.sqrt(math.pi)
_BOYS_SWITCH = 35.0  # series below, asymptotic above; validated against quadrature


def boys_array(nmax: int, x: np.ndarray) -> np.ndarray:
    """Boys functions F_0..F_nmax, shape (nmax+1, len(x)).

    Series at the highest order with downward recursion for x < 35,
    closed asymptotic form with upward recursion above (the e^-x terms
    are below double precision there).
    """
    x = np.atleast_1d(np.asarray(x, float))
    out = np.empty((nmax + 1, x.size))
    small = x < _BOYS_SWITCH
    if small.any():
        xs = x[small]
        ex = np.exp(-xs)
        term = np.full(xs.shape, 1.0 / (2 * nmax + 1))
        acc = term.copy()
        for k in range(200):
            term = term * xs / (nmax + k + 1.5)
            acc += term
            if term.max(initial=0.0) < 1e-17 * acc.max(initial=1.0):
                break
        out[nmax][small] = acc * ex
        for n in range(nmax - 1, -1, -1):
            acc = (2.0 * xs * out[n + 1][small] + ex) / (2 * n + 1)
            out[n][small] = acc
    big = ~small
    if big.any():
        xb = x[big]
        out[0][big] = 0.5 * np.sqrt(np.pi / xb)
        for n in range(nmax):
            out[n + 1][big] = (2 * n + 1) * out[n][big] / (2.0 * xb)
    return out


def boys(n: int, x: float) -> float:
    return float(boys_array(n, np.array([x]))[n, 0])


def hermite_tables(imax: int, jmax: int, a, b, ab) -> np.ndarray:
    """Hermite expansion coefficients E_t^{ij} along one axis.

    a, b: exponents; ab: A - B center difference. All may be arrays of equal
    shape; the result has shape (imax+1, jmax+1, imax+jmax+1) + a.shape.
    Entries with t > i + j stay exactly zero.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ab = np.asarray(ab, float)
    p = a + b
    E = np.zeros((imax + 1, jmax + 1, imax + jmax + 1) + a.shape)
    E[0, 0, 0] = np.exp(-(a * b / p) * ab * ab)
    inv2p = 0.5 / p
    pa = -b * ab / p
    pb = a * ab / p
    tmax = imax + jmax
    for i in range(imax + 1):
        for j in range(jmax + 1):
            if i == 0 and j == 0:
                continue
            if j == 0:
                src, X = E[i - 1, 0], pa
            else:
                src, X = E[i, j - 1], pb
            dst = E[i, j]
            for t in range(i + j + 1):
                v = X * src[t]
                if t >= 1:
                    v = v + inv2p * src[t - 1]
                if t + 1 <= tmax:
                    v = v + (t + 1) * src[t + 1]
                dst[t] = v
    return E


def _hermite_coulomb(ltot: int, theta, pq, x) -> dict:
    """Hermite Coulomb integrals R^0_{tuv} for t+u+v <= ltot as a dict over
    (t, u, v) of arrays. theta: combined exponent, pq: (3, n) center
    difference, x: theta * |pq|^2.
    """
    F = boys_array(ltot, x)
    level = {(0, 0, 0): ((-2.0 * theta) ** ltot) * F[ltot]}
    for n in range(ltot - 1, -1, -1):
        cur = {(0, 0, 0): ((-2.0 * theta) ** n) * F[n]}
        for s in range(1, ltot - n + 1):
            for t in range(s + 1):
                for u in range(s - t + 1):
                    v = s - t - u
                    if t >= 1:
                        r = pq[0] * level.get((t - 1, u, v), 0.0)
                        if t >= 2:
                            r = r + (t - 1) * level.get((t - 2, u, v), 0.0)
                    elif u >= 1:
                        r = pq[1] * level.get((t, u - 1, v), 0.0)
                        if u >= 2:
                            r = r + (u - 1) * level.get((t, u - 2, v), 0.0)
                    else:
                        r = pq[2] * level.get((t, u, v - 1), 0.0)
                        if v >= 2:
                            r = r + (v - 1) * level.get((t, u, v - 2), 0.0)
                    cur[(t, u, v)] = r
        level = cur
    return level


# ---------------------------------------------------------------------------
# scalar operations on Gaussian pairs (reference path)

def _pair_tables(ta, tb, ca, cb, jextra=0):
    (_, aa, *la), (_, ab, *lb) = ta, tb
    E = [hermite_tables(la[k], lb[k] + jextra, np.float64(aa), np.float64(ab),
                        np.float64(ca[k] - cb[k])) for k in range(3)]
    return aa, ab, la, lb, E


def overlap(ga, gb) -> float:
    """<a|b> including contraction coefficients."""
    acc = 0.0
    for ta in ga.terms:
        for tb in gb.terms:
            aa, ab, la, lb, E = _pair_tables(ta, tb, ga.center, gb.center)
            p = aa + ab
            v = (math.pi / p) ** 1.5
            for k in range(3):
                v *= E[k][la[k], lb[k], 0]
            acc += ta[0] * tb[0] * v
    return float(acc)


def kinetic(ga, gb) -> float:
    """<a| -1/2 laplacian |b>."""
    acc = 0.0
    for ta in ga.terms:
        for tb in gb.terms:
            aa, ab, la, lb, E = _pair_tables(ta, tb, ga.center, gb.center, jextra=2)
            p = aa + ab
            pref = (math.pi / p) ** 1.5

            def s1d(k, di=0, dj=0):
                j = lb[k] + dj
                if j < 0:
                    return 0.0
                return E[k][la[k] + di, j, 0]

            def t1d(k):
                j = lb[k]
                v = -2.0 * ab * ab * s1d(k, dj=2) + ab * (2 * j + 1) * s1d(k)
                if j >= 2:
                    v -= 0.5 * j * (j - 1) * s1d(k, dj=-2)
                return v

            v = (t1d(0) * s1d(1) * s1d(2) + s1d(0) * t1d(1) * s1d(2)
                 + s1d(0) * s1d(1) * t1d(2))
            acc += ta[0] * tb[0] * pref * v
    return float(acc)


def dipole(ga, gb, component: int) -> float:
    """<a| r_k |b> about the coordinate origin."""
    acc = 0.0
    for ta in ga.terms:
        for tb in gb.terms:
            aa, ab, la, lb, E = _pair_tables(ta, tb, ga.center, gb.center)
            p = aa + ab
            P = [(aa * ga.center[k] + ab * gb.center[k]) / p for k in range(3)]
            pref = (math.pi / p) ** 1.5
            v = pref
            for k in range(3):
                if k == component:
                    e = E[k][la[k], lb[k]]
                    first = e[1] if la[k] + lb[k] >= 1 else 0.0
                    v *= first + P[k] * e[0]
                else:
                    v *= E[k][la[k], lb[k], 0]
            acc += ta[0] * tb[0] * v
    return float(acc)


def grad_overlap(ga, gb) -> np.ndarray:
    """d<a|b>/dB: derivative with respect to the ket center, shape (3,)."""
    out = np.zeros(3)
    for ta in ga.terms:
        for tb in gb.terms:
            aa, ab, la, lb, E = _pair_tables(ta, tb, ga.center, gb.center, jextra=1)
            p = aa + ab
            pref = (math.pi / p) ** 1.5

            def s1d(k, dj=0):
                j = lb[k] + dj
                if j < 0:
                    return 0.0
                return E[k][la[k], j, 0]

            for k in range(3):
                gk = 2.0 * ab * s1d(k, dj=1) - lb[k] * s1d(k, dj=-1)
                v = pref * gk
                for k2 in range(3):
                    if k2 != k:
                        v *= s1d(k2)
                out[k] += ta[0] * tb[0] * v
    return out


def nuclear_attraction(ga, gb, rc, charge: float) -> float:
    """<a| -Z/|r - C| |b> for a nucleus of charge Z at rc."""
    acc = 0.0
    rc = np.asarray(rc, float)
    for ta in ga.terms:
        for tb in gb.terms:
            aa, ab, la, lb, E = _pair_tables(ta, tb, ga.center, gb.center)
            p = aa + ab
            P = np.array([(aa * ga.center[k] + ab * gb.center[k]) / p for k in range(3)])
            pc = P - rc
            ltot = sum(la) + sum(lb)
            R = _hermite_coulomb(ltot, np.float64(p), pc.reshape(3, 1),
                                 np.atleast_1d(p * float(pc @ pc)))
            v = 0.0
            for t in range(la[0] + lb[0] + 1):
                for u in range(la[1] + lb[1] + 1):
                    for w in range(la[2] + lb[2] + 1):
                        v += (E[0][la[0], lb[0], t] * E[1][la[1], lb[1], u]
                              * E[2][la[2], lb[2], w] * float(R[(t, u, w)][0]))
            acc += ta[0] * tb[0] * (2.0 * math.pi / p) * v
    return float(-charge * acc)


def eri(ga, gb, gc, gd) -> float:
    """Two-electron repulsion (ab|cd) in chemists' notation."""
    acc = 0.0
    for ta in ga.terms:
        for tb in gb.terms:
            aa, ab, la, lb, Eb = _pair_tables(ta, tb, ga.center, gb.center)
            p = aa + ab
            P = np.array([(aa * ga.center[k] + ab * gb.center[k]) / p for k in range(3)])
            for tc in gc.terms:
                for td in gd.terms:
                    ac, ad, lc, ld, Ek = _pair_tables(tc, td, gc.center, gd.center)
                    q = ac + ad
                    Q = np.array([(ac * gc.center[k] + ad * gd.center[k]) / q
                                  for k in range(3)])
                    theta = p * q / (p + q)
                    pq = P - Q
                    ltot = sum(la) + sum(lb) + sum(lc) + sum(ld)
                    R = _hermite_coulomb(ltot, np.float64(theta), pq.reshape(3, 1),
                                         np.atleast_1d(theta * float(pq @ pq)))
                    pref = 2.0 * math.pi ** 2.5 / (p * q * math.sqrt(p + q))
                    v = 0.0
                    for t in range(la[0] + lb[0] + 1):
                        for u in range(la[1] + lb[1] + 1):
                            for w in range(la[2] + lb[2] + 1):
                                eb = (Eb[0][la[0], lb[0], t] * Eb[1][la[1], lb[1], u]
                                      * Eb[2][la[2], lb[2], w])
                                if eb == 0.0:
                                    continue
                                for tt in range(lc[0] + ld[0] + 1):
                                    for uu in range(lc[1] + ld[1] + 1):
                                        for ww in range(lc[2] + ld[2] + 1):
                                            ek = (Ek[0][lc[0], ld[0], tt]
                                                  * Ek[1][lc[1], ld[1], uu]
                                                  * Ek[2][lc[2], ld[2], ww])
                                            if ek == 0.0:
                                                continue
                                            sgn = -1.0 if (tt + uu + ww) % 2 else 1.0
                                            v += eb * ek * sgn * float(
                                                R[(t + tt, u + uu, w + ww)][0])
                    acc += ta[0] * tb[0] * tc[0] * td[0] * pref * v
    return float(acc)


# ---------------------------------------------------------------------------
# vectorized whole-matrix assembly

@dataclass
class OneElectronMatrices:
    S: np.ndarray                  # (N, N) overlap
    T: np.ndarray                  # (N, N) kinetic
    V: np.ndarray                  # (N, N) nuclear attraction (all nuclei, sign included)
    D: np.ndarray                  # (3, N, N) dipole about the origin
    GS: np.ndarray | None = None   # (n_nuc, 3, N, N) d<a|b>/dR_A, ket anchored to A
    B: np.ndarray | None = None    # (N, N) sum_A Rdot_A . GS_A, ket derivative


def assemble_one_electron(flat, nuc_pos, nuc_charge) -> OneElectronMatrices:
    """All one-electron matrices for a FlatBasis at the given nuclear
    geometry, contracted to the function level.
    """
    nuc_pos = np.asarray(nuc_pos, float).reshape(-1, 3)
    nuc_charge = np.asarray(nuc_charge, float)
    P = len(flat.alpha)
    ii, jj = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    a = flat.alpha[ii]
    b = flat.alpha[jj]
    p = a + b
    la = flat.pows[ii]
    lb = flat.pows[jj]
    ca = flat.center[ii]
    cb = flat.center[jj]
    Pc = (a[:, None] * ca + b[:, None] * cb) / p[:, None]

    # per-axis Hermite tables up to i<=2, j<=4 (kinetic needs j+2)
    E = [hermite_tables(2, 4, a, b, ca[:, k] - cb[:, k]) for k in range(3)]
    idx = np.arange(ii.size)

    def e(kax, di=0, dj=0, t=0):
        i = la[:, kax] + di
        j = lb[:, kax] + dj
        ok = (j >= 0) & (i >= 0)
        v = np.zeros(ii.size)
        v[ok] = E[kax][i[ok], j[ok], t, idx[ok]]
        return v

    pref = (np.pi / p) ** 1.5
    e0 = [e(k) for k in range(3)]

    S = pref * e0[0] * e0[1] * e0[2]

    def t1d(k):
        j = lb[:, k]
        v = -2.0 * b * b * e(k, dj=2) + b * (2 * j + 1) * e0[k]
        v -= 0.5 * j * (j - 1) * e(k, dj=-2)
        return v

    T = pref * (t1d(0) * e0[1] * e0[2] + e0[0] * t1d(1) * e0[2] + e0[0] * e0[1] * t1d(2))

    D = np.empty((3, ii.size))
    for k in range(3):
        v = e(k, t=1) + Pc[:, k] * e0[k]
        for k2 in range(3):
            if k2 != k:
                v = v * e0[k2]
        D[k] = pref * v

    G = np.empty((3, ii.size))
    for k in range(3):
        v = 2.0 * b * e(k, dj=1) - lb[:, k] * e(k, dj=-1)
        for k2 in range(3):
            if k2 != k:
                v = v * e0[k2]
        G[k] = pref * v

    Vm = np.zeros(ii.size)
    for A in range(len(nuc_pos)):
        pc = Pc - nuc_pos[A]
        x = p * np.einsum("ij,ij->i", pc, pc)
        R = _hermite_coulomb(4, p, pc.T, x)
        acc = np.zeros(ii.size)
        for t in range(5):
            ex = e(0, t=t)
            if not ex.any():
                continue
            for u in range(5 - t):
                ey = e(1, t=u)
                exy = ex * ey
                if not exy.any():
                    continue
                for w in range(5 - t - u):
                    acc += exy * e(2, t=w) * R[(t, u, w)]
        Vm -= nuc_charge[A] * (2.0 * np.pi / p) * acc

    C = flat.contraction_matrix

    def contract(vals):
        M = vals.reshape(P, P)
        return C.T @ M @ C

    Sm = contract(S)
    Tm = contract(T)
    Vnm = contract(Vm)
    Sm = 0.5 * (Sm + Sm.T)
    Tm = 0.5 * (Tm + Tm.T)
    Vnm = 0.5 * (Vnm + Vnm.T)
    Dm = np.stack([contract(D[k]) for k in range(3)])
    Dm = 0.5 * (Dm + Dm.transpose(0, 2, 1))

    n_nuc = len(nuc_pos)
    GS = np.zeros((n_nuc, 3, flat.nfun, flat.nfun))
    ket_anchor = flat.anchor[jj]
    for A in range(n_nuc):
        mask = (ket_anchor == A).astype(float)
        for k in range(3):
            GS[A, k] = contract(G[k] * mask)
    return OneElectronMatrices(S=Sm, T=Tm, V=Vnm, D=Dm, GS=GS)


def assemble_step(flat, nuc_pos, nuc_charge, velocities=None) -> OneElectronMatrices:
    """Per-step matrices for the propagation loop: S, T, V, D and, when
    nuclear velocities are given, the coupling B_ab = sum_A Rdot_A . dS/dR_A
    with the ket anchored to A. Uses the compiled pair kernel when available;
    otherwise the reference assembly.
    """
    from . import _kernels

    pos = np.asarray(nuc_pos, float).reshape(-1, 3)
    if not _kernels.HAVE_NUMBA:
        m = assemble_one_electron(flat.at_geometry(pos), pos, nuc_charge)
        B = None
        if velocities is not None:
            B = np.einsum("ak,akij->ij", np.asarray(velocities, float), m.GS)
        return OneElectronMatrices(S=m.S, T=m.T, V=m.V, D=m.D, GS=m.GS, B=B)

    centers = flat.center.copy()
    anchored = flat.anchor >= 0
    centers[anchored] = pos[flat.anchor[anchored]]
    vel = (np.zeros_like(pos) if velocities is None
           else np.asarray(velocities, float).reshape(-1, 3))
    Sp, Tp, Vp, Dp, Bp = _kernels.one_electron_kernel(
        flat.alpha, flat.pows, centers, flat.anchor, pos,
        np.asarray(nuc_charge, float), vel, velocities is not None)
    C = flat.contraction_matrix

    def contract(M):
        return C.T @ M @ C

    return OneElectronMatrices(
        S=contract(Sp), T=contract(Tp), V=contract(Vp),
        D=np.stack([contract(Dp[k]) for k in range(3)]),
        GS=None,
        B=contract(Bp) if velocities is not None else None,
    )


# ---------------------------------------------------------------------------
# two-electron assembly: function pairs share one center/exponent, so each
# contracted pair collapses to a single Hermite charge distribution

def _pair_data(flat):
    """Per unordered function pair: exponent p, center P, Hermite coefficient
    block (5,5,5) and total order. Requires every function to be a
    single-center, single-exponent contraction.
    """
    nf = flat.nfun
    f_alpha = np.empty(nf)
    f_center = np.empty((nf, 3))
    f_terms: list[list[int]] = [[] for _ in range(nf)]
    for prim, f in enumerate(flat.func):
        f_terms[f].append(prim)
    for f, prims in enumerate(f_terms):
        al = {flat.alpha[p] for p in prims}
        if len(al) != 1:
            raise NotImplementedError(
                "two-electron assembly requires single-width basis functions")
        f_alpha[f] = al.pop()
        f_center[f] = flat.center[prims[0]]

    iu, ju = np.triu_indices(nf)
    npair = iu.size
    a = f_alpha[iu]
    b = f_alpha[ju]
    p = a + b
    Pc = (a[:, None] * f_center[iu] + b[:, None] * f_center[ju]) / p[:, None]

    lmax_f = np.zeros(nf, int)
    for f, prims in enumerate(f_terms):
        lmax_f[f] = max(flat.pows[p].sum() for p in prims)
    Lpair = lmax_f[iu] + lmax_f[ju]

    Eblk = np.zeros((npair, 5, 5, 5))
    # fill per primitive pair, vectorized over the pair list for each
    # (bra-term, ket-term) slot combination
    max_terms = max(len(t) for t in f_terms)
    for sa in range(max_terms):
        for sb in range(max_terms):
            rows = [(k, f_terms[i][sa], f_terms[j][sb])
                    for k, (i, j) in enumerate(zip(iu, ju))
                    if sa < len(f_terms[i]) and sb < len(f_terms[j])]
            if not rows:
                continue
            kk = np.array([r[0] for r in rows])
            pa = np.array([r[1] for r in rows])
            pb = np.array([r[2] for r in rows])
            aa = flat.alpha[pa]
            ab = flat.alpha[pb]
            cc = flat.coef[pa] * flat.coef[pb]
            la = flat.pows[pa]
            lb = flat.pows[pb]
            Et = [hermite_tables(2, 2, aa, ab,
                                 flat.center[pa][:, k2] - flat.center[pb][:, k2])
                  for k2 in range(3)]
            r = np.arange(kk.size)
            for t in range(5):
                ex = np.zeros(kk.size)
                ok = t <= la[:, 0] + lb[:, 0]
                ex[ok] = Et[0][la[ok, 0], lb[ok, 0], t, r[ok]]
                if not ex.any():
                    continue
                for u in range(5 - t):
                    ey = np.zeros(kk.size)
                    ok = u <= la[:, 1] + lb[:, 1]
                    ey[ok] = Et[1][la[ok, 1], lb[ok, 1], u, r[ok]]
                    exy = ex * ey
                    if not exy.any():
                        continue
                    for w in range(5 - t - u):
                        ez = np.zeros(kk.size)
                        ok = w <= la[:, 2] + lb[:, 2]
                        ez[ok] = Et[2][la[ok, 2], lb[ok, 2], w, r[ok]]
                        np.add.at(Eblk, (kk, t, u, w), cc * exy * ez)
    return iu, ju, p, Pc, Lpair, Eblk


def _box(L):
    return [(t, u, v) for t in range(L + 1) for u in range(L + 1 - t)
            for v in range(L + 1 - t - u)]


def _eri_quartet_loop(flat, screen, emit):
    """Drive the screened unique-quartet evaluation; emit(bi, ki, vals) gets
    global unordered-pair indices (ket >= bra within an L class).
    """
    iu, ju, p, Pc, Lpair, Eblk = _pair_data(flat)
    npair = iu.size

    # diagonal quartets (P|P) for screening
    qdiag = np.empty(npair)
    for L in range(int(Lpair.max()) + 1):
        sel = np.where(Lpair == L)[0]
        if sel.size == 0:
            continue
        EL = Eblk[:, :L + 1, :L + 1, :L + 1]
        vals = _quartet_values(p[sel], Pc[sel], EL[sel], L,
                               p[sel], Pc[sel], EL[sel], L)
        qdiag[sel] = np.abs(vals)
    qs = np.sqrt(qdiag)

    order = np.argsort(Lpair, kind="stable")
    classes = {}
    for L in range(int(Lpair.max()) + 1):
        sel = order[Lpair[order] == L]
        if sel.size:
            classes[L] = sel

    for Lb, selb in classes.items():
        # only the sub-block up to the class order is read downstream; copy
        # that slice per chunk, not the full (5,5,5) block
        Ebv = Eblk[:, :Lb + 1, :Lb + 1, :Lb + 1]
        for Lk, selk in classes.items():
            if Lk < Lb:
                continue
            Ekv = Eblk[:, :Lk + 1, :Lk + 1, :Lk + 1]
            nterms = max(1, len(_box(Lb)) * len(_box(Lk)))
            blockwords = (Lb + 1) ** 3 + (Lk + 1) ** 3
            # quartet count per block = bra chunk x ket chunk; budget the
            # temporaries to a few hundred MB
            qmax = max(40_000, 25_000_000 // (nterms + blockwords))
            chunk = max(200, int(math.isqrt(qmax)))
            for i0 in range(0, selb.size, chunk):
                bsel = selb[i0:i0 + chunk]
                # unique pair-of-pairs: for the diagonal class pair restrict
                # the ket side to ket >= bra by global pair index
                for j0 in range(0, selk.size, chunk):
                    ksel = selk[j0:j0 + chunk]
                    bi, ki = np.meshgrid(bsel, ksel, indexing="ij")
                    bi = bi.ravel()
                    ki = ki.ravel()
                    keep = ki >= bi if Lb == Lk else np.ones(bi.size, bool)
                    keep &= qs[bi] * qs[ki] >= screen
                    bi = bi[keep]
                    ki = ki[keep]
                    if bi.size == 0:
                        continue
                    vals = _quartet_values(p[bi], Pc[bi], Ebv[bi], Lb,
                                           p[ki], Pc[ki], Ekv[ki], Lk)
                    emit(bi, ki, vals)
    return iu, ju


def assemble_eri(flat, dtype=np.float64, screen=1e-12) -> np.ndarray:
    """Full (N,N,N,N) two-electron tensor with exact 8-fold symmetry in
    storage. Quartets are screened by the Cauchy-Schwarz bound.
    """
    nf = flat.nfun
    V4 = np.zeros((nf, nf, nf, nf), dtype=dtype)
    iu, ju = np.triu_indices(nf)

    def emit(bi, ki, vals):
        _scatter(V4, iu[bi], ju[bi], iu[ki], ju[ki], vals.astype(dtype))

    _eri_quartet_loop(flat, screen, emit)
    return V4


def assemble_eri_packed(flat, screen=1e-12) -> np.ndarray:
    """Two-electron tensor packed over unordered function pairs: a symmetric
    (npair, npair) matrix with npair = N(N+1)/2, indexed by the row-major
    upper-triangle enumeration of (i <= j). Quarter the memory of the full
    tensor at full precision; bra/ket symmetry stored explicitly so a Fock
    build is a plain row gather.
    """
    nf = flat.nfun
    npair = nf * (nf + 1) // 2
    V2 = np.zeros((npair, npair))

    def emit(bi, ki, vals):
        V2[bi, ki] = vals
        V2[ki, bi] = vals

    _eri_quartet_loop(flat, screen, emit)
    return V2


def pair_index_table(nf: int) -> np.ndarray:
    """(nf, nf) int table mapping (i, j) to the packed unordered-pair index."""
    iu, ju = np.triu_indices(nf)
    pid = np.empty((nf, nf), np.int64)
    pid[iu, ju] = np.arange(iu.size)
    pid[ju, iu] = pid[iu, ju]
    return pid


def _quartet_values(pb, Pb, Eb, Lb, pk, Pk, Ek, Lk):
    theta = pb * pk / (pb + pk)
    pq = (Pb - Pk).T
    x = theta * np.einsum("ij,ij->j", pq, pq)
    R = _hermite_coulomb(Lb + Lk, theta, pq, x)
    pref = 2.0 * np.pi ** 2.5 / (pb * pk * np.sqrt(pb + pk))
    acc = np.zeros(pb.size)
    for (t, u, v) in _box(Lb):
        eb = Eb[:, t, u, v]
        if not eb.any():
            continue
        for (tt, uu, vv) in _box(Lk):
            ek = Ek[:, tt, uu, vv]
            if not ek.any():
                continue
            sgn = -1.0 if (tt + uu + vv) % 2 else 1.0
            acc += sgn * eb * ek * R[(t + tt, u + uu, v + vv)]
    return pref * acc


def _scatter(V4, i, j, k, l, vals):
    V4[i, j, k, l] = vals
    V4[j, i, k, l] = vals
    V4[i, j, l, k] = vals
    V4[j, i, l, k] = vals
    V4[k, l, i, j] = vals
    V4[l, k, i, j] = vals
    V4[k, l, j, i] = vals
    V4[l, k, j, i] = vals


# ---------------------------------------------------------------------------
# plain-text matrix dump

def dump_matrix(path, M):
    M = np.asarray(M)
    with open(path, "w") as fh:
        fh.write(f"# {M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(f"{x:.17e}" for x in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        rows, cols = int(header[1]), int(header[2])
        M = np.loadtxt(fh).reshape(rows, cols)
    return M
