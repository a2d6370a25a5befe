"""Gaussian basis sets: even-tempered atom-centered shells plus space-fixed
chains and hexagonal grids of diffuse s functions.

Width convention: a primitive has radial factor exp(-r^2 / sigma^2), i.e.
exponent alpha = 1/sigma^2. Functions with l > 0 are solid harmonics, stored
as fixed linear combinations of Cartesian Gaussians of the same l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LMAX = 2

# real solid harmonics in terms of Cartesian monomials x^i y^j z^k (unnormalized)
_SPH_CART = {
    (0, 0): ((1.0, (0, 0, 0)),),
    (1, -1): ((1.0, (0, 1, 0)),),
    (1, 0): ((1.0, (0, 0, 1)),),
    (1, 1): ((1.0, (1, 0, 0)),),
    (2, -2): ((1.0, (1, 1, 0)),),
    (2, -1): ((1.0, (0, 1, 1)),),
    (2, 0): ((-1.0, (2, 0, 0)), (-1.0, (0, 2, 0)), (2.0, (0, 0, 2))),
    (2, 1): ((1.0, (1, 0, 1)),),
    (2, 2): ((1.0, (2, 0, 0)), (-1.0, (0, 2, 0))),
}


@dataclass(frozen=True)
class Gaussian:
    """One basis function: a normalized contraction of Cartesian primitives
    sharing a center. Single-width solid harmonics have one width; fitted
    atomic eigenfunctions carry several.

    terms: tuple of (coef, alpha, lx, ly, lz).
    anchor: nucleus index the function rides on, or None for space-fixed.
    """

    center: tuple[float, float, float]
    l: int
    m: int
    terms: tuple[tuple[float, float, int, int, int], ...]
    anchor: int | None = None
    width: float | None = None
    label: str = ""

    def at(self, center) -> "Gaussian":
        return replace(self, center=(float(center[0]), float(center[1]), float(center[2])))


def make_gaussian(center, sigma, l, m, anchor=None, label="") -> Gaussian:
    """Normalized solid-harmonic Gaussian of width sigma at center."""
    if l > LMAX:
        raise NotImplementedError(f"angular momentum l={l} not supported (max {LMAX})")
    if abs(m) > l:
        raise ValueError(f"|m| must not exceed l, got l={l} m={m}")
    alpha = 1.0 / sigma**2
    terms = tuple((c, alpha, *pows) for c, pows in _SPH_CART[(l, m)])
    g = Gaussian(center=tuple(float(x) for x in center), l=l, m=m, terms=terms,
                 anchor=anchor, width=float(sigma), label=label)
    return _normalize(g)


def _normalize(g: Gaussian) -> Gaussian:
    from . import integrals

    s = integrals.overlap(g, g)
    scale = 1.0 / math.sqrt(s)
    terms = tuple((c * scale, a, lx, ly, lz) for c, a, lx, ly, lz in g.terms)
    return replace(g, terms=terms)


def even_tempered_widths(sigma1: float, ratio: float, count: int) -> np.ndarray:
    """Geometric progression sigma1 * ratio**(i-1), i = 1..count."""
    if sigma1 <= 0 or ratio <= 0 or count < 1:
        raise ValueError("need sigma1 > 0, ratio > 0, count >= 1")
    return sigma1 * ratio ** np.arange(count)


def chain_centers(count: int, spacing: float) -> np.ndarray:
    """z positions (k - (count-1)/2) * spacing, symmetric about the origin."""
    k = np.arange(count)
    return (k - (count - 1) / 2.0) * spacing


def hex_grid_centers(n1: int, n2: int, spacing: float) -> np.ndarray:
    """Hexagonal grid points in the x = 0 plane.

    y = (i - n1/2) d/2 for 0 <= i < n1; z rows are staggered by half the row
    spacing depending on the parity of n1 + i, which shortens every other row
    by one point. The stagger offset uses the floored modulo, so rows
    alternate also when n1 is odd.
    """
    pts = []
    for i in range(n1):
        jmax = n2 - 1 if (n1 + i) % 2 == 0 else n2
        off = abs((i - n1 / 2.0) % 2.0)
        for j in range(jmax):
            y = (i - n1 / 2.0) * spacing / 2.0
            z = (j - n2 / 2.0) * math.sqrt(3.0) * spacing + off * math.sqrt(3.0) / 2.0 * spacing
            pts.append((0.0, y, z))
    return np.array(pts).reshape(-1, 3)


# ---------------------------------------------------------------------------
# recipes

@dataclass(frozen=True)
class ShellRecipe:
    """Even-tempered shell of one angular momentum on a nucleus."""
    l: int
    sigma1: float
    ratio: float
    count: int

    def widths(self):
        return even_tempered_widths(self.sigma1, self.ratio, self.count)


@dataclass(frozen=True)
class ChainRecipe:
    sigma: float
    spacing: float
    count: int


@dataclass(frozen=True)
class HexRecipe:
    sigma: float
    spacing: float
    n1: int
    n2: int


# standard diatomic shells, one set per nucleus: 9s + 4p + 3d
PER_NUCLEUS_SHELLS = (
    ShellRecipe(0, 0.05, 1.7, 9),
    ShellRecipe(1, 0.8473, 1.7, 4),
    ShellRecipe(2, 1.7191, 1.7, 3),
)

# diffuse chain along the molecular axis for aligned runs
ALIGNED_CHAIN = ChainRecipe(5.54, 3.7, 21)

# space-fixed sets for free orientation: two hexagonal grids plus a short chain
FREE_ORIENTATION_GRIDS = (
    HexRecipe(5.74, 5.2, 9, 7),
    HexRecipe(7.81, 10.38, 5, 3),
)
FREE_ORIENTATION_CHAIN = ChainRecipe(16.62, 18.68, 3)

# 37-function extension chain for the single-atom basis; same width and
# spacing as the aligned diatomic chain, extended to cover +-66.6 bohr
ATOM_CHAIN = ChainRecipe(5.54, 3.7, 37)


@dataclass
class BasisSet:
    functions: list[Gaussian] = field(default_factory=list)

    def __len__(self):
        return len(self.functions)

    def add(self, g: Gaussian):
        self.functions.append(g)

    def moved(self, nuclei_positions) -> "BasisSet":
        """Basis with anchored functions relocated to the current nuclei."""
        out = []
        for g in self.functions:
            if g.anchor is None:
                out.append(g)
            else:
                out.append(g.at(nuclei_positions[g.anchor]))
        return BasisSet(out)

    def compile(self) -> "FlatBasis":
        return FlatBasis.from_functions(self.functions)

    def table(self) -> str:
        """Plain-text table: index, center, width, l, m, anchor."""
        lines = ["# idx        x          y          z      sigma  l   m  anchor  label"]
        for i, g in enumerate(self.functions):
            w = f"{g.width:9.4f}" if g.width is not None else "     multi"
            a = f"{g.anchor:d}" if g.anchor is not None else "-"
            lines.append(
                f"{i:5d} {g.center[0]:10.4f} {g.center[1]:10.4f} {g.center[2]:10.4f} "
                f"{w} {g.l:2d} {g.m:3d}  {a:>6s}  {g.label}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class FlatBasis:
    """Primitive-level arrays for vectorized integral assembly.

    Anchored primitives sit exactly on their nucleus, so a geometry update
    only rewrites rows of `center`.
    """

    alpha: np.ndarray      # (P,)
    coef: np.ndarray       # (P,) contraction coefficient incl. normalization
    pows: np.ndarray       # (P, 3) integer Cartesian powers
    center: np.ndarray     # (P, 3)
    func: np.ndarray       # (P,) owning basis-function index
    anchor: np.ndarray     # (P,) nucleus index or -1
    nfun: int

    @classmethod
    def from_functions(cls, functions):
        alpha, coef, pows, center, func, anchor = [], [], [], [], [], []
        for i, g in enumerate(functions):
            for c, a, lx, ly, lz in g.terms:
                alpha.append(a)
                coef.append(c)
                pows.append((lx, ly, lz))
                center.append(g.center)
                func.append(i)
                anchor.append(-1 if g.anchor is None else g.anchor)
        return cls(
            alpha=np.asarray(alpha, float),
            coef=np.asarray(coef, float),
            pows=np.asarray(pows, int),
            center=np.asarray(center, float),
            func=np.asarray(func, int),
            anchor=np.asarray(anchor, int),
            nfun=len(functions),
        )

    def at_geometry(self, nuclei_positions) -> "FlatBasis":
        anchored = self.anchor >= 0
        if not anchored.any():
            return self
        center = self.center.copy()
        center[anchored] = np.asarray(nuclei_positions, float)[self.anchor[anchored]]
        return replace(self, center=center)

    @property
    def contraction_matrix(self) -> np.ndarray:
        """(P, nfun) map from primitive values to function values."""
        C = np.zeros((len(self.alpha), self.nfun))
        C[np.arange(len(self.alpha)), self.func] = self.coef
        return C


# ---------------------------------------------------------------------------
# assembly

def shell_functions(recipe: ShellRecipe, center, anchor=None, label=""):
    out = []
    for w in recipe.widths():
        for m in range(-recipe.l, recipe.l + 1):
            out.append(make_gaussian(center, w, recipe.l, m, anchor=anchor, label=label))
    return out


def chain_functions(recipe: ChainRecipe, rotation=None, label="chain"):
    out = []
    for z in chain_centers(recipe.count, recipe.spacing):
        c = np.array([0.0, 0.0, z])
        if rotation is not None:
            c = rotation @ c
        out.append(make_gaussian(c, recipe.sigma, 0, 0, anchor=None, label=label))
    return out


def hex_functions(recipe: HexRecipe, rotation=None, label="grid"):
    out = []
    for c in hex_grid_centers(recipe.n1, recipe.n2, recipe.spacing):
        if rotation is not None:
            c = rotation @ c
        out.append(make_gaussian(c, recipe.sigma, 0, 0, anchor=None, label=label))
    return out


def assemble_diatomic_basis(positions, aligned: bool, rotation=None,
                            shells=PER_NUCLEUS_SHELLS,
                            chain: ChainRecipe | None = None,
                            grids: tuple[HexRecipe, ...] | None = None) -> BasisSet:
    """Per-nucleus shells plus either the aligned chain or the space-fixed
    grid/chain sets for free orientation.

    `rotation` rotates the space-fixed sets together with the molecule; it is
    applied to the generated grid/chain centers only, the nuclear positions
    are passed in already rotated.
    """
    bs = BasisSet()
    for a, pos in enumerate(positions):
        for rec in shells:
            for g in shell_functions(rec, pos, anchor=a, label=f"nuc{a}"):
                bs.add(g)
    if aligned:
        for g in chain_functions(chain or ALIGNED_CHAIN, rotation):
            bs.add(g)
    else:
        for rec in grids if grids is not None else FREE_ORIENTATION_GRIDS:
            for g in hex_functions(rec, rotation):
                bs.add(g)
        for g in chain_functions(chain or FREE_ORIENTATION_CHAIN, rotation):
            bs.add(g)
    return bs


def hydrogen_eigenfunctions(center, anchor=0):
    """Fixed contractions representing the 1s, 2s and 2p_z hydrogen
    eigenfunctions, obtained variationally in a wide even-tempered
    primitive set (30 s widths 0.008*1.35^i, 22 p widths 0.025*1.4^i;
    dense enough for the 1s level to sit at -0.5 to better than 1e-7).
    """
    from . import integrals

    def fitted(l, m, widths, n_states):
        prims = [make_gaussian(center, w, l, m, anchor=anchor) for w in widths]
        n = len(prims)
        S = np.empty((n, n))
        H = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                S[i, j] = integrals.overlap(prims[i], prims[j])
                H[i, j] = integrals.kinetic(prims[i], prims[j]) + integrals.nuclear_attraction(
                    prims[i], prims[j], np.asarray(center, float), 1.0)
        from scipy.linalg import eigh

        w, v = eigh(H, S)
        out = []
        for k in range(n_states):
            terms = []
            for c, p in zip(v[:, k], prims):
                for pc, pa, lx, ly, lz in p.terms:
                    terms.append((c * pc, pa, lx, ly, lz))
            g = Gaussian(center=tuple(float(x) for x in center), l=l, m=m,
                         terms=tuple(terms), anchor=anchor, width=None,
                         label=f"fit l={l} state {k}")
            out.append((_normalize(g), w[k]))
        return out

    s_widths = 0.008 * 1.35 ** np.arange(30)
    p_widths = 0.025 * 1.4 ** np.arange(22)
    (g1s, e1s), (g2s, e2s) = fitted(0, 0, s_widths, 2)
    ((g2p, e2p),) = fitted(1, 0, p_widths, 1)
    g1s = replace(g1s, label="h 1s")
    g2s = replace(g2s, label="h 2s")
    g2p = replace(g2p, label="h 2pz")
    return [g1s, g2s, g2p], (e1s, e2s, e2p)


def assemble_atom_basis(center=(0.0, 0.0, 0.0), chain: ChainRecipe = ATOM_CHAIN) -> BasisSet:
    """Single-H basis: fitted 1s/2s/2p_z eigenfunctions plus a diffuse chain."""
    bs = BasisSet()
    eig, _ = hydrogen_eigenfunctions(center, anchor=0)
    for g in eig:
        bs.add(g)
    for g in chain_functions(chain):
        bs.add(g)
    return bs


# ---------------------------------------------------------------------------
# recipe (de)serialization for config files and dump output

def recipes_to_config(shells=(), chains=(), grids=()) -> dict:
    d: dict = {}
    if shells:
        d["shells"] = [
            {"l": r.l, "sigma1": r.sigma1, "ratio": r.ratio, "count": r.count} for r in shells
        ]
    if chains:
        d["chains"] = [
            {"sigma": r.sigma, "spacing": r.spacing, "count": r.count} for r in chains
        ]
    if grids:
        d["grids"] = [
            {"sigma": r.sigma, "spacing": r.spacing, "n1": r.n1, "n2": r.n2} for r in grids
        ]
    return d


def recipes_from_config(d: dict):
    shells = tuple(ShellRecipe(int(s["l"]), float(s["sigma1"]), float(s["ratio"]), int(s["count"]))
                   for s in d.get("shells", ()))
    chains = tuple(ChainRecipe(float(c["sigma"]), float(c["spacing"]), int(c["count"]))
                   for c in d.get("chains", ()))
    grids = tuple(HexRecipe(float(g["sigma"]), float(g["spacing"]), int(g["n1"]), int(g["n2"]))
                  for g in d.get("grids", ()))
    return shells, chains, grids
