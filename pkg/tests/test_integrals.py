import math

import numpy as np
import pytest

import oracles
from sfdyn import basis, integrals, systems


def random_gaussian(rng, center_scale=1.5, sig_lo=0.3, sig_hi=2.5):
    l = int(rng.integers(0, 3))
    m = int(rng.integers(-l, l + 1))
    return basis.make_gaussian(tuple(rng.uniform(-center_scale, center_scale, 3)),
                               float(rng.uniform(sig_lo, sig_hi)), l, m)


# ---------------------------------------------------------------------------
# closed forms

def test_kinetic_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(8):
        sig = float(rng.uniform(0.2, 5.0))
        g = basis.make_gaussian((0.0, 0.0, 0.0), sig, 0, 0)
        assert abs(integrals.kinetic(g, g) - 1.5 / sig ** 2) < 1e-12 / sig ** 2


def test_nuclear_on_center_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(8):
        sig = float(rng.uniform(0.2, 5.0))
        c = tuple(rng.uniform(-2, 2, 3))
        g = basis.make_gaussian(c, sig, 0, 0)
        ref = -(2.0 / sig) * math.sqrt(2.0 / math.pi)
        assert abs(integrals.nuclear_attraction(g, g, np.asarray(c), 1.0) - ref) < 1e-12


def test_eri_same_center_closed_form():
    sig = 1.3
    g = basis.make_gaussian((0.2, -0.4, 0.9), sig, 0, 0)
    ref = 2.0 / (sig * math.sqrt(math.pi))
    assert abs(integrals.eri(g, g, g, g) - ref) < 1e-12


def test_dipole_of_s_is_center():
    g = basis.make_gaussian((0.3, -1.1, 2.2), 0.8, 0, 0)
    for k, c in enumerate((0.3, -1.1, 2.2)):
        assert abs(integrals.dipole(g, g, k) - c) < 1e-12


def test_parity_zeros():
    s = basis.make_gaussian((0.0, 0.0, 0.0), 1.0, 0, 0)
    px = basis.make_gaussian((0.0, 0.0, 1.7), 1.2, 1, 1)  # p_x displaced along z
    assert abs(integrals.overlap(s, px)) < 1e-14
    assert abs(integrals.kinetic(s, px)) < 1e-14


# ---------------------------------------------------------------------------
# Boys function against direct quadrature, both branches and the switchover

@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.1, 1.0, 10.0, 30.0, 34.9, 35.1, 60.0, 200.0])
def test_boys_vs_quadrature(x):
    vals = integrals.boys_array(8, np.array([x]))
    for n in range(9):
        assert abs(vals[n, 0] - oracles.boys_oracle(n, x)) < 1e-13


# ---------------------------------------------------------------------------
# randomized primitive pairs against quadrature oracles

def test_overlap_dipole_vs_quadrature():
    rng = np.random.default_rng(42)
    for _ in range(100):
        ga, gb = random_gaussian(rng), random_gaussian(rng)
        assert abs(integrals.overlap(ga, gb) - oracles.overlap_oracle(ga, gb)) < 1e-10
        k = int(rng.integers(0, 3))
        assert abs(integrals.dipole(ga, gb, k) - oracles.dipole_oracle(ga, gb, k)) < 1e-10


def test_kinetic_vs_quadrature():
    rng = np.random.default_rng(43)
    for _ in range(100):
        ga, gb = random_gaussian(rng), random_gaussian(rng)
        assert abs(integrals.kinetic(ga, gb) - oracles.kinetic_oracle(ga, gb)) < 1e-9


def test_nuclear_vs_quadrature():
    rng = np.random.default_rng(44)
    for _ in range(20):
        ga, gb = random_gaussian(rng), random_gaussian(rng)
        rc = rng.uniform(-1.5, 1.5, 3)
        got = integrals.nuclear_attraction(ga, gb, rc, 1.0)
        assert abs(got - oracles.nuclear_oracle(ga, gb, rc, 1.0)) < 1e-8


def test_eri_same_center_vs_radial_oracle():
    rng = np.random.default_rng(45)
    c = (0.4, 0.0, -0.2)
    for _ in range(6):
        sa, sb = rng.uniform(0.4, 2.0, 2)
        ga = basis.make_gaussian(c, float(sa), 0, 0)
        gb = basis.make_gaussian(c, float(sb), 0, 0)
        ref = oracles.eri_samecenter_ss_oracle(float(sa), float(sb))
        assert abs(integrals.eri(ga, ga, gb, gb) - ref) < 1e-7


def test_eri_two_center_vs_potential_oracle():
    rng = np.random.default_rng(46)
    for _ in range(10):
        gs = [basis.make_gaussian(tuple(rng.uniform(-1.5, 1.5, 3)),
                                  float(rng.uniform(0.5, 2.0)), 0, 0) for _ in range(4)]
        ref = oracles.eri_ss_twocenter_oracle(*gs)
        assert abs(integrals.eri(*gs) - ref) < 1e-7


def test_eri_point_charge_limit():
    L = 50.0
    ga = basis.make_gaussian((0.0, 0.0, 0.0), 1.0, 0, 0)
    gb = basis.make_gaussian((0.0, 0.0, L), 1.0, 0, 0)
    assert abs(integrals.eri(ga, ga, gb, gb) - 1.0 / L) < 1e-12


def test_eri_permutation_symmetry():
    rng = np.random.default_rng(47)
    for _ in range(5):
        a, b, c, d = (random_gaussian(rng) for _ in range(4))
        ref = integrals.eri(a, b, c, d)
        for perm in ((b, a, c, d), (a, b, d, c), (c, d, a, b), (d, c, b, a)):
            assert abs(integrals.eri(*perm) - ref) < 1e-12


def test_grad_overlap_vs_finite_difference():
    rng = np.random.default_rng(48)
    h = 1e-4
    for _ in range(30):
        ga, gb = random_gaussian(rng), random_gaussian(rng)
        grad = integrals.grad_overlap(ga, gb)
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            sp = integrals.overlap(ga, gb.at(np.asarray(gb.center) + dp))
            sm = integrals.overlap(ga, gb.at(np.asarray(gb.center) - dp))
            assert abs(grad[k] - (sp - sm) / (2 * h)) < 1e-7


def test_translation_invariance():
    rng = np.random.default_rng(49)
    shift = np.array([1.3, -0.7, 2.9])
    for _ in range(10):
        ga, gb = random_gaussian(rng), random_gaussian(rng)
        rc = rng.uniform(-1, 1, 3)
        ga2, gb2 = ga.at(np.asarray(ga.center) + shift), gb.at(np.asarray(gb.center) + shift)
        assert abs(integrals.overlap(ga, gb) - integrals.overlap(ga2, gb2)) < 1e-12
        assert abs(integrals.kinetic(ga, gb) - integrals.kinetic(ga2, gb2)) < 1e-12
        assert abs(integrals.nuclear_attraction(ga, gb, rc, 1.0)
                   - integrals.nuclear_attraction(ga2, gb2, rc + shift, 1.0)) < 1e-12
        # dipole picks up shift times overlap
        s = integrals.overlap(ga, gb)
        for k in range(3):
            assert abs(integrals.dipole(ga2, gb2, k)
                       - integrals.dipole(ga, gb, k) - shift[k] * s) < 1e-12


# ---------------------------------------------------------------------------
# assembled matrices against the scalar path

def _small_mixed_system():
    b = basis.BasisSet()
    b.add(basis.make_gaussian((0.0, 0.0, 1.0), 0.7, 0, 0, anchor=0))
    b.add(basis.make_gaussian((0.0, 0.0, 1.0), 1.1, 1, 0, anchor=0))
    b.add(basis.make_gaussian((0.0, 0.0, 1.0), 1.3, 2, -2, anchor=0))
    b.add(basis.make_gaussian((0.0, 0.0, -1.0), 0.9, 1, 1, anchor=1))
    b.add(basis.make_gaussian((0.0, 2.0, 0.0), 2.0, 0, 0))
    b.add(basis.make_gaussian((1.0, 0.0, -2.0), 1.6, 2, 2))
    return b


def test_assembled_one_electron_matches_scalar():
    b = _small_mixed_system()
    nuc = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    charges = np.array([1.0, 1.0])
    m = integrals.assemble_one_electron(b.compile(), nuc, charges)
    fns = b.functions
    n = len(fns)
    for i in range(n):
        for j in range(n):
            assert abs(m.S[i, j] - integrals.overlap(fns[i], fns[j])) < 1e-12
            assert abs(m.T[i, j] - integrals.kinetic(fns[i], fns[j])) < 1e-12
            v = sum(integrals.nuclear_attraction(fns[i], fns[j], nuc[a], charges[a])
                    for a in range(2))
            assert abs(m.V[i, j] - v) < 1e-12
            for k in range(3):
                assert abs(m.D[k, i, j] - integrals.dipole(fns[i], fns[j], k)) < 1e-12
            for a in range(2):
                for k in range(3):
                    want = (integrals.grad_overlap(fns[i], fns[j])[k]
                            if fns[j].anchor == a else 0.0)
                    assert abs(m.GS[a, k, i, j] - want) < 1e-12


def test_assembled_eri_matches_scalar():
    b = _small_mixed_system()
    flat = b.compile()
    V4 = integrals.assemble_eri(flat, dtype=np.float64)
    fns = b.functions
    n = len(fns)
    rng = np.random.default_rng(50)
    for _ in range(40):
        i, j, k, l = rng.integers(0, n, 4)
        ref = integrals.eri(fns[i], fns[j], fns[k], fns[l])
        assert abs(V4[i, j, k, l] - ref) < 1e-11


def test_overlap_positive_definite():
    for sys in (systems.h2plus(2.0, aligned=True), systems.h2plus(2.0, aligned=False)):
        m = sys.matrices()
        w = np.linalg.eigvalsh(m.S)
        assert w.min() > -1e-10
        assert np.allclose(np.diag(m.S), 1.0, atol=1e-10)


def test_matrix_dump_roundtrip(tmp_path):
    rng = np.random.default_rng(51)
    M = rng.standard_normal((7, 5))
    p = tmp_path / "m.txt"
    integrals.dump_matrix(p, M)
    back = integrals.load_matrix(p)
    assert back.shape == M.shape
    assert np.array_equal(back, M)
