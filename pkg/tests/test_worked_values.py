"""Small hand-checkable values for each operation."""
import numpy as np
import pytest
import scipy.sparse as sp

from pwlandscape import lattice, potential
from pwlandscape.analysis import landscape_bound_report, local_maxima, local_minima, match_extrema
from pwlandscape.basis import build_basis, pair_index
from pwlandscape.hamiltonian import HamiltonianMatrix, assemble, matvec
from pwlandscape.landscape import (LandscapeCoefficients, RealSpaceGrid, ScalarField, effective_potential,
                                   eval_field, solve_landscape)
from pwlandscape.spectrum import (counting_function, default_s_norm, eigenfunction_values, eigensolve,
                                  electron_density, fermi_dirac)
from pwlandscape.weyl import WeylConfig, fit_scale, mc_phase_volume, weyl_idos

from conftest import A_HEX, SQRT5M1, constant_pair, ex1_lattices, ex1_setup

C1 = 3 * np.exp(-0.05 * np.pi**2)
C2 = 3 * np.exp(-0.05 * 4 * np.pi**2)


@pytest.fixture(scope="module")
def three():
    _, _, r1, r2 = ex1_lattices()
    b = build_basis(r1, r2, 4.0, 8.0)
    return b, r1, r2


def field1d(v, h=1.0):
    v = np.asarray(v, dtype=float)
    return ScalarField(RealSpaceGrid.from_window([0.0], [h * len(v)], h=h), v, "f")


# lattice

def test_lattice_values():
    assert lattice.make_lattice(1, 2.0).volume == 2.0
    hexl = lattice.make_lattice(2, A_HEX)
    assert hexl.volume == pytest.approx(2 * np.sqrt(3), rel=1e-15)
    assert lattice.reciprocal(lattice.make_lattice(1, SQRT5M1)).basis[0, 0] == pytest.approx(5.08320, abs=1e-5)
    twice = lattice.reciprocal(lattice.reciprocal(hexl))
    np.testing.assert_allclose(twice.basis, A_HEX, rtol=1e-12)
    assert lattice.rotate(hexl, 5.0).volume == pytest.approx(2 * np.sqrt(3), rel=1e-12)
    np.testing.assert_allclose(lattice.rotate(lattice.rotate(hexl, 5.0), -5.0).basis, A_HEX, atol=1e-12)


# potential

def test_gaussian_values():
    _, _, r1, _ = ex1_lattices()
    pot = potential.gaussian_potential(r1, 3.0, 0.05)
    cmap = pot.coefficient_map()
    assert cmap[(0,)] == 3.0
    assert cmap[(1,)].real == pytest.approx(C1, rel=1e-14) == pytest.approx(1.8316, abs=2e-4)
    assert cmap[(-2,)].real == pytest.approx(C2, rel=1e-14) == pytest.approx(0.41674, abs=1e-5)
    single = potential.gaussian_potential(r1, 3.0, 1e6)
    assert single.indices.tolist() == [[0]] and single.zero_mode == 3.0


def test_eval_potential_values():
    l1, _, r1, r2 = ex1_lattices()
    c1, c2 = constant_pair(r1, r2)
    np.testing.assert_allclose(potential.eval_potential([c1, c2], [0.0, 1.7, -30.0]), 5.0)
    pot = potential.gaussian_potential(r1, 3.0, 0.05)
    oracle = sum(3 * np.exp(-0.05 * (np.pi * n) ** 2) for n in range(-50, 51))
    assert potential.eval_potential([pot], [0.0])[0] == pytest.approx(oracle, rel=1e-13)
    x = np.linspace(-3, 7, 23)
    np.testing.assert_allclose(potential.eval_potential([pot], x), potential.eval_potential([pot], x + 2.0),
                               atol=1e-10)


def test_coefficient_lookup_values():
    _, _, r1, r2 = ex1_lattices()
    c1, _ = constant_pair(r1, r2)
    assert potential.coefficient_lookup(c1, [0.0]) == 3.0
    pot = potential.gaussian_potential(r1, 3.0, 0.05)
    assert potential.coefficient_lookup(pot, [np.pi]).real == pytest.approx(C1, rel=1e-14)
    assert potential.coefficient_lookup(pot, [np.pi / 2]) == 0


# basis

def test_three_pair_basis(three):
    b, _, _ = three
    assert b.size == 3
    assert {(int(a), int(c)) for a, c in zip(b.n1[:, 0], b.n2[:, 0])} == {(0, 0), (1, 0), (-1, 0)}
    assert pair_index(b, 0, 0) == 0
    for i in range(b.size):
        assert pair_index(b, b.n1[i], b.n2[i]) == i
    assert pair_index(b, 0, 1) is None
    fixed = np.flatnonzero(b.negation == np.arange(b.size))
    assert fixed.tolist() == [b.origin_index]


# hamiltonian

def test_three_pair_hamiltonian(three):
    b, r1, r2 = three
    H = assemble(b, *constant_pair(r1, r2))
    np.testing.assert_allclose(np.sort(H.toarray().diagonal()), [5.0, 5 + np.pi**2 / 2, 5 + np.pi**2 / 2])
    assert 5 + np.pi**2 / 2 == pytest.approx(9.9348, abs=1e-4)


def test_ex1_entries():
    b, V1, V2 = ex1_setup(20.0, 50.0)
    H = assemble(b, V1, V2).toarray()
    o, p, m = pair_index(b, 0, 0), pair_index(b, 1, 0), pair_index(b, -1, 0)
    assert H[o, p] == pytest.approx(C1, rel=1e-14)
    assert H[p, m] == pytest.approx(C2, rel=1e-14)
    assert np.linalg.eigvalsh(H)[0] > 0
    d = H.diagonal().real
    assert np.all(d >= 0.5 * (b.q**2).sum(1))


def test_matvec_values():
    d = np.array([1.0, 2.0, 3.0])
    H = HamiltonianMatrix(sp.diags(d, format="csr"), d)
    np.testing.assert_array_equal(matvec(H, np.eye(3)[1]), [0, 2, 0])
    b, V1, V2 = ex1_setup(20.0, 50.0)
    H = assemble(b, V1, V2)
    rng = np.random.default_rng(1)
    x = rng.normal(size=b.size) + 1j * rng.normal(size=b.size)
    y = rng.normal(size=b.size) + 1j * rng.normal(size=b.size)
    assert np.vdot(x, matvec(H, y)) == pytest.approx(np.conj(np.vdot(y, matvec(H, x))), rel=1e-12)


# landscape

def test_landscape_values(three):
    b, r1, r2 = three
    c = solve_landscape(assemble(b, *constant_pair(r1, r2)), b)
    np.testing.assert_allclose(c.U, [0.2, 0, 0], atol=1e-15)
    half = np.zeros(3, complex)
    half[pair_index(b, 1, 0)] = half[pair_index(b, -1, 0)] = 0.5
    g = RealSpaceGrid.from_window([0.0], [4.0], h=0.01)
    u = eval_field(LandscapeCoefficients(b, half, 0, 0.0, "manual"), b, g)
    np.testing.assert_allclose(u.values, np.cos(np.pi * g.axes()[0]), atol=1e-14)


def test_parseval():
    b, V1, V2 = ex1_setup(20.0, 50.0)
    c = solve_landscape(assemble(b, V1, V2), b)
    u = eval_field(c, b, RealSpaceGrid.from_window([0.0], [400.0], W=20.0))
    assert np.mean(u.values**2) == pytest.approx(np.sum(np.abs(c.U) ** 2), rel=0.02)


def test_residual_contract():
    b, V1, V2 = ex1_setup(20.0, 50.0)
    H = assemble(b, V1, V2)
    c = solve_landscape(H, b, tol=1e-11)
    rhs = np.zeros(b.size)
    rhs[b.origin_index] = 1
    assert np.linalg.norm(H.matrix @ c.U - rhs) <= 1e-11


def test_zero_sample_capped():
    v = effective_potential(field1d([0.5, 0.0, 0.25]), cap=1e6)
    assert v.values.tolist() == [2.0, 1e6, 4.0]
    assert v.meta["n_flagged"] == 1


# spectrum

def test_three_pair_spectrum(three):
    b, r1, r2 = three
    s = eigensolve(assemble(b, *constant_pair(r1, r2)))
    np.testing.assert_allclose(s.eigenvalues, [5, 5 + np.pi**2 / 2, 5 + np.pi**2 / 2], rtol=1e-14)
    np.testing.assert_allclose(np.abs(s.eigenvectors[:, 0]), np.eye(3)[b.origin_index], atol=1e-14)
    N = counting_function(s, [4.0, 9.0, 10.0, 100.0])
    assert N.values.tolist() == [0, 1, 3, 3]


def test_spectrum_identities():
    b, V1, V2 = ex1_setup(20.0, 50.0)
    H = assemble(b, V1, V2)
    s = eigensolve(H)
    assert s.eigenvalues.sum() == pytest.approx(H.diagonal.sum(), rel=1e-8)
    V = s.eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(b.size)).max() < 1e-10
    rng = np.random.default_rng(2)
    A = rng.normal(size=(30, 30))
    A = A + A.T
    small = eigensolve(HamiltonianMatrix(sp.csr_matrix(A), np.zeros(30)))
    np.testing.assert_allclose(small.eigenvalues, np.linalg.eigvalsh(A), atol=1e-10)


def test_fermi_values():
    assert fermi_dirac(2.0, 2.0, 7.0) == 0.5
    assert fermi_dirac(1.0 + 10 / 100, 1.0, 100.0) == pytest.approx(4.5398e-5, rel=1e-4)
    E = np.linspace(-5, 5, 101)
    assert np.all(np.diff(fermi_dirac(E, 0.3, 4.0)) <= 0)


def test_density_values(three):
    b, r1, r2 = three
    s = eigensolve(assemble(b, *constant_pair(r1, r2)))
    g = RealSpaceGrid.from_window([0.0], [3.0], h=0.1)
    S = default_s_norm(1, 8.0)
    rho = electron_density(s, b, g, mu=6.0, beta=100.0)
    np.testing.assert_allclose(rho.values, fermi_dirac(5.0, 6.0, 100.0) / S, rtol=1e-12)
    cold = electron_density(s, b, g, mu=4.0, beta=100.0)
    assert cold.values.max() <= np.exp(-100) * 3 / S


# weyl

def test_weyl_closed_forms():
    g1 = RealSpaceGrid.from_window([0.0], [1.0], h=0.1)
    f1 = ScalarField(g1, np.full(g1.counts, 5.0), "potential")
    assert weyl_idos(f1, [9.0]).values[0] == pytest.approx(2 / np.pi, rel=1e-14)
    g2 = RealSpaceGrid.from_window([0.0, 0.0], [1.0, 1.0], h=0.1)
    f2 = ScalarField(g2, np.zeros(g2.counts), "potential")
    assert weyl_idos(f2, [4 * np.pi]).values[0] == pytest.approx(1.0, rel=1e-14)
    assert weyl_idos(f1, [4.0, 5.0]).values.tolist() == [0.0, 0.0]
    est, err = mc_phase_volume(f1, 9.0, 100_000, seed=0)
    assert abs(est - 2 / np.pi) <= 3 * err + 1e-12


def smooth(h):
    g = RealSpaceGrid.from_window([0.0, 0.0], [4.0, 4.0], h=h)
    x, y = g.points().T
    return ScalarField(g, (2 + np.sin(x) * np.cos(1.3 * y) + 0.5 * np.cos(0.7 * x + y)).reshape(g.counts), "potential")


def test_mc_rate_and_quadrature_convergence():
    f = smooth(0.05)
    _, e1 = mc_phase_volume(f, 4.0, 40_000, seed=1)
    _, e2 = mc_phase_volume(f, 4.0, 80_000, seed=2)
    assert e1 / e2 == pytest.approx(np.sqrt(2), rel=0.05)
    E = np.linspace(2.0, 10.0, 9)
    a, b = weyl_idos(smooth(0.1), E).values, weyl_idos(smooth(0.05), E).values
    assert np.all(np.abs(a - b) <= 0.01 * b)


def test_fit_scale_equivariance():
    E = np.linspace(0, 10, 50)
    f = smooth(0.1)
    W = weyl_idos(f, E)
    N = counting_function_like(E, W.values)
    c1 = fit_scale(N, W, (2.0, 10.0)).c
    c2 = fit_scale(N, W.scaled(2.5), (2.0, 10.0)).c
    assert c2 == pytest.approx(c1 / 2.5, rel=1e-14)


def counting_function_like(E, w):
    from pwlandscape.spectrum import COUNTING, IDoSCurve
    return IDoSCurve(E, np.floor(7 * w), COUNTING)


# analysis

def test_extrema_values():
    f = field1d([3, 1, 2, 0.5, 4])
    mins = local_minima(f, prominence_floor=0.0)
    assert mins.indices.tolist() == [3, 1]
    assert mins.values.tolist() == [0.5, 1.0]
    maxs = local_maxima(f, prominence_floor=0.0)
    assert maxs.indices.tolist() == [2] and maxs.values.tolist() == [2.0]
    assert len(local_minima(field1d(np.full(9, 2.0)))) == 0
    neg = ScalarField(f.grid, -f.values, "g")
    np.testing.assert_array_equal(local_maxima(neg, 0.0).positions, mins.positions)


def test_cosine_extrema():
    g = RealSpaceGrid.from_window([0.0], [4 * np.pi], h=0.01)
    f = ScalarField(g, np.cos(g.axes()[0]), "f")
    mins, maxs = local_minima(f), local_maxima(f)
    np.testing.assert_allclose(np.sort(mins.positions[:, 0]), [np.pi, 3 * np.pi], atol=0.01)
    np.testing.assert_allclose(mins.values, -1.0, atol=1e-4)
    np.testing.assert_allclose(maxs.positions[:, 0], [2 * np.pi], atol=0.01)


def test_match_values():
    f = field1d([3, 1, 3, 0.5, 3, 2, 3])
    mins = local_minima(f, 0.0)
    same = local_maxima(ScalarField(f.grid, -f.values, "g"), 0.0)
    rep = match_extrema(mins, same, match_radius=0.1)
    assert (rep.matched_fraction, rep.order_agreement) == (1.0, 1.0)
    far = local_maxima(field1d([0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0]), 0.0)
    assert match_extrema(mins, far, match_radius=0.5).matched_fraction == 0.0


def test_bound_saturates_for_constants(three):
    b, r1, r2 = three
    H = assemble(b, *constant_pair(r1, r2))
    g = RealSpaceGrid.from_window([0.0], [3.0], h=0.1)
    u = eval_field(solve_landscape(H, b), b, g)
    rows = landscape_bound_report(eigensolve(H), u, b, 1)
    assert rows[0]["ratio"] == pytest.approx(1.0, abs=1e-12)
    assert np.abs(eigenfunction_values(eigensolve(H), b, g, 0)).max() == pytest.approx(1.0)
