import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nesscurrent import ed
from nesscurrent import freefermion as ff
from nesscurrent.algebra import DomainError, LatticeGeometry
from nesscurrent.models import bond, builtin, charge, current, region_charge, region_hamiltonian

FERMION = builtin("fermion", t=1.0, mu=0.0, v=0.0)


@pytest.fixture(scope="module")
def ed8():
    """Boosted sea on 8 sites: Wick occupation and the same state as a Fock-space density matrix."""
    occ = ff.boosted_fermi(8, 0.5, math.pi / 8)
    spec = ed.diagonalize(FERMION, LatticeGeometry.ring(8), boundary="fermionic")
    return occ, ed.occupation_density_matrix(spec, occ)


def test_momenta_grid():
    np.testing.assert_allclose(ff.momenta(4), [-np.pi / 2, 0, np.pi / 2, np.pi])
    assert len(ff.momenta(7)) == 7 and ff.momenta(7).max() < np.pi


@pytest.mark.parametrize("R", [16, 64, 256])
def test_boosted_sea_filling_and_symmetry(R):
    occ = ff.boosted_fermi(R, 0.5, 0.0)
    assert occ.filling == 0.5
    assert ff.current_expectation(occ) == pytest.approx(0.0, abs=1e-15)
    assert ff.is_sharp(occ)
    assert not ff.is_sharp(ff.fermi_dirac(R, 0.5, 0.3))


def test_current_approaches_band_integral():
    # (2t/2π) ∫_{φ-πν}^{φ+πν} sin k dk = (2/π) sin φ sin πν
    occ = ff.boosted_fermi(4096, 0.5, math.pi / 8)
    expected = 2 / math.pi * math.sin(math.pi / 8)
    assert ff.current_expectation(occ) == pytest.approx(expected, rel=1e-5)


def test_occupation_validation():
    with pytest.raises(DomainError):
        ff.Occupation(4, [0, 0.5, 1.2, 0])
    with pytest.raises(DomainError):
        ff.boosted_fermi(8, 0.0)
    assert ff.boosted_fermi(8, 1.0).filling == 1.0


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20)
def test_propagator_unitary_group(s, t):
    data = ff.one_particle(ff.fermi_dirac(12, 1.0, 0.2))
    Us, Ut, Ust = data.propagator(s), data.propagator(t), data.propagator(s + t)
    np.testing.assert_allclose(Us @ Us.conj().T, np.eye(12), atol=1e-12)
    np.testing.assert_allclose(Us @ Ut, Ust, atol=1e-12)


def test_infinite_temperature_density_fluctuation():
    occ = ff.uniform_occupation(10)
    assert ff.wick_two_time(occ, ff.density(0), ff.density(0), 0.0) == pytest.approx(0.25, abs=1e-14)
    assert ff.expect(occ, ff.density(3)) == pytest.approx(0.5, abs=1e-14)


@given(st.integers(-4, 4), st.floats(-2, 2))
@settings(max_examples=25)
def test_hermitian_conjugation(y, t):
    occ = ff.fermi_dirac(16, 2.0, 0.4)
    a, b = ff.density(0), ff.hopping_bond(y)
    lhs = np.conj(ff.wick_two_time(occ, a, b, t))
    rhs = ff.wick_two_time(occ, b, a, -t)
    assert abs(lhs - rhs) < 1e-12


@given(st.integers(-6, 6), st.integers(-3, 3), st.floats(-2, 2))
@settings(max_examples=25)
def test_translation_invariance(shift, y, t):
    occ = ff.boosted_fermi(16, 0.5, math.pi / 8)
    a = ff.wick_two_time(occ, ff.density(0), ff.hopping_bond(y), t)
    b = ff.wick_two_time(occ, ff.density(shift), ff.hopping_bond(y + shift), t)
    assert abs(a - b) < 1e-12


def test_stationarity():
    occ = ff.boosted_fermi(16, 0.5, math.pi / 8)
    data = ff.one_particle(occ)
    h = ff.hopping_bond(2).full(16)
    for t in (0.4, 1.9):
        U = data.propagator(t)
        ht = U.conj().T @ h @ U
        assert abs(ff.expect(occ, ff.Quadratic(tuple(range(16)), ht)) - ff.expect(occ, ff.hopping_bond(2))) < 1e-12


def test_clustering_for_smooth_occupation():
    occ = ff.fermi_dirac(128, 2.0, 0.3)
    near = abs(ff.wick_two_time(occ, ff.density(0), ff.density(1), 0.0))
    far = abs(ff.wick_two_time(occ, ff.density(0), ff.density(40), 0.0))
    assert near > 1e-3 and far < 1e-12


def test_bond_correlations_match_pairwise_wick():
    occ = ff.boosted_fermi(32, 0.5, math.pi / 8)
    ys = np.arange(-5, 6)
    vec = ff.bond_correlations(occ, 0, ys, 0.8)
    loop = [ff.wick_two_time(occ, ff.density(0), ff.hopping_bond(int(y)), 0.8) for y in ys]
    np.testing.assert_allclose(vec, loop, atol=1e-14)


def test_current_operator_matches_commutator():
    h = ff.hopping_bond(0)
    j = ff.current_op(0)
    ref = ff.density(1).commutator(h).scale(-1j)
    np.testing.assert_allclose(j.full(8), ref.full(8), atol=1e-14)


# ---------------------------------------------------------------------------
# agreement with exact diagonalization of the Jordan-Wigner spin chain


def test_current_agrees_with_ed(ed8):
    occ, st_ = ed8
    assert abs(ed.expect(st_, current(FERMION, 2)) - ff.current_expectation(occ)) < 1e-13


def test_bond_correlations_agree_with_ed(ed8):
    occ, st_ = ed8
    zs = np.arange(-3, 4)
    off = 3  # sites -3..4 onto ring sites 0..7, clear of the seam
    for t in (0.0, 0.5, 1.0):
        wick = ff.bond_correlations(occ, 0, zs, t)
        n = ed.center(charge(FERMION, 0), st_, off)
        exact = [ed.two_time(st_, n, ed.center(bond(FERMION, int(z)), st_, off), t, off) for z in zs]
        np.testing.assert_allclose(wick, exact, atol=1e-12)


def test_region_commutator_agrees_with_ed(ed8):
    occ, st_ = ed8
    wick = ff.commutator_expect(occ, ff.region_charge(-2, 0), ff.region_hamiltonian(-2, 4), 0.6)
    spec = st_.spectral
    N = ed.to_eigenbasis(region_charge(FERMION, (-2, 0)), spec, 2)
    H = ed.to_eigenbasis(region_hamiltonian(FERMION, (-2, 4)), spec, 2)
    exact = ed.expect(st_, N.commutator(H.evolve(0.6)))
    assert abs(wick - exact) < 1e-12
