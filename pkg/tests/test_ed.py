import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from nesscurrent import ed
from nesscurrent.algebra import PAULI_X, PAULI_Y, PAULI_Z, DomainError, LatticeGeometry, identity
from nesscurrent.models import bond, builtin, charge, current

SX, SY, SZ = PAULI_X / 2, PAULI_Y / 2, PAULI_Z / 2


def site_op(m, x, R):
    return np.kron(np.kron(np.eye(2**x), m), np.eye(2 ** (R - x - 1)))


def dense_xxz_ring(R, lam):
    H = np.zeros((2**R, 2**R), dtype=complex)
    for x in range(R):
        y = (x + 1) % R
        for s, c in ((SX, 1.0), (SY, 1.0), (SZ, lam)):
            H += c * site_op(s, x, R) @ site_op(s, y, R)
    return H


@pytest.fixture(scope="module")
def ring6():
    m = builtin("xxz", {"lambda": 0.8})
    return m, ed.diagonalize(m, LatticeGeometry.ring(6))


def test_spectrum_matches_dense_oracle(ring6):
    m, spec = ring6
    ref = np.linalg.eigvalsh(dense_xxz_ring(6, 0.8))
    np.testing.assert_allclose(np.sort(spec.eigenvalues), ref, atol=1e-12)


def test_blocked_and_unblocked_agree(ring6):
    m, spec = ring6
    plain = ed.diagonalize(m, LatticeGeometry.ring(6), blocked=False)
    np.testing.assert_allclose(np.sort(plain.eigenvalues), np.sort(spec.eigenvalues), atol=1e-12)
    assert len(spec.sectors) == 7


def test_heisenberg_evolution_matches_expm(ring6):
    m, spec = ring6
    H = dense_xxz_ring(6, 0.8)
    state = ed.make_state(m, spec.geometry, "infinite-temperature", spectral=spec)
    n0 = charge(m, 0)
    h2 = bond(m, 2)
    t = 0.7
    U = expm(-1j * H * t)
    N0 = site_op(SZ, 0, 6)
    H2 = site_op(SX, 2, 6) @ site_op(SX, 3, 6) + site_op(SY, 2, 6) @ site_op(SY, 3, 6) + 0.8 * site_op(SZ, 2, 6) @ site_op(SZ, 3, 6)
    ref = np.trace(N0 @ U.conj().T @ H2 @ U) / 2**6
    assert abs(ed.two_time(state, n0, h2, t) - ref) < 1e-12


@settings(max_examples=15)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_evolution_group_property(s, t):
    m = builtin("xxz", {"lambda": 0.8})
    spec = _spec4()
    A = ed.to_eigenbasis(current(m, 1), spec)
    lhs = A.evolve(s).evolve(t)
    rhs = A.evolve(s + t)
    assert (lhs - rhs).max_abs() < 1e-11


_CACHE = {}


def _spec4():
    if "s" not in _CACHE:
        _CACHE["s"] = ed.diagonalize(builtin("xxz", {"lambda": 0.8}), LatticeGeometry.ring(4))
    return _CACHE["s"]


@pytest.mark.parametrize("kind,params", [("infinite-temperature", {}), ("gibbs", {"beta": 1.3})])
def test_states_are_normalized_stationary_and_currentless(ring6, kind, params):
    m, spec = ring6
    st_ = ed.make_state(m, spec.geometry, kind, params, spectral=spec)
    assert abs(ed.expect(st_, identity((0, 0))) - 1) < 1e-12
    h = bond(m, 1)
    w0 = ed.expect(st_, h)
    for t in (0.3, 1.7):
        assert abs(ed.expect(st_, ed.evolve(h, spec, t)) - w0) < 1e-12
    # equilibrium states carry no current
    assert abs(ed.expect(st_, current(m, 2))) < 1e-12
    # translation invariance
    assert abs(ed.expect(st_, bond(m, 4)) - w0) < 1e-12


def test_gibbs_energy_against_dense(ring6):
    m, spec = ring6
    H = dense_xxz_ring(6, 0.8)
    rho = expm(-0.9 * H)
    rho /= np.trace(rho)
    st_ = ed.make_state(m, spec.geometry, "gibbs", {"beta": 0.9}, spectral=spec)
    assert abs(ed.expect(st_, bond(m, 0)) - np.trace(rho @ H) / 6) < 1e-12


def test_dimension_cap():
    with pytest.raises(DomainError, match="cap"):
        ed.diagonalize(builtin("xxz", {"lambda": 1.0}), LatticeGeometry.ring(10), dim_cap=2**8)


def test_guard_converges_and_reports_comparison():
    g = ed.guard_ring(lambda R: np.array([2.0**-R]), 4, tol=1e-3, dim_cap=2**20)
    assert g.passed and g.ring == 16 and g.compared_with == 20
    assert g.max_difference < 1e-3


def test_guard_fails_when_it_cannot_grow():
    g = ed.guard_ring(lambda R: np.array([1.0 / R]), 8, tol=1e-9, dim_cap=2**12)
    assert not g.passed
    with pytest.raises(DomainError):
        ed.guard_ring(lambda R: np.zeros(1), 14, dim_cap=2**12)


def test_fermionic_ring_rejects_operators_on_the_seam():
    m = builtin("fermion", t=1.0, mu=0.0, v=0.0)
    spec = ed.diagonalize(m, LatticeGeometry.ring(4), boundary="fermionic")
    with pytest.raises(DomainError, match="seam"):
        ed.to_eigenbasis(bond(m, 3), spec)
