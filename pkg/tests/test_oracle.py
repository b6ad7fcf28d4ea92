import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unravel.errors import DimensionMismatch, InvalidDensityMatrix, NonHermitianObservable
from unravel.models import epr_decay, random_hermitian, two_level
from unravel.oracle import build_propagator, eigencheck, frobenius_distance, propagate
from unravel.state import DensityMatrix, basis_projector, validate_hamiltonian


def _random_rho(rng, d):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def test_diagonal_hamiltonian_eigensystem():
    H = validate_hamiltonian(3, [2.0, -1.0, 0.5], np.zeros((3, 3)))
    p = build_propagator(H)
    assert sorted(p.eigenvalues) == [-1.0, 0.5, 2.0]
    np.testing.assert_allclose(np.abs(p.eigenvectors), np.eye(3)[:, [1, 2, 0]], atol=1e-14)


def test_known_spectra():
    np.testing.assert_allclose(build_propagator(two_level(0, 1).hamiltonian).eigenvalues, [-1, 1], atol=1e-14)
    g = 0.5
    np.testing.assert_allclose(build_propagator(epr_decay(0, 0, g).hamiltonian).eigenvalues,
                               [-g * math.sqrt(2), 0, g * math.sqrt(2)], atol=1e-14)


def test_propagate_examples():
    p = build_propagator(two_level(0, 1).hamiltonian)
    rho0 = basis_projector(2, 0)
    np.testing.assert_array_equal(propagate(p, rho0, 0.0).entries, rho0)
    np.testing.assert_allclose(propagate(p, rho0, math.pi / 2).entries, basis_projector(2, 1), atol=1e-14)
    q = build_propagator(validate_hamiltonian(2, [0.3, 1.2], np.zeros((2, 2))))
    rho = np.diag([0.3, 0.7]).astype(complex)
    np.testing.assert_allclose(propagate(q, rho, 4.2).entries, rho, atol=1e-15)
    assert propagate(p, rho0, 1.0).exact


def test_propagate_rejects_invalid():
    p = build_propagator(two_level(0, 1).hamiltonian)
    with pytest.raises(InvalidDensityMatrix):
        propagate(p, np.eye(2), 1.0)
    with pytest.raises(DimensionMismatch):
        propagate(p, np.eye(3) / 3, 1.0)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 5), seed=st.integers(0, 10**6), t1=st.floats(0, 3), t2=st.floats(0, 3))
def test_unitary_invariants(d, seed, t1, t2):
    rng = np.random.default_rng(seed)
    H = random_hermitian(d, seed).hamiltonian
    p = build_propagator(H)
    rho0 = _random_rho(rng, d)
    rt = propagate(p, rho0, t1 + t2).entries
    assert abs(np.trace(rt) - 1) < 1e-10
    assert np.linalg.norm(rt - rt.conj().T) < 1e-10
    np.testing.assert_allclose(np.linalg.eigvalsh(rt), np.linalg.eigvalsh(rho0), atol=1e-10)
    two_step = propagate(p, propagate(p, rho0, t1), t2).entries
    np.testing.assert_allclose(two_step, rt, atol=1e-10)


def test_central_difference_matches_commutator():
    H = random_hermitian(3, 5).hamiltonian
    p = build_propagator(H)
    rho0 = _random_rho(np.random.default_rng(1), 3)
    t = 0.8
    rt = propagate(p, rho0, t).entries
    Ht = H.total()
    exact = -1j / H.hbar * (Ht @ rt - rt @ Ht)

    def resid(h):
        fd = (propagate(p, rho0, t + h).entries - propagate(p, rho0, t - h).entries) / (2 * h)
        return np.linalg.norm(fd - exact)

    r1, r2, r3 = resid(0.04), resid(0.02), resid(0.01)
    assert r1 / r2 >= 3.5 and r2 / r3 >= 3.5


def test_frobenius_distance():
    a = DensityMatrix(basis_projector(2, 0))
    assert frobenius_distance(a, a) == 0
    assert frobenius_distance(a, basis_projector(2, 1)) == pytest.approx(math.sqrt(2))
    x = np.array([[0.5, 0.1 + 0.2j], [0.1 - 0.2j, 0.5]])
    y = np.array([[0.4, 0.0], [0.0, 0.6]])
    hand = math.sqrt(0.1**2 + 2 * (0.1**2 + 0.2**2) + 0.1**2)
    assert frobenius_distance(x, y) == pytest.approx(hand, rel=1e-14)
    with pytest.raises(DimensionMismatch):
        frobenius_distance(x, np.eye(3))


def test_eigencheck_examples():
    A = np.diag([2.0, 5.0])
    res = eigencheck(basis_projector(2, 0), A)
    assert res.is_eigenstate and res.value == pytest.approx(2.0)
    res = eigencheck(np.diag([0.5, 0.5]), A)
    assert not res.is_eigenstate and res.commutes
    res = eigencheck(np.full((2, 2), 0.5), np.array([[0, 1], [1, 0]]))
    assert res.value == pytest.approx(1.0)
    res = eigencheck(np.full((2, 2), 0.5), A)
    assert not res.is_eigenstate and not res.commutes
    with pytest.raises(NonHermitianObservable):
        eigencheck(basis_projector(2, 0), np.array([[0, 1], [0, 0]]))
