import numpy as np
import pytest

from conftest import levi_civita
from qmem.errors import CapacityError, ClosureViolationError, InvalidArgumentError, StateValidationError
from qmem.structure import (
    MatrixBasis,
    check_admissible,
    derive_structure,
    mean_from_state,
    pauli_basis,
    state_from_mean,
    validate_density,
)

SIGMA = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def test_single_qubit_basis_is_pauli():
    basis = pauli_basis(1)
    assert basis.labels == ("X", "Y", "Z")
    for got, want in zip(basis.matrices, SIGMA):
        np.testing.assert_array_equal(got, want)
    gram = np.einsum("jab,kba->jk", basis.matrices, basis.matrices)
    np.testing.assert_array_equal(gram, 2 * np.eye(3))


@pytest.mark.parametrize("q", [1, 2])
def test_basis_invariants(q):
    basis = pauli_basis(q)
    n, d = 4**q - 1, 2**q
    assert basis.n == n and basis.d == d
    x = basis.matrices
    assert np.abs(x - x.conj().transpose(0, 2, 1)).max() == 0
    assert np.abs(np.trace(x, axis1=1, axis2=2)).max() == 0
    np.testing.assert_allclose(np.einsum("jab,kba->jk", x, x), d * np.eye(n), atol=1e-12)
    assert list(basis.labels) == sorted(basis.labels)


def test_capacity_cap():
    assert pauli_basis(3).n == 63
    with pytest.raises(CapacityError):
        pauli_basis(4)
    with pytest.raises(InvalidArgumentError):
        pauli_basis(0)


def test_single_qubit_structure_constants():
    sc = derive_structure(pauli_basis(1))
    np.testing.assert_array_equal(sc.alpha, np.eye(3))
    np.testing.assert_array_equal(sc.theta, levi_civita())
    np.testing.assert_array_equal(sc.gamma, np.zeros((3, 3, 3)))


@pytest.mark.parametrize("q", [1, 2])
def test_closure_ccr_and_anticommutator(q):
    basis = pauli_basis(q)
    sc = derive_structure(basis)
    x = basis.matrices
    eye = np.eye(basis.d)
    for j in range(basis.n):
        for k in range(basis.n):
            prod = x[j] @ x[k]
            rebuilt = sc.alpha[j, k] * eye + np.tensordot(sc.beta[j, k], x, axes=(0, 0))
            assert np.abs(prod - rebuilt).max() <= 1e-12
            comm = prod - x[k] @ x[j]
            assert np.abs(comm - 2j * np.tensordot(sc.theta[j, k], x, axes=(0, 0))).max() <= 1e-12
            anti = 0.5 * (prod + x[k] @ x[j])
            rebuilt = sc.alpha[j, k] * eye + np.tensordot(sc.gamma[j, k], x, axes=(0, 0))
            assert np.abs(anti - rebuilt).max() <= 1e-12


def test_two_qubit_section_symmetries():
    sc = derive_structure(pauli_basis(2))
    beta = sc.beta
    assert np.abs(beta - beta.conj().transpose(1, 0, 2)).max() <= 1e-12
    assert np.abs(sc.theta + sc.theta.transpose(1, 0, 2)).max() <= 1e-12
    assert np.abs(sc.gamma - sc.gamma.transpose(1, 0, 2)).max() <= 1e-12
    # two qubits have a nonzero anticommutator part, unlike one
    assert np.abs(sc.gamma).max() == pytest.approx(1.0)


def test_single_qubit_commutator_example():
    basis = pauli_basis(1)
    sc = derive_structure(basis)
    x = basis.matrices
    comm = x[0] @ x[1] - x[1] @ x[0]
    np.testing.assert_allclose(comm, 2j * x[2], atol=1e-15)
    np.testing.assert_allclose(2j * np.tensordot(sc.theta[0, 1], x, axes=(0, 0)), 2j * x[2], atol=1e-15)


def test_unclosed_basis_rejected():
    # {sigma_1, sigma_2} alone is not closed: their product involves sigma_3
    basis = MatrixBasis(d=2, matrices=np.array(SIGMA[:2]), labels=("X", "Y"))
    with pytest.raises(ClosureViolationError):
        derive_structure(basis)


def test_admissibility_examples():
    sc = derive_structure(pauli_basis(1))
    rep = check_admissible(sc, np.array([0.0, 0.0, 1.0]))
    assert rep.admissible and rep.min_eigenvalue == pytest.approx(0.0, abs=1e-14)
    cov = sc.alpha + np.tensordot(sc.beta, np.array([0.0, 0.0, 1.0]), axes=(2, 0))
    np.testing.assert_allclose(cov - np.diag([0, 0, 1.0]), [[1, 1j, 0], [-1j, 1, 0], [0, 0, 0]], atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(cov - np.diag([0, 0, 1.0])), [0, 0, 2], atol=1e-14)
    assert check_admissible(sc, np.zeros(3)).min_eigenvalue == pytest.approx(1.0)
    bad = check_admissible(sc, np.array([0.0, 0.0, 1.5]))
    assert not bad.admissible and bad.min_eigenvalue < 0


def test_mean_from_state_examples():
    basis = pauli_basis(1)
    np.testing.assert_allclose(mean_from_state(basis, np.eye(2) / 2), 0.0, atol=1e-16)
    np.testing.assert_allclose(mean_from_state(basis, np.diag([1.0, 0.0])), [0, 0, 1], atol=1e-16)
    rho = (np.eye(2) + 0.5 * SIGMA[0]) / 2
    np.testing.assert_allclose(mean_from_state(basis, rho), [0.5, 0, 0], atol=1e-16)


def test_mean_state_round_trip_two_qubits(rng):
    basis = pauli_basis(2)
    sc = derive_structure(basis)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    mu = mean_from_state(basis, rho)
    np.testing.assert_allclose(state_from_mean(basis, mu), rho, atol=1e-14)
    assert check_admissible(sc, mu).admissible


@pytest.mark.parametrize(
    "rho",
    [
        np.array([[1.0, 1.0], [0.0, 0.0]]),  # not Hermitian
        np.diag([0.7, 0.7]),  # trace
        np.diag([1.2, -0.2]),  # negative eigenvalue
        np.eye(3) / 3,  # shape
    ],
)
def test_invalid_density_rejected(rho):
    with pytest.raises(StateValidationError):
        validate_density(rho, 2)
