import numpy as np
import pytest

from conftest import qubit_spec
from qmem.coefficients import (
    SystemSpec,
    assemble_A,
    build_coefficients,
    build_control_sections,
    build_drift,
    build_ito,
    build_targets,
    diffusion_matrix,
)
from qmem.errors import InvalidArgumentError, StateValidationError
from qmem.oracle import diffusion_check, drift_check
from qmem.scenarios import random_spec
from qmem.structure import derive_structure, pauli_basis

ROT3 = np.array([[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def test_ito_matrix():
    Omega, J = build_ito(2)
    np.testing.assert_array_equal(J, [[0, 1], [-1, 0]])
    np.testing.assert_array_equal(Omega, [[1, 1j], [-1j, 1]])
    np.testing.assert_array_equal(J @ J, -np.eye(2))
    Omega4, _ = build_ito(4)
    np.testing.assert_allclose(np.linalg.eigvalsh(Omega4), [0, 0, 2, 2], atol=1e-14)
    for m in (0, 3):
        with pytest.raises(InvalidArgumentError):
            build_ito(m)


def test_rotation_generator():
    spec = qubit_spec(E_star=(0, 0, 1))
    A, b = build_drift(spec)
    np.testing.assert_array_equal(A, ROT3)
    np.testing.assert_array_equal(b, np.zeros(3))


def test_worked_example_drift(demo_coeffs, demo_spec):
    np.testing.assert_allclose(demo_coeffs.A_star, [[0, -2, 0], [2, -2, 0], [0, 0, -2]], atol=1e-15)
    np.testing.assert_array_equal(demo_coeffs.b, np.zeros(3))
    assert drift_check(demo_spec, demo_coeffs) <= 1e-10


def test_control_sections():
    spec = qubit_spec(K=np.column_stack([np.zeros(3), [0, 0, 1.0]]))
    cA = build_control_sections(spec)
    np.testing.assert_array_equal(cA[:, :, 0], np.zeros((3, 3)))
    np.testing.assert_array_equal(cA[:, :, 1], ROT3)
    cf = build_coefficients(spec)
    for k in range(2):
        np.testing.assert_array_equal(assemble_A(cf, np.eye(2)[k]), cf.A_star + cA[:, :, k])
    for k in range(2):
        assert np.all(np.diag(cA[:, :, k]) == 0)


def test_assemble_linearity(rng):
    spec = random_spec(rng, qubits=2, controls=3)
    cf = build_coefficients(spec)
    np.testing.assert_array_equal(assemble_A(cf, np.zeros(3)), cf.A_star)
    u1, u2 = rng.normal(size=3), rng.normal(size=3)
    lhs = assemble_A(cf, u1 + u2) - cf.A_star
    rhs = (assemble_A(cf, u1) - cf.A_star) + (assemble_A(cf, u2) - cf.A_star)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        assemble_A(cf, np.zeros(2))


def test_diffusion_examples(rng):
    cf = build_coefficients(qubit_spec())
    np.testing.assert_array_equal(diffusion_matrix(cf, rng.normal(size=3)), np.zeros((3, 2)))
    spec = qubit_spec(M=[[1, 0, 0], [0, 1, 0]])
    cf = build_coefficients(spec)
    np.testing.assert_array_equal(diffusion_matrix(cf, np.zeros(3)), np.zeros((3, 2)))
    theta3 = np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 0.0]])
    np.testing.assert_array_equal(diffusion_matrix(cf, np.eye(3)[2]), 2 * theta3 @ spec.M.T)
    assert diffusion_check(spec, cf) <= 1e-12


def test_targets_for_pure_state_free_means():
    spec = qubit_spec(mu0=(0, 0, 0))
    t = build_targets(spec)
    np.testing.assert_array_equal(t["P"], np.eye(3))
    np.testing.assert_array_equal(t["sigma"], np.zeros(3))
    assert t["d"] == 6.0
    np.testing.assert_array_equal(t["z0"], np.column_stack([np.zeros(3), np.eye(3)]))


def test_single_variable_selection():
    spec = qubit_spec(F=[[1.0, 0.0, 0.0]])
    t = build_targets(spec)
    np.testing.assert_array_equal(t["Sigma"], np.diag([1.0, 0.0, 0.0]))
    assert np.linalg.matrix_rank(t["Sigma"]) == 1


def test_target_invariants_random(rng):
    for _ in range(10):
        spec = random_spec(rng)
        cf = build_coefficients(spec)
        assert abs(cf.d + np.sum(cf.R * cf.z0)) <= 1e-12 * max(1.0, abs(cf.d))
        assert np.linalg.eigvalsh(cf.Sigma).min() >= -1e-12
        assert np.linalg.matrix_rank(cf.Sigma) == spec.F.shape[0]
        assert np.linalg.eigvalsh(cf.Omega).min() >= -1e-12
        spec0 = SystemSpec.create(
            spec.sc, spec.basis, spec.E_star, spec.K, np.zeros_like(spec.M), spec.N, spec.F, mu0=spec.mu0
        )
        assert np.all(build_coefficients(spec0).b == 0)


def test_coefficients_are_read_only(demo_coeffs):
    with pytest.raises(ValueError):
        demo_coeffs.A_star[0, 0] = 1.0


def test_spec_validation():
    basis = pauli_basis(1)
    sc = derive_structure(basis)
    ok = dict(E_star=np.zeros(3), K=np.eye(3), M=np.zeros((2, 3)), N=np.zeros(2), F=np.eye(3), mu0=np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        SystemSpec.create(sc, basis, **{**ok, "M": np.zeros((3, 3)), "N": np.zeros(3)})
    with pytest.raises(InvalidArgumentError):
        SystemSpec.create(sc, basis, **{**ok, "F": np.array([[1.0, 0, 0], [2.0, 0, 0]])})
    with pytest.raises(StateValidationError):
        SystemSpec.create(sc, basis, **{**ok, "mu0": np.array([0, 0, 1.5])})
    with pytest.raises(StateValidationError):
        SystemSpec.create(sc, basis, **{**ok, "mu0": np.array([0, 0, 1.0]), "rho0": np.eye(2) / 2})
    spec = SystemSpec.create(sc, basis, **{**ok, "mu0": None, "rho0": np.diag([1.0, 0.0])})
    np.testing.assert_allclose(spec.mu0, [0, 0, 1])
