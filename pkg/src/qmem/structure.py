"""Pauli-string bases and the structure constants of their product algebra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .algebra import dot_product
from .constants import ADMISSIBILITY_TOL, STATE_TOL, STRUCTURAL_TOL
from .errors import (
    CapacityError,
    ClosureViolationError,
    InvalidArgumentError,
    StateValidationError,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_QUBITS = 3


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MatrixBasis:
    """Traceless Hermitian d x d matrices, Hilbert-Schmidt orthogonal."""

    d: int
    matrices: np.ndarray  # shape (n, d, d)
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        """``sum_k coeffs[k] X_k`` as a d x d matrix."""
        return np.tensordot(np.asarray(coeffs), self.matrices, axes=(0, 0))

    def expand(self, x: np.ndarray) -> tuple[complex, np.ndarray, float]:
        """Hilbert-Schmidt expansion ``x = c0 I + sum_l c_l X_l``.

        Returns ``(c0, c, residual)``; ``residual`` is the largest entry of
        the part of ``x`` outside the span of ``{I, X_1..X_n}``.
        """
        c0 = np.trace(x) / self.d
        c = np.einsum("ab,lba->l", x, self.matrices) / self.d
        rest = x - c0 * np.eye(self.d) - self.combine(c)
        return c0, c, float(np.abs(rest).max(initial=0.0))


@dataclass(frozen=True)
class StructureConstants:
    """Affine product rule ``X_j X_k = alpha_jk I + sum_l beta_jkl X_l``.

    ``theta = Im beta`` has antisymmetric sections and ``gamma = Re beta``
    has symmetric sections.
    """

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return self.beta.imag

    @property
    def gamma(self) -> np.ndarray:
        return self.beta.real

    def validate(self, tol: float = STRUCTURAL_TOL) -> None:
        a, th, ga = self.alpha, self.theta, self.gamma
        if np.abs(a - a.T).max() > tol:
            raise InvalidArgumentError("alpha is not symmetric")
        if np.abs(th + th.transpose(1, 0, 2)).max() > tol:
            raise InvalidArgumentError("theta sections are not antisymmetric")
        if np.abs(ga - ga.transpose(1, 0, 2)).max() > tol:
            raise InvalidArgumentError("gamma sections are not symmetric")


def pauli_basis(q: int, max_qubits: int = MAX_QUBITS) -> MatrixBasis:
    """All non-identity q-fold tensor products of ``{I, X, Y, Z}``.

    Ordered lexicographically by label, so for one qubit the order is
    ``sigma_1, sigma_2, sigma_3``.
    """
    if q < 1:
        raise InvalidArgumentError(f"qubit count must be positive, got {q}")
    if q > max_qubits:
        raise CapacityError(f"{q} qubits exceed the cap of {max_qubits}")
    labels = []
    mats = []
    for word in itertools.product("IXYZ", repeat=q):
        label = "".join(word)
        if set(label) == {"I"}:
            continue
        m = np.eye(1, dtype=complex)
        for ch in word:
            m = np.kron(m, PAULI[ch])
        labels.append(label)
        mats.append(m)
    return MatrixBasis(d=2**q, matrices=_frozen(np.array(mats)), labels=tuple(labels))


def derive_structure(basis: MatrixBasis, tol: float = STRUCTURAL_TOL) -> StructureConstants:
    """Structure constants from traces of products of basis matrices."""
    x = basis.matrices
    d = basis.d
    n = basis.n
    alpha = np.einsum("jab,kba->jk", x, x) / d
    beta = np.einsum("jab,kbc,lca->jkl", x, x, x) / d
    if np.abs(alpha.imag).max() > tol:
        raise ClosureViolationError("alpha has a nonzero imaginary part")
    alpha = alpha.real
    eye = np.eye(d)
    worst = 0.0
    for j in range(n):
        for k in range(n):
            rebuilt = alpha[j, k] * eye + np.tensordot(beta[j, k], x, axes=(0, 0))
            worst = max(worst, float(np.abs(x[j] @ x[k] - rebuilt).max()))
    if worst > tol:
        raise ClosureViolationError(
            f"basis is not multiplicatively closed (residual {worst:.3e})"
        )
    sc = StructureConstants(alpha=_frozen(alpha), beta=_frozen(beta))
    sc.validate(tol)
    return sc


@dataclass(frozen=True)
class AdmissibilityReport:
    min_eigenvalue: float
    admissible: bool


def check_admissible(sc: StructureConstants, mu0: np.ndarray) -> AdmissibilityReport:
    """Minimum eigenvalue of the quantum covariance ``alpha + beta.mu0 - mu0 mu0^T``."""
    mu0 = np.asarray(mu0, dtype=float)
    if mu0.shape != (sc.n,):
        raise InvalidArgumentError(f"mean vector of length {sc.n} expected")
    cov = sc.alpha + dot_product(sc.beta, mu0) - np.outer(mu0, mu0)
    cov = 0.5 * (cov + cov.conj().T)
    lam = float(np.linalg.eigvalsh(cov).min())
    return AdmissibilityReport(min_eigenvalue=lam, admissible=lam >= -ADMISSIBILITY_TOL)


def validate_density(rho: np.ndarray, d: int, tol: float = STATE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d, d):
        raise StateValidationError(f"density matrix of shape ({d}, {d}) expected, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise StateValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise StateValidationError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise StateValidationError("density matrix is not positive semidefinite")
    return rho


def mean_from_state(basis: MatrixBasis, rho0: np.ndarray) -> np.ndarray:
    """Initial means ``mu0_k = Tr(rho0 X_k)``."""
    rho0 = validate_density(rho0, basis.d)
    mu = np.einsum("ab,kba->k", rho0, basis.matrices)
    return mu.real.copy()


def state_from_mean(basis: MatrixBasis, mu0: np.ndarray) -> np.ndarray:
    """Density matrix ``(I + sum_k mu0_k X_k) / d`` reproducing the means.

    Valid for bases with ``Tr(X_j X_k) = d delta_jk``; the result is checked
    to be a physical state.
    """
    rho = (np.eye(basis.d) + basis.combine(np.asarray(mu0, dtype=float))) / basis.d
    return validate_density(rho, basis.d)
