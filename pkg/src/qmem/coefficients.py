"""QSDE drift data and deviation-functional constants for one scenario."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import block_row_apply, diam_product, dot_product, first_slice, section, star_product
from .constants import STRUCTURAL_TOL
from .errors import InvalidArgumentError, StateValidationError
from .structure import (
    MatrixBasis,
    StructureConstants,
    check_admissible,
    mean_from_state,
)

BJ = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float if not np.iscomplexobj(a) else complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemSpec:
    """Physical parameters of one memory-control scenario.

    ``E_star`` (n,), ``K`` (n, r), ``M`` (m, n), ``N`` (m,), ``F`` (nu, n),
    ``mu0`` (n,). ``rho0`` is optional and, when given, must reproduce ``mu0``.
    """

    sc: StructureConstants
    basis: MatrixBasis
    E_star: np.ndarray
    K: np.ndarray
    M: np.ndarray
    N: np.ndarray
    F: np.ndarray
    mu0: np.ndarray
    rho0: np.ndarray | None = None

    @classmethod
    def create(cls, sc, basis, E_star, K, M, N, F, mu0=None, rho0=None) -> "SystemSpec":
        n = sc.n
        E_star = np.asarray(E_star, dtype=float)
        K = np.asarray(K, dtype=float)
        M = np.asarray(M, dtype=float)
        N = np.asarray(N, dtype=float)
        F = np.asarray(F, dtype=float)
        if K.ndim == 1:
            K = K.reshape(n, -1)
        if F.ndim == 1:
            F = F.reshape(1, -1)
        if mu0 is None and rho0 is None:
            raise InvalidArgumentError("either mu0 or rho0 is required")
        if rho0 is not None:
            from_rho = mean_from_state(basis, rho0)
            if mu0 is not None and np.abs(np.asarray(mu0, dtype=float) - from_rho).max() > 1e-10:
                raise StateValidationError("mu0 and rho0 disagree")
            mu0 = from_rho
            rho0 = _frozen(np.asarray(rho0, dtype=complex))
        spec = cls(
            sc=sc,
            basis=basis,
            E_star=_frozen(E_star),
            K=_frozen(K),
            M=_frozen(M),
            N=_frozen(N),
            F=_frozen(F),
            mu0=_frozen(np.asarray(mu0, dtype=float)),
            rho0=rho0,
        )
        spec.validate()
        return spec

    @property
    def n(self) -> int:
        return self.sc.n

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def r(self) -> int:
        return self.K.shape[1]

    def validate(self) -> None:
        n = self.n
        if self.basis.n != n:
            raise InvalidArgumentError("basis size does not match structure constants")
        if self.E_star.shape != (n,):
            raise InvalidArgumentError(f"E_star must have length {n}")
        if self.K.ndim != 2 or self.K.shape[0] != n or self.K.shape[1] < 1:
            raise InvalidArgumentError(f"K must be {n} x r with r >= 1")
        if self.M.ndim != 2 or self.M.shape[1] != n:
            raise InvalidArgumentError(f"M must be m x {n}")
        m = self.M.shape[0]
        if m < 2 or m % 2:
            raise InvalidArgumentError(f"channel count m must be even and >= 2, got {m}")
        if self.N.shape != (m,):
            raise InvalidArgumentError(f"N must have length {m}")
        if self.F.ndim != 2 or self.F.shape[1] != n or self.F.shape[0] > n:
            raise InvalidArgumentError(f"F must be nu x {n} with nu <= {n}")
        if np.linalg.matrix_rank(self.F) != self.F.shape[0]:
            raise InvalidArgumentError("F does not have full row rank")
        if self.mu0.shape != (n,):
            raise InvalidArgumentError(f"mu0 must have length {n}")
        report = check_admissible(self.sc, self.mu0)
        if not report.admissible:
            raise StateValidationError(
                f"initial means are not admissible (min eigenvalue {report.min_eigenvalue:.3e})"
            )


def build_ito(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Ito matrix ``Omega = I_m + iJ`` with ``J = I_{m/2} kron [[0, 1], [-1, 0]]``."""
    if m < 2 or m % 2:
        raise InvalidArgumentError(f"channel count must be even and >= 2, got {m}")
    J = np.kron(np.eye(m // 2), BJ)
    return np.eye(m) + 1j * J, J


def build_drift(spec: SystemSpec, J: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Constant drift matrix ``A_*`` and vector ``b``.

    ``A_* = 2 Theta<>(E_* + M^T J N)
            + 2 sum_l Theta_l M^T (M theta_{l..} + J M gamma_{l..})`` and
    ``b = 2 [Theta_1 ... Theta_n] col(M^T J M alpha)``. The sum mixes
    sections ``Theta_l`` with first-index slices ``theta_{l..}``.
    """
    if J is None:
        J = build_ito(spec.m)[1]
    th, ga = spec.sc.theta, spec.sc.gamma
    M = spec.M
    a_star = 2.0 * diam_product(th, spec.E_star + M.T @ J @ spec.N)
    for l in range(spec.n):
        a_star += 2.0 * section(th, l) @ M.T @ (M @ first_slice(th, l) + J @ M @ first_slice(ga, l))
    b = 2.0 * block_row_apply(th, M.T @ J @ M @ spec.sc.alpha)
    return a_star, b


def build_control_sections(spec: SystemSpec) -> np.ndarray:
    """Array of shape (n, n, r) whose k-th section is ``2 Theta<>K_k``."""
    th = spec.sc.theta
    return np.stack([2.0 * diam_product(th, spec.K[:, k]) for k in range(spec.r)], axis=2)


@dataclass(frozen=True)
class Coefficients:
    """Derived drift and deviation data of one scenario (immutable)."""

    A_star: np.ndarray
    b: np.ndarray
    A_sections: np.ndarray
    Omega: np.ndarray
    J: np.ndarray
    Sigma: np.ndarray
    P: np.ndarray
    R: np.ndarray
    sigma: np.ndarray
    d: float
    c: np.ndarray
    z0: np.ndarray
    mu0: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    M: np.ndarray

    @property
    def n(self) -> int:
        return self.A_star.shape[0]

    @property
    def r(self) -> int:
        return self.A_sections.shape[2]


def build_targets(spec: SystemSpec) -> dict:
    """Deviation constants ``Sigma, P, R, sigma, d`` and the initial state ``z0``."""
    if np.linalg.matrix_rank(spec.F) != spec.F.shape[0]:
        raise InvalidArgumentError("F does not have full row rank")
    sigma_mat = spec.F.T @ spec.F
    gamma = spec.sc.gamma
    mu0 = spec.mu0
    P = spec.sc.alpha + dot_product(gamma, mu0)
    sig = star_product(sigma_mat, gamma)
    R = np.column_stack([sig, -2.0 * sigma_mat])
    z0 = np.column_stack([mu0, P])
    d = 2.0 * float(np.sum(sigma_mat * P)) - float(sig @ mu0)
    if abs(d + float(np.sum(R * z0))) > STRUCTURAL_TOL * max(1.0, abs(d)):
        raise InvalidArgumentError("inconsistent deviation offset")
    return dict(Sigma=sigma_mat, P=P, R=R, sigma=sig, d=d, z0=z0)


def build_coefficients(spec: SystemSpec) -> Coefficients:
    Omega, J = build_ito(spec.m)
    a_star, b = build_drift(spec, J)
    targets = build_targets(spec)
    c = np.outer(b, np.concatenate([[1.0], spec.mu0]))
    return Coefficients(
        A_star=_frozen(a_star),
        b=_frozen(b),
        A_sections=_frozen(build_control_sections(spec)),
        Omega=_frozen(Omega),
        J=_frozen(J),
        Sigma=_frozen(targets["Sigma"]),
        P=_frozen(targets["P"]),
        R=_frozen(targets["R"]),
        sigma=_frozen(targets["sigma"]),
        d=targets["d"],
        c=_frozen(c),
        z0=_frozen(targets["z0"]),
        mu0=spec.mu0,
        theta=_frozen(spec.sc.theta),
        gamma=_frozen(spec.sc.gamma),
        M=spec.M,
    )


def assemble_A(coeffs: Coefficients, U: np.ndarray) -> np.ndarray:
    """``A = A_* + sum_k U_k A_k``."""
    U = np.asarray(U, dtype=float)
    if U.shape != (coeffs.r,):
        raise InvalidArgumentError(f"control of length {coeffs.r} expected, got {U.shape}")
    return coeffs.A_star + coeffs.A_sections @ U


def diffusion_matrix(coeffs: Coefficients, x: np.ndarray) -> np.ndarray:
    """Numeric diffusion ``B(x) = 2 (Theta . x) M^T`` (n x m)."""
    return 2.0 * dot_product(coeffs.theta, np.asarray(x)) @ coeffs.M.T
