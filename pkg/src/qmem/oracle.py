"""Independent check of the drift, diffusion and moment formulas.

Everything here works on the d x d matrix representation: the Heisenberg
GKSL generator

    G(X) = i[H, X] + 1/2 sum_jk Omega_jk (L_j [X, L_k] + [L_j, X] L_k),

its predual acting on density matrices, and RK4 propagation of states and of
the regression operators ``X_k rho0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import rk4_solve
from .aux_system import ControlSignal, ZeroControl, default_step
from .coefficients import Coefficients, SystemSpec, assemble_A, build_ito, diffusion_matrix
from .constants import GENERATOR_TOL, TRACE_DRIFT_TOL
from .errors import (
    CapacityError,
    IntegratorStepError,
    InvalidArgumentError,
    ModelInconsistencyError,
)
from .structure import state_from_mean, validate_density

ORACLE_MAX_QUBITS = 2


@dataclass(frozen=True)
class MatrixRep:
    """Hamiltonian, coupling operators and Ito matrix on the system space."""

    H: np.ndarray
    L: np.ndarray  # shape (m, d, d)
    Omega: np.ndarray

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def _K(self) -> np.ndarray:
        # 1/2 sum_jk Omega_jk L_j L_k
        return 0.5 * np.einsum("jk,jab,kbc->ac", self.Omega, self.L, self.L)


def _check_size(spec: SystemSpec, allow_large: bool) -> None:
    q = int(round(np.log2(spec.basis.d)))
    if q > ORACLE_MAX_QUBITS and not allow_large:
        raise CapacityError(f"oracle limited to {ORACLE_MAX_QUBITS} qubits; pass allow_large=True")


def matrix_rep(spec: SystemSpec, U: np.ndarray | None = None) -> MatrixRep:
    """``H = (E_* + K U)^T X`` and ``L_k = (M X)_k + N_k I``."""
    basis = spec.basis
    U = np.zeros(spec.r) if U is None else np.asarray(U, dtype=float)
    E = spec.E_star + spec.K @ U
    H = basis.combine(E)
    eye = np.eye(basis.d)
    L = np.array([basis.combine(spec.M[k]) + spec.N[k] * eye for k in range(spec.m)])
    Omega, _ = build_ito(spec.m)
    return MatrixRep(H=H, L=L, Omega=Omega)


def gksl_apply(rep: MatrixRep, X: np.ndarray) -> np.ndarray:
    """Heisenberg generator applied to ``X`` (broadcasts over leading axes)."""
    out = 1j * (rep.H @ X - X @ rep.H)
    m = rep.L.shape[0]
    for j in range(m):
        for k in range(m):
            w = rep.Omega[j, k]
            if w != 0:
                out = out + w * (rep.L[j] @ X @ rep.L[k])
    K = rep._K
    return out - K @ X - X @ K


def gksl_predual(rep: MatrixRep, rho: np.ndarray) -> np.ndarray:
    """Predual generator: ``Tr(predual(rho) X) = Tr(rho G(X))``."""
    out = -1j * (rep.H @ rho - rho @ rep.H)
    m = rep.L.shape[0]
    for j in range(m):
        for k in range(m):
            w = rep.Omega[j, k]
            if w != 0:
                out = out + w * (rep.L[k] @ rho @ rep.L[j])
    K = rep._K
    return out - K @ rho - rho @ K


@dataclass
class DriftReport:
    """Generator expansion against the model drift, entry by entry."""

    A_oracle: np.ndarray
    b_oracle: np.ndarray
    A_model: np.ndarray
    b_model: np.ndarray
    span_residual: float

    @property
    def discrepancy(self) -> np.ndarray:
        return np.column_stack([self.A_oracle - self.A_model, self.b_oracle - self.b_model])

    @property
    def max_error(self) -> float:
        return float(np.abs(self.discrepancy).max())


def drift_report(
    spec: SystemSpec,
    coeffs: Coefficients,
    U: np.ndarray | None = None,
    allow_large: bool = False,
) -> DriftReport:
    """Expand ``G(X_j)`` over ``{I, X_1..X_n}`` and compare with row j of ``[A(U) | b]``."""
    _check_size(spec, allow_large)
    U = np.zeros(spec.r) if U is None else np.asarray(U, dtype=float)
    rep = matrix_rep(spec, U)
    basis = spec.basis
    n = spec.n
    A_or = np.zeros((n, n))
    b_or = np.zeros(n)
    worst = 0.0
    for j in range(n):
        image = gksl_apply(rep, basis.matrices[j])
        c0, c, resid = basis.expand(image)
        worst = max(worst, resid, float(abs(c0.imag)), float(np.abs(c.imag).max()))
        A_or[j] = c.real
        b_or[j] = c0.real
    if worst > GENERATOR_TOL:
        raise ModelInconsistencyError(
            f"generator image leaves the affine span of the basis (residual {worst:.3e})"
        )
    return DriftReport(
        A_oracle=A_or,
        b_oracle=b_or,
        A_model=assemble_A(coeffs, U),
        b_model=np.array(coeffs.b),
        span_residual=worst,
    )


def drift_check(spec, coeffs, U=None, allow_large: bool = False) -> float:
    """Largest entrywise mismatch between the generator expansion and ``[A(U) | b]``."""
    return drift_report(spec, coeffs, U, allow_large).max_error


def diffusion_check(spec: SystemSpec, coeffs: Coefficients, allow_large: bool = False) -> float:
    """Compare ``-i[X_j, L_k]`` with the basis expansion of ``B(X)_jk = 2((Theta.X) M^T)_jk``."""
    _check_size(spec, allow_large)
    rep = matrix_rep(spec)
    basis = spec.basis
    n, m = spec.n, spec.m
    # B(X) is linear in X: the coefficient of X_p in B(X)_jk is B(e_p)_jk
    coef = np.stack([diffusion_matrix(coeffs, np.eye(n)[p]) for p in range(n)], axis=2)
    worst = 0.0
    for j in range(n):
        Xj = basis.matrices[j]
        for k in range(m):
            lhs = -1j * (Xj @ rep.L[k] - rep.L[k] @ Xj)
            rhs = basis.combine(coef[j, k])
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def _initial_state(spec: SystemSpec, rho0) -> np.ndarray:
    if rho0 is not None:
        return validate_density(rho0, spec.basis.d)
    if spec.rho0 is not None:
        return np.array(spec.rho0)
    return state_from_mean(spec.basis, spec.mu0)


def _rep_sequence(spec: SystemSpec, control: ControlSignal):
    if not control.open_loop:
        raise InvalidArgumentError("the oracle propagates open-loop controls only")
    base = matrix_rep(spec)
    X = spec.basis.matrices

    def rep_at(t):
        H = base.H + np.tensordot(spec.K @ control(t), X, axes=(0, 0))
        return MatrixRep(H=H, L=base.L, Omega=base.Omega)

    return rep_at


@dataclass
class DensityPath:
    times: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    trace_drift: float
    hermiticity: float
    min_eigenvalue: float


def propagate_density(
    spec: SystemSpec,
    control: ControlSignal | None,
    tau: float,
    dt: float | None = None,
    rho0: np.ndarray | None = None,
    allow_large: bool = False,
) -> DensityPath:
    """RK4 for ``rho' = predual(rho)`` and the means ``mu_k = Tr(rho X_k)``."""
    _check_size(spec, allow_large)
    control = ZeroControl(spec.r) if control is None else control
    dt = default_step(tau) if dt is None else dt
    rep_at = _rep_sequence(spec, control)
    rho_init = _initial_state(spec, rho0).astype(complex)
    times, rhos = rk4_solve(lambda t, rho: gksl_predual(rep_at(t), rho), rho_init, 0.0, tau, dt)
    traces = np.trace(rhos, axis1=1, axis2=2)
    drift = float(np.abs(traces - 1.0).max())
    if drift > TRACE_DRIFT_TOL:
        raise IntegratorStepError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_TOL}")
    herm = float(np.abs(rhos - rhos.conj().transpose(0, 2, 1)).max())
    lam = float(np.linalg.eigvalsh(0.5 * (rhos + rhos.conj().transpose(0, 2, 1))).min())
    mu = np.einsum("tab,kba->tk", rhos, spec.basis.matrices).real
    return DensityPath(times=times, rho=rhos, mu=mu, trace_drift=drift, hermiticity=herm, min_eigenvalue=lam)


def regression_two_point(
    spec: SystemSpec,
    control: ControlSignal | None,
    tau: float,
    dt: float | None = None,
    rho0: np.ndarray | None = None,
    allow_large: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """``Re E[X_j(t) X_k(0)]`` by propagating ``S_k(0) = X_k rho0`` with the predual.

    Returns ``(times, M)`` with ``M[t, j, k] = Re Tr(S_k(t) X_j)``.
    """
    _check_size(spec, allow_large)
    control = ZeroControl(spec.r) if control is None else control
    dt = default_step(tau) if dt is None else dt
    rep_at = _rep_sequence(spec, control)
    X = spec.basis.matrices
    rho_init = _initial_state(spec, rho0).astype(complex)
    S0 = X @ rho_init
    times, Ss = rk4_solve(lambda t, S: gksl_predual(rep_at(t), S), S0, 0.0, tau, dt)
    moments = np.einsum("tkab,jba->tjk", Ss, X).real
    return times, moments
