"""First-order perturbative solution of the finite-horizon Bellman equation.

With the penalty ``Pi_eps = Gamma / (2 eps)`` the Bellman function expands as
``Psi_eps = Psi0 + eps Psi1 + O(eps^2)``:

* ``Psi0`` is the zero-control transport solution, affine in ``v``;
* ``Psi1`` is a quadratic form in ``w = vec(v)`` (column-major) whose
  coefficients ``(S, s, s0)`` solve the backward linear ODEs

      S' + S AA + AA^T S = C(t),   C = Y Gamma^{-1} Y^T,
      s' + AA^T s + 2 S c_w = 0,
      s0' + s^T c_w = 0,

  with ``AA = I_{n+1} kron A_*``, ``c_w = vec(c)``, ``Y`` the n(n+1) x r
  matrix of columns ``vec(A_k^T Lambda(t))``, ``Lambda(t) = e^{(tau-t)A_*^T} R``
  and zero terminal values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .algebra import expm, expm_and_integral, star_product, time_grid
from .aux_system import FeedbackControl, Trajectory, default_step, simulate
from .coefficients import Coefficients
from .errors import (
    ExpansionStateError,
    InvalidArgumentError,
    NumericOverflowError,
)

# storage budget for the tabulated quadratic-form coefficients
_STORE_BYTES = 256 * 2**20


def vec(v: np.ndarray) -> np.ndarray:
    """Column-major vectorisation."""
    return np.asarray(v).ravel(order="F")


def unvec(w: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(w).reshape((n, n + 1), order="F")


@dataclass(frozen=True)
class Psi1Table:
    """Tabulated ``(S, s, s0)`` and their time derivatives on ascending knots."""

    times: np.ndarray
    S: np.ndarray
    s: np.ndarray
    s0: np.ndarray
    dS: np.ndarray
    ds: np.ndarray
    ds0: np.ndarray

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray, float, np.ndarray, np.ndarray, float]:
        """Cubic Hermite interpolation of the coefficients and their derivatives."""
        times = self.times
        i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        h = times[i + 1] - times[i]
        x = (t - times[i]) / h
        if abs(x) < 1e-12:
            return self.S[i], self.s[i], float(self.s0[i]), self.dS[i], self.ds[i], float(self.ds0[i])
        if abs(x - 1.0) < 1e-12:
            j = i + 1
            return self.S[j], self.s[j], float(self.s0[j]), self.dS[j], self.ds[j], float(self.ds0[j])
        x2, x3 = x * x, x * x * x
        w = (2 * x3 - 3 * x2 + 1, (x3 - 2 * x2 + x) * h, -2 * x3 + 3 * x2, (x3 - x2) * h)
        dw = ((6 * x2 - 6 * x) / h, 3 * x2 - 4 * x + 1, (-6 * x2 + 6 * x) / h, 3 * x2 - 2 * x)

        def interp(y, dy, wts):
            return wts[0] * y[i] + wts[1] * dy[i] + wts[2] * y[i + 1] + wts[3] * dy[i + 1]

        return (
            interp(self.S, self.dS, w),
            interp(self.s, self.ds, w),
            float(interp(self.s0, self.ds0, w)),
            interp(self.S, self.dS, dw),
            interp(self.s, self.ds, dw),
            float(interp(self.s0, self.ds0, dw)),
        )


@dataclass(frozen=True)
class ValueExpansion:
    """``Psi0 + eps Psi1`` for one scenario, horizon and control shape ``Gamma``."""

    coeffs: Coefficients
    tau: float
    Gamma: np.ndarray
    term1: Psi1Table | None = None
    epsilon: float | None = None

    @property
    def n(self) -> int:
        return self.coeffs.n

    @cached_property
    def _gamma_factor(self):
        return cho_factor(self.Gamma)

    def gamma_solve(self, y: np.ndarray) -> np.ndarray:
        return cho_solve(self._gamma_factor, y)

    def costate(self, t: float) -> np.ndarray:
        """``Lambda(t) = e^{(tau - t) A_*^T} R``, the gradient of ``Psi0``."""
        _check_time(self, t)
        return expm((self.tau - t) * self.coeffs.A_star.T) @ self.coeffs.R

    def require_term1(self) -> Psi1Table:
        if self.term1 is None:
            raise ExpansionStateError("Psi1 has not been solved; call solve_psi1 first")
        return self.term1


def _check_time(expansion: ValueExpansion, t: float) -> None:
    if t < -1e-12 or t > expansion.tau + 1e-12:
        raise InvalidArgumentError(f"time {t} outside [0, {expansion.tau}]")


def make_expansion(
    coeffs: Coefficients,
    Gamma: np.ndarray,
    tau: float,
    dt: float | None = None,
    epsilon: float | None = None,
    solve: bool = True,
    stride: int | None = None,
) -> ValueExpansion:
    Gamma = np.asarray(Gamma, dtype=float)
    if Gamma.shape != (coeffs.r, coeffs.r):
        raise InvalidArgumentError(f"Gamma must be {coeffs.r} x {coeffs.r}")
    if np.abs(Gamma - Gamma.T).max() > 1e-12 or np.linalg.eigvalsh(Gamma).min() <= 0:
        raise InvalidArgumentError("Gamma must be symmetric positive definite")
    if not tau > 0:
        raise InvalidArgumentError(f"horizon must be positive, got {tau}")
    term1 = solve_psi1(coeffs, Gamma, tau, dt, stride=stride) if solve else None
    return ValueExpansion(coeffs=coeffs, tau=float(tau), Gamma=Gamma, term1=term1, epsilon=epsilon)


def psi0_eval(expansion: ValueExpansion, t: float, v: np.ndarray) -> tuple[float, np.ndarray]:
    """Zero-control Bellman term and its gradient ``e^{(tau-t)A_*^T} R``."""
    _check_time(expansion, t)
    cf = expansion.coeffs
    e, integral = expm_and_integral(cf.A_star, max(expansion.tau - t, 0.0))
    value = float(np.sum(cf.R * (e @ v + integral @ cf.c))) + cf.d
    return value, e.T @ cf.R


def psi0_dt(expansion: ValueExpansion, t: float, v: np.ndarray) -> float:
    """Exact time derivative of ``Psi0``."""
    cf = expansion.coeffs
    return -float(np.sum(expansion.costate(t) * (cf.A_star @ v + cf.c)))


def _control_gradient(expansion: ValueExpansion, grad: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``(grad v^T) * A``."""
    return star_product(grad @ v.T, expansion.coeffs.A_sections)


def u0_eval(expansion: ValueExpansion, t: float, v: np.ndarray) -> np.ndarray:
    """Leading control term ``-2 Gamma^{-1}((e^{(tau-t)A_*^T} R v^T) * A)``."""
    return -2.0 * expansion.gamma_solve(_control_gradient(expansion, expansion.costate(t), v))


def _psi1_source(coeffs: Coefficients, Gamma_inv: np.ndarray, costate: np.ndarray) -> np.ndarray:
    cA = coeffs.A_sections
    Y = np.stack([vec(cA[:, :, k].T @ costate) for k in range(coeffs.r)], axis=1)
    return Y @ Gamma_inv @ Y.T


def solve_psi1(
    coeffs: Coefficients,
    Gamma: np.ndarray,
    tau: float,
    dt: float | None = None,
    stride: int | None = None,
) -> Psi1Table:
    """Backward RK4 for the quadratic-form coefficients of ``Psi1``.

    ``stride`` keeps every ``stride``-th grid node as an interpolation knot;
    by default it is chosen to keep the table under a fixed memory budget.
    """
    dt = default_step(tau) if dt is None else dt
    n = coeffs.n
    N = n * (n + 1)
    A_star = coeffs.A_star
    c_w = vec(coeffs.c)
    Gamma_inv = np.linalg.inv(Gamma)
    Gamma_inv = 0.5 * (Gamma_inv + Gamma_inv.T)
    grid = time_grid(tau, 0.0, dt)
    if stride is None:
        per_knot = 2 * 8 * (N * N + N + 1)
        stride = max(1, math.ceil(len(grid) * per_knot / _STORE_BYTES))
    at_A = A_star.T

    def rhs(t, S, s, s0):
        C = _psi1_source(coeffs, Gamma_inv, expm((tau - t) * at_A) @ coeffs.R)
        SA = (S.reshape(N, n + 1, n) @ A_star).reshape(N, N)
        dS = C - SA - SA.T
        ds = -vec(at_A @ unvec(s, n)) - 2.0 * S @ c_w
        ds0 = -float(s @ c_w)
        return dS, ds, ds0

    S = np.zeros((N, N))
    s = np.zeros(N)
    s0 = 0.0
    knots = [(grid[0], S, s, s0, *rhs(grid[0], S, s, s0))]
    last = len(grid) - 1
    for i in range(last):
        t = grid[i]
        h = grid[i + 1] - t
        k1 = rhs(t, S, s, s0)
        k2 = rhs(t + h / 2, S + h / 2 * k1[0], s + h / 2 * k1[1], s0 + h / 2 * k1[2])
        k3 = rhs(t + h / 2, S + h / 2 * k2[0], s + h / 2 * k2[1], s0 + h / 2 * k2[2])
        k4 = rhs(t + h, S + h * k3[0], s + h * k3[1], s0 + h * k3[2])
        S = S + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        S = 0.5 * (S + S.T)
        s = s + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        s0 = s0 + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(s)) and math.isfinite(s0)):
            raise NumericOverflowError(f"Psi1 coefficients blew up at t = {grid[i + 1]:.6g}", time=float(grid[i + 1]))
        if (i + 1) % stride == 0 or i + 1 == last:
            t1 = grid[i + 1]
            knots.append((t1, S, s, s0, *rhs(t1, S, s, s0)))
    knots.reverse()
    cols = list(zip(*knots))
    return Psi1Table(
        times=np.array(cols[0]),
        S=np.array(cols[1]),
        s=np.array(cols[2]),
        s0=np.array(cols[3]),
        dS=np.array(cols[4]),
        ds=np.array(cols[5]),
        ds0=np.array(cols[6]),
    )


def psi1_eval(expansion: ValueExpansion, t: float, v: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and exact gradient of the quadratic form ``Psi1``."""
    _check_time(expansion, t)
    S, s, s0, *_ = expansion.require_term1().at(t)
    w = vec(v)
    Sw = S @ w
    return float(w @ Sw + s @ w + s0), unvec(2.0 * Sw + s, expansion.n)


def psi1_dt(expansion: ValueExpansion, t: float, v: np.ndarray) -> float:
    """Time derivative of ``Psi1`` from the tabulated coefficient derivatives."""
    _, _, _, dS, ds, ds0 = expansion.require_term1().at(t)
    w = vec(v)
    return float(w @ dS @ w + ds @ w + ds0)


def psi1_by_characteristics(expansion: ValueExpansion, t: float, v: np.ndarray, nodes: int = 64) -> float:
    """``-int_t^tau rho(s, z(s)) ds`` along the uncontrolled characteristic from ``(t, v)``.

    ``rho(s, z) = |(Lambda(s) z^T) * A|^2_{Gamma^{-1}}`` is integrated with
    Gauss-Legendre quadrature, independently of the tabulated quadratic form.
    """
    _check_time(expansion, t)
    cf = expansion.coeffs
    span = expansion.tau - t
    if span <= 0:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for xi, wi in zip(x, w):
        s = t + 0.5 * span * (xi + 1.0)
        e, integral = expm_and_integral(cf.A_star, s - t)
        z = e @ v + integral @ cf.c
        y = _control_gradient(expansion, expansion.costate(s), z)
        total += wi * float(y @ expansion.gamma_solve(y))
    return -0.5 * span * total


def u1_eval(expansion: ValueExpansion, t: float, v: np.ndarray) -> np.ndarray:
    """Second control term ``-2 Gamma^{-1}((grad Psi1 v^T) * A)``."""
    _, grad = psi1_eval(expansion, t, v)
    return -2.0 * expansion.gamma_solve(_control_gradient(expansion, grad, v))


def value_eval(expansion: ValueExpansion, t: float, v: np.ndarray, eps: float) -> tuple[float, np.ndarray]:
    """``Psi0 + eps Psi1`` and its gradient."""
    p0, g0 = psi0_eval(expansion, t, v)
    if eps == 0:
        return p0, g0
    p1, g1 = psi1_eval(expansion, t, v)
    return p0 + eps * p1, g0 + eps * g1


def control_eval(expansion: ValueExpansion, t: float, v: np.ndarray, eps: float) -> np.ndarray:
    """Truncated law ``eps u0 + eps^2 u1``."""
    u = eps * u0_eval(expansion, t, v)
    if eps != 0:
        u = u + eps**2 * u1_eval(expansion, t, v)
    return u


def hjb_residual(
    expansion: ValueExpansion,
    t: float,
    v: np.ndarray,
    eps: float,
    time_derivative: str = "fd",
    fd_step: float | None = None,
) -> float:
    """Absolute residual of the eps-family Bellman equation for ``Psi0 + eps Psi1``.

    ``time_derivative="fd"`` uses central differences with step ``1e-4 tau``
    (Richardson-combined with the half step); ``"exact"`` uses the
    closed-form and tabulated derivatives.
    """
    cf = expansion.coeffs
    h = 1e-4 * expansion.tau if fd_step is None else fd_step
    if time_derivative == "fd":
        if t - h < 0 or t + h > expansion.tau:
            raise InvalidArgumentError(f"time {t} too close to the boundary for step {h}")
        def central(step):
            hi = value_eval(expansion, t + step, v, eps)[0]
            lo = value_eval(expansion, t - step, v, eps)[0]
            return (hi - lo) / (2 * step)

        # Richardson combination of steps h and h/2 removes the O(h^2) term
        dt_val = (4.0 * central(h / 2) - central(h)) / 3.0
    elif time_derivative == "exact":
        dt_val = psi0_dt(expansion, t, v) + (eps * psi1_dt(expansion, t, v) if eps else 0.0)
    else:
        raise InvalidArgumentError(f"unknown time derivative mode {time_derivative!r}")
    _, grad = value_eval(expansion, t, v, eps)
    y = _control_gradient(expansion, grad, v)
    transport = float(np.sum(grad * (cf.A_star @ v + cf.c)))
    return abs(dt_val + transport - eps * float(y @ expansion.gamma_solve(y)))


@dataclass
class HJBResult:
    trajectory: Trajectory
    eps: float
    phi: float
    delta_tau: float
    penalty: float
    psi0: float
    psi1: float

    @property
    def reference(self) -> float:
        """First-order Bellman estimate ``(Psi0 + eps Psi1)(0, z0)``."""
        return self.psi0 + self.eps * self.psi1

    @property
    def defect(self) -> float:
        return abs(self.phi - self.reference)


def hjb_control(expansion: ValueExpansion, eps: float) -> FeedbackControl:
    return FeedbackControl(lambda t, z: control_eval(expansion, t, z, eps), expansion.coeffs.r)


def simulate_hjb(expansion: ValueExpansion, eps: float, dt: float | None = None) -> HJBResult:
    """Closed loop under ``eps u0 + eps^2 u1`` with penalty ``Gamma / (2 eps)``."""
    if not eps > 0:
        raise InvalidArgumentError(f"scale must be positive, got {eps}")
    expansion.require_term1()
    cf = expansion.coeffs
    traj = simulate(cf, hjb_control(expansion, eps), expansion.tau, dt, Pi=expansion.Gamma / (2 * eps))
    return HJBResult(
        trajectory=traj,
        eps=eps,
        phi=float(traj.phi[-1]),
        delta_tau=float(traj.delta[-1]),
        penalty=float(traj.penalty[-1]),
        psi0=psi0_eval(expansion, 0.0, cf.z0)[0],
        psi1=psi1_eval(expansion, 0.0, cf.z0)[0],
    )


def pontryagin_series(expansion: ValueExpansion, eps: float, trajectory: Trajectory) -> np.ndarray:
    """``H(t) = <grad Psi, A_* z + c> - 1/2 |U|^2_{Pi_eps}`` along the path."""
    cf = expansion.coeffs
    out = np.empty(len(trajectory.times))
    for k, (t, z, u) in enumerate(zip(trajectory.times, trajectory.z, trajectory.U)):
        _, grad = value_eval(expansion, t, z, eps)
        value = float(np.sum(grad * (cf.A_star @ z + cf.c)))
        if eps > 0:
            value -= 0.25 / eps * float(u @ expansion.Gamma @ u)
        elif np.any(u != 0):
            raise InvalidArgumentError("eps = 0 requires a zero-control trajectory")
        out[k] = value
    return out


def pontryagin_diagnostic(expansion: ValueExpansion, eps: float, trajectory: Trajectory) -> float:
    """Largest drift ``max_t |H(t) - H(0)|`` of the control Hamiltonian."""
    series = pontryagin_series(expansion, eps, trajectory)
    return float(np.abs(series - series[0]).max())
