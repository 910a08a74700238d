"""The auxiliary control-affine system ``z' = (A_* + A.U) z + c``.

The state ``z = [mu, P + Q]`` is an n x (n+1) matrix and the mean-square
deviation is affine in it: ``Delta = <R, z - z0>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import dot_product, rk4_solve, star_product
from .coefficients import Coefficients, assemble_A
from .constants import DEFAULT_STEPS
from .errors import InvalidArgumentError, NumericOverflowError

Law = Callable[[float, np.ndarray], np.ndarray]


class ControlSignal:
    """A control ``u(t, z)`` with values in R^r."""

    r: int
    open_loop: bool = True

    def __call__(self, t: float, z: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t: float) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no time derivative")


class ZeroControl(ControlSignal):
    def __init__(self, r: int):
        self.r = r
        self._zero = np.zeros(r)

    def __call__(self, t, z=None):
        return self._zero

    def derivative(self, t):
        return self._zero


class SampledControl(ControlSignal):
    """Samples on a uniform grid, linearly interpolated between nodes."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or len(times) < 2 or values.shape[0] != len(times):
            raise InvalidArgumentError("sampled control needs >= 2 times matching the value rows")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("sample times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("sample values must be finite")
        self.times = times
        self.values = values
        self.r = values.shape[1]

    def covers(self, tau: float) -> bool:
        return self.times[0] <= 1e-12 and self.times[-1] >= tau - 1e-12

    def __call__(self, t, z=None):
        return np.array([np.interp(t, self.times, self.values[:, k]) for k in range(self.r)])

    def derivative(self, t):
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        return (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])


class OpenLoopControl(ControlSignal):
    """A deterministic function of time, optionally with its derivative."""

    def __init__(self, fn: Callable[[float], np.ndarray], r: int, derivative=None):
        self.fn = fn
        self.r = r
        self._derivative = derivative

    def __call__(self, t, z=None):
        return np.asarray(self.fn(t), dtype=float)

    def derivative(self, t):
        if self._derivative is None:
            return super().derivative(t)
        return np.asarray(self._derivative(t), dtype=float)


class FeedbackControl(ControlSignal):
    """A closed-loop law ``(t, z) -> u`` evaluated at integrator stage states."""

    open_loop = False

    def __init__(self, law: Law, r: int):
        self.law = law
        self.r = r

    def __call__(self, t, z=None):
        if z is None:
            raise InvalidArgumentError("a feedback law needs the current state")
        return np.asarray(self.law(t, z), dtype=float)


@dataclass
class Trajectory:
    """Grid samples of a simulated auxiliary path.

    ``penalty`` is the running ``1/2 int |U|^2_Pi`` and ``phi = delta + penalty``.
    ``integrals`` holds any extra running integrals requested by the caller.
    """

    times: np.ndarray
    z: np.ndarray
    U: np.ndarray
    delta: np.ndarray
    penalty: np.ndarray
    integrals: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def phi(self) -> np.ndarray:
        return self.delta + self.penalty

    @property
    def final(self) -> dict[str, float]:
        return {
            "Delta": float(self.delta[-1]),
            "penalty": float(self.penalty[-1]),
            "Phi": float(self.phi[-1]),
        }

    def check(self, slack: float = 1e-9) -> None:
        if self.delta[0] != 0.0:
            raise AssertionError("deviation must vanish at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise AssertionError("times must be strictly increasing")
        if self.delta.min() < -slack:
            raise AssertionError(f"negative deviation {self.delta.min():.3e}")


def default_step(tau: float) -> float:
    return tau / DEFAULT_STEPS


def eval_fg(coeffs: Coefficients, z: np.ndarray) -> tuple[float, np.ndarray]:
    """``f(z) = <R, A_* z + c>`` and ``g(z) = (R z^T) * A``."""
    f = float(np.sum(coeffs.R * (coeffs.A_star @ z + coeffs.c)))
    g = star_product(coeffs.R @ z.T, coeffs.A_sections)
    return f, g


def delta_of_z(coeffs: Coefficients, z: np.ndarray) -> float:
    """Mean-square deviation ``<R, z - z0>`` (equal to ``<R, z> + d``)."""
    return float(np.sum(coeffs.R * (z - coeffs.z0)))


def delta_dot(coeffs: Coefficients, z: np.ndarray, U: np.ndarray) -> float:
    """``h(z, U) = f(z) + g(z)^T U``."""
    f, g = eval_fg(coeffs, z)
    return f + float(g @ np.asarray(U, dtype=float))


def delta_ddot(coeffs: Coefficients, z: np.ndarray, U: np.ndarray, Udot: np.ndarray) -> float:
    """Second derivative of the deviation, quadratic in ``U`` and affine in ``Udot``."""
    R, A_star, c, cA = coeffs.R, coeffs.A_star, coeffs.c, coeffs.A_sections
    U = np.asarray(U, dtype=float)
    Udot = np.asarray(Udot, dtype=float)
    drift = A_star @ z + c
    a_tilde = dot_product(cA, U)
    value = float(np.sum(R * (A_star @ drift)))
    value += float(star_product(A_star.T @ R @ z.T + R @ drift.T, cA) @ U)
    value += float(star_product(R @ z.T @ a_tilde.T, cA) @ U)
    value += float(star_product(R @ z.T, cA) @ Udot)
    return value


def _check_horizon(tau: float, dt: float | None) -> float:
    if not tau > 0:
        raise InvalidArgumentError(f"horizon must be positive, got {tau}")
    dt = default_step(tau) if dt is None else dt
    if not dt > 0:
        raise InvalidArgumentError(f"step must be positive, got {dt}")
    return dt


def simulate(
    coeffs: Coefficients,
    control: ControlSignal,
    tau: float,
    dt: float | None = None,
    Pi: np.ndarray | None = None,
    integrands: dict[str, Callable[[float, np.ndarray, np.ndarray], float]] | None = None,
) -> Trajectory:
    """RK4 path of the auxiliary system under ``control``.

    The control penalty (weight ``Pi``, identity by default) and every extra
    integrand ``fn(t, z, u)`` are appended to the state so they are
    integrated at the same order as ``z``. Feedback laws see the stage-local
    ``(t, z)``.
    """
    dt = _check_horizon(tau, dt)
    n, r = coeffs.n, coeffs.r
    if control.r != r:
        raise InvalidArgumentError(f"control dimension {control.r} does not match r = {r}")
    if isinstance(control, SampledControl) and not control.covers(tau):
        raise InvalidArgumentError("sampled control does not cover [0, tau]")
    Pi = np.eye(r) if Pi is None else np.asarray(Pi, dtype=float)
    integrands = dict(integrands or {})
    names = list(integrands)
    nz = n * (n + 1)
    A_star, cA, c = coeffs.A_star, coeffs.A_sections, coeffs.c

    def rhs(t, y):
        z = y[:nz].reshape(n, n + 1)
        u = control(t, z)
        out = np.empty_like(y)
        out[:nz] = ((A_star + cA @ u) @ z + c).ravel()
        out[nz] = 0.5 * float(u @ Pi @ u)
        for i, name in enumerate(names):
            out[nz + 1 + i] = integrands[name](t, z, u)
        return out

    y0 = np.zeros(nz + 1 + len(names))
    y0[:nz] = coeffs.z0.ravel()

    def package(times, ys):
        zs = ys[:, :nz].reshape(len(times), n, n + 1)
        with np.errstate(all="ignore"):
            us = np.array([control(t, z) for t, z in zip(times, zs)]).reshape(len(times), r)
        return Trajectory(
            times=times,
            z=zs,
            U=us,
            delta=np.einsum("jk,tjk->t", coeffs.R, zs - coeffs.z0),
            penalty=ys[:, nz],
            integrals={name: ys[:, nz + 1 + i] for i, name in enumerate(names)},
        )

    try:
        times, ys = rk4_solve(rhs, y0, 0.0, tau, dt)
    except NumericOverflowError as exc:
        if exc.partial is not None:
            exc.trajectory = package(*exc.partial)
        raise
    return package(times, ys)


@dataclass
class MomentPath:
    """Moment-based deviation path: ``G``, ``psi`` and the quantities built on them."""

    times: np.ndarray
    G: np.ndarray
    psi: np.ndarray
    mu: np.ndarray
    Q: np.ndarray
    Xi: np.ndarray
    delta: np.ndarray


def delta_via_moments(
    coeffs: Coefficients,
    control: ControlSignal,
    tau: float,
    dt: float | None = None,
) -> MomentPath:
    """Deviation from the fundamental matrix and the mean/second-moment formulas.

    Integrates ``G' = A G`` and ``psi' = A psi + I`` jointly, then forms
    ``mu = G mu0 + psi b``, ``Q = (G - I) P + psi b mu0^T``,
    ``Xi = gamma.(mu - mu0) - Q - Q^T`` and ``Delta = <Sigma, Xi>``.
    A feedback law is fed ``[mu, P + Q]`` at each stage.
    """
    dt = _check_horizon(tau, dt)
    n = coeffs.n
    mu0, b, P = coeffs.mu0, coeffs.b, coeffs.P
    eye = np.eye(n)

    def moments(G, psi):
        mu = G @ mu0 + psi @ b
        Q = (G - eye) @ P + np.outer(psi @ b, mu0)
        return mu, Q

    def rhs(t, y):
        G, psi = y[0], y[1]
        if control.open_loop:
            u = control(t)
        else:
            mu, Q = moments(G, psi)
            u = control(t, np.column_stack([mu, P + Q]))
        A = assemble_A(coeffs, u)
        return np.stack([A @ G, A @ psi + eye])

    y0 = np.stack([eye, np.zeros((n, n))])
    times, ys = rk4_solve(rhs, y0, 0.0, tau, dt)
    G, psi = ys[:, 0], ys[:, 1]
    mu = G @ mu0 + psi @ b
    Q = (G - eye) @ P + np.einsum("tj,k->tjk", psi @ b, mu0)
    Xi = np.einsum("jkl,tl->tjk", coeffs.gamma, mu - mu0) - Q - Q.transpose(0, 2, 1)
    delta = np.einsum("jk,tjk->t", coeffs.Sigma, Xi)
    return MomentPath(times=times, G=G, psi=psi, mu=mu, Q=Q, Xi=Xi, delta=delta)


__all__ = [
    "ControlSignal",
    "ZeroControl",
    "SampledControl",
    "OpenLoopControl",
    "FeedbackControl",
    "Trajectory",
    "MomentPath",
    "eval_fg",
    "delta_of_z",
    "delta_dot",
    "delta_ddot",
    "simulate",
    "delta_via_moments",
    "default_step",
]
