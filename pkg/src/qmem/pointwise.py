"""Pointwise control: minimise the deviation rate plus a quadratic penalty at each instant."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .aux_system import FeedbackControl, Trajectory, eval_fg, simulate
from .coefficients import Coefficients
from .errors import InvalidArgumentError, NoDescentDirectionError


@dataclass(frozen=True)
class PenaltyWeights:
    """Symmetric positive definite penalty ``Pi``.

    Built from a shape matrix and a scale via :meth:`scaled` the weight is
    ``Pi = Gamma / (2 eps)``.
    """

    Pi: np.ndarray
    Gamma: np.ndarray | None = None
    epsilon: float | None = None

    def __post_init__(self):
        Pi = np.asarray(self.Pi, dtype=float)
        if Pi.ndim != 2 or Pi.shape[0] != Pi.shape[1]:
            raise InvalidArgumentError("penalty must be a square matrix")
        if np.abs(Pi - Pi.T).max() > 1e-12 * max(1.0, np.abs(Pi).max()):
            raise InvalidArgumentError("penalty must be symmetric")
        if np.linalg.eigvalsh(Pi).min() <= 0:
            raise InvalidArgumentError("penalty must be positive definite")
        object.__setattr__(self, "Pi", Pi)

    @classmethod
    def scaled(cls, Gamma, epsilon: float) -> "PenaltyWeights":
        Gamma = np.asarray(Gamma, dtype=float)
        if not epsilon > 0:
            raise InvalidArgumentError(f"scale must be positive, got {epsilon}")
        if np.linalg.eigvalsh(0.5 * (Gamma + Gamma.T)).min() <= 0:
            raise InvalidArgumentError("shape matrix must be positive definite")
        return cls(Pi=Gamma / (2.0 * epsilon), Gamma=Gamma, epsilon=float(epsilon))

    @property
    def r(self) -> int:
        return self.Pi.shape[0]

    @cached_property
    def _factor(self):
        return cho_factor(self.Pi)

    def solve(self, g: np.ndarray) -> np.ndarray:
        """``Pi^{-1} g``."""
        return cho_solve(self._factor, g)

    def norm2(self, u: np.ndarray) -> float:
        """``|u|^2_Pi``."""
        return float(u @ self.Pi @ u)

    def inv_norm2(self, g: np.ndarray) -> float:
        """``|g|^2_{Pi^{-1}}``."""
        return float(g @ self.solve(g))


def pointwise_law(coeffs: Coefficients, weights: PenaltyWeights, z: np.ndarray) -> np.ndarray:
    """``U = -Pi^{-1} g(z)``."""
    if weights.r != coeffs.r:
        raise InvalidArgumentError("penalty size does not match the control dimension")
    _, g = eval_fg(coeffs, z)
    return -weights.solve(g)


def pointwise_objective(coeffs, weights, z, u) -> float:
    """``h(z, u) + 1/2 |u|^2_Pi``, the quantity minimised at each instant."""
    f, g = eval_fg(coeffs, z)
    u = np.asarray(u, dtype=float)
    return f + float(g @ u) + 0.5 * weights.norm2(u)


def pointwise_control(coeffs: Coefficients, weights: PenaltyWeights) -> FeedbackControl:
    return FeedbackControl(lambda t, z: pointwise_law(coeffs, weights, z), coeffs.r)


@dataclass
class PointwiseResult:
    trajectory: Trajectory
    delta_tau: float
    objective: float  # Delta(tau) + 1/2 int |U|^2_Pi
    objective_integral: float  # int (f - 1/2 |g|^2_{Pi^-1})
    rate_integral: float  # int (f - |g|^2_{Pi^-1}), equals Delta(tau)

    @property
    def accounting_error(self) -> float:
        """Relative mismatch of the two sides of the penalised accounting identity."""
        return abs(self.objective - self.objective_integral) / max(1.0, abs(self.objective))


def simulate_pointwise(
    coeffs: Coefficients,
    weights: PenaltyWeights,
    tau: float,
    dt: float | None = None,
) -> PointwiseResult:
    """Closed loop ``z' = (A_* - A.(Pi^{-1} g(z))) z + c``.

    Both sides of ``Delta(tau) + 1/2 int |U|^2 = int (f - 1/2 |g|^2_{Pi^-1})``
    are accumulated independently on the RK4 grid.
    """

    def _fg(z):
        f, g = eval_fg(coeffs, z)
        return f, weights.inv_norm2(g)

    def objective_rate(t, z, u):
        f, gg = _fg(z)
        return f - 0.5 * gg

    def achieved_rate(t, z, u):
        f, gg = _fg(z)
        return f - gg

    traj = simulate(
        coeffs,
        pointwise_control(coeffs, weights),
        tau,
        dt,
        Pi=weights.Pi,
        integrands={"objective_rate": objective_rate, "achieved_rate": achieved_rate},
    )
    return PointwiseResult(
        trajectory=traj,
        delta_tau=float(traj.delta[-1]),
        objective=float(traj.phi[-1]),
        objective_integral=float(traj.integrals["objective_rate"][-1]),
        rate_integral=float(traj.integrals["achieved_rate"][-1]),
    )


def small_pi_threshold(coeffs: Coefficients, z: np.ndarray) -> float:
    """Bound ``|g(z)|^2 / max(0, f(z))`` below which ``Pi = c I`` gives a negative rate.

    Returns ``math.inf`` when ``f(z) <= 0`` (every penalty works).
    """
    f, g = eval_fg(coeffs, z)
    gg = float(g @ g)
    if gg == 0.0:
        raise NoDescentDirectionError("g(z) = 0: the control cannot change the deviation rate")
    if f <= 0:
        return math.inf
    return gg / f
