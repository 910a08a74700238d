"""Third-order array products, matrix exponentials and fixed-step RK4.

Third-order arrays are plain ``ndarray`` objects of shape ``(p, q, s)``.
Two slicing conventions are in use and they are not interchangeable:

* a *section* ``arr[:, :, l]`` slices the last index (``Theta_l``, ``beta_l``);
* a *first-index slice* ``arr[l, :, :]`` slices the first index
  (``theta_{l..}``, ``Re beta_{l..}`` in the drift matrix).

For a totally antisymmetric array such as the Levi-Civita symbol both agree,
which is why the single-qubit case alone cannot tell them apart.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError


def section(arr: np.ndarray, l: int) -> np.ndarray:
    """Return the section ``arr[:, :, l]``."""
    return arr[:, :, l]


def first_slice(arr: np.ndarray, l: int) -> np.ndarray:
    """Return the first-index slice ``arr[l, :, :]``."""
    return arr[l, :, :]


def _check_array3(arr: np.ndarray, name: str = "arr") -> None:
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise InvalidArgumentError(f"{name} must be a nonempty 3-array, got shape {arr.shape}")


def dot_product(arr: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``arr . x = sum_l x_l arr[:, :, l]``."""
    arr = np.asarray(arr)
    x = np.asarray(x)
    _check_array3(arr)
    if x.shape != (arr.shape[2],):
        raise InvalidArgumentError(
            f"vector of length {arr.shape[2]} expected, got shape {x.shape}"
        )
    return arr @ x


def diam_product(arr: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Matrix whose l-th column is ``arr[:, :, l] @ u``."""
    arr = np.asarray(arr)
    u = np.asarray(u)
    _check_array3(arr)
    p, q, s = arr.shape
    if u.shape != (q,):
        raise InvalidArgumentError(f"vector of length {q} expected, got shape {u.shape}")
    return np.einsum("jkl,k->jl", arr, u)


def star_product(u: np.ndarray, arr: np.ndarray) -> np.ndarray:
    """Vector of Frobenius inner products ``<u, arr[:, :, k]>``.

    Dual to :func:`dot_product`: ``<u, arr . w> == star_product(u, arr) @ w``.
    """
    arr = np.asarray(arr)
    u = np.asarray(u)
    _check_array3(arr)
    if u.shape != arr.shape[:2]:
        raise InvalidArgumentError(
            f"matrix of shape {arr.shape[:2]} expected, got {u.shape}"
        )
    return np.einsum("jk,jkl->l", u, arr)


def block_row_apply(arr: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``[arr_1 ... arr_n] col(y)`` with column-major ``col``.

    Equals ``sum_l arr[:, :, l] @ y[:, l]``.
    """
    arr = np.asarray(arr)
    _check_array3(arr)
    if y.shape != (arr.shape[1], arr.shape[2]):
        raise InvalidArgumentError(f"matrix of shape {arr.shape[1:]} expected, got {y.shape}")
    return np.einsum("jkl,kl->j", arr, y)


# degree-6 diagonal Pade coefficients c_k = (12-k)! 6! / (12! k! (6-k)!)
_PADE6 = tuple(
    math.factorial(12 - k) * math.factorial(6) / (math.factorial(12) * math.factorial(k) * math.factorial(6 - k))
    for k in range(7)
)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [6/6] Pade approximant."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"square matrix expected, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericOverflowError("non-finite entries in matrix exponent")
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    x = a / (2.0**s)
    ident = np.eye(n, dtype=x.dtype)
    powers = [ident, x]
    for _ in range(5):
        powers.append(powers[-1] @ x)
    even = sum(_PADE6[k] * powers[k] for k in range(0, 7, 2))
    odd = sum(_PADE6[k] * powers[k] for k in range(1, 7, 2))
    result = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        result = result @ result
    return result


def expm_and_integral(a: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(exp(tA), int_0^t exp(sA) ds)``.

    Uses the exponential of the block matrix ``[[A, I], [0, 0]]`` so that no
    inverse of ``A`` is needed.
    """
    a = np.asarray(a, dtype=float)
    if t < 0:
        raise InvalidArgumentError(f"duration must be nonnegative, got {t}")
    n = a.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = a
    big[:n, n:] = np.eye(n)
    e = expm(t * big)
    return e[:n, :n], e[:n, n:]


def time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Uniform grid from ``t0`` to ``t1`` whose spacing does not exceed ``dt``.

    The step count is ``ceil(|t1 - t0| / dt)`` up to a 1e-9 relative slack,
    so a ``dt`` dividing the interval gives exactly that step.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"step must be positive, got {dt}")
    span = abs(t1 - t0)
    steps = max(1, int(math.ceil(span / dt - 1e-9))) if span > 0 else 0
    if steps == 0:
        return np.array([float(t0)])
    return t0 + (t1 - t0) * np.arange(steps + 1) / steps


def rk4_solve(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 from ``t0`` to ``t1`` (``t1 < t0`` integrates backward).

    Returns the grid and the states at every grid node, stacked along axis 0.
    """
    times = time_grid(t0, t1, dt)
    y = np.array(y0, copy=True)
    out = np.empty((len(times),) + y.shape, dtype=y.dtype)
    out[0] = y
    for i in range(len(times) - 1):
        t = times[i]
        h = times[i + 1] - t
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NumericOverflowError(
                f"integration blew up at t = {times[i + 1]:.6g}",
                time=float(times[i + 1]),
                partial=(times[: i + 1], out[: i + 1]),
            )
        out[i + 1] = y
    return times, out


def propagate_linear(
    a_of_t: Callable[[float], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    dt: float,
) -> np.ndarray:
    """RK4 solution at ``t1`` of ``dY/dt = A(t) Y`` with ``Y(t0) = y0``.

    With ``y0 = I`` this is the fundamental matrix ``G(t1, t0)``.
    """
    y0 = np.asarray(y0, dtype=float)
    _, ys = rk4_solve(lambda t, y: a_of_t(t) @ y, y0, t0, t1, dt)
    return ys[-1]
