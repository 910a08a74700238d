"""JSON scenario configuration: parsing, canonical form and model construction.

Schema (matrices are row-major nested arrays)::

    {
      "preset": "single-qubit-demo",          optional; fields below override it
      "qubits": 1,
      "E_star": [n], "K": [[n x r]], "M": [[m x n]], "N": [m], "F": [[nu x n]],
      "initial_state": {"mu0": [n]} | {"rho0": [[d x d]] | {"re": .., "im": ..}},
      "penalty": {"Pi": [[r x r]]} | {"Gamma": [[r x r]], "epsilon": e},
      "horizon": 1.0,
      "step": 0.0005,                          optional, default horizon / 2000
      "control": "zero" | "pointwise" | "hjb1" | "file:<path>",
      "output": "out",                         optional
      "seed": 0                                optional
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .aux_system import default_step
from .coefficients import SystemSpec
from .errors import ConfigError
from .pointwise import PenaltyWeights
from .scenarios import PRESETS
from .structure import derive_structure, pauli_basis

CONTROL_KINDS = ("zero", "pointwise", "hjb1")
_KNOWN_KEYS = {
    "preset",
    "qubits",
    "E_star",
    "K",
    "M",
    "N",
    "F",
    "initial_state",
    "penalty",
    "horizon",
    "step",
    "control",
    "output",
    "seed",
}


@dataclass(frozen=True)
class ScenarioConfig:
    qubits: int
    E_star: np.ndarray
    K: np.ndarray
    M: np.ndarray
    N: np.ndarray
    F: np.ndarray
    mu0: np.ndarray | None
    rho0: np.ndarray | None
    Pi: np.ndarray | None
    Gamma: np.ndarray | None
    epsilon: float | None
    horizon: float
    step: float | None
    control: str
    output: str | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return 4**self.qubits - 1

    @property
    def dt(self) -> float:
        return default_step(self.horizon) if self.step is None else self.step

    @property
    def control_file(self) -> str | None:
        return self.control[5:] if self.control.startswith("file:") else None

    def with_overrides(self, dt=None, eps=None, output=None, control=None) -> "ScenarioConfig":
        """Apply command-line overrides and re-check the affected invariants."""
        cfg = self
        if dt is not None:
            cfg = replace(cfg, step=float(dt))
        if eps is not None:
            if cfg.Gamma is None:
                raise ConfigError("penalty", "--eps needs a penalty given as Gamma and epsilon")
            cfg = replace(cfg, epsilon=float(eps))
        if output is not None:
            cfg = replace(cfg, output=str(output))
        if control is not None:
            cfg = replace(cfg, control=str(control))
        return parse_config(serialize_config(cfg))


# -- field readers ---------------------------------------------------------


def _array(value: Any, path: str, ndim: int, shape: tuple | None = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric array") from None
    if arr.ndim != ndim:
        raise ConfigError(path, f"expected a {ndim}-dimensional array, got {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(path, "entries must be finite")
    if shape is not None:
        for axis, (want, got) in enumerate(zip(shape, arr.shape)):
            if want is not None and want != got:
                raise ConfigError(path, f"expected shape {shape}, got {arr.shape}")
    return arr


def _positive(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, "expected a number")
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ConfigError(path, "must be a positive finite number")
    return value


def _density(value: Any, path: str, d: int) -> np.ndarray:
    if isinstance(value, dict):
        extra = set(value) - {"re", "im"}
        if extra or "re" not in value:
            raise ConfigError(path, "complex matrices are given as {\"re\": .., \"im\": ..}")
        re = _array(value["re"], f"{path}.re", 2, (d, d))
        im = _array(value.get("im", np.zeros((d, d))), f"{path}.im", 2, (d, d))
        return re + 1j * im
    return _array(value, path, 2, (d, d)).astype(complex)


def _square_spd(value: Any, path: str, r: int) -> np.ndarray:
    arr = _array(value, path, 2, (r, r))
    if np.abs(arr - arr.T).max() > 1e-12 * max(1.0, np.abs(arr).max()):
        raise ConfigError(path, "must be symmetric")
    if np.linalg.eigvalsh(arr).min() <= 0:
        raise ConfigError(path, "must be positive definite")
    return arr


def parse_config(data: dict) -> ScenarioConfig:
    """Parse a JSON-like mapping; errors carry the offending field path."""
    if not isinstance(data, dict):
        raise ConfigError("$", "top level must be an object")
    data = copy.deepcopy(data)
    if "preset" in data:
        name = data.pop("preset")
        if name not in PRESETS:
            raise ConfigError("preset", f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        merged = copy.deepcopy(PRESETS[name])
        merged.update(data)
        data = merged
    unknown = sorted(set(data) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    for key in ("qubits", "E_star", "K", "M", "N", "F", "initial_state", "horizon"):
        if key not in data:
            raise ConfigError(key, "required field is missing")

    q = data["qubits"]
    if isinstance(q, bool) or not isinstance(q, int) or q < 1:
        raise ConfigError("qubits", "expected a positive integer")
    n = 4**q - 1
    d = 2**q

    E_star = _array(data["E_star"], "E_star", 1, (n,))
    K = _array(data["K"], "K", 2, (n, None))
    r = K.shape[1]
    if r < 1:
        raise ConfigError("K", "needs at least one column")
    M = _array(data["M"], "M", 2, (None, n))
    m = M.shape[0]
    if m < 2 or m % 2:
        raise ConfigError("M", f"row count must be even and >= 2, got {m}")
    N = _array(data["N"], "N", 1, (m,))
    F = _array(data["F"], "F", 2, (None, n))
    if not 1 <= F.shape[0] <= n:
        raise ConfigError("F", f"row count must lie in [1, {n}]")

    state = data["initial_state"]
    if not isinstance(state, dict) or len(state) != 1 or not set(state) <= {"mu0", "rho0"}:
        raise ConfigError("initial_state", "expected exactly one of mu0 or rho0")
    mu0 = _array(state["mu0"], "initial_state.mu0", 1, (n,)) if "mu0" in state else None
    rho0 = _density(state["rho0"], "initial_state.rho0", d) if "rho0" in state else None

    Pi = Gamma = epsilon = None
    penalty = data.get("penalty")
    if penalty is not None:
        if not isinstance(penalty, dict):
            raise ConfigError("penalty", "expected an object")
        keys = set(penalty)
        if keys == {"Pi"}:
            Pi = _square_spd(penalty["Pi"], "penalty.Pi", r)
        elif keys == {"Gamma", "epsilon"}:
            Gamma = _square_spd(penalty["Gamma"], "penalty.Gamma", r)
            epsilon = _positive(penalty["epsilon"], "penalty.epsilon")
        else:
            raise ConfigError("penalty", "expected {Pi} or {Gamma, epsilon}")

    horizon = _positive(data["horizon"], "horizon")
    step = data.get("step")
    if step is not None:
        step = _positive(step, "step")
        if step > horizon / 10 * (1 + 1e-12):
            raise ConfigError("step", f"must not exceed horizon / 10 = {horizon / 10:g}")

    control = data.get("control", "zero")
    if not isinstance(control, str) or not (
        control in CONTROL_KINDS or (control.startswith("file:") and len(control) > 5)
    ):
        raise ConfigError("control", "expected zero, pointwise, hjb1 or file:<path>")
    if control in ("pointwise", "hjb1") and penalty is None:
        raise ConfigError("penalty", f"control {control!r} needs a penalty")
    if control == "hjb1" and Gamma is None:
        raise ConfigError("penalty", "control 'hjb1' needs the penalty as Gamma and epsilon")

    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "expected a path string")
    seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError("seed", "expected an integer")

    return ScenarioConfig(
        qubits=q,
        E_star=E_star,
        K=K,
        M=M,
        N=N,
        F=F,
        mu0=mu0,
        rho0=rho0,
        Pi=Pi,
        Gamma=Gamma,
        epsilon=epsilon,
        horizon=horizon,
        step=step,
        control=control,
        output=output,
        seed=seed,
    )


def serialize_config(cfg: ScenarioConfig) -> dict:
    """Canonical JSON-ready mapping; ``parse_config`` of it gives back ``cfg``."""
    out: dict[str, Any] = {
        "qubits": cfg.qubits,
        "E_star": cfg.E_star.tolist(),
        "K": cfg.K.tolist(),
        "M": cfg.M.tolist(),
        "N": cfg.N.tolist(),
        "F": cfg.F.tolist(),
    }
    if cfg.rho0 is not None:
        out["initial_state"] = {"rho0": {"re": cfg.rho0.real.tolist(), "im": cfg.rho0.imag.tolist()}}
    else:
        out["initial_state"] = {"mu0": cfg.mu0.tolist()}
    if cfg.Pi is not None:
        out["penalty"] = {"Pi": cfg.Pi.tolist()}
    elif cfg.Gamma is not None:
        out["penalty"] = {"Gamma": cfg.Gamma.tolist(), "epsilon": cfg.epsilon}
    out["horizon"] = cfg.horizon
    if cfg.step is not None:
        out["step"] = cfg.step
    out["control"] = cfg.control
    if cfg.output is not None:
        out["output"] = cfg.output
    if cfg.seed is not None:
        out["seed"] = cfg.seed
    return out


def dumps_config(cfg: ScenarioConfig) -> str:
    return json.dumps(serialize_config(cfg), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


# -- model construction ----------------------------------------------------


def build_spec(cfg: ScenarioConfig) -> SystemSpec:
    """Basis, structure constants and validated physical parameters."""
    basis = pauli_basis(cfg.qubits)
    sc = derive_structure(basis)
    return SystemSpec.create(
        sc, basis, cfg.E_star, cfg.K, cfg.M, cfg.N, cfg.F, mu0=cfg.mu0, rho0=cfg.rho0
    )


def penalty_weights(cfg: ScenarioConfig) -> PenaltyWeights:
    """``Pi`` as given, ``Gamma / (2 eps)`` for the scaled form, identity if absent."""
    if cfg.Pi is not None:
        return PenaltyWeights(cfg.Pi)
    if cfg.Gamma is not None:
        return PenaltyWeights.scaled(cfg.Gamma, cfg.epsilon)
    return PenaltyWeights(np.eye(cfg.K.shape[1]))
