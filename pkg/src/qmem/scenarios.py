"""Named presets and seeded random scenarios."""

from __future__ import annotations

import numpy as np

from .coefficients import SystemSpec
from .structure import derive_structure, mean_from_state, pauli_basis

SINGLE_QUBIT_DEMO = {
    "qubits": 1,
    "E_star": [0.0, 0.0, 1.0],
    "K": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    "M": [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    "N": [0.0, 0.0],
    "F": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    "initial_state": {"mu0": [0.0, 0.0, 1.0]},
    "horizon": 1.0,
    "penalty": {"Gamma": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], "epsilon": 0.05},
    "control": "zero",
}

PRESETS = {"single-qubit-demo": SINGLE_QUBIT_DEMO}


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_spec(
    rng: np.random.Generator,
    qubits: int | None = None,
    scale: float = 0.5,
    channels: int | None = None,
    controls: int | None = None,
) -> SystemSpec:
    """Random admissible scenario with ``q`` in {1, 2} unless given."""
    q = int(rng.integers(1, 3)) if qubits is None else qubits
    basis = pauli_basis(q)
    sc = derive_structure(basis)
    n = basis.n
    m = int(rng.choice([2, 4])) if channels is None else channels
    r = int(rng.integers(1, 4)) if controls is None else controls
    nu = int(rng.integers(1, n + 1))
    rho0 = random_density(basis.d, rng)
    return SystemSpec.create(
        sc,
        basis,
        E_star=scale * rng.normal(size=n),
        K=scale * rng.normal(size=(n, r)),
        M=scale * rng.normal(size=(m, n)),
        N=scale * rng.normal(size=m),
        F=rng.normal(size=(nu, n)),
        mu0=mean_from_state(basis, rho0),
        rho0=rho0,
    )
