from __future__ import annotations

import numpy as np
import pytest

from qmem.coefficients import SystemSpec, build_coefficients
from qmem.config import build_spec, parse_config
from qmem.hjb import make_expansion
from qmem.scenarios import SINGLE_QUBIT_DEMO
from qmem.structure import derive_structure, pauli_basis

TAU = 1.0
DT = 5e-4

# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for (j, k, l), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1}.items():
        eps[j, k, l] = s
        eps[k, j, l] = -s
    return eps


def qubit_spec(E_star=(0, 0, 0), K=None, M=None, N=(0, 0), F=None, mu0=(0, 0, 1)) -> SystemSpec:
    basis = pauli_basis(1)
    sc = derive_structure(basis)
    return SystemSpec.create(
        sc,
        basis,
        E_star=np.array(E_star, dtype=float),
        K=np.eye(3) if K is None else np.asarray(K, dtype=float),
        M=np.zeros((2, 3)) if M is None else np.asarray(M, dtype=float),
        N=np.array(N, dtype=float),
        F=np.eye(3) if F is None else np.asarray(F, dtype=float),
        mu0=np.array(mu0, dtype=float),
    )


@pytest.fixture(scope="session")
def demo_config():
    return parse_config(SINGLE_QUBIT_DEMO)


@pytest.fixture(scope="session")
def demo_spec(demo_config):
    return build_spec(demo_config)


@pytest.fixture(scope="session")
def demo_coeffs(demo_spec):
    return build_coefficients(demo_spec)


@pytest.fixture(scope="session")
def demo_expansion(demo_coeffs):
    return make_expansion(demo_coeffs, np.eye(3), TAU, DT)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
