"""Shared fixtures for the SpinLoop test suite"""

import os
import sys

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from quantum_core.operator_algebra import HermitianOperator  # noqa: E402


def random_hermitian(rng: np.random.Generator, n: int, label: str = "") -> HermitianOperator:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return HermitianOperator((a + a.conj().T) / 2, label)


def random_amplitudes(rng: np.random.Generator, n: int) -> np.ndarray:
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


def random_alpha_beta(rng: np.random.Generator):
    alpha, beta = random_amplitudes(rng, 2)
    return complex(alpha), complex(beta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def examples_dir():
    return os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "examples")
