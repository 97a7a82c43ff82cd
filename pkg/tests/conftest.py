"""Shared helpers: random operators, channels, and Bell-basis utilities."""

from __future__ import annotations

import numpy as np
import pytest

from distil.qmath import DensityMatrix, StructuredOperator, SubsystemLayout


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)


def two_qubit_layout() -> SubsystemLayout:
    return SubsystemLayout.of(("A1", "Alice", 2), ("B1", "Bob", 2))


def random_hermitian(rng: np.random.Generator, d: int, real: bool = False) -> np.ndarray:
    g = rng.standard_normal((d, d))
    if not real:
        g = g + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_density(rng: np.random.Generator, d: int, real: bool = False) -> np.ndarray:
    g = rng.standard_normal((d, d))
    if not real:
        g = g + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_state(rng: np.random.Generator, layout: SubsystemLayout, real: bool = False) -> DensityMatrix:
    return DensityMatrix(random_density(rng, layout.dim, real=real), layout)


def random_kraus_channel(
    rng: np.random.Generator, d_in: int, d_out: int, n_kraus: int
) -> list[np.ndarray]:
    """Random CPTP map via a Haar-ish Stinespring isometry, split into Kraus terms."""
    g = rng.standard_normal((d_out * n_kraus, d_in)) + 1j * rng.standard_normal(
        (d_out * n_kraus, d_in)
    )
    q, _ = np.linalg.qr(g)
    return [q[i * d_out : (i + 1) * d_out, :] for i in range(n_kraus)]


def bell_vecs() -> list[np.ndarray]:
    """|Phi+>, |Psi+>, |Phi->, |Psi-> as vectors on qubit (x) qubit."""
    s = 1 / np.sqrt(2)
    phi_p = s * np.array([1, 0, 0, 1.0])
    psi_p = s * np.array([0, 1, 1, 0.0])
    phi_m = s * np.array([1, 0, 0, -1.0])
    psi_m = s * np.array([0, 1, -1, 0.0])
    return [phi_p, psi_p, phi_m, psi_m]


def bell_diag_matrix(p1: float, p2: float, p3: float, p4: float) -> np.ndarray:
    acc = np.zeros((4, 4))
    for w, v in zip((p1, p2, p3, p4), bell_vecs()):
        acc += w * np.outer(v, v)
    return acc


def op(matrix: np.ndarray, layout: SubsystemLayout) -> StructuredOperator:
    return StructuredOperator(matrix, layout)
