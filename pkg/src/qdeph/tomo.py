"""Qubit SIC-POVM (tetrahedral) encoding of density matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qchannel import DensityMatrix

__all__ = ["SicPovm", "Decoded", "TETRAHEDRON", "sic_encode", "sic_decode", "perturb"]

TETRAHEDRON = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) / np.sqrt(3.0)

_PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]],
    dtype=complex,
)


@dataclass(frozen=True)
class SicPovm:
    """Four effects ``M_k = (I + a_k . sigma) / 4`` on a regular tetrahedron."""

    bloch_dirs: np.ndarray = field(default_factory=lambda: TETRAHEDRON.copy())

    def __post_init__(self):
        a = np.asarray(self.bloch_dirs, dtype=float)
        if a.shape != (4, 3):
            raise ValueError("need four Bloch directions")
        if not np.allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12):
            raise ValueError("Bloch directions must be unit vectors")
        if not np.allclose(a.sum(axis=0), 0.0, atol=1e-12):
            raise ValueError("Bloch directions must sum to zero")
        gram = a @ a.T
        off = gram[~np.eye(4, dtype=bool)]
        if not np.allclose(off, -1.0 / 3.0, atol=1e-12):
            raise ValueError("directions do not form a regular tetrahedron")
        object.__setattr__(self, "bloch_dirs", a)

    def effects(self) -> np.ndarray:
        """The four 2x2 effect operators, shape (4, 2, 2)."""
        return (np.eye(2) + np.einsum("ki,iab->kab", self.bloch_dirs, _PAULI)) / 4.0


@dataclass(frozen=True)
class Decoded:
    rho: DensityMatrix | None
    bloch: np.ndarray
    physical: bool


def sic_encode(rho: DensityMatrix, povm: SicPovm | None = None) -> np.ndarray:
    """Outcome probabilities ``Tr[M_k rho] = (1 + b . a_k) / 4``."""
    povm = povm or SicPovm()
    return 0.25 * (1.0 + povm.bloch_dirs @ rho.bloch)


def encode_bloch(b: np.ndarray, povm: SicPovm | None = None) -> np.ndarray:
    """Vectorised encoding for Bloch vectors of shape (..., 3)."""
    povm = povm or SicPovm()
    return 0.25 * (1.0 + np.asarray(b) @ povm.bloch_dirs.T)


def sic_decode(p, povm: SicPovm | None = None) -> Decoded:
    """Invert the encoding.

    Noisy probability vectors can map outside the Bloch ball; such results
    come back with ``physical=False`` and ``rho=None`` and the raw Bloch
    vector so callers can project it themselves.
    """
    povm = povm or SicPovm()
    b = 3.0 * np.asarray(p, dtype=float) @ povm.bloch_dirs
    norm = float(np.linalg.norm(b))
    if norm > 1.0 + 1e-9:
        return Decoded(None, b, False)
    return Decoded(DensityMatrix.from_bloch(b), b, True)


def perturb(p, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add independent N(0, sigma^2) noise to every component, no renormalisation."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    p = np.asarray(p, dtype=float)
    if sigma == 0:
        return p.copy()
    return p + rng.normal(0.0, sigma, size=p.shape)
