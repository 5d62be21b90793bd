"""Units and static eigenproblem data for the infinite square well.

Levels are 1-indexed everywhere in the public interface (``n = 1`` is the
ground state). Arrays indexed by level store level ``n`` at position ``n - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise DomainError(f"hbar must be > 0, got {self.hbar}")
        if not self.mass > 0:
            raise DomainError(f"mass must be > 0, got {self.mass}")

    @property
    def time_unit(self) -> str:
        return "L0^2 m / hbar"


NATURAL_UNITS = PhysicalConstants()


@dataclass(frozen=True)
class BoxSpec:
    n_basis: int = 64
    L0: float = 1.0

    def __post_init__(self):
        if int(self.n_basis) != self.n_basis or self.n_basis < 2:
            raise DomainError(f"n_basis must be an integer >= 2, got {self.n_basis}")
        if not self.L0 > 0:
            raise DomainError(f"L0 must be > 0, got {self.L0}")


@dataclass(frozen=True)
class EigenData:
    """Level constants ``e_n = hbar^2 pi^2 n^2 / (2 m)`` for ``n = 1..N``.

    ``E_n(L) = e_n / L**2``; the product ``L**2 * E_n`` does not depend on the
    box length, which is what lets the dynamics avoid re-evaluating energies.
    """

    n_basis: int
    constants: PhysicalConstants = NATURAL_UNITS
    level_constants: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        BoxSpec(self.n_basis)
        n = np.arange(1, self.n_basis + 1, dtype=float)
        e = self.constants.hbar**2 * np.pi**2 * n**2 / (2.0 * self.constants.mass)
        e.setflags(write=False)
        object.__setattr__(self, "level_constants", e)

    def energies(self, L: float) -> np.ndarray:
        _check_length(L)
        return self.level_constants / L**2


def _check_level(n, name="n"):
    if int(n) != n or n < 1:
        raise DomainError(f"level index {name} must be an integer >= 1, got {n}")


def _check_length(L):
    if not L > 0:
        raise DomainError(f"box length must be > 0, got {L}")


def energy(n: int, L: float, constants: PhysicalConstants = NATURAL_UNITS) -> float:
    _check_level(n)
    _check_length(L)
    return constants.hbar**2 * np.pi**2 * n**2 / (2.0 * constants.mass * L**2)


def eigenfunction(n: int, L: float, x):
    """Instantaneous eigenfunction ``sqrt(2/L) sin(n pi x / L)``.

    ``x`` may be a scalar or array; every entry must lie in ``[0, L]``.
    Returns exactly zero at both walls.
    """
    _check_level(n)
    _check_length(L)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > L):
        raise DomainError(f"position outside the box [0, {L}]")
    out = np.sqrt(2.0 / L) * np.sin(n * np.pi * x / L)
    out = np.where((x == 0) | (x == L), 0.0, out)
    return out[()] if out.ndim == 0 else out


def position_matrix_element(k: int, n: int, L: float) -> float:
    """``<u_k| x |u_n>`` in closed form."""
    _check_level(k, "k")
    _check_level(n, "n")
    _check_length(L)
    if k == n:
        return L / 2.0
    if (k + n) % 2 == 0:
        return 0.0
    return -8.0 * L * k * n / (np.pi**2 * (k * k - n * n) ** 2)


def momentum_matrix_element(k: int, n: int, L: float,
                            constants: PhysicalConstants = NATURAL_UNITS) -> complex:
    """``<u_k| -i hbar d/dx |u_n>`` in closed form (Hermitian in k, n)."""
    _check_level(k, "k")
    _check_level(n, "n")
    _check_length(L)
    if (k + n) % 2 == 0:
        return 0j
    return -4j * constants.hbar * k * n / (L * (k * k - n * n))


@lru_cache(maxsize=32)
def _unit_position_matrix(N: int) -> np.ndarray:
    k = np.arange(1, N + 1)
    K, M = np.meshgrid(k, k, indexing="ij")
    odd = (K + M) % 2 == 1
    X = np.zeros((N, N))
    X[odd] = -8.0 * K[odd] * M[odd] / (np.pi**2 * (K[odd] ** 2 - M[odd] ** 2) ** 2)
    np.fill_diagonal(X, 0.5)
    X.setflags(write=False)
    return X


@lru_cache(maxsize=32)
def _unit_momentum_matrix(N: int) -> np.ndarray:
    k = np.arange(1, N + 1)
    K, M = np.meshgrid(k, k, indexing="ij")
    odd = (K + M) % 2 == 1
    P = np.zeros((N, N), dtype=complex)
    P[odd] = -4j * K[odd] * M[odd] / (K[odd] ** 2 - M[odd] ** 2)
    P.setflags(write=False)
    return P


def position_matrix(N: int, L: float) -> np.ndarray:
    """Full ``N x N`` matrix of :func:`position_matrix_element`."""
    _check_length(L)
    return L * _unit_position_matrix(N)


def momentum_matrix(N: int, L: float, constants: PhysicalConstants = NATURAL_UNITS) -> np.ndarray:
    """Full ``N x N`` matrix of :func:`momentum_matrix_element`."""
    _check_length(L)
    return (constants.hbar / L) * _unit_momentum_matrix(N)
