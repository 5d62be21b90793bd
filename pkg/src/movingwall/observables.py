"""Populations, expectation values and probability densities.

Off-diagonal quantities use the phase-dressed coefficients
``D_n = C_n exp(-i e_n theta / hbar)``, which are the actual amplitudes of the
instantaneous eigenfunctions in ``psi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from .core import (NATURAL_UNITS, DomainError, EigenData, PhysicalConstants,
                   momentum_matrix, position_matrix)
from .dynamics import CoefficientState, Trajectory

DEFAULT_NX = 512


@dataclass(frozen=True)
class ObservableSample:
    t: float
    L: float
    populations: np.ndarray
    x_mean: float
    p_mean: float
    kinetic: float
    norm: float


def populations(state: CoefficientState) -> np.ndarray:
    return np.abs(state.C) ** 2


def reconstruct_wavefunction(state: CoefficientState, L: float, x,
                             constants: PhysicalConstants = NATURAL_UNITS):
    """``psi(x) = sum_n D_n sqrt(2/L) sin(n pi x / L)`` at positions inside the box."""
    if not L > 0:
        raise DomainError("L must be > 0")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > L):
        raise DomainError(f"position outside the box [0, {L}]")
    n = np.arange(1, state.n_basis + 1)
    basis = np.sqrt(2.0 / L) * np.sin(np.pi * np.multiply.outer(x, n) / L)
    out = basis @ state.dressed(constants)
    return out[()] if out.ndim == 0 else out


def kinetic_energy(state: CoefficientState, L: float,
                   constants: PhysicalConstants = NATURAL_UNITS) -> float:
    """``<p^2 / 2m>``, diagonal in the box eigenbasis."""
    return float(populations(state) @ EigenData(state.n_basis, constants).energies(L))


def position_expectation(state: CoefficientState, L: float,
                         constants: PhysicalConstants = NATURAL_UNITS) -> float:
    d = state.dressed(constants)
    return float(np.vdot(d, position_matrix(state.n_basis, L) @ d).real)


def momentum_expectation(state: CoefficientState, L: float,
                         constants: PhysicalConstants = NATURAL_UNITS,
                         complex_result: bool = False):
    """``<p>``; the imaginary part vanishes up to rounding and is dropped
    unless ``complex_result`` is set."""
    d = state.dressed(constants)
    z = np.vdot(d, momentum_matrix(state.n_basis, L, constants) @ d)
    return complex(z) if complex_result else float(z.real)


def observe(state: CoefficientState, L: float,
            constants: PhysicalConstants = NATURAL_UNITS) -> ObservableSample:
    pops = populations(state)
    return ObservableSample(
        t=state.t, L=L, populations=pops,
        x_mean=position_expectation(state, L, constants),
        p_mean=momentum_expectation(state, L, constants),
        kinetic=kinetic_energy(state, L, constants),
        norm=float(pops.sum()),
    )


def trajectory_observables(traj: Trajectory) -> dict:
    """Column arrays for every sample: t, L, theta, norm, populations,
    x_mean, p_mean, kinetic."""
    N = traj.n_basis
    c = traj.constants
    e = EigenData(N, c).level_constants
    D = traj.coefficients * np.exp(-1j * np.outer(traj.thetas, e) / c.hbar)
    pops = np.abs(traj.coefficients) ** 2
    X1 = position_matrix(N, 1.0)
    P1 = momentum_matrix(N, 1.0, c)
    x_mean = traj.lengths * np.einsum("ij,jk,ik->i", D.conj(), X1, D).real
    p_mean = np.einsum("ij,jk,ik->i", D.conj(), P1, D).real / traj.lengths
    kinetic = pops @ e / traj.lengths**2
    return {
        "t": traj.times, "L": traj.lengths, "theta": traj.thetas,
        "norm": pops.sum(axis=1), "populations": pops,
        "x_mean": x_mean, "p_mean": p_mean, "kinetic": kinetic,
    }


@dataclass
class DensityMap:
    """``|psi|^2`` on a time x space grid.

    In ``fractional`` mode ``grid`` holds ``y = x / L(t)`` and row ``i`` lives
    on ``x = y * lengths[i]``; in ``absolute`` mode ``grid`` is a common
    ``x`` axis over ``[0, max L]`` and points outside the box are zero.
    Values are in 1/length either way.
    """

    times: np.ndarray
    lengths: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    coordinate: str

    def x_row(self, i: int) -> np.ndarray:
        return self.grid * self.lengths[i] if self.coordinate == "fractional" else self.grid

    def row_integrals(self) -> np.ndarray:
        return np.array([trapezoid(self.values[i], self.x_row(i)) for i in range(len(self.times))])

    def interior_minima(self, i: int, rel_prominence: float = 1e-3) -> int:
        """Number of local density minima strictly inside the box for row ``i``."""
        row = self.values[i]
        inside = (self.x_row(i) > 0) & (self.x_row(i) < self.lengths[i])
        row = row[inside]
        if row.size < 3 or row.max() <= 0:
            return 0
        peaks, _ = find_peaks(-row, prominence=rel_prominence * row.max())
        return int(peaks.size)


def density_map(trajectory: Trajectory, profile=None, n_x: int = DEFAULT_NX,
                coordinate: str = "absolute") -> DensityMap:
    """Evaluate ``|psi(x, t)|^2`` at every trajectory sample.

    ``profile`` is only used to recompute lengths if given; the trajectory
    already stores ``L`` per sample.
    """
    if n_x < 16:
        raise DomainError("n_x must be >= 16")
    if coordinate not in ("absolute", "fractional"):
        raise DomainError(f"coordinate must be 'absolute' or 'fractional', got {coordinate!r}")
    lengths = (np.asarray(profile.length(trajectory.times), dtype=float).reshape(-1)
               if profile is not None else trajectory.lengths)
    c = trajectory.constants
    N = trajectory.n_basis
    n = np.arange(1, N + 1)
    e = EigenData(N, c).level_constants
    D = trajectory.coefficients * np.exp(-1j * np.outer(trajectory.thetas, e) / c.hbar)
    values = np.zeros((len(trajectory), n_x))
    if coordinate == "fractional":
        grid = np.linspace(0.0, 1.0, n_x)
        S = np.sin(np.pi * np.outer(n, grid))
        S[:, -1] = 0.0
        psi = (D @ S) * np.sqrt(2.0 / lengths)[:, None]
        values = np.abs(psi) ** 2
    else:
        grid = np.linspace(0.0, float(lengths.max()), n_x)
        for i, L in enumerate(lengths):
            inside = grid < L
            S = np.sin(np.pi * np.outer(n, grid[inside]) / L)
            values[i, inside] = np.abs(np.sqrt(2.0 / L) * (D[i] @ S)) ** 2
    return DensityMap(np.asarray(trajectory.times, dtype=float), lengths, grid, values, coordinate)
