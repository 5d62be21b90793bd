"""Independent reference solutions used to certify :mod:`movingwall.dynamics`.

Two routes, neither sharing code with the coefficient integrator:

* :class:`AnalyticModeSet` -- exact modes of a wall moving at constant speed,
  ``Phi_n(x, t) = sqrt(2/L) sin(n pi x / L) exp(i (m v x^2 / (2 hbar L)
  - e_n t / (hbar L0 L)))`` with ``L = L0 + v t``.
* :func:`grid_evolve` -- finite differences on the fixed interval ``y = x / L``
  for ``phi(y, t) = sqrt(L) psi(y L, t)``, which obeys

      i hbar phi_t = -hbar^2 / (2 m L^2) phi_yy + i hbar (Ldot / L) (y phi_y + phi / 2).

  The drift term is discretised as the antisymmetric operator
  ``(Y D1 + D1 Y) / 2`` so that the midpoint Crank-Nicolson step is unitary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .core import NATURAL_UNITS, DomainError, PhysicalConstants
from .wall import validate

NODES_PER_PANEL = 64


class OracleError(RuntimeError):
    pass


class InsufficientModesError(OracleError):
    pass


class GridInstabilityError(OracleError):
    pass


def gauss_legendre_panels(n_panels: int, nodes: int = NODES_PER_PANEL):
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return y, w


@dataclass
class AnalyticModeSet:
    L0: float
    v: float
    mode_count: int = 128
    constants: PhysicalConstants = NATURAL_UNITS

    def __post_init__(self):
        if not self.L0 > 0:
            raise DomainError("L0 must be > 0")
        if self.mode_count < 2:
            raise DomainError("mode_count must be >= 2")
        self._y, self._w = gauss_legendre_panels(self.mode_count)
        n = np.arange(1, self.mode_count + 1)
        self._sines = np.sqrt(2.0) * np.sin(np.pi * np.outer(n, self._y))
        hb, m = self.constants.hbar, self.constants.mass
        self.level_constants = hb**2 * np.pi**2 * n**2 / (2.0 * m)

    def length(self, t):
        return self.L0 + self.v * t

    def theta(self, t):
        return t / (self.L0 * self.length(t))

    def chirp(self, t):
        """Coefficient ``alpha`` of ``exp(i alpha y^2)`` in the fractional coordinate."""
        return self.constants.mass * self.v * self.length(t) / (2.0 * self.constants.hbar)

    def mode(self, n: int, x, t: float):
        """``Phi_n(x, t)`` at absolute positions ``x``."""
        L = self.length(t)
        if not L > 0:
            raise DomainError("wall has collapsed")
        x = np.asarray(x, dtype=float)
        hb, m = self.constants.hbar, self.constants.mass
        e_n = hb**2 * np.pi**2 * n**2 / (2.0 * m)
        phase = m * self.v * x**2 / (2.0 * hb * L) - e_n * self.theta(t) / hb
        return np.sqrt(2.0 / L) * np.sin(n * np.pi * x / L) * np.exp(1j * phase)

    def expand(self, phi0: Optional[np.ndarray] = None) -> np.ndarray:
        """Coefficients ``b_n = <Phi_n(., 0) | psi_0>``.

        ``phi0`` gives the initial state as eigen-coefficients at ``L0``
        (default: ground state).  Raises :class:`InsufficientModesError` if the
        retained modes miss more than 1e-8 of the norm.
        """
        if phi0 is None:
            phi0 = np.zeros(1, dtype=complex)
            phi0[0] = 1.0
        phi0 = np.asarray(phi0, dtype=complex)
        f = phi0 @ self._sines[: phi0.size]
        g = np.exp(-1j * self.chirp(0.0) * self._y**2) * f * self._w
        b = self._sines @ g
        captured = float(np.sum(np.abs(b) ** 2))
        target = float(np.sum(np.abs(phi0) ** 2))
        if captured < target - 1e-8:
            raise InsufficientModesError(
                f"{self.mode_count} modes capture {captured:.12f} of {target:.12f}")
        return b

    def eigen_coefficients(self, t: float, b: np.ndarray, n_report: int) -> np.ndarray:
        """Project ``sum_n b_n Phi_n(t)`` on the instantaneous eigenstates ``u_k``."""
        L = self.length(t)
        if not L > 0:
            raise DomainError("wall has collapsed")
        dyn = np.exp(-1j * self.level_constants * self.theta(t) / self.constants.hbar)
        f = (b * dyn) @ self._sines
        g = np.exp(1j * self.chirp(t) * self._y**2) * f * self._w
        return self._sines[:n_report] @ g


def analytic_populations(v: float, L0: float, t, n_modes: int = 128, n_report: int = 5,
                         constants: PhysicalConstants = NATURAL_UNITS,
                         initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Populations of the first ``n_report`` instantaneous eigenstates.

    ``t`` may be a scalar (returns a vector) or an array (returns one row per
    time).  Starts from the ground state unless ``initial`` coefficients are
    given.
    """
    modes = AnalyticModeSet(L0, v, n_modes, constants)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(modes.length(ts) <= 0):
        raise DomainError("L0 + v t must stay positive")
    b = modes.expand(initial)
    out = np.array([np.abs(modes.eigen_coefficients(s, b, n_report)) ** 2 for s in ts])
    return out[0] if np.ndim(t) == 0 else out


@dataclass
class GridResult:
    times: np.ndarray
    populations: np.ndarray
    norms: np.ndarray
    n_grid: int
    dt: float


class GridPropagator:
    """Crank-Nicolson propagation of ``phi(y, t)`` on ``n_grid`` interior points."""

    def __init__(self, profile, n_grid: int, constants: PhysicalConstants = NATURAL_UNITS):
        if n_grid < 256:
            raise DomainError("n_grid must be >= 256")
        self.profile = profile
        self.n_grid = n_grid
        self.constants = constants
        self.h = 1.0 / (n_grid + 1)
        self.y = self.h * np.arange(1, n_grid + 1)
        h, y = self.h, self.y
        # banded (upper, diag, lower) storage for solve_banded with l = u = 1
        self._lap = np.zeros((3, n_grid))
        self._lap[0, 1:] = 1.0 / h**2
        self._lap[1, :] = -2.0 / h**2
        self._lap[2, :-1] = 1.0 / h**2
        self._drift = np.zeros((3, n_grid))
        ypair = y[:-1] + y[1:]
        self._drift[0, 1:] = ypair / (4.0 * h)      # B[j, j+1]
        self._drift[2, :-1] = -ypair / (4.0 * h)    # B[j+1, j]

    def sine_basis(self, n_modes: int) -> np.ndarray:
        k = np.arange(1, n_modes + 1)
        return np.sqrt(2.0) * np.sin(np.pi * np.outer(k, self.y))

    def initial_state(self, coefficients: Optional[Sequence[complex]] = None) -> np.ndarray:
        if coefficients is None:
            coefficients = [1.0]
        c = np.asarray(coefficients, dtype=complex)
        return c @ self.sine_basis(c.size)

    def generator(self, t: float) -> np.ndarray:
        """Banded ``G`` with ``phi_t = G phi``."""
        L = float(self.profile._L(t))
        Ld = float(self.profile._Ldot(t))
        hb, m = self.constants.hbar, self.constants.mass
        return (1j * hb / (2.0 * m * L**2)) * self._lap + (Ld / L) * self._drift

    def step(self, phi: np.ndarray, t: float, dt: float) -> np.ndarray:
        G = self.generator(t + 0.5 * dt)
        lhs = -0.5 * dt * G
        lhs[1] += 1.0
        rhs = phi + 0.5 * dt * _banded_matvec(G, phi)
        return solve_banded((1, 1), lhs, rhs)

    def norm(self, phi: np.ndarray) -> float:
        return float(self.h * np.vdot(phi, phi).real)

    def project(self, phi: np.ndarray, n_report: int) -> np.ndarray:
        return self.h * (self.sine_basis(n_report) @ phi)


def _banded_matvec(G, x):
    out = G[1] * x
    out[:-1] += G[0, 1:] * x[1:]
    out[1:] += G[2, :-1] * x[:-1]
    return out


def grid_evolve(profile, n_grid: int, dt: float, t_end: float, n_report: int = 5,
                sample_every: int = 1, constants: PhysicalConstants = NATURAL_UNITS,
                initial: Optional[Sequence[complex]] = None,
                norm_tolerance: float = 1e-6) -> GridResult:
    """Propagate on a grid and return eigenstate populations at each sample.

    ``t_end`` is rounded to a whole number of steps of size ``dt``; samples
    are taken every ``sample_every`` steps (and at the end).
    """
    if not dt > 0:
        raise DomainError("dt must be > 0")
    report = validate(profile, t_end)
    if not report:
        raise DomainError(f"wall collapses at t = {report.time}")
    n_steps = max(1, int(round(t_end / dt)))
    dt = t_end / n_steps
    prop = GridPropagator(profile, n_grid, constants)
    phi = prop.initial_state(initial)
    norm0 = prop.norm(phi)
    basis = prop.sine_basis(n_report)
    times, pops, norms = [0.0], [np.abs(prop.h * basis @ phi) ** 2], [norm0]
    for i in range(1, n_steps + 1):
        phi = prop.step(phi, (i - 1) * dt, dt)
        if i % sample_every == 0 or i == n_steps:
            nrm = prop.norm(phi)
            if abs(nrm - norm0) > norm_tolerance * max(1.0, i * dt):
                raise GridInstabilityError(f"norm drifted to {nrm!r} at t = {i * dt}")
            times.append(i * dt)
            pops.append(np.abs(prop.h * basis @ phi) ** 2)
            norms.append(nrm)
    return GridResult(np.array(times), np.array(pops), np.array(norms), n_grid, dt)
