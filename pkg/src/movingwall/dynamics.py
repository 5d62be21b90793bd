"""Propagation of the expansion coefficients for a box with a moving wall.

With the wavefunction written as

    psi(x, t) = sum_n C_n(t) u_n(x; L(t)) exp(-i e_n theta(t) / hbar),
    theta(t)  = int_0^t dtau / L(tau)^2,

the coefficients obey the linear system

    dC_k/dt = (Ldot / L) sum_{n != k} A[k, n] exp(-i Omega[k, n] theta) C_n,
    A[k, n] = 2 (-1)^(k+n) k n / (n^2 - k^2),
    Omega[k, n] = (e_n - e_k) / hbar,

which is integrated together with ``dtheta/dt = 1 / L^2`` by an adaptive
Dormand-Prince 5(4) scheme with dense output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from .core import NATURAL_UNITS, BoxSpec, DomainError, EigenData, PhysicalConstants
from .wall import NonPositiveLengthError, validate

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11
DEFAULT_SAMPLES = 1001
DEFAULT_MAX_STEPS = 200_000_000


class IntegrationError(RuntimeError):
    """The integrator could not reach the requested end time."""

    def __init__(self, message, t_reached):
        super().__init__(f"{message} (reached t = {t_reached:.17g})")
        self.t_reached = t_reached


class StepSizeUnderflow(IntegrationError):
    pass


class SingularLengthError(IntegrationError, NonPositiveLengthError):
    pass


@dataclass(frozen=True)
class CouplingMatrix:
    A: np.ndarray

    @property
    def n_basis(self):
        return self.A.shape[0]

    def __getitem__(self, kn):
        k, n = kn
        return self.A[k - 1, n - 1]


@dataclass(frozen=True)
class PhaseConstants:
    Omega: np.ndarray

    def __getitem__(self, kn):
        k, n = kn
        return self.Omega[k - 1, n - 1]


@lru_cache(maxsize=16)
def build_coupling(n_basis: int) -> CouplingMatrix:
    """Real antisymmetric coupling coefficients, physical (1-based) indexing."""
    BoxSpec(n_basis)
    k = np.arange(1, n_basis + 1, dtype=float)
    K, M = np.meshgrid(k, k, indexing="ij")
    sign = np.where((K + M) % 2 == 0, 1.0, -1.0)
    denom = M**2 - K**2
    np.fill_diagonal(denom, 1.0)
    A = 2.0 * sign * K * M / denom
    np.fill_diagonal(A, 0.0)
    A.setflags(write=False)
    return CouplingMatrix(A)


@lru_cache(maxsize=16)
def build_phase_constants(n_basis: int, constants: PhysicalConstants = NATURAL_UNITS) -> PhaseConstants:
    e = EigenData(n_basis, constants).level_constants
    Om = (e[None, :] - e[:, None]) / constants.hbar
    Om.setflags(write=False)
    return PhaseConstants(Om)


@dataclass(frozen=True)
class CoefficientState:
    t: float
    C: np.ndarray
    theta: float = 0.0

    def __post_init__(self):
        C = np.array(self.C, dtype=complex)
        if C.ndim != 1 or C.size < 2:
            raise DomainError("coefficient vector must be 1-D with at least 2 entries")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def n_basis(self):
        return self.C.size

    @property
    def norm(self) -> float:
        return float(np.vdot(self.C, self.C).real)

    @classmethod
    def eigenstate(cls, level: int, n_basis: int, t: float = 0.0) -> "CoefficientState":
        if not 1 <= level <= n_basis:
            raise DomainError(f"level must lie in 1..{n_basis}, got {level}")
        C = np.zeros(n_basis, dtype=complex)
        C[level - 1] = 1.0
        return cls(t, C)

    @classmethod
    def superposition(cls, amplitudes: Sequence[complex], n_basis: int,
                      normalize: bool = True) -> "CoefficientState":
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.size > n_basis:
            raise DomainError("more amplitudes than basis states")
        C = np.zeros(n_basis, dtype=complex)
        C[: amps.size] = amps
        if normalize:
            nrm = np.linalg.norm(C)
            if nrm == 0:
                raise DomainError("superposition has zero norm")
            C /= nrm
        return cls(0.0, C)

    def dressed(self, constants: PhysicalConstants = NATURAL_UNITS) -> np.ndarray:
        """Coefficients of the instantaneous eigenfunctions including dynamic phases."""
        e = EigenData(self.n_basis, constants).level_constants
        return self.C * np.exp(-1j * e * self.theta / constants.hbar)

    def time_reversed(self, constants: PhysicalConstants = NATURAL_UNITS) -> "CoefficientState":
        """Start state for running the conjugate wavefunction on a mirrored wall.

        The phase integral restarts at zero, so the dynamic phases accumulated
        so far are folded into the conjugated coefficients.  The result is
        renormalised to absorb integration drift.
        """
        C = np.conj(self.dressed(constants))
        return CoefficientState(0.0, C / np.linalg.norm(C), 0.0)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = DEFAULT_RTOL
    abs_tol: float = DEFAULT_ATOL
    initial_step: Optional[float] = None
    max_step: float = math.inf
    sample_times: Optional[Sequence[float]] = None
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("integrator tolerances must be > 0")
        if self.initial_step is not None and not self.initial_step > 0:
            raise DomainError("initial_step must be > 0")
        if not self.max_step > 0:
            raise DomainError("max_step must be > 0")

    def samples_for(self, t0: float, t_end: float) -> np.ndarray:
        if self.sample_times is None:
            return np.linspace(t0, t_end, DEFAULT_SAMPLES)
        s = np.asarray(self.sample_times, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise DomainError("sample_times must be a non-empty 1-D sequence")
        if np.any(np.diff(s) <= 0):
            raise DomainError("sample_times must be strictly increasing")
        if s[0] < t0 or s[-1] > t_end:
            raise DomainError(f"sample_times must lie within [{t0}, {t_end}]")
        return s


@dataclass
class Trajectory:
    times: np.ndarray
    lengths: np.ndarray
    thetas: np.ndarray
    coefficients: np.ndarray
    steps_accepted: int = 0
    steps_rejected: int = 0
    rhs_evaluations: int = 0
    constants: PhysicalConstants = NATURAL_UNITS
    norm_drift: np.ndarray = field(init=False)

    def __post_init__(self):
        norms = np.sum(np.abs(self.coefficients) ** 2, axis=1)
        self.norm_drift = np.abs(norms - 1.0)

    def __len__(self):
        return self.times.size

    def __getitem__(self, i) -> CoefficientState:
        return CoefficientState(float(self.times[i]), self.coefficients[i], float(self.thetas[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def n_basis(self):
        return self.coefficients.shape[1]

    @property
    def final(self) -> CoefficientState:
        return self[-1]

    def populations(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2


@dataclass(frozen=True)
class MaxPopulations:
    """Running maxima of ``|C_n|^2`` over a sample grid, without the trajectory."""

    maxima: np.ndarray
    argmax_times: np.ndarray
    final: CoefficientState
    norm_drift: float
    steps_accepted: int
    steps_rejected: int
    rhs_evaluations: int


def rhs(state: CoefficientState, profile, A: CouplingMatrix, Omega: PhaseConstants):
    """Time derivative ``(dC/dt, dtheta/dt)`` in plain numpy.

    Builds the full phase matrix; the compiled integrator uses a factorised
    form of the same expression.
    """
    L = float(profile._L(state.t))
    if not L > 0:
        raise SingularLengthError("box length is not positive", state.t)
    Ld = float(profile._Ldot(state.t))
    phase = np.exp(-1j * Omega.Omega * state.theta)
    dC = (Ld / L) * ((A.A * phase) @ state.C)
    return dC, 1.0 / L**2


def _prepare(initial: CoefficientState, profile, t_end: float, min_length: float):
    if not t_end >= initial.t:
        raise DomainError("t_end must not precede the initial time")
    if abs(initial.norm - 1.0) > 1e-12:
        raise DomainError(f"initial state must be normalised to 1e-12 (norm = {initial.norm!r})")
    if t_end > 0:
        report = validate(profile, t_end, min_length)
        if not report:
            raise NonPositiveLengthError(
                f"L(t) = {report.length:.6g} <= {min_length} at t = {report.time:.6g}")


def _run(initial, profile, config, t_end, samples, store, constants):
    N = initial.n_basis
    A = build_coupling(N).A
    w1 = constants.hbar * math.pi**2 / (2.0 * constants.mass)
    y0 = np.empty(N + 1, dtype=complex)
    y0[:N] = initial.C
    y0[N] = initial.theta
    breaks = np.array([b for b in profile.breakpoints if initial.t < b < t_end], dtype=float)
    h0 = config.initial_step if config.initial_step is not None else 0.0
    out, maxpop, argt, stats, status, t_reached, y = _kernel.dopri5(
        y0, float(initial.t), float(t_end), A, w1, profile.segment_table(), breaks,
        samples, config.rel_tol, config.abs_tol, h0, float(config.max_step),
        store, config.max_steps)
    if status == _kernel.STATUS_UNDERFLOW:
        raise StepSizeUnderflow("step size underflow", t_reached)
    if status == _kernel.STATUS_SINGULAR:
        raise SingularLengthError("box length reached zero", t_reached)
    if status == _kernel.STATUS_MAX_STEPS:
        raise IntegrationError(f"exceeded {config.max_steps} steps", t_reached)
    return out, maxpop, argt, stats, y


def integrate(initial: CoefficientState, profile, config: IntegratorConfig = IntegratorConfig(),
              t_end: float = 1.0, constants: PhysicalConstants = NATURAL_UNITS,
              min_length: float = 0.0) -> Trajectory:
    """Propagate ``initial`` to ``t_end``, sampling at ``config.sample_times``.

    The profile is validated first (``L > min_length`` on the horizon).
    Raises :class:`StepSizeUnderflow` or :class:`SingularLengthError` on
    numerical failure.
    """
    _prepare(initial, profile, t_end, min_length)
    samples = config.samples_for(initial.t, t_end)
    out, _, _, stats, _ = _run(initial, profile, config, t_end, samples, True, constants)
    N = initial.n_basis
    return Trajectory(
        times=samples,
        lengths=np.asarray(profile.length(samples), dtype=float).reshape(-1),
        thetas=out[:, N].real.copy(),
        coefficients=out[:, :N].copy(),
        steps_accepted=int(stats[0]),
        steps_rejected=int(stats[1]),
        rhs_evaluations=int(stats[2]),
        constants=constants,
    )


def max_populations(initial: CoefficientState, profile, config: IntegratorConfig = IntegratorConfig(),
                    t_end: float = 1.0, constants: PhysicalConstants = NATURAL_UNITS,
                    min_length: float = 0.0) -> MaxPopulations:
    """Like :func:`integrate` but keeps only per-state maxima over the samples."""
    _prepare(initial, profile, t_end, min_length)
    samples = config.samples_for(initial.t, t_end)
    if samples[-1] != t_end:
        samples = np.append(samples, t_end)
    _, maxpop, argt, stats, y = _run(initial, profile, config, t_end, samples, False, constants)
    N = initial.n_basis
    final = CoefficientState(float(t_end), y[:N], float(y[N].real))
    return MaxPopulations(maxpop[:N].copy(), argt, final, float(maxpop[N]),
                          int(stats[0]), int(stats[1]), int(stats[2]))


def richardson_norm_check(trajectory: Trajectory) -> float:
    """Largest deviation of the squared coefficient norm from one."""
    if len(trajectory) == 0:
        raise DomainError("empty trajectory")
    return float(np.max(trajectory.norm_drift))
