"""Frequency sweeps, resonance refinement, validation and convergence runs."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import NATURAL_UNITS, DomainError, PhysicalConstants
from .dynamics import (CoefficientState, IntegrationError, IntegratorConfig,
                       Trajectory, integrate, max_populations)
from .observables import trajectory_observables
from .oracles import analytic_populations
from .wall import ConstantVelocity, Exponential, NonPositiveLengthError, Sinusoidal

WORKERS_ENV = "MOVINGWALL_WORKERS"
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonUnimodalWarning(RuntimeWarning):
    pass


def default_basis_size(profile) -> int:
    """Basis size large enough for the population convergence gates."""
    if isinstance(profile, ConstantVelocity) and abs(profile.v) >= 2:
        return 128
    if isinstance(profile, Exponential) and abs(profile.v) >= 9:
        return 128
    return 64


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ----------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    omega_min: float = 1.0
    omega_max: float = 100.0
    n_omega: int = 2000
    amplitude: float = 0.05
    L0: float = 1.0
    t_end: float = 10.0
    n_report: int = 5
    n_basis: int = 64
    integrator: IntegratorConfig = IntegratorConfig()
    samples_per_period: float = 50.0
    min_samples: int = 1001
    constants: PhysicalConstants = NATURAL_UNITS

    def __post_init__(self):
        if not 0 <= self.omega_min < self.omega_max:
            raise DomainError("need 0 <= omega_min < omega_max")
        if self.n_omega < 2:
            raise DomainError("n_omega must be >= 2")
        if not self.L0 > 0:
            raise DomainError("L0 must be > 0")
        if not abs(self.amplitude) < self.L0:
            raise DomainError("amplitude must be smaller than L0")
        if not self.t_end > 0:
            raise DomainError("t_end must be > 0")
        if not 1 <= self.n_report <= self.n_basis:
            raise DomainError("n_report must lie in 1..n_basis")
        if self.samples_per_period < 1:
            raise DomainError("samples_per_period must be >= 1")

    @property
    def omegas(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.n_omega)

    def profile(self, omega: float) -> Sinusoidal:
        return Sinusoidal(self.L0, self.amplitude, omega)

    def sample_times(self, omega: float) -> np.ndarray:
        """Uniform samples spaced at most one ``samples_per_period``-th of a drive period."""
        n = math.ceil(self.t_end * self.samples_per_period * omega / (2.0 * math.pi)) + 1
        return np.linspace(0.0, self.t_end, max(self.min_samples, n))


@dataclass
class PeakPopulations:
    omega: float
    maxima: np.ndarray
    argmax_times: np.ndarray
    steps: int = 0
    norm_drift: float = float("nan")
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def peak_populations(omega: float, spec: SweepSpec) -> PeakPopulations:
    """Maximum of each tracked population over ``[0, t_end]`` at one drive frequency."""
    cfg = replace(spec.integrator, sample_times=spec.sample_times(omega))
    try:
        res = max_populations(CoefficientState.eigenstate(1, spec.n_basis), spec.profile(omega),
                              cfg, spec.t_end, spec.constants)
    except (IntegrationError, NonPositiveLengthError) as exc:
        nan = np.full(spec.n_report, np.nan)
        return PeakPopulations(omega, nan, nan.copy(), error=str(exc))
    return PeakPopulations(omega, res.maxima[: spec.n_report].copy(),
                           res.argmax_times[: spec.n_report].copy(), res.steps_accepted,
                           res.norm_drift)


def _sweep_point(args):
    omega, spec = args
    return peak_populations(omega, spec)


@dataclass
class SweepResult:
    omegas: np.ndarray
    maxima: np.ndarray          # (n_omega, n_report)
    argmax_times: np.ndarray    # (n_omega, n_report)
    failed: np.ndarray          # bool per omega
    norm_drift: np.ndarray      # largest norm error over each run's samples
    errors: List[Optional[str]] = field(default_factory=list)

    def best(self, k: int) -> Tuple[float, float]:
        """Grid frequency and value of the largest maximum for state ``k``."""
        col = np.where(self.failed, -np.inf, self.maxima[:, k - 1])
        i = int(np.argmax(col))
        return float(self.omegas[i]), float(self.maxima[i, k - 1])

    def local_peaks(self, k: int, count: int = 3) -> List[int]:
        """Indices of the ``count`` highest interior local maxima for state ``k``."""
        y = np.where(self.failed, -np.inf, self.maxima[:, k - 1])
        idx = [i for i in range(len(y))
               if (i == 0 or y[i] >= y[i - 1]) and (i == len(y) - 1 or y[i] >= y[i + 1])]
        idx.sort(key=lambda i: -y[i])
        return idx[:count]


def _map(points: Sequence[float], spec: SweepSpec, workers: Optional[int]) -> List[PeakPopulations]:
    n = worker_count(workers)
    jobs = [(float(w), spec) for w in points]
    if n == 1 or len(jobs) == 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_sweep_point, jobs, chunksize=1))


def frequency_sweep(spec: SweepSpec, workers: Optional[int] = None,
                    omegas: Optional[Sequence[float]] = None) -> SweepResult:
    """Peak populations on the uniform ``omega`` grid of ``spec`` (or explicit ``omegas``).

    Points run on a process pool and are gathered in frequency order, so the
    result does not depend on the worker count.  Failed points are flagged
    and carry NaN.
    """
    grid = spec.omegas if omegas is None else np.asarray(omegas, dtype=float)
    points = _map(grid, spec, workers)
    return SweepResult(
        omegas=grid,
        maxima=np.array([p.maxima for p in points]),
        argmax_times=np.array([p.argmax_times for p in points]),
        failed=np.array([p.failed for p in points]),
        norm_drift=np.array([p.norm_drift for p in points]),
        errors=[p.error for p in points],
    )


# ----------------------------------------------------------------------------
# resonance refinement


@dataclass
class ResonanceReport:
    state: int
    omega: float
    max_population: float
    argmax_time: float
    bracket: Tuple[float, float]
    iterations: int
    evaluations: List[Tuple[float, float]] = field(default_factory=list)
    unimodal: bool = True
    norm_drift: float = float("nan")   # largest over all evaluated frequencies


def golden_section_max(f, a: float, b: float, tol: float = 1e-4,
                       seeds: Sequence[Tuple[float, float]] = ()):
    """Maximise ``f`` on ``[a, b]`` until the bracket is no wider than ``tol``.

    Returns ``(x_best, f_best, iterations, evaluations, unimodal)``; the best
    point is taken over every evaluation, the endpoints and ``seeds`` included.
    """
    evals = list(seeds)

    def F(x):
        y = f(x)
        evals.append((x, y))
        return y

    lo, hi = a, b
    fa, fb = F(a), F(b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = F(c), F(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, fb = d, fd
            d, fd = c, fc
            c = b - INV_PHI * (b - a)
            fc = F(c)
        else:
            a, fa = c, fc
            c, fc = d, fd
            d = a + INV_PHI * (b - a)
            fd = F(d)
    x, y = max(evals, key=lambda e: e[1])
    return x, y, it, evals, _unimodal([e for e in evals if lo <= e[0] <= hi])


def _unimodal(evals) -> bool:
    """True if the values, ordered by abscissa, rise and then fall."""
    ys = [y for _, y in sorted(evals)]
    falling = False
    for y0, y1 in zip(ys, ys[1:]):
        if y1 < y0:
            falling = True
        elif y1 > y0 and falling:
            return False
    return True


def refine_resonance(k: int, bracket: Tuple[float, float], spec: SweepSpec, tol: float = 1e-4,
                     seeds: Sequence[Tuple[float, float]] = ()) -> ResonanceReport:
    """Golden-section search for the frequency maximising ``max_t |C_k|^2``.

    ``seeds`` are already-known ``(omega, value)`` pairs inside the bracket
    (e.g. coarse sweep points); they take part in choosing the best point.
    Emits :class:`NonUnimodalWarning` when the evaluations contradict a single
    interior maximum.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise DomainError("bracket must satisfy lo < hi")
    if not 1 <= k <= spec.n_basis:
        raise DomainError("state index out of range")
    spec = replace(spec, n_report=max(spec.n_report, k))
    cache = {}

    def f(omega):
        p = peak_populations(omega, spec)
        if p.failed:
            raise IntegrationError(p.error, float("nan"))
        cache[omega] = p
        return float(p.maxima[k - 1])

    seeds = [(w, v) for w, v in seeds if lo <= w <= hi]
    x, y, it, evals, unimodal = golden_section_max(f, lo, hi, tol, seeds)
    if not unimodal:
        warnings.warn(f"state {k}: evaluations in [{lo}, {hi}] are not unimodal",
                      NonUnimodalWarning, stacklevel=2)
    argt = float(cache[x].argmax_times[k - 1]) if x in cache else float("nan")
    drift = max(p.norm_drift for p in cache.values())
    return ResonanceReport(k, x, y, argt, (lo, hi), it, evals, unimodal, drift)


# ----------------------------------------------------------------------------
# validation, convergence, exponential preparation


@dataclass
class ConstantVelocityValidation:
    times: np.ndarray
    integrated: np.ndarray
    analytic: np.ndarray
    norm_drift: float = float("nan")

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.integrated - self.analytic)))


def validate_constant_velocity(v: float, L0: float = 1.0, t_end: float = 1.0,
                               n_basis: Optional[int] = None, n_times: int = 101,
                               n_states: int = 5, n_modes: int = 128,
                               integrator: IntegratorConfig = IntegratorConfig(),
                               constants: PhysicalConstants = NATURAL_UNITS
                               ) -> ConstantVelocityValidation:
    """Compare integrated and analytic populations for ``L = L0 + v t``."""
    profile = ConstantVelocity(L0, v)
    N = n_basis or default_basis_size(profile)
    times = np.linspace(0.0, t_end, n_times)
    traj = integrate(CoefficientState.eigenstate(1, N), profile,
                     replace(integrator, sample_times=times), t_end, constants)
    exact = analytic_populations(v, L0, times, n_modes, n_states, constants)
    return ConstantVelocityValidation(times, traj.populations()[:, :n_states], exact,
                                      float(np.max(traj.norm_drift)))


@dataclass
class ConvergenceRow:
    kind: str
    factor: float
    n_basis: int
    rel_tol: float
    abs_tol: float
    max_shift: float
    norm_drift: float = float("nan")   # of the reference and the rerun


def convergence_study(profile, t_end: float, n_basis: int = 64,
                      integrator: IntegratorConfig = IntegratorConfig(),
                      basis_factors: Sequence[float] = (2,),
                      tolerance_factors: Sequence[float] = (100,),
                      combined: Sequence[Tuple[float, float]] = (),
                      n_report: int = 5, n_samples: int = 1001,
                      initial_level: int = 1,
                      constants: PhysicalConstants = NATURAL_UNITS) -> List[ConvergenceRow]:
    """Rerun a reference trajectory with more basis states and/or tighter
    tolerances and report the largest change in the tracked populations.

    ``combined`` holds ``(basis_factor, tolerance_factor)`` pairs applied
    together.
    """
    for f in list(basis_factors) + list(tolerance_factors) + [x for p in combined for x in p]:
        if f < 1:
            raise DomainError("convergence factors must be >= 1")
    times = np.linspace(0.0, t_end, n_samples)
    base_cfg = replace(integrator, sample_times=times)

    def run(N, cfg):
        traj = integrate(CoefficientState.eigenstate(initial_level, N), profile, cfg, t_end, constants)
        return traj.populations()[:, :n_report], float(np.max(traj.norm_drift))

    ref, ref_drift = run(n_basis, base_cfg)
    rows = []
    jobs = ([("basis", f, f, 1.0) for f in basis_factors]
            + [("tolerance", f, 1.0, f) for f in tolerance_factors]
            + [("combined", bf * tf, bf, tf) for bf, tf in combined])
    for kind, factor, bf, tf in jobs:
        N = int(round(n_basis * bf))
        cfg = replace(base_cfg, rel_tol=integrator.rel_tol / tf, abs_tol=integrator.abs_tol / tf)
        if N == n_basis and tf == 1.0:
            shift, drift = 0.0, ref_drift
        else:
            pops, drift = run(N, cfg)
            shift = float(np.max(np.abs(pops - ref)))
        rows.append(ConvergenceRow(kind, factor, N, cfg.rel_tol, cfg.abs_tol, shift,
                                   max(drift, ref_drift)))
    return rows


@dataclass
class PreparationResult:
    trajectory: Trajectory
    observables: dict
    plateau_change: float
    kinetic_initial: float
    kinetic_final: float

    @property
    def plateaued(self) -> bool:
        return self.plateau_change < 1e-3


def exponential_preparation(v: float = -9.0, L0: float = 1.0, t_end: float = 0.5,
                            n_basis: Optional[int] = None, n_samples: int = 2001,
                            integrator: IntegratorConfig = IntegratorConfig(),
                            min_length: float = 0.0,
                            constants: PhysicalConstants = NATURAL_UNITS) -> PreparationResult:
    """Ground state driven by ``L = L0 exp(v t / L0)``.

    ``plateau_change`` is the largest spread of any population over the last
    10% of the run.
    """
    profile = Exponential(L0, v)
    N = n_basis or default_basis_size(profile)
    times = np.linspace(0.0, t_end, n_samples)
    traj = integrate(CoefficientState.eigenstate(1, N), profile,
                     replace(integrator, sample_times=times), t_end, constants, min_length)
    obs = trajectory_observables(traj)
    late = obs["populations"][times >= 0.9 * t_end]
    change = float(np.max(late.max(axis=0) - late.min(axis=0)))
    return PreparationResult(traj, obs, change, float(obs["kinetic"][0]), float(obs["kinetic"][-1]))
