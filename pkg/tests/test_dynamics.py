import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from movingwall import _kernel
from movingwall.core import DomainError, PhysicalConstants
from movingwall.dynamics import (CoefficientState, IntegratorConfig, SingularLengthError,
                                 build_coupling, build_phase_constants, integrate,
                                 max_populations, rhs, richardson_norm_check)
from movingwall.wall import (ConstantVelocity, Exponential, NonPositiveLengthError, Piecewise,
                             Sinusoidal)


def _random_state(rng, N):
    C = rng.normal(size=N) + 1j * rng.normal(size=N)
    return C / np.linalg.norm(C)


def test_coupling_examples():
    A = build_coupling(8)
    assert A[1, 2] == pytest.approx(-4 / 3, rel=1e-15)
    assert A[2, 1] == pytest.approx(4 / 3, rel=1e-15)
    assert A[3, 3] == 0.0


def test_coupling_defining_formula_and_antisymmetry():
    N = 20
    A = build_coupling(N)
    for k in range(1, N + 1):
        for n in range(1, N + 1):
            if k == n:
                assert A[k, n] == 0.0
                continue
            ratio = A[k, n] * (n * n - k * k) / (2 * (-1) ** (k + n) * k * n)
            assert ratio == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_array_equal(A.A, -A.A.T)


def test_coupling_rejects_small_basis():
    with pytest.raises(DomainError):
        build_coupling(1)


def test_phase_constants():
    c = PhysicalConstants(hbar=1.3, mass=0.7)
    Om = build_phase_constants(6, c)
    np.testing.assert_allclose(Om.Omega, -Om.Omega.T, atol=0)
    assert Om[1, 3] == pytest.approx(1.3 * math.pi**2 * (9 - 1) / (2 * 0.7), rel=1e-14)


def test_rhs_stationary_wall_is_zero(rng):
    N = 10
    A, Om = build_coupling(N), build_phase_constants(N)
    st_ = CoefficientState(0.3, _random_state(rng, N), 0.2)
    dC, dtheta = rhs(st_, ConstantVelocity(1.7, 0.0), A, Om)
    assert np.all(dC == 0)
    assert dtheta == pytest.approx(1 / 1.7**2, rel=1e-15)


def test_rhs_ground_state_example():
    N = 8
    dC, _ = rhs(CoefficientState.eigenstate(1, N), Sinusoidal(1.0, 0.05, 10.0),
                build_coupling(N), build_phase_constants(N))
    assert dC[1] == pytest.approx(0.5 * 4 / 3, rel=1e-14)
    assert dC[0] == 0


def test_rhs_norm_derivative_vanishes(rng):
    N = 24
    A, Om = build_coupling(N), build_phase_constants(N)
    prof = Sinusoidal(1.0, 0.2, 7.0)
    worst = 0.0
    for _ in range(100):
        s = CoefficientState(rng.uniform(0, 2), _random_state(rng, N), rng.uniform(0, 3))
        dC, _ = rhs(s, prof, A, Om)
        worst = max(worst, abs(np.vdot(s.C, dC).real) / np.linalg.norm(dC))
    assert worst < 1e-14


def test_rhs_singular_length():
    N = 4
    with pytest.raises(SingularLengthError):
        rhs(CoefficientState(1.0, np.eye(N)[0]), ConstantVelocity(1.0, -1.0),
            build_coupling(N), build_phase_constants(N))


@pytest.mark.parametrize("profile", [Sinusoidal(1.0, 0.05, 14.7605), ConstantVelocity(1.0, 2.0),
                                     Exponential(1.0, -2.0)], ids=lambda p: type(p).__name__)
def test_compiled_rhs_matches_numpy(profile, rng):
    N = 16
    A, Om = build_coupling(N), build_phase_constants(N)
    w1 = math.pi**2 / 2
    table = profile.segment_table()
    out = np.empty(N + 1, dtype=complex)
    work = np.empty((6, N))
    for _ in range(10):
        t, theta = rng.uniform(0, 0.3), rng.uniform(0, 0.3)
        s = CoefficientState(t, _random_state(rng, N), theta)
        y = np.append(s.C, theta)
        assert _kernel.rhs(t, y, A.A, w1, table, out, work)
        dC, dth = rhs(s, profile, A, Om)
        np.testing.assert_allclose(out[:N], dC, rtol=1e-12, atol=1e-13)
        assert out[N].real == pytest.approx(dth, rel=1e-14)


def _scipy_reference(initial, profile, times, N):
    A, Om = build_coupling(N), build_phase_constants(N)

    def f(t, y):
        dC, dth = rhs(CoefficientState(t, y[:N], y[N].real), profile, A, Om)
        return np.append(dC, dth)

    y0 = np.append(initial.C, 0.0).astype(complex)
    sol = solve_ivp(f, (times[0], times[-1]), y0, method="DOP853", t_eval=times,
                    rtol=1e-12, atol=1e-14)
    assert sol.success
    return sol.y[:N].T


@pytest.mark.parametrize("profile,t_end", [
    (Sinusoidal(1.0, 0.05, 14.7605), 2.0),
    (ConstantVelocity(1.0, 2.0), 0.5),
    (Exponential(1.0, -3.0), 0.3),
], ids=["sinusoidal", "linear", "exponential"])
def test_integrator_matches_scipy_dop853(profile, t_end):
    N = 12
    times = np.linspace(0, t_end, 41)
    init = CoefficientState.eigenstate(1, N)
    traj = integrate(init, profile, IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, sample_times=times), t_end)
    ref = _scipy_reference(init, profile, times, N)
    np.testing.assert_allclose(traj.coefficients, ref, atol=2e-9)


def test_dense_output_matches_landing():
    # samples produced by interpolation agree with runs that end exactly there
    N = 16
    prof = Sinusoidal(1.0, 0.05, 14.7605)
    times = np.linspace(0, 1.0, 11)
    traj = integrate(CoefficientState.eigenstate(1, N), prof, IntegratorConfig(sample_times=times), 1.0)
    for i in (3, 7):
        end = integrate(CoefficientState.eigenstate(1, N), prof,
                        IntegratorConfig(sample_times=[times[i]]), float(times[i]))
        np.testing.assert_allclose(traj.coefficients[i], end.coefficients[-1], atol=1e-8)


def test_theta_matches_quadrature():
    prof = Sinusoidal(1.0, 0.3, 5.0)
    traj = integrate(CoefficientState.eigenstate(1, 8), prof, IntegratorConfig(), 2.0)
    for i in (250, 600, 1000):
        ref, _ = quad(lambda s: 1 / float(prof.length(s)) ** 2, 0, traj.times[i], epsabs=1e-13, limit=200)
        assert traj.thetas[i] == pytest.approx(ref, rel=1e-9)


def test_stationary_wall_exact():
    traj = integrate(CoefficientState.eigenstate(1, 16), ConstantVelocity(1.0, 0.0), IntegratorConfig(), 10.0)
    assert np.all(traj.populations()[:, 0] == 1.0)
    assert richardson_norm_check(traj) == 0.0
    np.testing.assert_allclose(traj.thetas, traj.times, rtol=1e-14)


def test_fig3a_state2_exceeds_080():
    res = max_populations(CoefficientState.eigenstate(1, 64), Sinusoidal(1.0, 0.05, 14.7605),
                          IntegratorConfig(sample_times=np.linspace(0, 10, 1201)), 10.0)
    assert res.maxima[1] > 0.8


def test_norm_drift_within_budget():
    traj = integrate(CoefficientState.eigenstate(1, 32), Sinusoidal(1.0, 0.05, 14.7605),
                     IntegratorConfig(), 10.0)
    assert richardson_norm_check(traj) <= 1e-7


def test_loose_tolerance_drifts_more():
    prof = Sinusoidal(1.0, 0.05, 14.7605)
    init = CoefficientState.eigenstate(1, 16)
    tight = integrate(init, prof, IntegratorConfig(), 5.0)
    loose = integrate(init, prof, IntegratorConfig(rel_tol=1e-3, abs_tol=1e-5), 5.0)
    assert richardson_norm_check(loose) > richardson_norm_check(tight)


def test_step_doubling_consistency():
    prof = Sinusoidal(1.0, 0.05, 14.7605)
    init = CoefficientState.eigenstate(1, 16)
    times = np.linspace(0, 3, 301)
    base = integrate(init, prof, IntegratorConfig(sample_times=times), 3.0)
    h = 3.0 / base.steps_accepted
    fine = integrate(init, prof, IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, max_step=h / 2,
                                                  sample_times=times), 3.0)
    assert np.max(np.abs(base.populations() - fine.populations())) < 10 * 1e-9


def test_time_reversal_returns_to_initial_populations():
    N, T = 32, 2.0
    prof = Sinusoidal(1.0, 0.05, 14.7605)
    init = CoefficientState.superposition([0.8, 0.6j, 0.0, 0.1], N)
    fwd = integrate(init, prof, IntegratorConfig(sample_times=[T]), T)
    back = integrate(fwd.final.time_reversed(), prof.mirrored(T), IntegratorConfig(sample_times=[T]), T)
    np.testing.assert_allclose(back.populations()[-1], np.abs(init.C) ** 2, atol=1e-5)


def test_piecewise_run_matches_sequential_runs():
    N = 16
    seg2 = Exponential(1.0, -0.5)
    p = Piecewise(((0.0, Sinusoidal(1.0, 0.05, 14.7605)), (0.5, seg2)))
    whole = integrate(CoefficientState.eigenstate(1, N), p, IntegratorConfig(sample_times=[1.0]), 1.0)
    first = integrate(CoefficientState.eigenstate(1, N), Sinusoidal(1.0, 0.05, 14.7605),
                      IntegratorConfig(sample_times=[0.5]), 0.5)
    s = first.final
    second = integrate(CoefficientState(0.0, s.C, s.theta), seg2.anchored(float(p.length(0.5))),
                       IntegratorConfig(sample_times=[0.5]), 0.5)
    np.testing.assert_allclose(whole.coefficients[-1], second.coefficients[-1], atol=1e-9)


def test_max_populations_agree_with_trajectory():
    prof = Sinusoidal(1.0, 0.05, 14.7605)
    init = CoefficientState.eigenstate(1, 16)
    times = np.linspace(0, 4, 801)
    traj = integrate(init, prof, IntegratorConfig(sample_times=times), 4.0)
    mp = max_populations(init, prof, IntegratorConfig(sample_times=times), 4.0)
    np.testing.assert_allclose(mp.maxima, traj.populations().max(axis=0), atol=1e-14)
    np.testing.assert_allclose(mp.final.C, traj.final.C, atol=1e-14)
    assert mp.norm_drift == pytest.approx(richardson_norm_check(traj), abs=1e-15)
    assert mp.steps_accepted == traj.steps_accepted


def test_preconditions():
    prof = Sinusoidal(1.0, 0.05, 14.7605)
    with pytest.raises(DomainError):
        integrate(CoefficientState(0.0, [1.0, 0.1]), prof, IntegratorConfig(), 1.0)
    with pytest.raises(NonPositiveLengthError):
        integrate(CoefficientState.eigenstate(1, 4), ConstantVelocity(1.0, -1.0), IntegratorConfig(), 2.0)
    with pytest.raises(DomainError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(DomainError):
        integrate(CoefficientState.eigenstate(1, 4), prof, IntegratorConfig(sample_times=[0.5, 0.2]), 1.0)


@settings(max_examples=15, deadline=None)
@given(v=st.floats(-0.3, 0.3), omega=st.floats(0.5, 60.0), level=st.integers(1, 4))
def test_unitarity_property(v, omega, level):
    traj = integrate(CoefficientState.eigenstate(level, 16), Sinusoidal(1.0, v, omega),
                     IntegratorConfig(), 2.0)
    assert richardson_norm_check(traj) <= 1e-7
    assert np.all(np.diff(traj.thetas) > 0)
