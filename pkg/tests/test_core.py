import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from movingwall.core import (NATURAL_UNITS, BoxSpec, DomainError, EigenData, PhysicalConstants,
                             eigenfunction, energy, momentum_matrix, momentum_matrix_element,
                             position_matrix, position_matrix_element)

from conftest import gl_quadrature


def test_ground_state_energy_unit_box():
    assert energy(1, 1.0) == pytest.approx(math.pi**2 / 2, rel=1e-15)


def test_energy_scaling_with_level_and_length():
    assert energy(2, 1.0) == pytest.approx(4 * energy(1, 1.0), rel=1e-15)
    assert energy(1, 2.0) == pytest.approx(energy(1, 1.0) / 4, rel=1e-15)
    assert energy(1, 0.5) == pytest.approx(2 * math.pi**2, rel=1e-15)


def test_energy_uses_constants():
    c = PhysicalConstants(hbar=2.0, mass=3.0)
    assert energy(1, 1.0, c) == pytest.approx(4 * math.pi**2 / 6, rel=1e-15)


@pytest.mark.parametrize("n,L", [(0, 1.0), (1, 0.0), (1, -1.0), (-2, 1.0)])
def test_energy_domain_errors(n, L):
    with pytest.raises(DomainError):
        energy(n, L)


def test_constants_validated():
    with pytest.raises(DomainError):
        PhysicalConstants(hbar=0.0)
    with pytest.raises(DomainError):
        PhysicalConstants(mass=-1.0)


def test_box_spec_validation():
    assert BoxSpec().n_basis == 64
    with pytest.raises(DomainError):
        BoxSpec(n_basis=1)
    with pytest.raises(DomainError):
        BoxSpec(L0=0.0)


def test_level_constants_and_energies():
    ed = EigenData(8, NATURAL_UNITS)
    n = np.arange(1, 9)
    np.testing.assert_allclose(ed.level_constants, math.pi**2 * n**2 / 2, rtol=1e-15)
    np.testing.assert_allclose(ed.energies(2.0), math.pi**2 * n**2 / 8, rtol=1e-15)
    with pytest.raises(ValueError):
        ed.level_constants[0] = 1.0


def test_eigenfunction_vanishes_at_walls():
    for n in (1, 2, 7):
        assert eigenfunction(n, 1.3, 0.0) == 0.0
        assert eigenfunction(n, 1.3, 1.3) == 0.0


def test_eigenfunction_value():
    assert eigenfunction(1, 1.0, 0.5) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_eigenfunction_outside_box_raises():
    with pytest.raises(DomainError):
        eigenfunction(1, 1.0, 1.5)
    with pytest.raises(DomainError):
        eigenfunction(1, 1.0, np.array([0.5, -0.1]))


@pytest.mark.parametrize("L", [0.5, 1.0, 2.7])
def test_eigenfunctions_orthonormal(L):
    x, w = gl_quadrature(0.0, L)
    U = np.array([eigenfunction(n, L, x) for n in range(1, 11)])
    np.testing.assert_allclose((U * w) @ U.T, np.eye(10), atol=1e-13)


@pytest.mark.parametrize("L", [1.0, 1.7])
def test_position_elements_match_quadrature(L):
    x, w = gl_quadrature(0.0, L)
    for k in range(1, 7):
        for n in range(1, 7):
            ref = np.sum(w * eigenfunction(k, L, x) * x * eigenfunction(n, L, x))
            assert position_matrix_element(k, n, L) == pytest.approx(ref, abs=1e-13)


def test_position_element_examples():
    assert position_matrix_element(1, 1, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert position_matrix_element(1, 3, 1.0) == 0.0
    assert position_matrix_element(1, 2, 1.0) == pytest.approx(-16 / (9 * math.pi**2), rel=1e-14)


@pytest.mark.parametrize("L", [1.0, 0.6])
def test_momentum_elements_match_quadrature(L):
    x, w = gl_quadrature(0.0, L)
    for k in range(1, 7):
        for n in range(1, 7):
            dn = math.sqrt(2 / L) * (n * math.pi / L) * np.cos(n * math.pi * x / L)
            ref = -1j * np.sum(w * eigenfunction(k, L, x) * dn)
            assert momentum_matrix_element(k, n, L) == pytest.approx(ref, abs=1e-12)


def test_momentum_matrix_hermitian_and_diagonal_zero():
    P = momentum_matrix(12, 1.3)
    np.testing.assert_allclose(P, P.conj().T, atol=1e-15)
    assert np.all(np.diag(P) == 0)


def test_position_matrix_symmetric_and_scaled():
    X1 = position_matrix(10, 1.0)
    np.testing.assert_allclose(X1, X1.T, atol=0)
    np.testing.assert_allclose(position_matrix(10, 2.5), 2.5 * X1, rtol=1e-15)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 40), n=st.integers(1, 40), L=st.floats(0.1, 10.0))
def test_position_element_symmetry_and_parity(k, n, L):
    a = position_matrix_element(k, n, L)
    assert a == pytest.approx(position_matrix_element(n, k, L), rel=1e-15, abs=0)
    if k != n and (k + n) % 2 == 0:
        assert a == 0.0
