"""Shared models for the test suite."""

import numpy as np
import pytest

from thermo.alphabet import TransitionFn, build_finite_alphabet
from thermo.potentials import (
    IndicatorPotential,
    PlusMinusPotential,
    TablePotential,
    build_potential_vec,
)
from thermo.pressure import PressureFunction
from thermo.xy import xy_model

GOLDEN_MEAN = [[0, 1], [1, 1]]


@pytest.fixture(scope="session")
def classical_cwp() -> PressureFunction:
    """Three symbols, uniform rho, psi_i = 1[omega_0 = i]."""
    alphabet = build_finite_alphabet([1, 2, 3], [1 / 3] * 3)
    A = TransitionFn.full(3)
    return PressureFunction.from_parts(alphabet, A, build_potential_vec(IndicatorPotential(3), alphabet, A))


@pytest.fixture(scope="session")
def curie_weiss() -> PressureFunction:
    """Symbols +1 and -1 with equal weight, psi = omega_0."""
    alphabet = build_finite_alphabet([1, -1], [0.5, 0.5])
    A = TransitionFn.full(2)
    psi = build_potential_vec(PlusMinusPotential([1.0, -1.0]), alphabet, A, kind="plusMinus")
    return PressureFunction.from_parts(alphabet, A, psi)


@pytest.fixture(scope="session")
def golden_mean() -> PressureFunction:
    """Golden-mean shift with psi = 1[omega_0 = 1] and rho-weights."""
    alphabet = build_finite_alphabet([0, 1], [0.5, 0.5])
    A = TransitionFn(np.array(GOLDEN_MEAN))
    psi = build_potential_vec(TablePotential([[0.0], [1.0]]), alphabet, A)
    return PressureFunction.from_parts(alphabet, A, psi)


@pytest.fixture(scope="session")
def depth_two() -> PressureFunction:
    """Depth-2 potential on two symbols, psi(a, b) = 1[a == b] - 1/2."""
    alphabet = build_finite_alphabet([0, 1], [0.5, 0.5])
    A = TransitionFn.full(2)
    table = [[[0.5], [-0.5]], [[-0.5], [0.5]]]
    return PressureFunction.from_parts(alphabet, A, build_potential_vec(TablePotential(table), alphabet, A))


@pytest.fixture(scope="session")
def xy() -> PressureFunction:
    return xy_model(256)


@pytest.fixture(scope="session")
def two_state_cwp() -> PressureFunction:
    """Two symbols, uniform rho, psi_i = 1[omega_0 = i]."""
    alphabet = build_finite_alphabet([1, 2], [0.5, 0.5])
    A = TransitionFn.full(2)
    return PressureFunction.from_parts(alphabet, A, build_potential_vec(IndicatorPotential(2), alphabet, A))
