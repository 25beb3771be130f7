from dataclasses import replace

import numpy as np
import pytest

from layerstab.examples import mhd, toy
from layerstab.system import (CharacteristicBoundaryError, SystemError_, boundary_indices, check_block11,
                              check_genuine_coupling, check_parabolicity, check_structure)

STATE = mhd.MhdState(1.0, (0.1, 0.2, 1.5), (0.3, 0.4, 0.8))


def test_toy_passes_all_checks():
    sys = toy.toy_system(toy.ToyParams(0.5))
    for check in (check_structure, check_parabolicity, check_genuine_coupling, check_block11):
        assert check(sys).passed


def test_toy_parabolicity_constant_is_one_minus_a():
    # min eigenvalue of B = [[1, a], [a, 1]] is 1 - a
    assert abs(check_parabolicity(toy.toy_system(toy.ToyParams(0.5))).constant - 0.5) < 1e-8


def test_negative_viscosity_fails_parabolicity():
    sys = toy.toy_system(toy.ToyParams(0.5))
    bad = replace(sys, B=lambda u: -sys.B(u))
    rep = check_parabolicity(bad)
    assert not rep.passed and rep.witness is not None


def test_toy_indices():
    idx = boundary_indices(toy.toy_system(toy.ToyParams(0.3)), np.zeros(2))
    assert (idx.Nplus, idx.N1plus, idx.N2minus, idx.Nb) == (1, 0, 1, 2)


def test_mhd_indices_inflow_and_outflow():
    for u3, nb in ((1.5, 7), (-1.5, 6)):
        st = mhd.with_normal_velocity(STATE, u3)
        idx = boundary_indices(mhd.mhd_system(st), st.vector())
        assert idx.Nb == nb == idx.Nplus + idx.N2minus


def test_characteristic_boundary_is_reported():
    st = mhd.with_normal_velocity(STATE, 0.0)
    with pytest.raises(CharacteristicBoundaryError):
        boundary_indices(mhd.mhd_system(st), st.vector())


def test_shape_errors():
    sys = toy.toy_system(toy.ToyParams(0.5))
    with pytest.raises(SystemError_):
        replace(sys, A=lambda u: [np.eye(2)]).eval_A(np.zeros(2))
    with pytest.raises(SystemError_):
        replace(sys, B=lambda u: np.zeros((2, 2, 3, 3))).eval_B(np.zeros(2))
