from dataclasses import replace

import numpy as np
import pytest

from layerstab.examples import mhd, toy
from layerstab.profiles import (ProfileError, check_transversality, compute_P0, constant_profile,
                                manifold_boundary_data, profile_Vbar, solve_layer_profile, stable_basis_real)
from layerstab.system import BoundaryConditions


def _toy(a=0.5, c_bar=0.5):
    p = toy.ToyParams(a, c_bar=c_bar)
    return toy.toy_system(p), toy.toy_boundary(p)


def test_toy_profile_matches_exponential():
    sys, bc = _toy()
    g = manifold_boundary_data(sys, bc, np.zeros(2), [0.1])
    prof = solve_layer_profile(sys, replace(bc, g=g), np.zeros(2))
    # coordinates live on dz w; profile_Vbar maps them to w - u_bar
    R = stable_basis_real(compute_P0(sys, np.zeros(2)))
    hvec = (profile_Vbar(sys, np.zeros(2)) @ R @ prof.coords).real
    for z in (0.0, 1.0, 3.0):
        exact = toy.toy_profile_exact(0.5, np.zeros(2), hvec, z)
        assert np.linalg.norm(prof.state(z)[0] - exact) < 1e-7
    assert abs(prof.coords[0] - 0.1) < 1e-8
    assert prof.fit_residual < 1e-6


def test_profile_tail_is_continuous():
    sys, bc = _toy()
    g = manifold_boundary_data(sys, bc, np.zeros(2), [0.2])
    prof = solve_layer_profile(sys, replace(bc, g=g), np.zeros(2))
    inside = prof.state(prof.Zmax - 1e-9)[0]
    outside = prof.state(prof.Zmax + 1e-9)[0]
    assert np.linalg.norm(inside - outside) < 1e-9


def test_inconsistent_data_has_no_profile():
    sys, bc = _toy()
    # data off the one-dimensional image of the stable manifold
    with pytest.raises(ProfileError):
        solve_layer_profile(sys, replace(bc, g=np.array([0.1, -0.3])), np.zeros(2))


def test_zero_data_gives_constant_profile():
    sys, bc = _toy()
    prof = solve_layer_profile(sys, bc, np.zeros(2))
    assert prof.constant


def test_transversality_of_toy_and_failure_case():
    sys, bc = _toy()
    rep = check_transversality(sys, constant_profile(sys, np.zeros(2)), bc)
    assert rep.transversal and rep.dim_S0 == 1 and rep.Gamma_red.shape == (1, 2)
    bad = BoundaryConditions(Gamma1=np.zeros((0, 0)), Gamma2=np.zeros((0, 2)), Kd=np.zeros((2, 2)),
                             K0=np.array([[1.0, 0.0], [2.0, 0.0]]))
    rep = check_transversality(sys, constant_profile(sys, np.zeros(2)), bad)
    assert not rep.cond_ii_holds and not rep.transversal


def test_mhd_profile_recovers_manifold_coordinates():
    st = mhd.MhdState(1.0, (0.1, 0.2, -0.5), (0.3, 0.4, 0.8))
    sys, bc, u = mhd.mhd_system(st), mhd.mhd_boundary(st), st.vector()
    coords = np.array([0.01, 0.01, 0.01])
    g = manifold_boundary_data(sys, bc, u, coords)
    prof = solve_layer_profile(sys, replace(bc, g=g), u, initial_guess=0.9 * coords)
    assert np.allclose(prof.coords, coords, atol=1e-6)
    assert np.linalg.norm(prof.state(80.0)[0] - u) < 1e-10
    assert check_transversality(sys, prof, replace(bc, g=g)).transversal
