import numpy as np
import pytest

from layerstab.examples import mhd, toy
from layerstab.system import CharacteristicBoundaryError

STATE = mhd.MhdState(1.0, (0.1, 0.2, 1.5), (0.3, 0.4, 0.8))


def test_toy_params_validation():
    with pytest.raises(ValueError):
        toy.ToyParams(1.0)
    assert toy.ToyParams.from_viscosities(1.0, 3.0).a == 0.5


def test_toy_boundary_reduces_to_c_bar():
    a, c_bar = 0.5, 0.7
    bc = toy.toy_boundary(toy.ToyParams(a, c_bar=c_bar))
    h, _ = toy.stable_eigvec(a)
    A, B = toy.toy_matrices(a)
    img = bc.K0 @ h + bc.Kd @ np.linalg.solve(B, A) @ h
    assert np.allclose(img, [c_bar, 1.0])


def test_b_bar_is_root_of_quadratic():
    a = 0.8
    b = toy.b_bar(a)
    # a b^2 - 4 b + a = 0
    assert abs(a * b * b - 4 * b + a) < 1e-12
    assert abs(b - (2 + np.sqrt(3.36)) / 0.8) < 1e-12


def test_window_formula():
    lo, hi = toy.window_formula(0.6)
    assert abs(lo - 1 / 9) < 1e-14 and abs(hi - 9) < 1e-12
    w = toy.toy_symmetrizer_window(0.6)
    assert toy.re_SB_min(0.6, 1.0) > 0 and toy.re_SB_min(0.6, 10.0) < 0
    assert abs(w["s_max"] - 9) < 1e-9
    with pytest.raises(ValueError):
        toy.toy_symmetrizer_window(0.0)


def test_eminus_limits_references():
    lim = toy.toy_Eminus_limits(toy.ToyParams(0.5))
    assert lim["gamma_path_error"] < 1e-6 and lim["rho_path_error"] < 1e-3


def test_wave_speeds_and_ordering():
    xi = np.array([0.3, -0.2, 0.9])
    ws = mhd.mhd_wave_speeds(STATE, xi)
    lam = ws["eigenvalues"]
    assert ws["mismatch"] < 1e-10
    order = [lam[k] for k in ("-f", "-s", "0", "+s", "+f")]
    assert all(b >= a - 1e-12 for a, b in zip(order, order[1:]))
    # Alfven speeds are u.xi +- v.xi, sandwiched between slow and fast
    alf = abs(lam["+2"] - lam["0"])
    assert abs(alf - abs(STATE.v @ xi)) < 1e-12
    assert lam["+s"] - lam["0"] <= alf + 1e-12 <= lam["+f"] - lam["0"] + 2e-12


def test_regular_basis_is_dual():
    xi = mhd.manifold_directions(STATE)["orthogonal"]
    E, L = mhd.mhd_regular_basis(STATE, xi)
    assert np.allclose(L @ E, np.eye(5), atol=1e-12)
    M = mhd.mhd_symbol(STATE, xi)
    assert np.linalg.norm(M @ E - (STATE.uvec @ xi) * E) < 1e-12


def test_glancing_report_and_characteristic_guard():
    rep = mhd.mhd_glancing_report(STATE)
    assert rep["parallel"]["totally_nonglancing"] and rep["orthogonal"]["totally_nonglancing"]
    with pytest.raises(CharacteristicBoundaryError):
        mhd.mhd_glancing_report(mhd.with_normal_velocity(STATE, STATE.v[2]))


def test_rankine_hugoniot_trivial_and_weak_shocks():
    assert np.abs(mhd.rh_residual(STATE, STATE, 0.3)).max() < 1e-14
    left = mhd.MhdState(1.0, (0.0, 0.0, -2.5), (0.3, 0.0, 0.5))
    right, sigma = mhd.weak_shock(left, "fast", eps=-0.05)
    rep = mhd.lax_shock_check(left, right, sigma, "fast")
    assert rep["is_shock"] and rep["lax"] and rep["hypotheses_satisfied"]
    right, sigma = mhd.weak_shock(left, "fast", eps=0.05)
    assert not mhd.lax_shock_check(left, right, sigma, "fast")["lax"]


def test_slow_shock_decouples_only_when_nu_equals_rho_mu():
    left = mhd.MhdState(1.0, (0.0, 0.0, -0.3), (0.6, 0.0, 0.9), nu=1.0, mu=1.0)
    right, sigma = mhd.weak_shock(left, "slow", eps=0.05)
    rep = mhd.lax_shock_check(left, right, sigma, "slow")
    assert rep["lax"] and abs(rep["B22_coupling"]["left"]) < 1e-12
    assert not rep["decoupling_fails"]
