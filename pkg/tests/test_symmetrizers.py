import numpy as np
import pytest

from layerstab.classify import find_roots
from layerstab.examples import mhd, toy
from layerstab.symmetrizers import (BlockFamily, DflatError, SymmetrizerError, check_generalized_block_structure,
                                    elliptic_symmetrizer, find_Dflat, hyperbolic_block, jordan_model,
                                    kreiss_block_symmetrizer, limit_splitting, lower_bound_constant,
                                    nonglancing_symmetrizer, parabolic_block, regular_block_basis,
                                    verify_k_family)
from layerstab.classify import glancing_data

XI = np.array([1 / np.sqrt(2), 0.0])
STATE = mhd.MhdState(1.0, (0.1, 0.2, -1.5), (0.3, 0.4, 0.8))


def _toy_block(a):
    sys = toy.toy_system(toy.ToyParams(a))
    root = next(r for r in find_roots(sys, np.zeros(2), XI) if r.m == 2)
    block = hyperbolic_block(sys, np.zeros(2), root)
    return block, regular_block_basis(block, glancing_data(root))


def test_elliptic_symmetrizer_both_half_planes():
    for M in (np.array([[1.0, 5.0], [0.0, 2.0]]), -np.array([[1.0, 5.0], [0.0, 2.0]])):
        ver = verify_k_family(elliptic_symmetrizer(M))
        assert ver.ok, ver.reason


def test_elliptic_symmetrizer_rejects_mixed_spectrum():
    with pytest.raises(SymmetrizerError):
        elliptic_symmetrizer(np.diag([1.0, -1.0]))


def test_parabolic_blocks_are_elliptic():
    sys = toy.toy_system(toy.ToyParams(0.8))
    for sign in (1, -1):
        ver = verify_k_family(elliptic_symmetrizer(parabolic_block(sys, np.zeros(2), sign)))
        assert ver.ok, ver.reason


def test_nonglancing_closed_forms_match_finite_differences():
    sys, U = mhd.mhd_system(STATE), STATE.vector()
    root = next(r for r in find_roots(sys, U, mhd.manifold_directions(STATE)["orthogonal"]) if r.m == 5)
    cand = nonglancing_symmetrizer(sys, U, root)
    assert cand.info["sign"] == "positive"
    assert np.linalg.norm(cand.info["R1"] - cand.info["R1_closed"]) < 1e-8
    assert np.linalg.norm(cand.info["R2"] - cand.info["R2_closed"]) < 1e-5


def test_nonglancing_needs_totally_nonglancing_root():
    sys = toy.toy_system(toy.ToyParams(0.5, s=1.0))
    root = next(r for r in find_roots(sys, np.zeros(2), XI) if r.m == 2)
    with pytest.raises(SymmetrizerError):
        nonglancing_symmetrizer(sys, np.zeros(2), root)


def test_toy_block_structure_and_kreiss_symmetrizer():
    block, Vk = _toy_block(0.0)
    ok, data = check_generalized_block_structure(block, [1, 1], Vk=Vk)
    assert ok
    order = np.argsort(data.q_flat)
    assert np.allclose(data.q_flat[order], [-1.0, 1.0], atol=1e-6)
    assert np.allclose(np.sort(np.diag(data.B_flat).real), [-0.5, 0.5], atol=1e-6)
    ver = verify_k_family(kreiss_block_symmetrizer(data))
    ms = [r["m"] for r in ver.table]
    assert ver.ok and np.allclose(ms, [1, 4, 16, 64], rtol=1e-4)


def test_coupled_toy_fails_decoupling_pattern():
    block, Vk = _toy_block(0.5)
    ok, data = check_generalized_block_structure(block, [1, 1], Vk=Vk)
    assert not ok and not data.pattern_ok
    with pytest.raises(SymmetrizerError):
        kreiss_block_symmetrizer(data)


def test_jordan_two_block_kreiss_symmetrizer():
    fam = BlockFamily(lambda cz, rho: jordan_model(0.0, [2]) + np.array([[0, 0], [cz[2] + rho, 0]]),
                      (0.0, np.zeros(1), 0.0), 0.0)
    ok, data = check_generalized_block_structure(fam, [2])
    assert ok and data.J_I == [0]
    assert limit_splitting(fam)[1] is None
    ver = verify_k_family(kreiss_block_symmetrizer(data))
    ms = [r["m"] for r in ver.table]
    assert ver.ok and all(b > a for a, b in zip(ms, ms[1:])) and ms[-1] > 60


def test_opposite_corner_signs_have_no_certificate():
    fam = BlockFamily(lambda cz, rho: jordan_model(0.0, [2]) + np.array([[0, 0], [cz[2] - rho, 0]]),
                      (0.0, np.zeros(1), 0.0), 0.0)
    ok, data = check_generalized_block_structure(fam, [2])
    assert not ok and data.D_flat is None


def test_find_Dflat_feasible_and_infeasible():
    D = find_Dflat(np.diag([0.5, -0.5]), np.array([1.0, -1.0]), [1], [0])
    assert np.all(np.diag(D) * np.array([1.0, -1.0]) > 0)
    with pytest.raises(DflatError):
        find_Dflat(np.eye(2), np.array([1.0, -1.0]), [1], [0])


def test_lower_bound_constant():
    Pm = np.diag([1.0, 0.0])
    Pp = np.diag([0.0, 1.0])
    m = lower_bound_constant(np.diag([-1.0, 7.0]), Pm, Pp)
    assert abs(m - 7.0) < 1e-6
    assert lower_bound_constant(np.diag([-2.0, 7.0]), Pm, Pp) == -np.inf


def test_candidate_rejects_non_hermitian():
    cand = elliptic_symmetrizer(np.eye(2))
    cand.Sigma = lambda cz, rho, k: np.array([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(SymmetrizerError):
        cand((0.0, np.zeros(0), 0.0), 0.0, 1.0)
