import numpy as np
import pytest

from layerstab.classify import (AdaptedBasisError, ClassificationError, HyperbolicityError, classify_glancing,
                                classify_regularity, coupling_matrix, find_adapted_basis, find_roots,
                                glancing_data)
from layerstab.examples import mhd, toy
from layerstab.system import SystemDefinition

XI = np.array([1 / np.sqrt(2), 0.0])
STATE = mhd.MhdState(1.0, (0.1, 0.2, 1.5), (0.3, 0.4, 0.8))


def _wave_system(A1, A2):
    return SystemDefinition(N=2, Nprime=2, d=2, A0=lambda u: np.eye(2), A=lambda u: [A1, A2],
                            B=lambda u: np.zeros((2, 2, 2, 2)))


def test_toy_double_root_is_mixed():
    sys = toy.toy_system(toy.ToyParams(0.5))
    root = next(r for r in find_roots(sys, np.zeros(2), XI) if r.m == 2)
    br = glancing_data(root)
    assert sorted(round(b.beta, 8) for b in br) == [-1.0, 1.0]
    assert classify_glancing(root, br) == "nonglancing_mixed"
    assert classify_regularity(root).verdict == "geometrically_regular"


def test_toy_coupling_and_adapted_basis():
    sys = toy.toy_system(toy.ToyParams(0.5))
    root = next(r for r in find_roots(sys, np.zeros(2), XI) if r.m == 2)
    data = coupling_matrix(sys, root, glancing_data(root))
    # B(xi) = |xi|^2 B with |xi|^2 = 1/2
    assert np.allclose(np.abs(data.Bsharp), [[0.5, 0.25], [0.25, 0.5]])
    assert not data.decoupled
    _, B2, lo = find_adapted_basis(data)
    assert lo > 0


def test_adapted_basis_failure():
    sys = toy.toy_system(toy.ToyParams(0.5))
    root = next(r for r in find_roots(sys, np.zeros(2), XI) if r.m == 2)
    data = coupling_matrix(sys, root, glancing_data(root))
    data.Bsharp = np.array([[1.0, 3.0], [3.0, 1.0]])
    with pytest.raises(AdaptedBasisError):
        find_adapted_basis(data)


def test_simple_glancing_root():
    # eigenvalues +-|xi| have vanishing normal derivative at xi = (1, 0)
    sys = _wave_system(np.array([[0.0, 1.0], [1.0, 0.0]]), np.diag([1.0, -1.0]))
    roots = find_roots(sys, np.zeros(2), [1.0, 0.0])
    verdicts = {classify_glancing(r, glancing_data(r)) for r in roots}
    assert verdicts == {"glancing"}
    assert all(b.nu == 2 for r in roots for b in glancing_data(r))


def test_non_real_symbol_is_rejected():
    sys = _wave_system(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))
    with pytest.raises(HyperbolicityError):
        find_roots(sys, np.zeros(2), [1.0, 0.0])


def test_zero_xi_is_rejected():
    with pytest.raises(ClassificationError):
        find_roots(toy.toy_system(toy.ToyParams(0.5)), np.zeros(2), [0.0, 0.0])


def test_mhd_multiple_roots():
    sys = mhd.mhd_system(STATE)
    dirs = mhd.manifold_directions(STATE)
    par = [r for r in find_roots(sys, STATE.vector(), dirs["parallel"]) if r.m > 1]
    orth = [r for r in find_roots(sys, STATE.vector(), dirs["orthogonal"]) if r.m > 1]
    assert [r.m for r in par] == [2, 2] and [r.m for r in orth] == [5]
    assert all(classify_regularity(r).verdict == "algebraically_regular" for r in par)
    assert classify_regularity(orth[0]).verdict == "geometrically_regular"
    assert all(classify_glancing(r, glancing_data(r)) == "totally_incoming" for r in par + orth)


def test_generic_coupling_matches_mhd_closed_form():
    st = mhd.MhdState(1.3, (0.1, 0.2, 1.5), (0.3, 0.4, 0.8), nu=0.7, mu=1.9)
    sys = mhd.mhd_system(st)
    xi = mhd.manifold_directions(st)["orthogonal"]
    root = next(r for r in find_roots(sys, st.vector(), xi) if r.m == 5)
    generic = coupling_matrix(sys, root, glancing_data(root)).Bsharp
    closed = mhd.mhd_coupling(st, xi)
    # bases differ; similarity invariants of the 5 x 5 coupling must agree
    assert np.allclose(np.sort_complex(np.linalg.eigvals(generic)),
                       np.sort_complex(np.linalg.eigvals(closed)), atol=1e-8)
