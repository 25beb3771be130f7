import numpy as np
import pytest

from layerstab.linalg import (LinalgError, SeparationError, SpectralMarginError, Subspace, eigendecompose,
                              min_eig_hermitian, null_space, principal_angles, spectral_projector,
                              stable_split, subspace_det, sylvester_solve)


def test_stable_split_of_toy_pencil():
    a = 0.5
    M = np.linalg.solve(np.array([[1, a], [a, 1]]), np.diag([1.0, -1.0]))
    Em, Ep, (km, kp) = stable_split(M)
    assert (km, kp) == (1, 1)
    v = Em.basis[:, 0]
    w = M @ v
    assert np.linalg.norm(w - (v.conj() @ w) * v) < 1e-12


def test_stable_split_rejects_imaginary_axis():
    with pytest.raises(SpectralMarginError):
        stable_split(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_eigendecompose_clusters_double_root():
    M = np.diag([2.0, 2.0 + 1e-12, -1.0])
    spec = eigendecompose(M)
    assert sorted(spec.multiplicities()) == [1, 2]


def test_eigendecompose_rejects_nan():
    with pytest.raises(LinalgError):
        eigendecompose(np.array([[np.nan, 0], [0, 1.0]]))


def test_spectral_projector_is_idempotent_and_commutes():
    rng = np.random.default_rng(0)
    T = rng.normal(size=(4, 4))
    M = T @ np.diag([1.0, 2.0, -3.0, 5.0]) @ np.linalg.inv(T)
    P = spectral_projector(M, [1.0, 2.0])
    assert np.linalg.norm(P @ P - P) < 1e-10
    assert np.linalg.norm(P @ M - M @ P) < 1e-9
    assert abs(np.trace(P) - 2) < 1e-10


def test_spectral_projector_needs_separation():
    M = np.array([[1.0, 1.0], [0.0, 1.0 + 1e-12]])
    with pytest.raises(SeparationError):
        spectral_projector(M, lambda x: x.real < 1.0 + 5e-13)


def test_sylvester_solve_residual():
    rng = np.random.default_rng(1)
    A = np.diag([1.0, 2.0]) + 0.1 * rng.normal(size=(2, 2))
    B = np.diag([-1.0, -2.0, -3.0])
    Y = rng.normal(size=(3, 2))
    X = sylvester_solve(A, B, Y)
    assert np.linalg.norm(X @ A - B @ X - Y) < 1e-12


def test_principal_angles_and_subspace_det():
    E = Subspace(np.array([[1.0], [0.0]]))
    t = 0.3
    F = Subspace(np.array([[np.cos(t)], [np.sin(t)]]))
    assert abs(principal_angles(E, F)[0] - t) < 1e-14
    # complementary lines: |det| is the sine of the angle between them
    assert abs(subspace_det(E, F) - np.sin(t)) < 1e-14


def test_null_space_and_min_eig():
    K = null_space(np.array([[1.0, 1.0, 0.0]]))
    assert K.dim == 2
    assert abs(min_eig_hermitian(np.array([[2.0, 1j], [-1j, 2.0]])) - 1.0) < 1e-14
