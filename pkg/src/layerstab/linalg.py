"""Small dense complex linear algebra: spectra, invariant subspaces, determinants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla

CLUSTER_TOL = 1e-8
SEP_TOL = 1e-6
MARGIN_TOL = 1e-10


class LinalgError(ValueError):
    """Raised when a spectral precondition fails."""


class SpectralMarginError(LinalgError):
    def __init__(self, eigenvalue: complex, margin: float):
        self.eigenvalue = complex(eigenvalue)
        self.margin = margin
        super().__init__(
            f"spectral margin violated: eigenvalue {self.eigenvalue:.3e} "
            f"within {margin:.1e} of the imaginary axis"
        )


class SeparationError(LinalgError):
    pass


def as_matrix(M) -> np.ndarray:
    A = np.atleast_2d(np.asarray(M, dtype=complex))
    if A.ndim != 2:
        raise LinalgError("expected a matrix")
    if not np.all(np.isfinite(A)):
        raise LinalgError("matrix has non-finite entries")
    return A


def _scale(M: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(M, 2))) if M.size else 1.0


def orthonormalize(X, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis for the column span of X (rank-revealing)."""
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] == 0:
        return np.zeros((X.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((X.shape[0], 0), dtype=complex)
    r = int(np.sum(s > tol * s[0]))
    return U[:, :r]


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of C^n held as an orthonormal basis (columns)."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=complex)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[1]:
            Q, R = np.linalg.qr(B)
            # keep orientation of the input columns; fix phases so R has positive diagonal
            d = np.diag(R)
            ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
            B = Q * ph
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, X, tol: float = 1e-12) -> "Subspace":
        return cls(orthonormalize(X, tol))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0), dtype=complex))

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])

    @property
    def ambient_dim(self) -> int:
        return int(self.basis.shape[0])

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def complement(self) -> "Subspace":
        n = self.ambient_dim
        if self.dim == 0:
            return Subspace(np.eye(n, dtype=complex))
        Q, _ = np.linalg.qr(self.basis, mode="complete")
        return Subspace(Q[:, self.dim:])

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=complex).reshape(-1)
        r = v - self.basis @ (self.basis.conj().T @ v)
        return bool(np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(v)))


def principal_angles(E: Subspace, F: Subspace) -> np.ndarray:
    """Principal angles (radians, ascending) between two subspaces."""
    if E.ambient_dim != F.ambient_dim:
        raise LinalgError("ambient dimension mismatch")
    if E.dim == 0 or F.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(E.basis.conj().T @ F.basis, compute_uv=False)
    return np.sort(np.arccos(np.clip(s, -1.0, 1.0)))


def subspace_gap(E: Subspace, F: Subspace) -> float:
    """Largest principal angle; pi/2 when dimensions differ."""
    if E.dim != F.dim:
        return float(np.pi / 2)
    a = principal_angles(E, F)
    return float(a.max()) if a.size else 0.0


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    cluster_ids: np.ndarray
    right_vectors: Optional[np.ndarray] = None
    left_vectors: Optional[np.ndarray] = None
    clusters: list = field(default_factory=list)

    def cluster_centers(self) -> np.ndarray:
        return np.array([self.eigenvalues[c].mean() for c in self.clusters])

    def multiplicities(self) -> list[int]:
        return [len(c) for c in self.clusters]


def cluster_values(values: Sequence[complex], tol: float) -> list[list[int]]:
    """Single-linkage grouping of values closer than tol."""
    vals = np.asarray(values, dtype=complex)
    n = vals.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = sorted(groups.values(), key=lambda g: (vals[g].real.mean(), vals[g].imag.mean()))
    return out


def eigendecompose(M, cluster_tol: float = CLUSTER_TOL) -> Spectrum:
    """Eigenvalues with left/right vectors (biorthonormal) and coincidence clusters.

    cluster_tol is relative to max(1, ||M||).
    """
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise LinalgError("eigendecompose needs a square matrix")
    if cluster_tol <= 0:
        raise LinalgError("cluster_tol must be positive")
    try:
        w, vl, vr = sla.eig(A, left=True, right=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise LinalgError(f"eigensolver did not converge: {exc}") from exc
    groups = cluster_values(w, cluster_tol * _scale(A))
    ids = np.empty(w.size, dtype=int)
    for k, g in enumerate(groups):
        ids[g] = k
    # scale left vectors so that l_i . r_i = 1 where the pairing is nondegenerate
    L = vl.conj().T
    d = np.einsum("ij,ji->i", L, vr)
    ok = np.abs(d) > 1e-14
    L[ok] = L[ok] / d[ok, None]
    return Spectrum(eigenvalues=w, cluster_ids=ids, right_vectors=vr, left_vectors=L, clusters=groups)


def _schur_select(A: np.ndarray, select: Callable[[complex], bool]):
    T, Z, sdim = sla.schur(A, output="complex", sort=lambda x: bool(select(x)))
    return T, Z, int(sdim)


def stable_split(M, margin_tol: float = MARGIN_TOL):
    """Stable and unstable invariant subspaces of M via ordered Schur forms.

    Returns (E_minus, E_plus, (dim_minus, dim_plus)).
    """
    A = as_matrix(M)
    n = A.shape[0]
    if A.shape[1] != n:
        raise LinalgError("stable_split needs a square matrix")
    ev = np.linalg.eigvals(A) if n else np.zeros(0)
    margin = margin_tol * _scale(A)
    if ev.size and np.min(np.abs(ev.real)) <= margin:
        raise SpectralMarginError(ev[np.argmin(np.abs(ev.real))], margin)
    _, Zm, km = _schur_select(A, lambda x: x.real < 0)
    _, Zp, kp = _schur_select(A, lambda x: x.real > 0)
    if km + kp != n:  # pragma: no cover - guarded by the margin test
        raise LinalgError("inconsistent stable/unstable dimensions")
    Em = Subspace(Zm[:, :km])
    Ep = Subspace(Zp[:, :kp])
    return Em, Ep, (km, kp)


def stable_subspace(M, margin_tol: float = MARGIN_TOL) -> Subspace:
    return stable_split(M, margin_tol)[0]


def spectral_margin(M) -> float:
    """Distance of the spectrum to the imaginary axis, relative to max(1, ||M||)."""
    A = as_matrix(M)
    if not A.size:
        return np.inf
    return float(np.min(np.abs(np.linalg.eigvals(A).real)) / _scale(A))


def subspace_det(E: Subspace, F: Subspace) -> float:
    """|det [E F]| for orthonormal bases; zero when dimensions do not add up."""
    if E.ambient_dim != F.ambient_dim:
        raise LinalgError("ambient dimension mismatch")
    n = E.ambient_dim
    if E.dim + F.dim != n:
        return 0.0
    if n == 0:
        return 1.0
    return float(abs(np.linalg.det(np.hstack([E.basis, F.basis]))))


def null_space(M, rtol: float = 1e-10) -> Subspace:
    A = as_matrix(M)
    if A.shape[0] == 0:
        return Subspace(np.eye(A.shape[1], dtype=complex))
    return Subspace(sla.null_space(A, rcond=rtol))


def _min_separation(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 or b.size == 0:
        return np.inf
    return float(np.min(np.abs(a[:, None] - b[None, :])))


def sylvester_solve(A, B, Y, sep_tol: float = SEP_TOL) -> np.ndarray:
    """Solve X A - B X = Y (A is p x p, B is q x q, Y and X are q x p)."""
    A = as_matrix(A)
    B = as_matrix(B)
    Y = np.asarray(Y, dtype=complex).reshape(B.shape[0], A.shape[0])
    sep = _min_separation(np.linalg.eigvals(A), np.linalg.eigvals(B))
    if sep <= sep_tol * max(_scale(A), _scale(B)):
        raise SeparationError(f"spectral separation violated (min distance {sep:.2e})")
    # scipy solves a X + X b = q
    return sla.solve_sylvester(-B, A, Y)


Selector = Union[Callable[[complex], bool], Iterable[complex], complex]


def _make_selector(M: np.ndarray, cluster: Selector, cluster_tol: float) -> Callable[[complex], bool]:
    if callable(cluster):
        return cluster
    targets = np.atleast_1d(np.asarray(cluster, dtype=complex))
    ev = np.linalg.eigvals(M)
    tol = max(cluster_tol * _scale(M), 1e-300)
    chosen = []
    for t in targets:
        near = ev[np.abs(ev - t) <= max(tol, 1e-7 * _scale(M))]
        chosen.extend(near.tolist() if near.size else [ev[np.argmin(np.abs(ev - t))]])
    chosen = np.unique(np.asarray(chosen))
    radius = max(tol, 1e-7 * _scale(M))

    def sel(x):
        return bool(np.min(np.abs(chosen - x)) <= radius)

    return sel


def spectral_projector(M, cluster: Selector, sep_tol: float = SEP_TOL,
                       cluster_tol: float = CLUSTER_TOL) -> np.ndarray:
    """Riesz projector onto the invariant subspace of the selected eigenvalues.

    `cluster` is a predicate on eigenvalues or the eigenvalue(s) to select.
    """
    A = as_matrix(M)
    n = A.shape[0]
    sel = _make_selector(A, cluster, cluster_tol)
    T, Z, k = _schur_select(A, sel)
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    if k == n:
        return np.eye(n, dtype=complex)
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    sep = _min_separation(np.diag(T11), np.diag(T22))
    if sep <= sep_tol * _scale(A):
        raise SeparationError(f"cluster not separated from the rest of the spectrum ({sep:.2e})")
    X = sla.solve_sylvester(T11, -T22, -T12)
    P = np.zeros((n, n), dtype=complex)
    P[:k, :k] = np.eye(k)
    P[:k, k:] = -X
    return Z @ P @ Z.conj().T


def invariant_basis(M, cluster: Selector, cluster_tol: float = CLUSTER_TOL) -> np.ndarray:
    """Orthonormal basis of the invariant subspace of the selected eigenvalues."""
    A = as_matrix(M)
    sel = _make_selector(A, cluster, cluster_tol)
    _, Z, k = _schur_select(A, sel)
    return Z[:, :k]


def hermitian_part(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    return 0.5 * (M + M.conj().T)


def min_eig_hermitian(M) -> float:
    H = hermitian_part(M)
    if not H.size:
        return np.inf
    return float(np.linalg.eigvalsh(H)[0])
