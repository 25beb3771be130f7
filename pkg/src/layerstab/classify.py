"""Characteristic roots: multiplicity, regularity, glancing type and viscous coupling B#."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import LinalgError, cluster_values, spectral_projector, hermitian_part
from .system import SystemDefinition, sphere_directions

ROOT_CLUSTER_TOL = 1e-7
REAL_TOL = 1e-9
# significance thresholds for the Taylor coefficients of orders 1..4
COEF_TOL = (1e-8, 1e-6, 1e-4, 1e-3)
DECOUPLE_TOL = 1e-10


class HyperbolicityError(LinalgError):
    pass


class ClassificationError(LinalgError):
    pass


@dataclass
class CharacteristicRoot:
    sys: SystemDefinition
    p: np.ndarray
    tau_bar: float
    xi_bar: np.ndarray
    m: int

    @property
    def lam(self) -> float:
        return -self.tau_bar


@dataclass
class ModeBranch:
    lam0: float
    e: np.ndarray
    ell: Optional[np.ndarray]
    nu: int
    beta: float
    mode_type: str
    coefficients: tuple = ()

    @property
    def incoming(self) -> bool:
        return self.mode_type == "I"


@dataclass
class CouplingData:
    Bsharp: np.ndarray
    J_I: list
    J_O: list
    decoupled: bool
    E: np.ndarray
    L: np.ndarray
    betas: np.ndarray
    nus: list
    adapted_basis: Optional[np.ndarray] = None


def find_roots(sys: SystemDefinition, p, xi, cluster_tol: float = ROOT_CLUSTER_TOL) -> list:
    """Real eigenvalues of A(p, xi) grouped with multiplicities; tau_bar = -lambda."""
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        raise ClassificationError("xi must be nonzero")
    M = sys.symbol_A(p, xi)
    ev = np.linalg.eigvals(M)
    scale = max(1.0, np.linalg.norm(M, 2))
    groups = cluster_values(ev, cluster_tol * scale)
    roots = []
    for g in groups:
        c = ev[g].mean()
        if abs(c.imag) >= REAL_TOL * (1 + abs(c)) * max(1.0, scale):
            raise HyperbolicityError(f"non-real eigenvalue {c} at xi = {xi}")
        roots.append(CharacteristicRoot(sys, np.asarray(p, dtype=float), -float(c.real), xi.copy(), len(g)))
    return roots


def _nearest(M: np.ndarray, lam: float, m: int):
    w, V = np.linalg.eig(M)
    idx = np.argsort(np.abs(w - lam))[:m]
    V = V[:, idx]
    V = V / np.linalg.norm(V, axis=0)
    return w[idx], V


def _overlap(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """|<u_i, w_j>| for unit columns."""
    return np.abs(U.conj().T @ W)


def _branch_samples(root: CharacteristicRoot, h: Optional[float] = None):
    """Eigenpairs of the cluster along the normal direction at t in {+-h, +-2h, +-3h}."""
    sys, m = root.sys, root.m
    d = sys.d
    if h is None:
        h = 1e-3 * (1 + np.linalg.norm(root.xi_bar))
    ts = [h, -h, 2 * h, -2 * h, 3 * h, -3 * h]
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    samples = {}
    for t in ts:
        samples[t] = _nearest(sys.symbol_A(root.p, root.xi_bar + t * e_d), root.lam, m)
    ref_w, ref_V = samples[h]
    order_ref = np.argsort(ref_w.real)
    ref_w, ref_V = ref_w[order_ref], ref_V[:, order_ref]
    samples[h] = (ref_w, ref_V)
    fallback = False
    for t in ts[1:]:
        w, V = samples[t]
        O = _overlap(ref_V, V)
        r, c = linear_sum_assignment(-O)
        perm = np.empty(m, dtype=int)
        perm[r] = c
        if O[r, c].min() < 0.8:
            fallback = True
        samples[t] = (w[perm], V[:, perm])
    if fallback:
        for t in ts:
            w, V = samples[t]
            o = np.argsort(w.real) if t > 0 else np.argsort(-w.real)
            samples[t] = (w[o], V[:, o])
    return h, samples, fallback


def _taylor(f0, fp, fm, fp2, fm2, h):
    d1 = (8 * (fp - fm) - (fp2 - fm2)) / (12 * h)
    d2 = (-fp2 + 16 * fp - 30 * f0 + 16 * fm - fm2) / (12 * h * h)
    d3 = (fp2 - 2 * fp + 2 * fm - fm2) / (2 * h ** 3)
    d4 = (fp2 - 4 * fp + 6 * f0 - 4 * fm + fm2) / h ** 4
    return d1, d2, d3, d4


def glancing_data(root: CharacteristicRoot, h: Optional[float] = None, coef_tol=COEF_TOL) -> list:
    """Vanishing order nu, leading coefficient beta and type (I/O) of every branch."""
    h, samples, _ = _branch_samples(root, h)
    sys = root.sys
    scale = max(1.0, np.linalg.norm(np.linalg.solve(sys.eval_A0(root.p), sys.eval_A(root.p)[-1]), 2))
    M0 = sys.symbol_A(root.p, root.xi_bar)
    cl = lambda x: abs(x - root.lam) <= 1e-6 * max(1.0, np.linalg.norm(M0, 2))
    try:
        Pi = spectral_projector(M0, cl)
    except LinalgError:
        Pi = None
    out = []
    for j in range(root.m):
        f = {t: samples[t][0][j].real for t in samples}
        coefs = _taylor(root.lam, f[h], f[-h], f[2 * h], f[-2 * h], h)
        nu = None
        for k, c in enumerate(coefs):
            if abs(c) > coef_tol[k] * scale:
                nu = k + 1
                break
        if nu is None:
            raise ClassificationError("Taylor fit degenerate beyond order 4")
        from math import factorial
        beta = float(coefs[nu - 1] / factorial(nu))
        mtype = "I" if (nu % 2 == 0 or beta > 0) else "O"
        # eigenvector limit by Richardson extrapolation in a fixed gauge
        ref = samples[h][1][:, j]
        vecs = {}
        for t in (h, -h, 2 * h, -2 * h):
            v = samples[t][1][:, j]
            vecs[t] = v / (ref.conj() @ v)
        e = (4 * (vecs[h] + vecs[-h]) / 2 - (vecs[2 * h] + vecs[-2 * h]) / 2) / 3
        if Pi is not None:
            e = Pi @ e
        e = e / np.linalg.norm(e)
        out.append(ModeBranch(lam0=root.lam, e=e, ell=None, nu=nu, beta=beta, mode_type=mtype,
                              coefficients=tuple(float(c) for c in coefs)))
    E = np.column_stack([b.e for b in out])
    if np.linalg.matrix_rank(E, tol=1e-6) == root.m:
        L = np.linalg.pinv(E) @ (Pi if Pi is not None else np.eye(E.shape[0]))
        for j, b in enumerate(out):
            b.ell = L[j]
    return out


def classify_glancing(root: CharacteristicRoot, branches: list) -> str:
    if any(b.nu > 1 for b in branches):
        return "glancing"
    signs = {np.sign(b.beta) for b in branches}
    if signs == {1.0}:
        return "totally_incoming"
    if signs == {-1.0}:
        return "totally_outgoing"
    return "nonglancing_mixed"


@dataclass
class RegularityReport:
    verdict: str
    constant_multiplicity: bool
    semisimple: bool
    geometric: Optional[bool]
    algebraic: Optional[bool]
    diagnostics: dict = field(default_factory=dict)


def _lines_match(A: np.ndarray, B: np.ndarray, tol: float) -> bool:
    O = _overlap(A, B)
    r, c = linear_sum_assignment(-O)
    return bool(O[r, c].min() >= 1 - tol)


def classify_regularity(root: CharacteristicRoot, probe_radius: Optional[float] = None,
                        n_rays: int = 16, seed: int = 0) -> RegularityReport:
    """Numerical regularity class of a multiple root from probes on rays through it."""
    sys, m = root.sys, root.m
    nx = np.linalg.norm(root.xi_bar)
    if probe_radius is None:
        probe_radius = 1e-3 * (1 + nx)
    M0 = sys.symbol_A(root.p, root.xi_bar)
    scale = max(1.0, np.linalg.norm(M0, 2))
    w0, V0 = _nearest(M0, root.lam, m)
    semisimple = bool(np.linalg.svd(V0, compute_uv=False)[-1] > 1e-6) if m > 0 else True
    rays = sphere_directions(sys.d, n_rays, seed=seed)
    split_tol = 1e-9 * scale
    const = True
    ref = None
    geo_ok = True
    used = 0
    for om in rays:
        w, V = _nearest(sys.symbol_A(root.p, root.xi_bar + probe_radius * om), root.lam, m)
        groups = cluster_values(w, ROOT_CLUSTER_TOL * scale)
        if len(groups) != 1:
            const = False
        if m > 1 and min(abs(w[i] - w[j]) for i in range(m) for j in range(i + 1, m)) <= split_tol:
            continue
        used += 1
        if ref is None:
            ref = V
            if np.linalg.svd(V, compute_uv=False)[-1] <= 1e-6:
                geo_ok = False
        elif not _lines_match(ref, V, 1e-3):
            geo_ok = False
    geometric = None if used < 2 else geo_ok
    diag = {"rays_split": used, "probe_radius": probe_radius}
    algebraic = _algebraic_test(root, rays, scale, diag)
    if m == 1 or (const and semisimple):
        verdict = "semisimple_constant_mult"
    elif geometric is None:
        verdict = "inconclusive"
    elif geometric:
        verdict = "geometrically_regular"
    elif algebraic:
        verdict = "algebraically_regular"
    else:
        verdict = "irregular"
    return RegularityReport(verdict, const, semisimple, geometric, algebraic, diag)


def _algebraic_test(root, rays, scale, diag, cap_radius=0.1, n_cap=12, tol=1e-4) -> bool:
    """Sorted directional slopes must be linear in the direction on some cap."""
    sys, m = root.sys, root.m
    r = 1e-6 * (1 + np.linalg.norm(root.xi_bar))
    rng = np.random.default_rng(1)
    residuals = []
    for om in rays[:3]:
        pts = []
        for _ in range(n_cap):
            z = om + cap_radius * rng.standard_normal(om.size) / np.sqrt(om.size)
            pts.append(z / np.linalg.norm(z))
        pts = np.array(pts)
        S = []
        for z in pts:
            w, _ = _nearest(sys.symbol_A(root.p, root.xi_bar + r * z), root.lam, m)
            S.append(np.sort((w.real - root.lam) / r))
        S = np.array(S)
        coef, *_ = np.linalg.lstsq(pts, S, rcond=None)
        res = float(np.abs(pts @ coef - S).max())
        residuals.append(res)
        if res < tol * scale:
            diag["algebraic_residuals"] = residuals
            return True
    diag["algebraic_residuals"] = residuals
    return False


def coupling_matrix(sys: SystemDefinition, root: CharacteristicRoot, branches: list,
                    tol: float = DECOUPLE_TOL) -> CouplingData:
    """B#_{jj'} = l_j B(p, xi) e_j' and the incoming/outgoing decoupling verdict."""
    E = np.column_stack([b.e for b in branches])
    if any(b.ell is None for b in branches):
        raise ClassificationError("dual basis is singular")
    L = np.vstack([b.ell for b in branches])
    Bs = L @ sys.symbol_B(root.p, root.xi_bar) @ E
    J_I = [j for j, b in enumerate(branches) if b.mode_type == "I"]
    J_O = [j for j, b in enumerate(branches) if b.mode_type == "O"]
    return _coupling(Bs, J_I, J_O, E, L, branches, tol)


def _coupling(Bs, J_I, J_O, E, L, branches, tol=DECOUPLE_TOL) -> CouplingData:
    thr = tol * max(1.0, np.linalg.norm(Bs, 2))
    off = 0.0
    if J_I and J_O:
        off = max(np.abs(Bs[np.ix_(J_O, J_I)]).max(), np.abs(Bs[np.ix_(J_I, J_O)]).max())
    return CouplingData(Bsharp=Bs, J_I=J_I, J_O=J_O, decoupled=bool(off < thr), E=E, L=L,
                        betas=np.array([b.beta for b in branches]), nus=[b.nu for b in branches])


class AdaptedBasisError(ClassificationError):
    pass


def find_adapted_basis(data: CouplingData, symmetrizer=None, sys=None, root=None):
    """Basis change making Re B# positive definite.

    m = 2: diagonal rescaling diag(t, 1).  With a symmetrizer S: S-orthonormal
    branch eigenvectors, in which Re B# is the restriction of Re(S B).
    Returns (transform, transformed B#, min eigenvalue of its Hermitian part).
    """
    Bs = data.Bsharp
    m = Bs.shape[0]
    if symmetrizer is not None:
        if sys is None or root is None:
            raise ClassificationError("symmetric route needs the system and the root")
        S = np.asarray(symmetrizer, dtype=complex)
        E = data.E.copy()
        for j in range(m):
            E[:, j] /= np.sqrt((E[:, j].conj() @ S @ E[:, j]).real)
        B2 = E.conj().T @ S @ sys.symbol_B(root.p, root.xi_bar) @ E
        return E, B2, float(np.linalg.eigvalsh(hermitian_part(B2))[0])
    if m != 2:
        raise AdaptedBasisError("unsupported: m > 2 needs a symmetrizer")
    b11, b12, b21, b22 = Bs[0, 0], Bs[0, 1], Bs[1, 0], Bs[1, 1]
    p = b12 * b21
    if b11.real <= 0 or b22.real <= 0 or abs(p) + p.real >= 2 * b11.real * b22.real:
        raise AdaptedBasisError("no adapted diagonal rescaling")

    def transformed(t):
        D = np.diag([t, 1.0])
        B2 = D @ Bs @ np.linalg.inv(D)
        return D, B2, float(np.linalg.eigvalsh(hermitian_part(B2))[0])

    if abs(b12) > 0 and abs(b21) > 0:
        t = np.sqrt(abs(b21) / abs(b12))
        return transformed(t)
    t = 1.0
    for _ in range(200):
        D, B2, lo = transformed(t)
        if lo > 0:
            return D, B2, lo
        t = t / 2 if abs(b12) > 0 else t * 2
    raise AdaptedBasisError("no adapted diagonal rescaling")
