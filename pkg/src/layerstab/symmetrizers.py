"""Symmetrizer construction for reduced hyperbolic and parabolic blocks, and numeric K-family checks.

Blocks are m x m matrix families Hk(check_zeta, rho) around a base point of the
unit hemisphere with check_gamma = 0 and rho = 0.  A candidate symmetrizer is a
Hermitian family Sigma(check_zeta, rho, kappa) attached to one such block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_continuous_lyapunov
from scipy.optimize import minimize

from .classify import CharacteristicRoot, classify_glancing, glancing_data
from .freq import _raw, compute_P0, polar_block_raw, split_blocks
from .linalg import (LinalgError, Subspace, hermitian_part, invariant_basis, min_eig_hermitian,
                     spectral_projector, stable_split)
from .system import SystemDefinition, _jsonable

FD_STEP = 1e-4
MARGIN = 1e-6
KAPPA_GRID = (1.0, 4.0, 16.0, 64.0)


class SymmetrizerError(LinalgError):
    pass


class BlockStructureError(SymmetrizerError):
    pass


class DflatError(SymmetrizerError):
    pass


# block families ----------------------------------------------------------

@dataclass
class BlockFamily:
    """Matrix family fn(check_zeta, rho) with a base point (tau, eta, 0) and base eigenvalue mu."""

    fn: Callable
    base: tuple
    mu: complex
    label: str = ""

    def __call__(self, cz, rho: float = 0.0) -> np.ndarray:
        return np.asarray(self.fn(_raw(cz), float(rho)), dtype=complex)

    @property
    def size(self) -> int:
        return self.at_base().shape[0]

    def at_base(self) -> np.ndarray:
        return self(self.base, 0.0)

    def shifted(self, dgamma: float = 0.0, drho: float = 0.0, dtau: float = 0.0, deta=None) -> tuple:
        tau, eta, gamma = _raw(self.base)
        eta = eta + (0.0 if deta is None else np.asarray(deta, dtype=float))
        return (tau + dtau, eta, gamma + dgamma), drho

    def conjugated(self, V: np.ndarray) -> "BlockFamily":
        V = np.asarray(V, dtype=complex)
        Vinv = np.linalg.inv(V)
        return BlockFamily(lambda cz, rho: Vinv @ self.fn(cz, rho) @ V, self.base, self.mu, self.label)


def directional_derivative(F: Callable, h: float = FD_STEP) -> np.ndarray:
    """Central difference of t -> F(t) at t = 0 with one Richardson step."""
    d1 = (F(h) - F(-h)) / (2 * h)
    d2 = (F(h / 2) - F(-h / 2)) / h
    return (4 * d2 - d1) / 3


def block_derivatives(block: BlockFamily, h: float = FD_STEP) -> tuple:
    """(d/d check_gamma, d/d rho) of the block at its base point."""
    dg = directional_derivative(lambda t: block(*block.shifted(dgamma=t)), h)
    dr = directional_derivative(lambda t: block(*block.shifted(drho=t)), h)
    return dg, dr


def _cluster_radius(M: np.ndarray, mu: complex) -> float:
    ev = np.linalg.eigvals(M)
    scale = max(1.0, np.abs(ev).max())
    far = np.abs(ev - mu)
    far = far[far > 1e-6 * scale]
    return 0.5 * far.min() if far.size else np.inf


def _restricted(fn_full: Callable, base: tuple, mu: complex, label: str) -> BlockFamily:
    """Restriction of a full matrix family to its invariant subspace near mu, in a smooth gauge."""
    M0 = fn_full(base, 0.0)
    r = _cluster_radius(M0, mu)
    pick = (lambda x: True) if not np.isfinite(r) else (lambda x: abs(x - mu) < r)
    V0 = invariant_basis(M0, pick)
    if V0.shape[1] == M0.shape[0]:
        return BlockFamily(lambda cz, rho: V0.conj().T @ fn_full(cz, rho) @ V0, base, mu, label)
    L0 = V0.conj().T @ spectral_projector(M0, pick)

    def fn(cz, rho):
        M = fn_full(cz, rho)
        W = spectral_projector(M, pick) @ V0
        return np.linalg.solve(L0 @ W, L0 @ M @ W)

    fam = BlockFamily(fn, base, mu, label)
    fam.V0 = V0
    return fam


def root_base(root: CharacteristicRoot) -> tuple:
    """Base hemisphere point (tau_bar, eta_bar, 0) and base eigenvalue i xi_d of a characteristic root."""
    xi = np.asarray(root.xi_bar, dtype=float)
    return (float(root.tau_bar), xi[:-1].copy(), 0.0), 1j * float(xi[-1])


def hyperbolic_block(sys: SystemDefinition, u, root: CharacteristicRoot) -> BlockFamily:
    """Block of H-check(check_zeta, rho) = H(rho check_zeta)/rho attached to a characteristic root."""
    base, mu = root_base(root)
    u = np.asarray(u, dtype=float)
    full = lambda cz, rho: polar_block_raw(sys, u, cz, rho)
    M0 = full(base, 0.0)
    r = _cluster_radius(M0, mu)
    pick = (lambda x: True) if not np.isfinite(r) else (lambda x: abs(x - mu) < r)
    V0 = invariant_basis(M0, pick)
    if V0.shape[1] != root.m:
        raise SymmetrizerError(f"cluster at {mu} has dimension {V0.shape[1]}, root multiplicity {root.m}")
    fam = _restricted(full, base, mu, f"hyperbolic@{root.lam:.6g}")
    fam.V0 = V0
    return fam


def parabolic_block(sys: SystemDefinition, u, sign: int, base=(0.0, (1.0,), 0.0)) -> BlockFamily:
    """The part of the parabolic block P(rho check_zeta) with spectrum in Re > 0 (sign=+1) or Re < 0."""
    u = np.asarray(u, dtype=float)
    P0 = compute_P0(sys, u)

    def full(cz, rho):
        if rho == 0:
            return P0
        tau, eta, gamma = cz
        return split_blocks(sys, u, (rho * tau, rho * eta, rho * gamma), P0=P0)[3]

    ev = np.linalg.eigvals(P0)
    sel = ev[ev.real * sign > 0]
    if sel.size == 0:
        raise SymmetrizerError("empty parabolic sub-block")
    pick = (lambda x: x.real > 0) if sign > 0 else (lambda x: x.real < 0)
    V0 = invariant_basis(P0, pick)
    L0 = V0.conj().T @ spectral_projector(P0, pick)

    def fn(cz, rho):
        M = full(cz, rho)
        W = spectral_projector(M, pick) @ V0
        return np.linalg.solve(L0 @ W, L0 @ M @ W)

    return BlockFamily(fn, _raw(base), complex(np.mean(sel)), f"parabolic{'+' if sign > 0 else '-'}")


def constant_block(M) -> BlockFamily:
    M = np.asarray(M, dtype=complex)
    ev = np.linalg.eigvals(M)
    return BlockFamily(lambda cz, rho: M, (0.0, np.zeros(0), 0.0), complex(np.mean(ev)), "constant")


def limit_splitting(block: BlockFamily, eps: float = 1e-12, max_cond: float = 1e4) -> tuple:
    """Limits of the stable and unstable subspaces of the block as check_gamma -> 0+.

    When the two limits collapse onto each other (Jordan blocks) the unstable one is
    returned as None, meaning the orthogonal complement of the stable limit.
    """
    M = block(*block.shifted(dgamma=eps))
    Em, Ep, _ = stable_split(M, margin_tol=0.0)
    if Em.dim and Ep.dim and np.linalg.cond(np.hstack([Em.basis, Ep.basis])) > max_cond:
        return Em, None
    return Em, Ep


# candidates ----------------------------------------------------------------

@dataclass
class SymmetrizerCandidate:
    """Hermitian family Sigma(check_zeta, rho, kappa) attached to a block family.

    kind "elliptic" asks for Re(Sigma H) > 0 at the base point; kind "nonelliptic"
    asks for Re(Sigma H) = gamma Sigma1 + rho Sigma2 + o with Sigma1, Sigma2 > 0.
    """

    Sigma: Callable
    block: BlockFamily
    kind: str
    kappa_grid: tuple = KAPPA_GRID
    Eminus: Optional[Subspace] = None
    Eplus: Optional[Subspace] = None
    info: dict = field(default_factory=dict)

    def __call__(self, cz, rho: float, kappa: float) -> np.ndarray:
        S = np.asarray(self.Sigma(_raw(cz), float(rho), float(kappa)), dtype=complex)
        if np.linalg.norm(S - S.conj().T) > 1e-12 * max(1.0, np.linalg.norm(S)):
            raise SymmetrizerError("candidate is not self-adjoint")
        return S

    def scaled(self, t: float) -> "SymmetrizerCandidate":
        return SymmetrizerCandidate(lambda cz, rho, k: t * self.Sigma(cz, rho, k), self.block, self.kind,
                                    self.kappa_grid, self.Eminus, self.Eplus, dict(self.info))


def elliptic_symmetrizer(block, kappa_grid=KAPPA_GRID, radius: float = 0.0) -> SymmetrizerCandidate:
    """Lyapunov symmetrizer of a block whose spectrum stays off the imaginary axis.

    X solves X H + H* X = 2 I at the base point.  For spectrum in Re > 0 the family
    is kappa X; for Re < 0 it is X scaled so that X >= -I.
    """
    if not isinstance(block, BlockFamily):
        block = constant_block(block)
    H0 = block.at_base()
    ev = np.linalg.eigvals(H0)
    margin = np.abs(ev.real).min()
    if margin <= 1e-10 * max(1.0, np.abs(ev).max()):
        raise SymmetrizerError("block spectrum touches the imaginary axis")
    if (ev.real > 0).any() and (ev.real < 0).any():
        raise SymmetrizerError("block mixes both half-planes; split it first")
    if radius > 0:
        for s in (-1, 1):
            for M in (block(*block.shifted(dtau=s * radius)), block(*block.shifted(dgamma=radius)),
                      block(*block.shifted(drho=radius))):
                if np.abs(np.linalg.eigvals(M).real).min() <= 1e-10:
                    raise SymmetrizerError("block spectrum touches the imaginary axis near the base point")
    X = solve_continuous_lyapunov(H0.conj().T, 2 * np.eye(H0.shape[0]))
    X = hermitian_part(X)
    n = H0.shape[0]
    if ev.real.min() > 0:
        X = X / np.linalg.eigvalsh(X)[0]
        Sig = lambda cz, rho, k: k * X
        Em, Ep = Subspace.zero(n), Subspace(np.eye(n))
    else:
        X = X / np.abs(np.linalg.eigvalsh(X)).max()
        Sig = lambda cz, rho, k: X
        Em, Ep = Subspace(np.eye(n)), Subspace.zero(n)
    return SymmetrizerCandidate(Sig, block, "elliptic", tuple(kappa_grid), Em, Ep,
                                {"construction": "lyapunov", "X": X})


def nonglancing_symmetrizer(sys: SystemDefinition, u, root: CharacteristicRoot, branches=None,
                            kappa_grid=KAPPA_GRID, h: float = FD_STEP) -> SymmetrizerCandidate:
    """Sigma = -V* S A_d V on the eigenspace of a totally nonglancing root.

    With this sign, Sigma < 0 on incoming roots and Sigma > 0 on outgoing ones.
    Incoming roots use Sigma itself (scaled to Sigma >= -I), outgoing roots kappa Sigma
    (scaled to Sigma >= I).
    """
    u = np.asarray(u, dtype=float)
    S = sys.eval_S(u)
    if S is None:
        raise SymmetrizerError("a symmetrizer S is required")
    if branches is None:
        branches = glancing_data(root)
    verdict = classify_glancing(root, branches)
    if verdict not in ("totally_incoming", "totally_outgoing"):
        raise SymmetrizerError(f"root is {verdict}, not totally nonglancing")
    block = hyperbolic_block(sys, u, root)
    V = block.V0
    Ad = sys.eval_A(u)[-1]
    A0 = sys.eval_A0(u)
    Sig0 = hermitian_part(-V.conj().T @ S @ Ad @ V)
    w = np.linalg.eigvalsh(Sig0)
    incoming = verdict == "totally_incoming"
    n = Sig0.shape[0]
    if incoming:
        scale = 1 / np.abs(w).max()
        Em, Ep = Subspace(np.eye(n)), Subspace.zero(n)
    else:
        scale = 1 / w[0] if w[0] > 0 else 1.0
        Em, Ep = Subspace.zero(n), Subspace(np.eye(n))
    Sig0 = scale * Sig0
    if incoming:
        Sig = lambda cz, rho, k: Sig0
    else:
        Sig = lambda cz, rho, k: k * Sig0
    # closed forms of the gamma and rho derivatives at kappa = 1
    R1_closed = scale * hermitian_part(V.conj().T @ S @ A0 @ V)
    R2_closed = scale * hermitian_part(V.conj().T @ S @ sys.symbol_B(u, root.xi_bar) @ V)
    cand = SymmetrizerCandidate(Sig, block, "nonelliptic", tuple(kappa_grid), Em, Ep, {
        "construction": "nonglancing", "type": verdict, "Sigma_base": Sig0,
        "sign": "negative" if w[-1] < 0 else ("positive" if w[0] > 0 else "indefinite"),
        "R1_closed": R1_closed, "R2_closed": R2_closed,
    })
    R0, R1, R2 = real_part_expansion(cand, 1.0, h)
    for name, R in (("R1", R1), ("R2", R2)):
        if min_eig_hermitian(R) <= MARGIN * max(1.0, np.linalg.norm(R, 2)):
            raise SymmetrizerError(f"{name} is not positive definite: hypothesis violated")
    cand.info.update({"R1": R1, "R2": R2, "R1_min": min_eig_hermitian(R1),
                      "R2_min": min_eig_hermitian(R2), "R0_norm": float(np.linalg.norm(R0))})
    return cand


def real_part_expansion(cand: SymmetrizerCandidate, kappa: float, h: float = FD_STEP) -> tuple:
    """Re(Sigma H) at the base and its check_gamma and rho derivatives there."""
    blk = cand.block

    def R(dg, dr):
        cz, rho = blk.shifted(dgamma=dg, drho=dr)
        return hermitian_part(cand(cz, rho, kappa) @ blk(cz, rho))

    R0 = R(0.0, 0.0)
    R1 = directional_derivative(lambda t: R(t, 0.0), h)
    R2 = directional_derivative(lambda t: R(0.0, t), h)
    return R0, hermitian_part(R1), hermitian_part(R2)


# K-family verification -------------------------------------------------------

def _oblique_projectors(Em: Subspace, Ep: Optional[Subspace], n: int) -> tuple:
    if Ep is None:
        Ep = Em.complement()
    if Em.dim + Ep.dim != n:
        raise SymmetrizerError("splitting dimensions do not add up")
    if Em.dim == 0:
        return np.zeros((n, n), complex), np.eye(n, dtype=complex)
    if Ep.dim == 0:
        return np.eye(n, dtype=complex), np.zeros((n, n), complex)
    T = np.hstack([Em.basis, Ep.basis])
    Tinv = np.linalg.inv(T)
    Pm = Em.basis @ Tinv[:Em.dim]
    return Pm, np.eye(n) - Pm


def lower_bound_constant(Sigma: np.ndarray, Pm: np.ndarray, Pp: np.ndarray) -> float:
    """Largest m with Sigma >= m Pp*Pp - Pm*Pm (inf when Pp = 0, -inf when no m works)."""
    base = Sigma + Pm.conj().T @ Pm
    Q = Pp.conj().T @ Pp
    f = lambda m: min_eig_hermitian(base - m * Q)
    if np.linalg.norm(Q) == 0:
        return np.inf if f(0.0) >= -1e-12 * max(1.0, np.linalg.norm(Sigma)) else -np.inf
    hi = 1.0
    while f(hi) >= 0:
        hi *= 2
        if hi > 1e15:
            return np.inf
    lo = -1.0
    while f(lo) < 0:
        lo *= 2
        if lo < -1e15:
            return -np.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(lo)):
            break
    return lo


@dataclass
class KFamilyVerdict:
    ok: bool
    kind: str
    table: list
    reason: str = ""
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return _jsonable({"schema": 1, "ok": self.ok, "kind": self.kind, "table": self.table,
                          "reason": self.reason, "witness": self.witness})


def verify_k_family(cand: SymmetrizerCandidate, Eminus: Optional[Subspace] = None,
                    Eplus: Optional[Subspace] = None, kappa_grid=None, h: float = FD_STEP,
                    min_final: float = 10.0) -> KFamilyVerdict:
    """Numeric K-family certificate at the base point of the candidate's block.

    For every kappa: self-adjointness, positivity of Re(Sigma H) (elliptic) or of its
    gamma and rho derivatives with vanishing base value (nonelliptic), and the lower
    bound Sigma >= m(kappa) Pp*Pp - Pm*Pm.  m must increase strictly along the grid
    and end above min_final, unless the plus space is trivial.
    """
    kappa_grid = tuple(kappa_grid or cand.kappa_grid)
    Em = Eminus if Eminus is not None else cand.Eminus
    Ep = Eplus if Eplus is not None else cand.Eplus
    if Em is None:
        Em, Ep = limit_splitting(cand.block)
    n = cand.block.size
    Pm, Pp = _oblique_projectors(Em, Ep, n)
    table = []
    for k in kappa_grid:
        try:
            S = cand(cand.block.base, 0.0, k)
        except SymmetrizerError as exc:
            return KFamilyVerdict(False, cand.kind, table, str(exc), {"kappa": k})
        R0, R1, R2 = real_part_expansion(cand, k, h)
        row = {"kappa": k, "m": lower_bound_constant(S, Pm, Pp)}
        if cand.kind == "elliptic":
            lo = min_eig_hermitian(R0)
            row["Re_min"] = lo
            if lo <= MARGIN * np.linalg.norm(R0, 2):
                return KFamilyVerdict(False, cand.kind, table + [row], "Re(Sigma H) not positive",
                                      {"kappa": k, "matrix": R0})
        else:
            scale = max(1.0, np.linalg.norm(S, 2) * np.linalg.norm(cand.block.at_base(), 2))
            row["R0_norm"] = float(np.linalg.norm(R0, 2))
            row["Sigma1_min"] = min_eig_hermitian(R1)
            row["Sigma2_min"] = min_eig_hermitian(R2)
            if row["R0_norm"] > 1e-8 * scale:
                return KFamilyVerdict(False, cand.kind, table + [row], "Re(Sigma H) does not vanish at the base",
                                      {"kappa": k, "matrix": R0})
            for name, M in (("Sigma1", R1), ("Sigma2", R2)):
                if min_eig_hermitian(M) <= MARGIN * np.linalg.norm(M, 2):
                    return KFamilyVerdict(False, cand.kind, table + [row], f"{name} not positive",
                                          {"kappa": k, "matrix": M})
        if row["m"] == -np.inf:
            return KFamilyVerdict(False, cand.kind, table + [row], "no lower bound constant",
                                  {"kappa": k, "matrix": S})
        table.append(row)
    ms = [r["m"] for r in table]
    if all(np.isinf(m) and m > 0 for m in ms):
        return KFamilyVerdict(True, cand.kind, table, "plus space trivial")
    if not all(b > a for a, b in zip(ms, ms[1:])):
        return KFamilyVerdict(False, cand.kind, table, "m(kappa) is not increasing", {"m": ms})
    if ms[-1] <= min_final:
        return KFamilyVerdict(False, cand.kind, table, f"m at the largest kappa is {ms[-1]:.3g}", {"m": ms})
    return KFamilyVerdict(True, cand.kind, table)


# block structure --------------------------------------------------------------

@dataclass
class BlockStructureData:
    Vk: np.ndarray
    Q_blocks: list
    q_flat: np.ndarray
    B_flat: np.ndarray
    nus: list
    J_I: list
    J_O: list
    D_flat: Optional[np.ndarray] = None
    pattern_ok: bool = False
    Q: Optional[BlockFamily] = None
    residual: float = 0.0

    def to_dict(self) -> dict:
        return _jsonable({"q_flat": self.q_flat, "B_flat": self.B_flat, "nus": self.nus, "J_I": self.J_I,
                          "J_O": self.J_O, "D_flat": None if self.D_flat is None else np.diag(self.D_flat),
                          "pattern_ok": self.pattern_ok, "residual": self.residual})


def _starts(nus):
    return list(np.cumsum([0] + list(nus))[:-1])


def jordan_model(mu: complex, nus: Sequence[int]) -> np.ndarray:
    """mu I + i J with J the upper shift inside each block."""
    n = int(sum(nus))
    M = mu * np.eye(n, dtype=complex)
    for s, nu in zip(_starts(nus), nus):
        for r in range(nu - 1):
            M[s + r, s + r + 1] = 1j
    return M


def regular_block_basis(block: BlockFamily, branches) -> np.ndarray:
    """Conjugating basis Vk (in block coordinates) built from the branch eigenvectors.

    Only nu = 1 branches are handled here; Jordan blocks must be supplied already in block form.
    """
    if any(b.nu != 1 for b in branches):
        raise BlockStructureError("automatic block basis needs nu = 1 on every branch")
    V0 = getattr(block, "V0", None)
    E = np.column_stack([b.e for b in branches])
    Vk = E if V0 is None else np.linalg.lstsq(V0, E, rcond=None)[0]
    if np.linalg.matrix_rank(Vk, tol=1e-8) < Vk.shape[1]:
        raise BlockStructureError("branch eigenvectors are dependent")
    return Vk


def check_generalized_block_structure(block: BlockFamily, nus: Sequence[int], types: Optional[Sequence[str]] = None,
                                      Vk: Optional[np.ndarray] = None, search_D: bool = True,
                                      h: float = FD_STEP) -> tuple:
    """Block structure extraction and the generalized block structure verdict.

    Returns (verdict, BlockStructureData).  Q = Vk^-1 Hk Vk must equal mu I + i J at
    the base point.  q_flat is the lower-left corner of dQ/dgamma in each diagonal
    block, B_flat collects the lower-left corners of dQ/drho over all block pairs.
    """
    nus = [int(v) for v in nus]
    n = block.size
    if sum(nus) != n:
        raise BlockStructureError("block sizes do not add up to the block dimension")
    Vk = np.eye(n, dtype=complex) if Vk is None else np.asarray(Vk, dtype=complex)
    Q = block.conjugated(Vk)
    Q0 = Q.at_base()
    model = jordan_model(block.mu, nus)
    resid = float(np.linalg.norm(Q0 - model) / max(1.0, np.linalg.norm(model)))
    if resid > 1e-8:
        raise BlockStructureError(f"base block is not in Jordan form (residual {resid:.2e})")
    dg, dr = block_derivatives(Q, h)
    st = _starts(nus)
    corner = lambda M, j, k: M[st[j] + nus[j] - 1, st[k]]
    q = np.array([corner(dg, j, j) for j in range(len(nus))])
    if np.abs(q.imag).max(initial=0) > 1e-8 * max(1.0, np.abs(q).max()):
        raise BlockStructureError("corner coefficients are not real")
    q = q.real
    if np.any(np.abs(q) < 1e-10):
        raise BlockStructureError("a corner coefficient vanishes")
    Bf = np.array([[corner(dr, j, k) for k in range(len(nus))] for j in range(len(nus))])
    if types is None:
        types = ["I" if (nu % 2 == 0 or qj < 0) else "O" for nu, qj in zip(nus, q)]
    J_I = [j for j, t in enumerate(types) if t == "I"]
    J_O = [j for j, t in enumerate(types) if t == "O"]
    data = BlockStructureData(Vk=Vk, Q_blocks=[Q0[s:s + nu, s:s + nu] for s, nu in zip(st, nus)],
                              q_flat=q, B_flat=Bf, nus=nus, J_I=J_I, J_O=J_O, Q=Q, residual=resid)
    data.pattern_ok = decoupling_pattern(Bf, J_I, J_O)
    if not data.pattern_ok:
        return False, data
    if search_D:
        try:
            data.D_flat = find_Dflat(Bf, q, J_I, J_O)
        except DflatError:
            return False, data
    return True, data


def decoupling_pattern(B_flat, J_I, J_O, tol: float = 1e-10) -> bool:
    B = np.asarray(B_flat)
    if not J_I or not J_O:
        return True
    thr = tol * max(1.0, np.linalg.norm(B, 2))
    return bool(np.abs(B[np.ix_(J_O, J_I)]).max() < thr and np.abs(B[np.ix_(J_I, J_O)]).max() < thr)


def _dflat_group(B: np.ndarray, q: np.ndarray) -> np.ndarray:
    sgn = np.sign(q)
    scale = max(1.0, np.linalg.norm(B, 2))

    def score(x):
        d = sgn * np.exp(x - x.max())
        return min_eig_hermitian(np.diag(d) @ B) / scale

    starts = [np.log(np.abs(1 / q)), np.zeros(q.size)]
    rng = np.random.default_rng(0)
    starts += [rng.normal(size=q.size) for _ in range(8)]
    best_x, best = None, -np.inf
    for x0 in starts:
        s = score(x0)
        if s > best:
            best_x, best = x0, s
    if best <= 1e-10:
        res = minimize(lambda x: -score(x), best_x, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if -res.fun > best:
            best_x, best = res.x, -res.fun
    if best <= 1e-10:
        raise DflatError("no diagonal certificate found")
    return sgn * np.exp(best_x - best_x.max())


def find_Dflat(B_flat, q_flat, J_I, J_O) -> np.ndarray:
    """Real diagonal D with d_j q_j > 0 and Re(D B_flat) > 0, certified group by group.

    Failure only means the search found no certificate.
    """
    B = np.asarray(B_flat, dtype=complex)
    q = np.asarray(q_flat, dtype=float)
    if not decoupling_pattern(B, J_I, J_O):
        raise DflatError("incoming/outgoing coupling pattern fails")
    d = np.zeros(q.size)
    groups = [g for g in (list(J_I), list(J_O)) if g]
    rest = sorted(set(range(q.size)) - set(J_I) - set(J_O))
    if rest:
        groups.append(rest)
    for g in groups:
        d[g] = _dflat_group(B[np.ix_(g, g)], q[g])
    D = np.diag(d)
    if min_eig_hermitian(D @ B) <= 0 or np.any(d * q <= 0):
        raise DflatError("no diagonal certificate found")
    return D


def kreiss_block_symmetrizer(data: BlockStructureData, kappa_grid=KAPPA_GRID, c: Optional[float] = None,
                             budget: int = 60) -> SymmetrizerCandidate:
    """Kreiss-type symmetrizer in block coordinates for Jordan blocks of size at most two.

    Each block gets E = [[0, e1], [e1, e2]] (or the scalar e1), e1 = c d_j for incoming
    and c kappa d_j for outgoing blocks, e2 = c kappa, plus -i gamma F - i rho F~ with
    real skew F, F~ whose single entry is increased until the gamma and rho derivatives
    of Re(Sigma Q) are positive.
    """
    if data.D_flat is None:
        raise SymmetrizerError("generalized block structure not verified")
    if max(data.nus) > 2:
        raise SymmetrizerError("Jordan blocks of size three or more are not supported")
    Q = data.Q
    d = np.diag(data.D_flat).real
    q = data.q_flat
    if c is None:
        # keeps the incoming part above -I
        c = 1.0 / np.abs(d).max()
    st = _starts(data.nus)
    n = int(sum(data.nus))
    outgoing = set(data.J_O)

    def parts(k, t):
        E = np.zeros((n, n), complex)
        F = np.zeros((n, n), complex)
        for j, (s, nu) in enumerate(zip(st, data.nus)):
            e1 = c * d[j] * (k if j in outgoing else 1.0)
            if nu == 1:
                E[s, s] = e1
            else:
                E[s, s + 1] = E[s + 1, s] = e1
                E[s + 1, s + 1] = c * k
                F[s, s + 1], F[s + 1, s] = -t, t
        return E, F

    def make(k, tg, tr):
        E, F = parts(k, 1.0)
        F = F.real
        return lambda cz, rho: E - 1j * cz[2] * tg * F - 1j * rho * tr * F

    tuned = {}
    for k in kappa_grid:
        tg = tr = 0.0 if max(data.nus) == 1 else 1.0
        for _ in range(budget):
            Sig = make(k, tg, tr)
            cand = SymmetrizerCandidate(lambda cz, rho, kk, S=Sig: S(cz, rho), Q, "nonelliptic")
            _, R1, R2 = real_part_expansion(cand, k)
            ok1 = min_eig_hermitian(R1) > MARGIN * np.linalg.norm(R1, 2)
            ok2 = min_eig_hermitian(R2) > MARGIN * np.linalg.norm(R2, 2)
            if ok1 and ok2:
                break
            if max(data.nus) == 1:
                raise SymmetrizerError("no valid scalar choice: derivatives not positive")
            tg = tg if ok1 else 2 * tg
            tr = tr if ok2 else 2 * tr
        else:
            raise SymmetrizerError("no valid scalar choice found within the search budget")
        tuned[k] = (tg, tr)

    def Sigma(cz, rho, k):
        tg, tr = tuned.get(k, tuned[max(tuned)])
        return make(k, tg, tr)(cz, rho)

    Em, Ep = limit_splitting(Q)
    return SymmetrizerCandidate(Sigma, Q, "nonelliptic", tuple(kappa_grid), Em, Ep,
                                {"construction": "kreiss", "c": c, "tuning": tuned})
