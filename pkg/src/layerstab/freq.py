"""Frequency-domain matrices: first-order system G, H0, P0, low-frequency split and polar rescaling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.linalg as sla

from .linalg import LinalgError
from .system import SystemDefinition


class FrequencyError(LinalgError):
    pass


@dataclass(frozen=True)
class Frequency:
    """zeta = (tau, eta, gamma); eta holds the d-1 tangential wave numbers."""

    tau: float
    eta: tuple
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "eta", tuple(float(e) for e in np.atleast_1d(self.eta)))
        if self.gamma < 0:
            raise FrequencyError("gamma must be nonnegative")

    @property
    def eta_vec(self) -> np.ndarray:
        return np.asarray(self.eta, dtype=float)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.tau ** 2 + self.eta_vec @ self.eta_vec + self.gamma ** 2))

    @property
    def Lambda(self) -> float:
        e2 = self.eta_vec @ self.eta_vec
        return float((1 + self.tau ** 2 + self.gamma ** 2 + e2 * e2) ** 0.25)

    @property
    def phi(self) -> float:
        return float(np.sqrt(self.gamma + self.norm ** 2))

    def scaled(self, t: float) -> "Frequency":
        return Frequency(t * self.tau, tuple(t * self.eta_vec), t * self.gamma)

    def as_tuple(self):
        return self.tau, self.eta_vec, self.gamma


@dataclass(frozen=True)
class PolarFrequency:
    check_zeta: Frequency
    rho: float

    def __post_init__(self):
        if abs(self.check_zeta.norm - 1) > 1e-12:
            raise FrequencyError("check_zeta must have unit length")
        if self.rho < 0:
            raise FrequencyError("rho must be nonnegative")

    @classmethod
    def from_frequency(cls, z: Frequency) -> "PolarFrequency":
        r = z.norm
        if r == 0:
            raise FrequencyError("zero frequency has no polar form")
        return cls(z.scaled(1 / r), r)

    @property
    def zeta(self) -> Frequency:
        return self.check_zeta.scaled(self.rho)


FreqLike = Union[Frequency, Sequence]


def _raw(zeta) -> tuple:
    if isinstance(zeta, Frequency):
        return zeta.as_tuple()
    tau, eta, gamma = zeta
    return float(tau), np.atleast_1d(np.asarray(eta, dtype=float)), float(gamma)


def symbol_terms(sys: SystemDefinition, u, zeta):
    """(A_tilde, M_tilde, B_dd) of  -B_dd u'' + A_tilde u' + M_tilde u = 0."""
    tau, eta, gamma = _raw(zeta)
    d = sys.d
    if eta.size != d - 1:
        raise FrequencyError(f"eta must have {d - 1} components")
    A0 = sys.eval_A0(u)
    As = sys.eval_A(u)
    Bs = sys.eval_B(u)
    s = 1j * tau + gamma
    At = As[-1].copy()
    Mt = s * A0
    for j in range(d - 1):
        At = At - 1j * eta[j] * (Bs[j, d - 1] + Bs[d - 1, j])
        Mt = Mt + 1j * eta[j] * As[j]
        for k in range(d - 1):
            Mt = Mt + eta[j] * eta[k] * Bs[j, k]
    return At, Mt, Bs[d - 1, d - 1]


def first_order_pencil(sys: SystemDefinition, At, Mt, Bdd):
    """L U' = R U with U = (u, dz u2)."""
    N, Np, n1 = sys.N, sys.Nprime, sys.n1
    L = np.zeros((N + Np, N + Np), dtype=complex)
    R = np.zeros_like(L)
    L[:N, :n1] = At[:, :n1]
    L[:N, N:] = -Bdd[:, n1:]
    L[N:, n1:N] = np.eye(Np)
    R[:N, :N] = -Mt
    R[:N, N:] = -At[:, n1:]
    R[N:, N:] = np.eye(Np)
    return L, R


def assemble_G(sys: SystemDefinition, u, zeta: FreqLike) -> np.ndarray:
    """Matrix of the first-order system U' = G U, U = (u, dz u2)."""
    L, R = first_order_pencil(sys, *symbol_terms(sys, u, zeta))
    if np.linalg.cond(L) > 1e12:
        raise FrequencyError("singular G_d: A11_d or B22_dd not invertible")
    return np.linalg.solve(L, R)


def compute_H0(sys: SystemDefinition, u, zeta: FreqLike) -> np.ndarray:
    tau, eta, gamma = _raw(zeta)
    As = sys.eval_A(u)
    Ad = As[-1]
    if np.linalg.cond(Ad) > 1e12:
        raise FrequencyError("singular A_d")
    M = (1j * tau + gamma) * sys.eval_A0(u)
    for j in range(sys.d - 1):
        M = M + 1j * eta[j] * As[j]
    return -np.linalg.solve(Ad, M)


def compute_H1(sys: SystemDefinition, u, zeta: FreqLike) -> np.ndarray:
    """Second-order term: H = H0 - H1 + O(|zeta|^3)."""
    tau, eta, gamma = _raw(zeta)
    d = sys.d
    Bs = sys.eval_B(u)
    H0 = compute_H0(sys, u, zeta)
    Bss = sum(eta[j] * eta[k] * Bs[j, k] for j in range(d - 1) for k in range(d - 1)) if d > 1 else 0
    Bsd = sum(eta[j] * (Bs[j, d - 1] + Bs[d - 1, j]) for j in range(d - 1)) if d > 1 else 0
    Bdd = Bs[d - 1, d - 1]
    rhs = Bss - 1j * (Bsd @ H0 if d > 1 else 0) - Bdd @ H0 @ H0
    return np.linalg.solve(sys.eval_A(u)[-1], rhs + 0j)


def compute_P0(sys: SystemDefinition, u) -> np.ndarray:
    n1 = sys.n1
    Ad = sys.eval_A(u)[-1]
    B22 = sys.eval_B(u)[-1, -1][n1:, n1:]
    S = Ad[n1:, n1:]
    if n1:
        S = S - Ad[n1:, :n1] @ np.linalg.solve(Ad[:n1, :n1], Ad[:n1, n1:])
    P0 = np.linalg.solve(B22, S)
    ev = np.linalg.eigvals(P0)
    if np.min(np.abs(ev.real)) <= 1e-10 * max(1.0, np.linalg.norm(P0, 2)):
        raise FrequencyError(f"P0 has an eigenvalue on the imaginary axis: {ev[np.argmin(np.abs(ev.real))]}")
    return P0


def P0_gap(sys: SystemDefinition, u) -> float:
    return float(np.min(np.abs(np.linalg.eigvals(compute_P0(sys, u)).real)))


@dataclass
class LowFreqSplit:
    V: np.ndarray
    H: np.ndarray
    P: np.ndarray
    H0_part: np.ndarray
    H1_part: np.ndarray
    radius: float

    @property
    def V_H(self) -> np.ndarray:
        return self.V[:, :self.H.shape[0]]

    @property
    def V_P(self) -> np.ndarray:
        return self.V[:, self.H.shape[0]:]


def _modulus_threshold(ev: np.ndarray, N: int) -> float:
    a = np.sort(np.abs(ev))
    lo, hi = a[N - 1], a[N]
    if hi <= 2 * lo + 1e-14:
        raise FrequencyError("no modulus gap between the H and P parts of the spectrum")
    return float(np.sqrt(max(lo, 1e-300) * hi)) if lo > 0 else 0.5 * hi


def split_blocks(sys: SystemDefinition, u, zeta, P0=None):
    """Numeric (V_H, H, V_P, P) at one frequency; components may have any sign."""
    N, Np = sys.N, sys.Nprime
    G = assemble_G(sys, u, zeta)
    ev = np.linalg.eigvals(G)
    thr = _modulus_threshold(ev, N)
    _, X, k = sla.schur(G, output="complex", sort=lambda x: abs(x) < thr)
    _, Y, k2 = sla.schur(G, output="complex", sort=lambda x: abs(x) > thr)
    if k != N or k2 != Np:
        raise FrequencyError("ordered Schur split returned inconsistent block sizes")
    VI = X[:, :N] @ np.linalg.inv(X[:N, :N])
    VII = Y[:, :Np] @ np.linalg.inv(Y[N:, :Np])
    H = (G @ VI)[:N]
    P = (G @ VII)[N:]
    if P0 is None:
        P0 = compute_P0(sys, u)
    gap0 = np.min(np.abs(np.linalg.eigvals(P0).real))
    if np.min(np.abs(np.linalg.eigvals(P).real)) < 0.25 * gap0:
        raise FrequencyError("P spectrum approaches the imaginary axis")
    return VI, H, VII, P


def validity_radius(sys: SystemDefinition, u) -> float:
    """Half the P0 spectral gap divided by an estimate of |dG/dzeta|."""
    gap = P0_gap(sys, u)
    d = sys.d
    h = 1e-6
    G0 = assemble_G(sys, u, (0.0, np.zeros(d - 1), 0.0))
    tot = 0.0
    for k in range(d + 1):
        e = np.zeros(d + 1)
        e[k] = h
        Gp = assemble_G(sys, u, (e[0], e[1:d], e[d]))
        tot += (np.linalg.norm(Gp - G0, 2) / h) ** 2
    return float(0.5 * gap / max(np.sqrt(tot), 1e-300))


def low_freq_split(sys: SystemDefinition, u, zeta: FreqLike, radius=None) -> LowFreqSplit:
    """Block reduction V^{-1} G V = diag(H, P) near zeta = 0."""
    if radius is None:
        radius = validity_radius(sys, u)
    tau, eta, gamma = _raw(zeta)
    r = float(np.sqrt(tau ** 2 + eta @ eta + gamma ** 2))
    if r > radius:
        raise FrequencyError(f"|zeta| = {r:.3g} beyond split radius {radius:.3g}")
    VI, H, VII, P = split_blocks(sys, u, zeta)
    return LowFreqSplit(V=np.hstack([VI, VII]), H=H, P=P, H0_part=compute_H0(sys, u, zeta),
                        H1_part=compute_H1(sys, u, zeta), radius=radius)


def polar_block(sys: SystemDefinition, u, pf: PolarFrequency, radius=None) -> np.ndarray:
    """H(rho * check_zeta) / rho, extended by H0(check_zeta) at rho = 0."""
    if pf.rho == 0:
        return compute_H0(sys, u, pf.check_zeta)
    if radius is None:
        radius = validity_radius(sys, u)
    if pf.rho > radius:
        raise FrequencyError(f"rho = {pf.rho:.3g} beyond split radius {radius:.3g}")
    return polar_block_raw(sys, u, pf.check_zeta.as_tuple(), pf.rho)


def polar_block_raw(sys: SystemDefinition, u, check_zeta, rho: float) -> np.ndarray:
    """Same as polar_block but accepts signed components and signed rho."""
    tau, eta, gamma = _raw(check_zeta)
    if rho == 0:
        return compute_H0(sys, u, (tau, eta, gamma))
    _, H, _, _ = split_blocks(sys, u, (rho * tau, rho * eta, rho * gamma))
    return H / rho
