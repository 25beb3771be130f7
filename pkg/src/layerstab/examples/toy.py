"""Two-by-two viscous system (dt + dy) u + A dx u = B Lap u that is inviscidly stable but viscously unstable."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..freq import compute_P0, split_blocks, polar_block_raw
from ..linalg import LinalgError, Subspace, principal_angles, stable_split
from ..system import SystemDefinition, BoundaryConditions

A_DIAG = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class ToyParams:
    a: float
    c_bar: complex = 0.0
    s: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.a < 1:
            raise ValueError("a must lie in [0, 1)")

    @classmethod
    def from_viscosities(cls, mu: float, nu: float, **kw) -> "ToyParams":
        return cls(a=abs(nu - mu) / (nu + mu), **kw)

    @property
    def B(self) -> np.ndarray:
        return np.array([[1.0, self.a], [self.a, 1.0]])


def toy_matrices(a: float):
    return A_DIAG.copy(), np.array([[1.0, a], [a, 1.0]])


def toy_system(params: ToyParams) -> SystemDefinition:
    """The system with tangential coordinate y first and normal coordinate x last."""
    A, B = toy_matrices(params.a)
    Bs = np.zeros((2, 2, 2, 2))
    Bs[0, 0] = B
    Bs[1, 1] = B
    return SystemDefinition(
        N=2, Nprime=2, d=2,
        A0=lambda u: np.eye(2),
        A=lambda u: [np.eye(2), A],
        B=lambda u: Bs,
        S=(None if params.s is None else (lambda u: np.diag([1.0, params.s]))),
        state_domain=(-np.ones(2), np.ones(2)),
        name="toy", linear=True,
    )


def stable_eigvec(a: float):
    """Unit stable eigenvector of B^-1 A and its eigenvalue."""
    A, B = toy_matrices(a)
    w, V = np.linalg.eig(np.linalg.solve(B, A))
    k = int(np.argmin(w.real))
    h = V[:, k] / np.linalg.norm(V[:, k])
    return h.astype(complex), complex(w[k])


def toy_boundary(params: ToyParams) -> BoundaryConditions:
    """u + Gamma dx u = 0 with Gamma chosen so that the inviscid limit reads u1 = c_bar u2."""
    h, mu = stable_eigvec(params.a)
    target = np.array([params.c_bar, 1.0], dtype=complex)
    Gam = np.outer((target - h) / mu, h.conj())
    # (I + Gam B^-1 A) h = target
    A, B = toy_matrices(params.a)
    img = h + Gam @ np.linalg.solve(B, A) @ h
    if np.linalg.norm(img - target) > 1e-10 * (1 + np.linalg.norm(target)):
        raise LinalgError("boundary synthesis is singular")
    return BoundaryConditions(Gamma1=np.zeros((0, 0)), Gamma2=np.zeros((0, 2)), Kd=Gam, K0=np.eye(2))


def toy_profile_exact(a: float, ubar, hvec, z):
    """w(z) = ubar + exp(z B^-1 A) h for h in the stable space."""
    A, B = toy_matrices(a)
    from scipy.linalg import expm
    return np.asarray(ubar) + (expm(z * np.linalg.solve(B, A)) @ hvec).real


def b_bar(a: float) -> float:
    return (2 + np.sqrt(4 - a * a)) / a


def reduced_symbol(sigma_hat: complex, a: float) -> np.ndarray:
    """Leading part of H / rho^2 on the curve zeta = (-rho + rho^2 tau_hat, rho, rho^2 gamma_hat)."""
    A, B = toy_matrices(a)
    return -sigma_hat * A - A @ B


def b_of(H: np.ndarray) -> complex:
    """Ratio x/y of the stable eigenvector (x, y) of a 2x2 matrix."""
    Em, _, _ = stable_split(H)
    x, y = Em.basis[:, 0]
    return complex(x / y)


def locus_frequency(sigma_hat: complex, rho: float):
    return (-rho + rho ** 2 * sigma_hat.imag, np.array([rho]), rho ** 2 * sigma_hat.real)


def b_hat(sys, sigma_hat: complex, rho: float) -> complex:
    _, H, _, _ = split_blocks(sys, np.zeros(2), locus_frequency(sigma_hat, rho))
    return b_of(H / rho ** 2)


def c_hat(sys, bc, prof, report, sigma_hat: complex, rho: float) -> complex:
    from ..profiles import reduced_boundary_operator
    G, _ = reduced_boundary_operator(sys, prof, bc, locus_frequency(sigma_hat, rho), report=report)
    r = G.reshape(-1)
    return complex(-r[1] / r[0])


@dataclass
class LocusPoint:
    rho: float
    sigma_hat: complex
    zeta: tuple
    gamma: float
    D: float
    residual: float
    iterations: int


def toy_instability_locus(params: ToyParams, rho_values, sigma0: complex = 1.0, maxit: int = 50,
                          h: float = 1e-5) -> list:
    """Newton solve of b(sigma_hat, rho) = c(sigma_hat, rho) for each rho, then the full Evans check."""
    from ..evans import LayerProblem, evans
    from ..profiles import constant_profile, check_transversality
    if params.a <= 0:
        raise ValueError("needs a > 0")
    sys = toy_system(params)
    bc = toy_boundary(params)
    prof = constant_profile(sys, np.zeros(2))
    rep = check_transversality(sys, prof, bc)
    out = []
    for rho in rho_values:
        f = lambda s: b_hat(sys, s, rho) - c_hat(sys, bc, prof, rep, s, rho)
        s = complex(sigma0)
        fs = f(s)
        it = 0
        for it in range(1, maxit + 1):
            df = (f(s + h) - f(s - h)) / (2 * h)
            step = fs / df
            s = s - step
            fs = f(s)
            # both b and c are computed to about 1e-11, which bounds attainable accuracy
            if abs(step) < 1e-9 * (1 + abs(s)) or abs(fs) < 1e-11:
                break
        else:
            raise LinalgError(f"Newton did not converge at rho = {rho}")
        zeta = locus_frequency(s, rho)
        D = evans(LayerProblem(sys, prof), bc, zeta).D_value
        out.append(LocusPoint(rho, s, (zeta[0], tuple(zeta[1]), zeta[2]), zeta[2], D, abs(fs), it))
    return out


def gamma_exponent(points) -> float:
    r = np.log([p.rho for p in points])
    g = np.log([p.gamma for p in points])
    return float(np.polyfit(r, g, 1)[0])


BASE_CHECK_ZETA = (-1 / np.sqrt(2), np.array([1 / np.sqrt(2)]), 0.0)


def toy_Eminus_limits(params: ToyParams, small=(1e-3, 1e-4, 1e-5)) -> dict:
    """Limits of E-(H-check) at the glancing-free double root along the gamma and rho directions."""
    sys = toy_system(params)
    tau, eta, _ = BASE_CHECK_ZETA
    u = np.zeros(2)
    gam_lims = []
    for g in small:
        n = np.sqrt(tau ** 2 + eta @ eta + g ** 2)
        gam_lims.append(stable_split(polar_block_raw(sys, u, (tau / n, eta / n, g / n), 0.0))[0])
    rho_lims = []
    for r in small:
        rho_lims.append(stable_split(polar_block_raw(sys, u, (tau, eta, 0.0), r))[0])
    E_gamma, E_rho = gam_lims[-1], rho_lims[-1]
    # closed-form references: incoming eigenspace and negative space of B_flat = -A B
    A, B = toy_matrices(params.a)
    E_in = Subspace(np.array([[1.0], [0.0]]))
    E_flat = stable_split(-A @ B)[0]
    angle = float(principal_angles(E_gamma, E_rho).max())
    Bsharp = B
    return {
        "E_gamma": E_gamma, "E_rho": E_rho, "angle": angle,
        "E_incoming": E_in, "E_flat": E_flat,
        "gamma_path_error": float(principal_angles(E_gamma, E_in).max()),
        "rho_path_error": float(principal_angles(E_rho, E_flat).max()),
        "rho_path_drift": float(principal_angles(rho_lims[-2], rho_lims[-1]).max()),
        "incoming_invariant_under_Bsharp": bool(abs(Bsharp[1, 0]) == 0),
    }


def re_SB_min(a: float, s: float) -> float:
    S = np.diag([1.0, s])
    _, B = toy_matrices(a)
    M = S @ B
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def window_formula(a: float) -> tuple:
    """Roots of 4 s = a^2 (1 + s)^2."""
    disc = np.sqrt(1 - a * a)
    return ((2 - a * a) - 2 * disc) / (a * a), ((2 - a * a) + 2 * disc) / (a * a)


def toy_symmetrizer_window(a: float) -> dict:
    """Interval of s for which S = diag(1, s) commutes with A and makes Re(S B) positive."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    f = lambda s: re_SB_min(a, s)
    # Re(S B) is positive at s = 1 and fails at both ends of (0, inf)
    lo = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
    hi_end = 2.0
    while f(hi_end) > 0:
        hi_end *= 2
    hi = brentq(f, 1.0, hi_end, xtol=1e-14, rtol=1e-15)
    flo, fhi = window_formula(a)
    return {"s_min": lo, "s_max": hi, "formula": (flo, fhi),
            "agreement": max(abs(lo - flo), abs(hi - fhi)),
            "max_dissipative_c2": hi}
