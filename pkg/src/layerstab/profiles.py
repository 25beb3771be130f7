"""Layer profiles, bounded solution spaces at zero frequency, transversality and the reduced boundary operator."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .freq import compute_P0, symbol_terms, first_order_pencil, split_blocks, _raw
from .linalg import LinalgError, orthonormalize, stable_split, Subspace
from .system import SystemDefinition, BoundaryConditions

START_FACTOR = 14.0
RTOL = 1e-10
FAST_CAP = 12.0
ATOL = 1e-13


class ProfileError(LinalgError):
    pass


def stable_basis_real(P0: np.ndarray) -> np.ndarray:
    """Real orthonormal basis of the stable space of a real matrix."""
    P0 = np.asarray(P0)
    if np.iscomplexobj(P0) and np.abs(P0.imag).max() > 0:
        T, Z, k = sla.schur(P0, output="complex", sort="lhp")
        return Z[:, :k]
    T, Z, k = sla.schur(P0.real, output="real", sort="lhp")
    return Z[:, :k]


def profile_Vbar(sys: SystemDefinition, u) -> np.ndarray:
    """Top block of the P-part of V at zeta = 0: (-(A11)^-1 A12 P0^-1 ; P0^-1)."""
    n1 = sys.n1
    Ad = sys.eval_A(u)[-1]
    P0 = compute_P0(sys, u)
    P0i = np.linalg.inv(P0)
    top = -np.linalg.solve(Ad[:n1, :n1], Ad[:n1, n1:] @ P0i) if n1 else np.zeros((0, sys.Nprime))
    return np.vstack([top, P0i])


@dataclass
class ProfileSolution:
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    u_bar: np.ndarray
    delta: float
    Zmax: float
    constant: bool = False
    coords: Optional[np.ndarray] = None
    fit_residual: float = 0.0
    _sol: Optional[object] = field(default=None, repr=False)
    _tail: Optional[tuple] = field(default=None, repr=False)

    def state(self, z: float):
        """(w(z), dz w2(z)) for any z >= 0."""
        if self.constant:
            return self.u_bar.copy(), np.zeros(self.derivs.shape[1])
        if z <= self.Zmax:
            X = self._sol.sol(z)
            n = self.u_bar.size
            return X[:n].real, X[n:].real
        Vbar, R, M, c = self._tail
        y = np.real(R @ (sla.expm(M * (z - self.Zmax)) @ c))
        return (self.u_bar + (Vbar @ y).real), y

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            n = self.values.shape[1]
            wr.writerow(["z"] + [f"w{i}" for i in range(n)])
            for z, w in zip(self.grid, self.values):
                wr.writerow(["%.17g" % z] + ["%.17g" % x for x in w])


def load_profile_csv(path) -> tuple:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return data[:, 0], data[:, 1:]


def _dB_dd(sys, w, dw):
    """Directional state derivative of B_dd along dw (central difference)."""
    if sys.linear:
        return np.zeros((sys.N, sys.N))
    dw = np.real(dw)
    nd = np.linalg.norm(dw)
    if nd == 0:
        return np.zeros((sys.N, sys.N))
    eps = 1e-6 * (1 + np.linalg.norm(w)) / nd
    return np.real(sys.eval_B(w + eps * dw)[-1, -1] - sys.eval_B(w - eps * dw)[-1, -1]) / (2 * eps)


def profile_rhs(sys: SystemDefinition, w, y):
    """Right-hand side of the first-order profile system for (w, dz w2); real states stay real."""
    n1 = sys.n1
    Ad = np.real(sys.eval_A(w)[-1])
    B22 = np.real(sys.eval_B(w)[-1, -1][n1:, n1:])
    w1p = -np.linalg.solve(Ad[:n1, :n1], Ad[:n1, n1:] @ y) if n1 else np.zeros(0)
    wp = np.concatenate([w1p, y])
    dB = _dB_dd(sys, w, wp)[n1:, n1:]
    rhs = Ad[n1:, :n1] @ w1p + Ad[n1:, n1:] @ y - dB @ y
    return wp, np.linalg.solve(B22, rhs)


def _restricted(P0, R):
    """Matrix of P0 on its invariant subspace spanned by the columns of R."""
    return np.linalg.lstsq(R, P0 @ R, rcond=None)[0]


def _carry_out(P0, R, L):
    """exp(P0 L) R computed inside the invariant subspace, so unstable round-off is not amplified."""
    return np.real(R @ sla.expm(_restricted(P0, R) * L))


def _start_length(P0, Zmax=None):
    """Slowest decay rate and start point of the backward shooting.

    The window is 14 slow e-foldings, capped so that the fastest stable mode grows by at
    most e^12 while integrating back to z = 0 (noise in it would otherwise swamp the orbit).
    """
    re = np.linalg.eigvals(P0).real
    rates = -re[re < 0]
    if not rates.size:
        return np.inf, 0.0
    delta = float(rates.min())
    if Zmax is not None:
        return delta, float(Zmax)
    return delta, min(START_FACTOR / delta, FAST_CAP / float(rates.max()))


def solve_layer_profile(sys: SystemDefinition, bc: BoundaryConditions, u_bar, initial_guess=None,
                        upsilon: Optional[Callable] = None, Zmax: Optional[float] = None,
                        tol: float = 1e-8) -> ProfileSolution:
    """Shoot on the stable manifold of u_bar so that the boundary relation holds at z = 0.

    The boundary relation is upsilon(w, dz w2) = 0; by default
    Gamma(0) (w, dz w2) - g with Gamma and g taken from bc.
    """
    u_bar = np.asarray(u_bar, dtype=float)
    N, Np = sys.N, sys.Nprime
    P0 = compute_P0(sys, u_bar)
    R = stable_basis_real(P0)
    k = R.shape[1]
    delta, L = _start_length(P0, Zmax)
    if upsilon is None:
        Gam = bc.matrix(sys)
        g = bc.data()
        upsilon = lambda w, y: Gam @ np.concatenate([w, y]) - g
    Vbar = profile_Vbar(sys, u_bar)
    if np.linalg.norm(upsilon(u_bar, np.zeros(Np))) < 1e-13 or k == 0:
        res = np.linalg.norm(upsilon(u_bar, np.zeros(Np)))
        if res > tol:
            raise ProfileError("no stable directions and the end state violates the boundary relation")
        grid = np.array([0.0, 1.0])
        return ProfileSolution(grid, np.tile(u_bar, (2, 1)), np.zeros((2, Np)), u_bar, delta,
                               Zmax=0.0, constant=True, coords=np.zeros(k))
    # coordinates are linearized amplitudes at z = 0, carried out to the start point
    Rr = _carry_out(P0, R, L)

    def rhs(z, X):
        wp, yp = profile_rhs(sys, X[:N], X[N:])
        return np.real(np.concatenate([wp, yp]))

    def blowup(z, X):
        return 1e8 - np.abs(X).max()
    blowup.terminal = True

    def shoot(c, dense=False):
        r = Rr @ c
        X0 = np.concatenate([u_bar + (Vbar @ r).real, r.real])
        return solve_ivp(rhs, (L, 0.0), X0, method="RK45", rtol=RTOL, atol=ATOL,
                         dense_output=dense, events=blowup)

    def split(r):
        return np.concatenate([r.real, r.imag]) if np.iscomplexobj(r) else r

    n_res = split(upsilon(u_bar, np.zeros(Np))).size

    def residual(c):
        s = shoot(c)
        if s.status != 0:
            return 1e6 * np.ones(n_res)
        X = s.y[:, -1]
        return split(upsilon(X[:N], X[N:]))

    c0 = np.zeros(k) if initial_guess is None else np.asarray(initial_guess, dtype=float)
    method = "lm" if residual(c0).size >= k else "trf"
    sol = least_squares(residual, c0, xtol=1e-15, ftol=1e-15, gtol=1e-15, method=method)
    res = float(np.linalg.norm(residual(sol.x)))
    if res > tol:
        raise ProfileError(f"shooting did not converge (boundary residual {res:.2e})")
    s = shoot(sol.x, dense=True)
    if s.status != 0:
        raise ProfileError("profile left the admissible region")
    grid = np.linspace(0.0, L, 401)
    X = s.sol(grid)
    vals, ders = X[:N].T, X[N:].T
    dist = np.linalg.norm(vals - u_bar, axis=1)
    sel = (grid > L / 3) & (dist > 0)
    fit_rate, fit_res = delta, 0.0
    if sel.sum() > 3:
        coef = np.polyfit(grid[sel], np.log(dist[sel]), 1)
        fit_rate = float(-coef[0])
        fit_res = float(abs(fit_rate - delta) / delta)
    prof = ProfileSolution(grid, vals, ders, u_bar, fit_rate, Zmax=L, constant=False, coords=sol.x,
                           fit_residual=fit_res)
    prof._sol = s
    M = _restricted(P0, R)
    prof._tail = (Vbar, R, M, sla.expm(M * L) @ sol.x)
    return prof


def manifold_boundary_data(sys: SystemDefinition, bc: BoundaryConditions, u_bar, coords,
                           Zmax: Optional[float] = None) -> np.ndarray:
    """Boundary data g = Gamma(0) (w(0), dz w2(0)) of an orbit on the stable manifold.

    coords are linearized amplitudes at z = 0 in the real stable basis; they are
    carried to the starting point Zmax by exp(P0 Zmax).  Profiles exist only for
    data on this manifold, so this produces consistent inputs for solve_layer_profile.
    """
    u_bar = np.asarray(u_bar, dtype=float)
    N = sys.N
    P0 = compute_P0(sys, u_bar)
    R = stable_basis_real(P0)
    c = np.atleast_1d(np.asarray(coords, dtype=float))
    if c.size != R.shape[1]:
        raise ProfileError(f"need {R.shape[1]} stable coordinates, got {c.size}")
    _, L = _start_length(P0, Zmax)
    r = _carry_out(P0, R, L) @ c
    X0 = np.concatenate([u_bar + np.real(profile_Vbar(sys, u_bar) @ r), r])
    rhs = lambda z, X: np.real(np.concatenate(profile_rhs(sys, X[:N], X[N:])))
    s = solve_ivp(rhs, (L, 0.0), X0, method="RK45", rtol=RTOL, atol=ATOL)
    if s.status != 0:
        raise ProfileError(f"orbit integration failed at z = {s.t[-1]:.4g}: {s.message}")
    X = s.y[:, -1]
    return bc.matrix(sys) @ X


def constant_profile(sys: SystemDefinition, u_bar) -> ProfileSolution:
    u_bar = np.asarray(u_bar, dtype=float)
    P0 = compute_P0(sys, u_bar)
    ev = np.linalg.eigvals(P0)
    neg = ev.real[ev.real < 0]
    delta = float(np.min(np.abs(neg))) if neg.size else np.inf
    return ProfileSolution(np.array([0.0, 1.0]), np.tile(u_bar, (2, 1)), np.zeros((2, sys.Nprime)),
                           u_bar, delta, Zmax=0.0, constant=True)


# linearization about a profile -------------------------------------------

def _state_deriv(sys, fn, w, v):
    if sys.linear:
        return 0.0
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    eps = 1e-6 * (1 + np.linalg.norm(w)) / nv
    return (fn(w + eps * v) - fn(w - eps * v)) / (2 * eps)


def profile_coefficients(sys: SystemDefinition, prof: ProfileSolution, z: float, zeta):
    """(A_tilde, M_tilde, B_dd) of the linearization about the profile at height z."""
    w, y = prof.state(z)
    At, Mt, Bdd = symbol_terms(sys, w, zeta)
    if prof.constant or sys.linear:
        return At, Mt, Bdd
    tau, eta, gamma = _raw(zeta)
    n1, N, d = sys.n1, sys.N, sys.d
    wp, _ = profile_rhs(sys, w, y)
    Bdd_of = lambda x: sys.eval_B(x)[-1, -1]
    Ad_of = lambda x: sys.eval_A(x)[-1]
    dBw = _state_deriv(sys, Bdd_of, w, wp)
    eye = np.eye(N)

    def Cmat(zz):
        ww, yy = prof.state(zz)
        wwp, _ = profile_rhs(sys, ww, yy)
        return np.column_stack([_state_deriv(sys, Bdd_of, ww, eye[:, i]) @ wwp for i in range(N)])

    C = Cmat(z)
    hz = 1e-5 * (1 + z)
    Cp = (Cmat(z + hz) - Cmat(max(z - hz, 0.0))) / (hz + min(hz, z))
    EA = np.column_stack([_state_deriv(sys, Ad_of, w, eye[:, i]) @ wp for i in range(N)])
    At = At - dBw - C
    Mt = Mt + EA - Cp
    for j in range(d - 1):
        Bjd_of = lambda x, j=j: sys.eval_B(x)[j, -1]
        Bdj_of = lambda x, j=j: sys.eval_B(x)[-1, j]
        Cj = np.column_stack([_state_deriv(sys, Bjd_of, w, eye[:, i]) @ wp for i in range(N)])
        Mt = Mt - 1j * eta[j] * (_state_deriv(sys, Bdj_of, w, wp) + Cj)
    return At, Mt, Bdd


def profile_G(sys: SystemDefinition, prof: ProfileSolution, z: float, zeta) -> np.ndarray:
    L, R = first_order_pencil(sys, *profile_coefficients(sys, prof, z, zeta))
    return np.linalg.solve(L, R)


def integrate_basis(sys, prof, zeta, Y0: np.ndarray, z0: float, z1: float = 0.0,
                    orthonormalize_each: Optional[float] = None) -> np.ndarray:
    """Transport a basis through U' = G(z) U from z0 to z1 with periodic QR."""
    n, k = Y0.shape
    if k == 0 or z0 == z1:
        return Y0.astype(complex)
    step = orthonormalize_each if orthonormalize_each else max(z0 - z1, 1e-12)
    Y = Y0.astype(complex)
    z = z0
    while z > z1 + 1e-14:
        zn = max(z - step, z1)

        def rhs(t, x):
            M = x.view(complex).reshape(n, k)
            return (profile_G(sys, prof, t, zeta) @ M).reshape(-1).view(float)

        s = solve_ivp(rhs, (z, zn), Y.reshape(-1).view(float).copy(), method="RK45", rtol=RTOL, atol=ATOL)
        if s.status != 0 or not np.all(np.isfinite(s.y[:, -1])):
            raise ProfileError("integration of the solution basis failed")
        Y = np.ascontiguousarray(s.y[:, -1]).view(complex).reshape(n, k)
        Q, _ = np.linalg.qr(Y)
        if np.linalg.svd(Y, compute_uv=False)[-1] < 1e-14 * np.linalg.norm(Y):
            raise ProfileError("re-orthonormalization failed: basis collapsed")
        Y = Q
        z = zn
    return Y


@dataclass
class SolutionSpaces:
    Phi_H: np.ndarray
    Phi_P: np.ndarray

    @property
    def dim_S(self) -> int:
        return self.Phi_H.shape[1] + self.Phi_P.shape[1]

    @property
    def dim_S0(self) -> int:
        return self.Phi_P.shape[1]


def bounded_solution_spaces(sys: SystemDefinition, prof: ProfileSolution) -> SolutionSpaces:
    """Values at z = 0 of the bounded (Phi_H, Phi_P) and decaying (Phi_P) solutions at zeta = 0."""
    N, Np = sys.N, sys.Nprime
    u = prof.u_bar
    R = stable_basis_real(compute_P0(sys, u))
    VH = np.vstack([np.eye(N), np.zeros((Np, N))]).astype(complex)
    VP = np.vstack([profile_Vbar(sys, u), np.eye(Np)]) @ R
    if prof.constant:
        return SolutionSpaces(VH, orthonormalize(VP))
    zeta0 = (0.0, np.zeros(sys.d - 1), 0.0)
    step = 1.0 / prof.delta if np.isfinite(prof.delta) else None
    PhiP = integrate_basis(sys, prof, zeta0, VP, prof.Zmax, 0.0, step)
    PhiH = integrate_basis_raw(sys, prof, zeta0, VH, prof.Zmax, 0.0)
    return SolutionSpaces(PhiH, PhiP)


def integrate_basis_raw(sys, prof, zeta, Y0, z0, z1=0.0) -> np.ndarray:
    """Transport without re-orthonormalization (columns keep their identity)."""
    n, k = Y0.shape
    if k == 0 or z0 == z1:
        return Y0.astype(complex)

    def rhs(t, x):
        M = x.view(complex).reshape(n, k)
        return (profile_G(sys, prof, t, zeta) @ M).reshape(-1).view(float)

    s = solve_ivp(rhs, (z0, z1), Y0.astype(complex).reshape(-1).view(float).copy(), method="RK45",
                  rtol=RTOL, atol=ATOL)
    if s.status != 0:
        raise ProfileError("integration of the bounded solutions failed")
    return np.ascontiguousarray(s.y[:, -1]).view(complex).reshape(n, k)


@dataclass
class TransversalityReport:
    dim_S: int
    dim_S0: int
    cond_i_holds: bool
    cond_ii_holds: bool
    F_H: Subspace
    F_P: Subspace
    Gamma_red: np.ndarray
    R_0P: np.ndarray
    sigma_min_P: float
    Gamma_H: np.ndarray = field(repr=False, default=None)
    Gamma_P: np.ndarray = field(repr=False, default=None)
    gauge: str = "F_H is the orthogonal complement of F_P"

    @property
    def transversal(self) -> bool:
        return bool(self.cond_i_holds and self.cond_ii_holds)

    def to_dict(self) -> dict:
        from .system import _jsonable
        return _jsonable({
            "dim_S": self.dim_S, "dim_S0": self.dim_S0, "cond_i": self.cond_i_holds,
            "cond_ii": self.cond_ii_holds, "transversal": self.transversal,
            "Gamma_red": self.Gamma_red, "R_0P": self.R_0P, "sigma_min_P": self.sigma_min_P,
            "gauge": self.gauge,
        })


def check_transversality(sys: SystemDefinition, prof: ProfileSolution, bc: BoundaryConditions,
                         spaces: Optional[SolutionSpaces] = None, tol: float = 1e-8) -> TransversalityReport:
    if spaces is None:
        spaces = bounded_solution_spaces(sys, prof)
    Gam = bc.matrix(sys)
    Nb = Gam.shape[0]
    GH = Gam @ spaces.Phi_H
    GP = Gam @ spaces.Phi_P
    sP = np.linalg.svd(GP, compute_uv=False) if GP.shape[1] else np.array([np.inf])
    cond_i = bool(sP.min() > tol)
    full = np.hstack([GH, GP])
    sv = np.linalg.svd(full, compute_uv=False)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    cond_ii = rank == Nb
    FP = Subspace.span(GP) if GP.shape[1] else Subspace.zero(Nb)
    FH = FP.complement()
    Gred = FH.basis.conj().T @ GH
    R0P = -np.linalg.pinv(GP) @ GH if GP.shape[1] else np.zeros((0, GH.shape[1]))
    return TransversalityReport(spaces.dim_S, spaces.dim_S0, cond_i, cond_ii, FH, FP, Gred, R0P,
                                float(sP.min()), GH, GP)


def boundary_images(sys, prof, bc, zeta):
    """(Gamma_H(zeta), Gamma_P(zeta), H(zeta)) built from the low-frequency split."""
    tau, eta, gamma = _raw(zeta)
    VI, H, VII, P = split_blocks(sys, prof.u_bar, (tau, eta, gamma))
    Em, _, _ = stable_split(P)
    VP = VII @ Em.basis
    if prof.constant:
        PhiH, PhiP = VI, VP
    else:
        Z = prof.Zmax
        PhiH = integrate_basis_raw(sys, prof, (tau, eta, gamma), VI @ sla.expm(Z * H), Z, 0.0)
        step = 1.0 / prof.delta if np.isfinite(prof.delta) else None
        PhiP = integrate_basis(sys, prof, (tau, eta, gamma), VP, Z, 0.0, step)
    Gam = bc.matrix(sys, eta)
    return Gam @ PhiH, Gam @ PhiP, H


def reduced_boundary_operator(sys: SystemDefinition, prof: ProfileSolution, bc: BoundaryConditions,
                              zeta, report: Optional[TransversalityReport] = None, tol: float = 1e-8,
                              return_H: bool = False):
    """Gamma_red(zeta) and F_P(zeta), continuous in zeta and equal to the zero-frequency data at 0."""
    if report is None:
        report = check_transversality(sys, prof, bc)
    if not report.transversal:
        raise ProfileError("profile is not transversal")
    GH, GP, H = boundary_images(sys, prof, bc, zeta)
    sP = np.linalg.svd(GP, compute_uv=False) if GP.shape[1] else np.array([np.inf])
    if sP.min() <= tol:
        raise ProfileError("splitting degenerates: Gamma_P lost rank")
    FP = Subspace.span(GP) if GP.shape[1] else Subspace.zero(GH.shape[0])
    Q0 = report.F_H.basis
    Q = Q0 - FP.basis @ (FP.basis.conj().T @ Q0)
    Q, _ = np.linalg.qr(Q)
    # align with the zero-frequency gauge
    U, _, Vh = np.linalg.svd(Q.conj().T @ Q0)
    Q = Q @ (U @ Vh)
    if return_H:
        return Q.conj().T @ GH, FP, H
    return Q.conj().T @ GH, FP
