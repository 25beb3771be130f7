"""Isentropic viscous MHD in the symmetric variables (log-density, velocity, v = H / sqrt(rho))."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from ..classify import ClassificationError, find_roots, glancing_data, classify_glancing, coupling_matrix
from ..system import SystemDefinition, CharacteristicBoundaryError, BoundaryConditions

LABELS = ("-f", "-s", "-2", "0", "+2", "+s", "+f")


@dataclass(frozen=True)
class MhdState:
    rho: float
    u: tuple
    H: tuple
    c2: float = 1.0
    nu: float = 1.0
    mu: float = 1.0
    p: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        object.__setattr__(self, "H", tuple(float(x) for x in self.H))
        if len(self.u) != 3 or len(self.H) != 3:
            raise ValueError("u and H must be 3-vectors")
        for name in ("rho", "c2", "nu", "mu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def uvec(self) -> np.ndarray:
        return np.asarray(self.u)

    @property
    def Hvec(self) -> np.ndarray:
        return np.asarray(self.H)

    @property
    def v(self) -> np.ndarray:
        return self.Hvec / np.sqrt(self.rho)

    @property
    def c(self) -> float:
        return float(np.sqrt(self.c2))

    @property
    def delta(self) -> float:
        return float(self.c / np.sqrt(self.c2 + self.v @ self.v))

    @property
    def pressure(self) -> float:
        # isothermal closure unless a pressure is supplied
        return float(self.c2 * self.rho if self.p is None else self.p)

    def vector(self) -> np.ndarray:
        return np.concatenate([[np.log(self.rho)], self.uvec, self.v])

    def shifted(self, sigma: float) -> "MhdState":
        """Same state seen in a frame moving with normal speed sigma."""
        u = self.uvec.copy()
        u[2] -= sigma
        return replace(self, u=tuple(u))

    @classmethod
    def from_dict(cls, d: dict) -> "MhdState":
        keys = {"rho", "u", "H", "c2", "nu", "mu", "p"}
        return cls(**{k: d[k] for k in keys if k in d})


def symbol_blocks(c2: float, U) -> list:
    """The three matrices A_j at the state vector U = (log rho, u, v)."""
    U = np.asarray(U, dtype=float)
    u, v = U[1:4], U[4:7]
    out = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        A = u[j] * np.eye(7)
        A[0, 1:4] = e
        A[1:4, 0] = c2 * e
        A[1:4, 4:7] = np.outer(e, v) - v[j] * np.eye(3)
        A[4:7, 1:4] = np.outer(v, e) - v[j] * np.eye(3)
        out.append(A)
    return out


def viscosity_blocks(nu: float, mu: float, U) -> np.ndarray:
    rho = float(np.exp(np.asarray(U, dtype=float)[0]))
    D = np.diag([0.0] + [nu / rho] * 3 + [mu] * 3)
    B = np.zeros((3, 3, 7, 7))
    for j in range(3):
        B[j, j] = D
    return B


def mhd_system(state: MhdState, box: float = 0.1) -> SystemDefinition:
    """N = 7, N' = 6 system with symmetrizer diag(c^2, I, I)."""
    c2, nu, mu = state.c2, state.nu, state.mu
    U0 = state.vector()
    span = box * np.maximum(1.0, np.abs(U0))
    S = np.diag([c2] + [1.0] * 6)
    return SystemDefinition(
        N=7, Nprime=6, d=3,
        A0=lambda U: np.eye(7),
        A=lambda U: symbol_blocks(c2, U),
        B=lambda U: viscosity_blocks(nu, mu, U),
        S=lambda U: S,
        state_domain=(U0 - span, U0 + span),
        name="mhd",
    )


def mhd_symbol(state: MhdState, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return sum(x * A for x, A in zip(xi, symbol_blocks(state.c2, state.vector())))


def fast_slow_speeds(state: MhdState, xi) -> tuple:
    xi = np.asarray(xi, dtype=float)
    n = np.linalg.norm(xi)
    xh = xi / n
    v = state.v
    b2 = float(np.sum(np.cross(xh, v) ** 2))
    s = state.c2 + v @ v
    disc = np.sqrt((state.c2 - v @ v) ** 2 + 4 * state.c2 * b2)
    cf2 = 0.5 * (s + disc)
    cs2 = max(0.5 * (s - disc), 0.0)
    return float(np.sqrt(cf2)), float(np.sqrt(cs2))


def mhd_wave_speeds(state: MhdState, xi) -> dict:
    """Seven labelled eigenvalues plus the mismatch against a raw eigensolve."""
    xi = np.asarray(xi, dtype=float)
    n = np.linalg.norm(xi)
    if n == 0:
        raise ValueError("xi must be nonzero")
    cf, cs = fast_slow_speeds(state, xi)
    l0 = float(state.uvec @ xi)
    vx = float(state.v @ xi)
    lam = {"0": l0, "+s": l0 + cs * n, "-s": l0 - cs * n, "+2": l0 + vx, "-2": l0 - vx,
           "+f": l0 + cf * n, "-f": l0 - cf * n}
    raw = np.sort(np.linalg.eigvals(mhd_symbol(state, xi)).real)
    mismatch = float(np.abs(np.sort(list(lam.values())) - raw).max())
    return {"eigenvalues": lam, "mismatch": mismatch}


def _tangent_frame(state: MhdState, xi):
    xi = np.asarray(xi, dtype=float)
    xh = xi / np.linalg.norm(xi)
    v = state.v
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("needs v != 0")
    if abs(v @ xh) > 1e-10 * nv:
        raise ValueError("xi must be orthogonal to v")
    if abs(nv - state.c) < 1e-12:
        raise ValueError("needs |v| != c")
    return xh, v, nv


def mhd_regular_basis(state: MhdState, xi):
    """Eigenvectors (e0, e+1, e-1, e+2, e-2) as columns and their S-duals as rows."""
    xh, v, nv = _tangent_frame(state, xi)
    dl, c2 = state.delta, state.c2
    w = np.cross(xh, v)
    e0 = np.concatenate([[0.0], np.zeros(3), xh])
    cols = [e0]
    for sgn in (1, -1):
        cols.append(dl / (np.sqrt(2) * nv) * np.concatenate([[-nv ** 2 / c2], -sgn * v / dl, v]))
    for sgn in (1, -1):
        cols.append(1 / (np.sqrt(2) * nv) * np.concatenate([[0.0], -sgn * w, w]))
    E = np.column_stack(cols)
    S = np.diag([c2] + [1.0] * 6)
    return E, E.T @ S


BASIS_LABELS = ("0", "+1", "-1", "+2", "-2")


def mhd_coupling(state: MhdState, xi) -> np.ndarray:
    """B# in the basis of mhd_regular_basis, for the viscosity at unit |xi|."""
    E, L = mhd_regular_basis(state, xi)
    xh = np.asarray(xi, dtype=float) / np.linalg.norm(xi)
    B = np.einsum("j,k,jkab->ab", xh, xh, viscosity_blocks(state.nu, state.mu, state.vector()))
    return L @ B @ E


def coupling_closed_form(state: MhdState) -> dict:
    d2 = state.delta ** 2
    return {"1,-1": d2 * state.mu / 2 - state.nu / (2 * state.rho),
            "2,-2": state.mu / 2 - state.nu / (2 * state.rho)}


def manifold_directions(state: MhdState) -> dict:
    """Representative points of the two singular manifolds, chosen so that the
    normal direction e3 moves off them."""
    v = state.v
    vh = v / np.linalg.norm(v)
    e3 = np.array([0.0, 0.0, 1.0])
    cr = np.cross(v, e3)
    if np.linalg.norm(cr) < 1e-12:
        cr = np.array([1.0, 0.0, 0.0])
    return {"parallel": vh, "orthogonal": cr / np.linalg.norm(cr)}


def noncharacteristic(state: MhdState, tol: float = 1e-12) -> bool:
    e3 = np.array([0.0, 0.0, 1.0])
    cf, cs = fast_slow_speeds(state, e3)
    u3, v3 = state.u[2], state.v[2]
    bad = [0.0, v3, -v3, cs, -cs, cf, -cf]
    return all(abs(u3 - b) > tol for b in bad)


def closed_form_glancing(state: MhdState) -> dict:
    u3, v3, dl = state.u[2], state.v[2], state.delta
    par_thr = [v3, -v3]
    orth_thr = [0.0, v3, -v3, dl * v3, -dl * v3]
    return {
        "parallel": {"nonglancing": all(u3 != t for t in par_thr), "thresholds": par_thr},
        "orthogonal": {"nonglancing": all(u3 != t for t in orth_thr), "thresholds": orth_thr,
                       "totally_nonglancing": abs(u3) > abs(v3)},
    }


def mhd_glancing_report(state: MhdState, check_noncharacteristic: bool = True) -> dict:
    """Glancing classification of the multiple roots on both singular manifolds."""
    if check_noncharacteristic and not noncharacteristic(state):
        raise CharacteristicBoundaryError("characteristic boundary for this state")
    sys = mhd_system(state)
    U = state.vector()
    out = {}
    closed = closed_form_glancing(state)
    for name, xi in manifold_directions(state).items():
        entries = []
        for root in find_roots(sys, U, xi):
            if root.m < 2:
                continue
            br = glancing_data(root)
            entries.append({
                "lambda": root.lam, "m": root.m, "verdict": classify_glancing(root, br),
                "nu": [b.nu for b in br], "beta": [b.beta for b in br],
                "types": [b.mode_type for b in br],
            })
        verdicts = [e["verdict"] for e in entries]
        out[name] = {
            "xi": xi, "roots": entries,
            "nonglancing": all(v != "glancing" for v in verdicts),
            "totally_nonglancing": bool(verdicts) and all(v.startswith("totally") for v in verdicts),
            "closed_form": closed[name],
        }
    return out


def incoming_count(state: MhdState, manifold: str) -> tuple:
    """(number of incoming branches, any glancing) over the multiple roots of one manifold."""
    sys = mhd_system(state)
    xi = manifold_directions(state)[manifold]
    n_in, glancing = 0, False
    for root in find_roots(sys, state.vector(), xi):
        if root.m < 2:
            continue
        for b in glancing_data(root):
            if b.nu > 1:
                glancing = True
            elif b.beta > 0:
                n_in += 1
    return n_in, glancing


def with_normal_velocity(state: MhdState, u3: float) -> MhdState:
    u = state.uvec.copy()
    u[2] = u3
    return replace(state, u=tuple(u))


def glancing_flips(state: MhdState, manifold: str, lo: float, hi: float, n: int = 81,
                   tol: float = 1e-6) -> list:
    """Values of u3 in [lo, hi] where the incoming-branch count of the multiple roots changes.

    The count is sampled on a uniform grid and every change is located by bisection to tol.
    """
    def count(u3):
        try:
            return incoming_count(with_normal_velocity(state, u3), manifold)[0]
        except ClassificationError:
            # a branch that is flat to all resolved orders sits on a threshold
            return None

    grid, vals = [], []
    for x in np.linspace(lo, hi, n):
        c = count(x)
        if c is not None:
            grid.append(x)
            vals.append(c)
    flips = []
    for a, b, ca, cb in zip(grid, grid[1:], vals, vals[1:]):
        if ca == cb:
            continue
        while b - a > tol:
            m = 0.5 * (a + b)
            cm = count(m)
            if cm is None:
                m += 0.25 * (b - a)
                cm = count(m)
            if cm == ca:
                a = m
            else:
                b, cb = m, cm
        flips.append(0.5 * (a + b))
    return flips


def mhd_boundary(state: MhdState) -> BoundaryConditions:
    """Dirichlet data on every incoming hyperbolic field and on all parabolic fields."""
    G1 = np.ones((1, 1)) if state.u[2] > 0 else np.zeros((0, 1))
    return BoundaryConditions(Gamma1=G1, Gamma2=np.eye(6), Kd=np.zeros((0, 6)))


# shocks ---------------------------------------------------------------

def rh_residual(left: MhdState, right: MhdState, sigma: float) -> np.ndarray:
    """Seven jump relations across a planar front with normal e3 and speed sigma."""
    def flux(s: MhdState):
        rho, u, H = s.rho, s.uvec, s.Hvec
        w = u[2] - sigma
        mass = rho * w
        mom = rho * u * w - H[2] * H
        mom[2] += s.pressure + 0.5 * H @ H
        ind = w * H[:2] - H[2] * u[:2]
        return np.concatenate([[mass], mom, ind, [H[2]]])
    return flux(right) - flux(left)


def _normal_speeds(s: MhdState):
    return fast_slow_speeds(s, np.array([0.0, 0.0, 1.0]))


def lax_inequalities(left: MhdState, right: MhdState, sigma: float, family: str) -> bool:
    cfl, csl = _normal_speeds(left)
    cfr, csr = _normal_speeds(right)
    ul, ur = left.u[2], right.u[2]
    vl, vr = abs(left.v[2]), abs(right.v[2])
    if family == "fast":
        return bool(ul + vl < sigma < ul + cfl and ur + cfr < sigma)
    if family == "slow":
        return bool(ul - csl < sigma < ul + csl and ur + csr < sigma < ur + vr)
    raise ValueError("family must be 'fast' or 'slow'")


def lax_shock_check(left: MhdState, right: MhdState, sigma: float, family: str,
                    rh_tol: float = 1e-8) -> dict:
    res = rh_residual(left, right, sigma)
    scale = max(1.0, left.rho * (1 + np.abs(left.uvec).max()) ** 2 + left.Hvec @ left.Hvec)
    rh = float(np.abs(res).max())
    rep = {"family": family, "sigma": sigma, "rh_residual": rh, "is_shock": rh <= rh_tol * scale}
    rep["lax"] = lax_inequalities(left, right, sigma, family)
    sides = {"left": left.shifted(sigma), "right": right.shifted(sigma)}
    if family == "fast":
        tn = {}
        for k, s in sides.items():
            try:
                g = mhd_glancing_report(s)
                tn[k] = bool(g["parallel"]["totally_nonglancing"] and g["orthogonal"]["totally_nonglancing"])
            except CharacteristicBoundaryError:
                tn[k] = False
        rep["totally_nonglancing"] = tn
        rep["hypotheses_satisfied"] = bool(rep["is_shock"] and rep["lax"] and all(tn.values()))
    else:
        sub = {k: abs(s.u[2]) < abs(s.v[2]) for k, s in sides.items()}
        coup = {}
        for k, s in sides.items():
            xi = manifold_directions(s)["orthogonal"]
            coup[k] = float(mhd_coupling(s, xi)[3, 4])
        rep["subalfvenic"] = sub
        rep["B22_coupling"] = coup
        rep["decoupling_fails"] = bool(rep["lax"] and all(sub.values())
                                       and all(abs(c) > 1e-10 for c in coup.values()))
    return rep


def _state_from(vec, template: MhdState, H3: float) -> MhdState:
    rho = float(np.exp(vec[0]))
    return replace(template, rho=rho, u=tuple(vec[1:4]), H=(vec[4], vec[5], H3))


def weak_shock(left: MhdState, family: str, eps: float = 0.05, side: int = 1) -> tuple:
    """Right state and speed of a weak Lax shock of the given family.

    Starts from the characteristic direction at the left state and solves
    the jump relations by least squares with the amplitude pinned.
    """
    e3 = np.array([0.0, 0.0, 1.0])
    A = mhd_symbol(left, e3)
    w, V = np.linalg.eig(A)
    w = w.real
    cf, cs = _normal_speeds(left)
    target = left.u[2] + side * (cf if family == "fast" else cs)
    k = int(np.argmin(np.abs(w - target)))
    r = V[:, k].real
    # map (log rho, u, v) direction to (log rho, u, H_t)
    def to_prim(U):
        rho = np.exp(U[0])
        return np.concatenate([[U[0]], U[1:4], U[4:6] * np.sqrt(rho)])
    base = to_prim(left.vector())
    dU = left.vector() + eps * r
    guess = to_prim(dU)
    # fixed orientation, so the sign of eps picks the side of the Hugoniot curve
    rdir = to_prim(left.vector() + abs(eps) * r) - base
    rdir /= np.linalg.norm(rdir)
    H3 = left.H[2]

    def F(x):
        right = _state_from(x[:6], left, H3)
        res = rh_residual(left, right, x[6])[:6]
        return np.concatenate([res, [rdir @ (x[:6] - base) - eps]])

    x0 = np.concatenate([guess, [target]])
    sol = least_squares(F, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    right = _state_from(sol.x[:6], left, H3)
    return right, float(sol.x[6])
