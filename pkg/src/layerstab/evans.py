"""Stable bundles and the Evans, Lopatinski, reduced and rescaled stability determinants; grid scans."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .freq import Frequency, PolarFrequency, assemble_G, compute_H0, polar_block_raw, _raw, validity_radius
from .linalg import LinalgError, Subspace, null_space, stable_split, subspace_det, orthonormalize
from .profiles import (ProfileSolution, TransversalityReport, check_transversality, integrate_basis,
                       reduced_boundary_operator)
from .system import SystemDefinition, BoundaryConditions


class EvansError(LinalgError):
    pass


@dataclass
class LayerProblem:
    """A system linearized about a layer profile (constant profiles use frozen coefficients)."""

    sys: SystemDefinition
    profile: ProfileSolution

    @property
    def u_bar(self) -> np.ndarray:
        return self.profile.u_bar


@dataclass
class StableBundleSample:
    zeta: tuple
    Eminus: Subspace
    method: str
    conditioning: float


@dataclass
class EvansSample:
    zeta: tuple
    D_value: float
    variant: str
    diagnostics: dict = field(default_factory=dict)


def _zeta_tuple(zeta):
    tau, eta, gamma = _raw(zeta)
    return float(tau), tuple(float(e) for e in eta), float(gamma)


def stable_bundle(problem: LayerProblem, zeta) -> StableBundleSample:
    """E-(zeta) at z = 0: frozen coefficients or transported through the profile."""
    sys = problem.sys
    G = assemble_G(sys, problem.u_bar, zeta)
    Em, Ep, (km, kp) = stable_split(G)
    cond = float(np.linalg.cond(np.hstack([Em.basis, Ep.basis])))
    if problem.profile.constant:
        return StableBundleSample(_zeta_tuple(zeta), Em, "frozen", cond)
    prof = problem.profile
    step = 1.0 / prof.delta if np.isfinite(prof.delta) else None
    Y = integrate_basis(sys, prof, zeta, Em.basis, prof.Zmax, 0.0, step)
    return StableBundleSample(_zeta_tuple(zeta), Subspace(Y), "profile_integrated", cond)


def _kernel(Gam: np.ndarray, expected_rank: Optional[int] = None) -> Subspace:
    sv = np.linalg.svd(Gam, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0]))) if sv.size else 0
    if expected_rank is not None and rank != expected_rank:
        raise EvansError(f"boundary operator has rank {rank}, expected {expected_rank}")
    return null_space(Gam)


def evans(problem: LayerProblem, bc: BoundaryConditions, zeta) -> EvansSample:
    """D(zeta) = |det(E-(zeta), ker Gamma(zeta))| with orthonormal bases."""
    sb = stable_bundle(problem, zeta)
    _, eta, _ = _raw(zeta)
    Gam = bc.matrix(problem.sys, eta)
    K = _kernel(Gam, Gam.shape[0])
    D = subspace_det(sb.Eminus, K)
    return EvansSample(_zeta_tuple(zeta), D, "full",
                       {"dimEminus": sb.Eminus.dim, "conditioning": sb.conditioning, "method": sb.method})


def lopatinski(sys: SystemDefinition, u_bar, Gamma_red: np.ndarray, check_zeta) -> EvansSample:
    """D_Lop = |det(E-(H0(check_zeta)), ker Gamma_red)|; homogeneous of degree zero."""
    tau, eta, gamma = _raw(check_zeta)
    if gamma <= 0:
        raise EvansError("Lopatinski determinant needs gamma > 0")
    H0 = compute_H0(sys, u_bar, (tau, eta, gamma))
    Em, _, _ = stable_split(H0)
    K = null_space(np.atleast_2d(Gamma_red))
    return EvansSample(_zeta_tuple(check_zeta), subspace_det(Em, K), "lopatinski",
                       {"dimEminus": Em.dim})


def reduced_evans(sys: SystemDefinition, prof: ProfileSolution, bc: BoundaryConditions, pf,
                  report: Optional[TransversalityReport] = None) -> EvansSample:
    """Reduced Evans function of the hyperbolic block in polar coordinates.

    pf is a PolarFrequency or a pair (check_zeta, rho) with signed components.
    """
    if isinstance(pf, PolarFrequency):
        cz, rho = pf.check_zeta.as_tuple(), pf.rho
    else:
        cz, rho = _raw(pf[0]), float(pf[1])
    if report is None:
        report = check_transversality(sys, prof, bc)
    tau, eta, gamma = cz
    if rho == 0:
        Hc = compute_H0(sys, prof.u_bar, cz)
        Gred = report.Gamma_red
    else:
        Gred, _, H = reduced_boundary_operator(sys, prof, bc, (rho * tau, rho * eta, rho * gamma),
                                               report=report, return_H=True)
        Hc = H / rho
    Em, _, _ = stable_split(Hc)
    K = null_space(np.atleast_2d(Gred))
    return EvansSample((tau, tuple(eta), gamma, rho), subspace_det(Em, K), "reduced",
                       {"dimEminus": Em.dim})


def weights(sys: SystemDefinition, zeta) -> np.ndarray:
    """Diagonal of J_zeta acting on (u1, u2, dz u2)."""
    z = Frequency(*_raw(zeta))
    n1, Np = sys.n1, sys.Nprime
    return np.concatenate([np.full(n1, np.sqrt(1 + z.gamma)), np.full(Np, np.sqrt(z.Lambda)),
                           np.full(Np, 1 / np.sqrt(z.Lambda))])


def rescaled_evans(problem: LayerProblem, bc: BoundaryConditions, zeta) -> EvansSample:
    """D^sc = |det(J E-, J ker Gamma)| with the parabolic weights J_zeta."""
    tau, eta, gamma = _raw(zeta)
    if np.sqrt(tau ** 2 + eta @ eta + gamma ** 2) < 1 - 1e-12:
        raise EvansError("rescaled Evans function needs |zeta| >= 1")
    sb = stable_bundle(problem, zeta)
    Gam = bc.matrix(problem.sys, eta)
    K = _kernel(Gam, Gam.shape[0])
    J = weights(problem.sys, zeta)[:, None]
    D = subspace_det(Subspace.span(J * sb.Eminus.basis), Subspace.span(J * K.basis))
    return EvansSample(_zeta_tuple(zeta), D, "rescaled", {"dimEminus": sb.Eminus.dim})


# scans -----------------------------------------------------------------

@dataclass
class GridSpec:
    n: int = 64
    rho0: float = 0.1
    rho1: float = 10.0
    rmin: float = 1e-3
    rmax: float = 100.0
    polar_dirs: int = 8
    polar_radii: int = 6
    polar_rmax: float = 0.05
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        g = cls()
        if not text:
            return g
        for part in text.split(","):
            if not part.strip():
                continue
            k, _, v = part.partition("=")
            k = k.strip()
            if k == "polar":
                a, _, b = v.partition("x")
                g.polar_dirs, g.polar_radii = int(a), int(b)
            elif k in ("n", "seed"):
                setattr(g, k, int(v))
            elif k in ("rho0", "rho1", "rmin", "rmax", "polar_rmax"):
                setattr(g, k, float(v))
            else:
                raise ValueError(f"unknown grid key {k!r}")
        if g.n < 2 or g.polar_dirs < 2 or g.polar_radii < 2:
            raise ValueError("grid counts must be at least 2")
        if not (0 < g.rmin < g.rmax):
            raise ValueError("need 0 < rmin < rmax")
        return g


def hemisphere(d: int, n: int, seed: int = 0, gamma_min: float = 0.0) -> np.ndarray:
    """Quasi-random unit frequencies (tau, eta..., gamma) with gamma >= gamma_min."""
    from scipy.stats import norm
    # Sobol balance needs a power of two; draw that many and keep the first n
    pts = qmc.Sobol(d + 1, seed=seed).random(1 << max(0, int(n - 1).bit_length()))[:n]
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    g[:, -1] = np.abs(g[:, -1])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    if gamma_min > 0:
        g[:, -1] = np.maximum(g[:, -1], gamma_min)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


def _split(v, d):
    return float(v[0]), np.asarray(v[1:d]), float(v[d])


@dataclass
class ScanReport:
    rows: list
    minima: dict
    zeros: list
    transversal: Optional[bool]
    reduced_min: Optional[float]
    lopatinski_min: Optional[float]
    low_freq_uniform: Optional[bool]
    failures: int
    total: int
    diagnostics: dict = field(default_factory=dict)
    zero_tol: float = 1e-8

    @property
    def zeros_confirmed(self) -> list:
        return [z for z in self.zeros if z["D"] < self.zero_tol]

    def summary(self) -> dict:
        from .system import _jsonable
        return _jsonable({
            "schema": 1, "minima": self.minima, "zeros": self.zeros,
            "zeros_confirmed": self.zeros_confirmed, "transversal": self.transversal,
            "reduced_min": self.reduced_min, "lopatinski_min": self.lopatinski_min,
            "low_freq_uniform": self.low_freq_uniform, "failures": self.failures, "total": self.total,
            "diagnostics": self.diagnostics,
        })


def scan_stability(problem: LayerProblem, bc: BoundaryConditions, grid: Optional[GridSpec] = None,
                   variant: str = "full", jobs: int = 1, threshold: float = 1e-4,
                   zero_seed_tol: float = 1e-3) -> ScanReport:
    """Sample a stability determinant on a punctured half-space grid plus a polar low-frequency grid."""
    grid = grid or GridSpec()
    sys = problem.sys
    d = sys.d
    dirs = hemisphere(d, grid.n, grid.seed)
    radii = np.geomspace(grid.rmin, grid.rmax, grid.n)
    points = [r * w for r, w in zip(radii, dirs)]
    try:
        report = check_transversality(sys, problem.profile, bc)
    except LinalgError:
        report = None

    def one(z):
        tau, eta, gamma = _split(z, d)
        try:
            if variant == "full":
                s = evans(problem, bc, (tau, eta, gamma))
            elif variant == "sc":
                if np.linalg.norm(z) < 1:
                    s = evans(problem, bc, (tau, eta, gamma))
                else:
                    s = rescaled_evans(problem, bc, (tau, eta, gamma))
            elif variant == "lop":
                if gamma <= 0 or report is None:
                    return None
                s = lopatinski(sys, problem.u_bar, report.Gamma_red, (tau, eta, gamma))
            elif variant == "red":
                r = np.linalg.norm(z)
                if r > grid.polar_rmax or report is None:
                    return None
                s = reduced_evans(sys, problem.profile, bc, ((tau / r, eta / r, gamma / r), r), report)
            else:
                raise ValueError(f"unknown variant {variant!r}")
            return z, s
        except LinalgError as exc:
            return z, exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        results = list(ex.map(one, points))
    rows, failures, total = [], 0, 0
    minima = {"low": np.inf, "medium": np.inf, "high": np.inf}
    seeds = []
    for res in results:
        if res is None:
            continue
        total += 1
        z, s = res
        if isinstance(s, Exception):
            failures += 1
            continue
        r = float(np.linalg.norm(z))
        region = "low" if r < grid.rho0 else ("high" if r > grid.rho1 else "medium")
        minima[region] = min(minima[region], s.D_value)
        rows.append({"tau": z[0], "eta": list(z[1:d]), "gamma": z[d], "rho": r, "variant": variant,
                     "D": s.D_value, "dimEminus": s.diagnostics.get("dimEminus"),
                     "conditioning": s.diagnostics.get("conditioning", np.nan)})
        if s.D_value < zero_seed_tol:
            seeds.append(z)
    if variant == "full":
        # the lowest low-frequency samples are refined as well: zeros there can sit on thin curves
        low = sorted((r for r in rows if r["rho"] < grid.rho0), key=lambda r: r["D"])[:3]
        for r in low:
            z = np.array([r["tau"], *r["eta"], r["gamma"]])
            if not any(np.allclose(z, s_) for s_ in seeds):
                seeds.append(z)
    zeros = [refine_zero(problem, bc, z) for z in seeds[:8]] if variant == "full" else []
    red_min = lop_min = None
    low_uniform = None
    diag = {"variant": variant, "rho0": grid.rho0, "rho1": grid.rho1}
    if report is not None:
        red_min, lop_min = polar_minima(problem, bc, grid, report, jobs)
        # confirmed zeros inside the low-frequency ball must show up in the reduced function too
        red_at_zeros = []
        for zz in zeros:
            x = np.asarray(zz["zeta"])
            r = float(np.linalg.norm(x))
            if zz["D"] < 1e-8 and 0 < r < min(grid.rho0, grid.polar_rmax) and report.transversal:
                tau, eta, gamma = _split(x / r, d)
                try:
                    val = reduced_evans(sys, problem.profile, bc, ((tau, eta, gamma), r), report).D_value
                except LinalgError:
                    val = None
                red_at_zeros.append({"zeta": x.tolist(), "reduced": val})
                if val is not None:
                    red_min = val if red_min is None else min(red_min, val)
        diag["reduced_at_zeros"] = red_at_zeros
        low_uniform = bool(report.transversal and red_min is not None and red_min > threshold)
    if report is not None and report.transversal:
        diag["lopatinski_homogeneity"] = lopatinski_homogeneity(sys, problem.u_bar, report.Gamma_red,
                                                                hemisphere(d, 8, grid.seed + 2, 0.05))
    return ScanReport(rows, minima, zeros, None if report is None else report.transversal, red_min,
                      lop_min, low_uniform, failures, total, diag)


def lopatinski_homogeneity(sys, u_bar, Gamma_red, dirs, factors=(0.5, 2.0, 10.0)) -> float:
    """max |D_Lop(t z) - D_Lop(z)| over the given gamma > 0 directions."""
    d = sys.d
    worst = 0.0
    for w in dirs:
        base = lopatinski(sys, u_bar, Gamma_red, _split(w, d)).D_value
        for t in factors:
            worst = max(worst, abs(lopatinski(sys, u_bar, Gamma_red, _split(t * w, d)).D_value - base))
    return worst


def polar_minima(problem: LayerProblem, bc, grid: GridSpec, report, jobs: int = 1):
    """Minimum of the reduced Evans function on the polar grid and of D_Lop on gamma > 0 directions."""
    sys = problem.sys
    d = sys.d
    if not report.transversal:
        return None, None
    dirs = hemisphere(d, grid.polar_dirs * 4, grid.seed + 1)
    rhos = np.linspace(0.0, grid.polar_rmax, grid.polar_radii)
    try:
        rad = validity_radius(sys, problem.u_bar)
        rhos = rhos[rhos <= rad]
    except LinalgError:
        pass

    def one(args):
        w, rho = args
        tau, eta, gamma = _split(w, d)
        try:
            if rho == 0 and gamma <= 1e-12:
                return None
            return reduced_evans(sys, problem.profile, bc, ((tau, eta, gamma), rho), report).D_value
        except LinalgError:
            return None

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        vals = [v for v in ex.map(one, [(w, r) for w in dirs for r in rhos]) if v is not None]
    lop = []
    for w in dirs:
        tau, eta, gamma = _split(w, d)
        if gamma > 1e-12:
            lop.append(lopatinski(sys, problem.u_bar, report.Gamma_red, (tau, eta, gamma)).D_value)
    return (min(vals) if vals else None), (min(lop) if lop else None)


def refine_zero(problem: LayerProblem, bc, z0, shell: float = 2.0, maxiter: int = 600) -> dict:
    """Local minimization of |D| from a grid candidate.

    gamma is kept nonnegative and |zeta| is confined to [r0/shell, r0*shell] so the
    search cannot drift to the degenerate high-frequency end.
    """
    d = problem.sys.d
    z0 = np.asarray(z0, dtype=float)
    r0 = float(np.linalg.norm(z0))

    def f(x):
        tau, eta, gamma = _split(x, d)
        gamma = abs(gamma)
        r = np.sqrt(tau ** 2 + eta @ eta + gamma ** 2)
        if not r0 / shell <= r <= r0 * shell:
            return 1.0
        try:
            return evans(problem, bc, (tau, eta, gamma)).D_value
        except LinalgError:
            return 1.0

    res = minimize(f, z0, method="Nelder-Mead",
                   options={"xatol": 1e-12 * max(1.0, r0), "fatol": 1e-16, "maxiter": maxiter})
    x = res.x.copy()
    x[d] = abs(x[d])
    return {"zeta": x.tolist(), "D": float(res.fun), "start": z0.tolist()}
