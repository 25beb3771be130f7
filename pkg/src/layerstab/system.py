"""Hyperbolic-parabolic systems, boundary operators and sample-based checks of the standing assumptions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc, norm

from .linalg import LinalgError, eigendecompose

ZERO_TOL = 1e-9
REAL_TOL = 1e-9


class SystemError_(ValueError):
    """Bad system data or failed evaluation."""


class CharacteristicBoundaryError(SystemError_):
    pass


@dataclass(frozen=True)
class SystemDefinition:
    """A0 u_t + sum_j A_j u_j - sum_jk (B_jk u_k)_j = 0 in d space dimensions.

    Coordinates are ordered with the tangential directions first and the
    boundary normal last.  A(u) returns the d matrices A_j, B(u) returns an
    array of shape (d, d, N, N).  The parabolic unknowns are the last Nprime
    components.
    """

    N: int
    Nprime: int
    d: int
    A0: Callable[[np.ndarray], np.ndarray]
    A: Callable[[np.ndarray], Sequence[np.ndarray]]
    B: Callable[[np.ndarray], np.ndarray]
    S: Optional[Callable[[np.ndarray], np.ndarray]] = None
    state_domain: Optional[tuple] = None
    hyperbolic_domain: Optional[tuple] = None
    name: str = "system"
    linear: bool = False

    @property
    def n1(self) -> int:
        return self.N - self.Nprime

    # evaluations -------------------------------------------------------
    def eval_A0(self, u) -> np.ndarray:
        return _checked(self.A0(np.asarray(u, dtype=float)), (self.N, self.N), "A0")

    def eval_A(self, u) -> list:
        mats = [np.asarray(M, dtype=complex) for M in self.A(np.asarray(u, dtype=float))]
        if len(mats) != self.d:
            raise SystemError_(f"A(u) returned {len(mats)} matrices, expected {self.d}")
        return [_checked(M, (self.N, self.N), f"A_{j}") for j, M in enumerate(mats)]

    def eval_B(self, u) -> np.ndarray:
        Bs = np.asarray(self.B(np.asarray(u, dtype=float)), dtype=complex)
        if Bs.shape != (self.d, self.d, self.N, self.N):
            raise SystemError_(f"B(u) has shape {Bs.shape}")
        if not np.all(np.isfinite(Bs)):
            raise SystemError_("B(u) has non-finite entries")
        return Bs

    def eval_S(self, u) -> Optional[np.ndarray]:
        if self.S is None:
            return None
        return _checked(self.S(np.asarray(u, dtype=float)), (self.N, self.N), "S")

    def symbol_A(self, u, xi) -> np.ndarray:
        """A0^{-1} sum_j xi_j A_j."""
        xi = np.asarray(xi, dtype=float)
        M = sum(x * Aj for x, Aj in zip(xi, self.eval_A(u)))
        return np.linalg.solve(self.eval_A0(u), M)

    def symbol_B(self, u, xi) -> np.ndarray:
        """A0^{-1} sum_jk xi_j xi_k B_jk."""
        xi = np.asarray(xi, dtype=float)
        M = np.einsum("j,k,jkab->ab", xi, xi, self.eval_B(u))
        return np.linalg.solve(self.eval_A0(u), M)

    def sample_states(self, n: int = 64, seed: int = 0, hyperbolic: bool = False) -> np.ndarray:
        box = self.hyperbolic_domain if (hyperbolic and self.hyperbolic_domain) else self.state_domain
        if box is None:
            raise SystemError_("no state domain to sample from")
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        pts = qmc.Sobol(lo.size, seed=seed).random(n)
        return qmc.scale(pts, lo, hi) if np.any(hi > lo) else np.tile(lo, (n, 1))


def _checked(M, shape, label) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.shape != shape:
        raise SystemError_(f"{label} has shape {M.shape}, expected {shape}")
    if not np.all(np.isfinite(M)):
        raise SystemError_(f"{label} has non-finite entries")
    return M


def sphere_directions(d: int, n: int = 256, seed: int = 0) -> np.ndarray:
    """Quasi-random unit vectors in R^d."""
    pts = qmc.Sobol(d, seed=seed).random(n)
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


@dataclass(frozen=True)
class BoundaryConditions:
    """Linearized boundary operator on U = (u1, u2, dz u2) at z = 0.

    Rows: Gamma1 u1 = 0, Gamma2 u2 = 0 and
    K0 u + sum_j i eta_j K_j u2 + Kd dz u2 = 0.  K0 is an optional
    zero-order term acting on the full state (used for Robin-type data).
    g is the right-hand side used by the profile solver.
    """

    Gamma1: np.ndarray
    Gamma2: np.ndarray
    Kd: np.ndarray
    Kj: tuple = ()
    K0: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None

    @property
    def N1plus_rows(self) -> int:
        return int(np.asarray(self.Gamma1).shape[0])

    @property
    def rows(self) -> int:
        return int(np.asarray(self.Gamma1).shape[0] + np.asarray(self.Gamma2).shape[0]
                   + np.asarray(self.Kd).shape[0])

    def matrix(self, sys: SystemDefinition, eta=()) -> np.ndarray:
        """Gamma(zeta) as an Nb x (N + N') matrix."""
        n1, n2 = sys.n1, sys.Nprime
        G1 = _block(self.Gamma1, n1)
        G2 = _block(self.Gamma2, n2)
        Kd = _block(self.Kd, n2)
        r1, r2, r3 = G1.shape[0], G2.shape[0], Kd.shape[0]
        M = np.zeros((r1 + r2 + r3, sys.N + n2), dtype=complex)
        M[:r1, :n1] = G1
        M[r1:r1 + r2, n1:sys.N] = G2
        if r3:
            if self.K0 is not None:
                M[r1 + r2:, :sys.N] = np.asarray(self.K0, dtype=complex).reshape(r3, sys.N)
            eta = np.atleast_1d(np.asarray(eta, dtype=float))
            for e, Kj in zip(eta, self.Kj):
                M[r1 + r2:, n1:sys.N] += 1j * e * np.asarray(Kj, dtype=complex).reshape(r3, n2)
            M[r1 + r2:, sys.N:] = Kd
        return M

    def data(self) -> np.ndarray:
        if self.g is None:
            return np.zeros(self.rows)
        return np.asarray(self.g, dtype=complex).reshape(self.rows)

    def check_ranks(self, sys: SystemDefinition) -> dict:
        out = {}
        for lab, M in (("Gamma1", self.Gamma1), ("Gamma2", self.Gamma2), ("Kd", self.Kd)):
            M = np.atleast_2d(np.asarray(M, dtype=complex))
            r = np.linalg.matrix_rank(M) if M.size else 0
            out[lab] = bool(r == (M.shape[0] if M.size else 0))
        return out


def _block(M, cols: int) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return np.zeros((M.shape[0] if M.ndim == 2 else 0, cols), dtype=complex)
    return M.reshape(-1, cols)


@dataclass(frozen=True)
class BoundaryIndices:
    Nplus: int
    N1plus: int
    N2minus: int
    Nb: int


@dataclass
class CheckReport:
    name: str
    passed: bool
    constant: Optional[float] = None
    witness: Optional[dict] = None
    failures: int = 0
    samples: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "constant": None if self.constant is None else float(self.constant),
            "witness": _jsonable(self.witness),
            "failures": int(self.failures),
            "samples": int(self.samples),
            "details": _jsonable(self.details),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        return float(z.real) if z.imag == 0 else {"re": z.real, "im": z.imag}
    if isinstance(x, np.generic):
        return x.item()
    return x


def _states(sys, samples, hyperbolic=False):
    if samples is None:
        return sys.sample_states(hyperbolic=hyperbolic)
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    if S.shape[0] == 0:
        raise SystemError_("empty sample set")
    return S


def _xis(sys, samples_xi):
    if samples_xi is None:
        return sphere_directions(sys.d)
    X = np.atleast_2d(np.asarray(samples_xi, dtype=float))
    if np.any(np.linalg.norm(X, axis=1) == 0):
        raise SystemError_("xi samples must be nonzero")
    return X


def check_structure(sys: SystemDefinition, samples=None) -> CheckReport:
    """Invertibility of A0 and the zero pattern of the viscous blocks."""
    S = _states(sys, samples)
    n1 = sys.n1
    fails, witness, per = 0, None, []
    for u in S:
        try:
            A0 = sys.eval_A0(u)
            Bs = sys.eval_B(u)
        except Exception as exc:
            raise SystemError_(f"evaluator failed at {u}: {exc}") from exc
        sv = np.linalg.svd(A0, compute_uv=False)
        inv_ok = sv[-1] > ZERO_TOL * max(1.0, sv[0])
        off = 0.0
        if n1:
            off = max(np.abs(Bs[:, :, :n1, :]).max(), np.abs(Bs[:, :, :, :n1]).max())
        pat_ok = off < 1e-12
        ok = bool(inv_ok and pat_ok)
        per.append(ok)
        if not ok:
            fails += 1
            if witness is None:
                witness = {"u": u, "A0_invertible": bool(inv_ok), "offpattern_norm": off}
    return CheckReport("structure", fails == 0, witness=witness, failures=fails, samples=len(S),
                       details={"N": sys.N, "Nprime": sys.Nprime, "per_sample": per})


def check_parabolicity(sys: SystemDefinition, samples_u=None, samples_xi=None) -> CheckReport:
    """Eigenvalues of B22(u, xi) have real part >= c |xi|^2; reports the empirical c."""
    S, X = _states(sys, samples_u), _xis(sys, samples_xi)
    n1 = sys.n1
    c, witness, fails = np.inf, None, 0
    for u in S:
        for xi in X:
            B22 = sys.symbol_B(u, xi)[n1:, n1:]
            mu = np.linalg.eigvals(B22)
            r = mu.real.min() / float(xi @ xi)
            if r < c:
                c = r
                w = {"u": u, "xi": xi, "mu": mu[np.argmin(mu.real)]}
                if r <= ZERO_TOL:
                    witness = w
            if r <= ZERO_TOL:
                fails += 1
    return CheckReport("parabolicity", fails == 0, constant=c, witness=witness, failures=fails,
                       samples=len(S) * len(X))


def check_genuine_coupling(sys: SystemDefinition, samples_u=None, samples_xi=None,
                           radii=(1e-2, 1e-1, 1.0, 10.0, 100.0)) -> CheckReport:
    """Eigenvalues of i A(xi) + B(xi) have real part >= c |xi|^2 / (1 + |xi|^2) on the hyperbolic domain."""
    S, X = _states(sys, samples_u, hyperbolic=True), _xis(sys, samples_xi)
    c, witness, fails, n = np.inf, None, 0, 0
    for u in S:
        for w in X:
            w = w / np.linalg.norm(w)
            for r in radii:
                xi = r * w
                mu = np.linalg.eigvals(1j * sys.symbol_A(u, xi) + sys.symbol_B(u, xi))
                val = mu.real.min() * (1 + r * r) / (r * r)
                n += 1
                if val < c:
                    c = val
                if val <= ZERO_TOL:
                    fails += 1
                    if witness is None:
                        witness = {"u": u, "xi": xi, "mu": mu[np.argmin(mu.real)]}
    return CheckReport("genuine_coupling", fails == 0, constant=c, witness=witness, failures=fails,
                       samples=n)


def normal_blocks(sys: SystemDefinition, u):
    """Blocks of A0^{-1} A_d split along (hyperbolic, parabolic) unknowns."""
    Ad = np.linalg.solve(sys.eval_A0(u), sys.eval_A(u)[-1])
    n1 = sys.n1
    return Ad[:n1, :n1], Ad[:n1, n1:], Ad[n1:, :n1], Ad[n1:, n1:]


def _count_positive(M, label, u) -> int:
    ev = np.linalg.eigvals(M) if np.asarray(M).size else np.zeros(0)
    scale = max(1.0, np.linalg.norm(M, 2)) if np.asarray(M).size else 1.0
    if ev.size and np.min(np.abs(ev)) <= ZERO_TOL * scale:
        raise CharacteristicBoundaryError(
            f"characteristic boundary: {label}(u={np.asarray(u).tolist()}) has eigenvalue "
            f"{ev[np.argmin(np.abs(ev))]:.3e}")
    return int(np.sum(ev.real > 0))


def boundary_indices(sys: SystemDefinition, u_interior, u_boundary=None) -> BoundaryIndices:
    """N+, N1+, N2- and Nb; raises if the counting identity Nb = N+ + N2- fails."""
    from .freq import compute_P0
    from .linalg import stable_split

    u_boundary = u_interior if u_boundary is None else u_boundary
    Ad = np.linalg.solve(sys.eval_A0(u_interior), sys.eval_A(u_interior)[-1])
    Nplus = _count_positive(Ad, "A_d", u_interior)
    N1plus = _count_positive(normal_blocks(sys, u_boundary)[0], "A11_d", u_boundary)
    N1plus_int = _count_positive(normal_blocks(sys, u_interior)[0], "A11_d", u_interior)
    _, _, (N2minus, _) = stable_split(compute_P0(sys, u_interior))
    Nb = sys.Nprime + N1plus
    if sys.Nprime + N1plus_int != Nplus + N2minus:
        raise LinalgError(
            f"index identity failed: N' + N1+ = {sys.Nprime + N1plus_int} but N+ + N2- = {Nplus + N2minus}")
    return BoundaryIndices(Nplus, N1plus, N2minus, Nb)


def check_block11(sys: SystemDefinition, samples_u=None, samples_xi=None) -> CheckReport:
    """Hyperbolicity of the 11-block and sign-constant normal speeds.

    Real spectrum and constant multiplicity with semisimplicity are
    reported separately in details.
    """
    n1 = sys.n1
    if n1 == 0:
        return CheckReport("block11", True, details={"vacuous": True})
    S, X = _states(sys, samples_u), _xis(sys, samples_xi)
    real_ok, semisimple_ok, const_mult = True, True, True
    mults = None
    signs = set()
    witness, fails, minspeed = None, 0, np.inf
    for u in S:
        A0 = sys.eval_A0(u)
        As = sys.eval_A(u)
        Ad11 = np.linalg.solve(A0, As[-1])[:n1, :n1]
        for xi in X:
            M = sys.symbol_A(u, xi)[:n1, :n1]
            spec = eigendecompose(M)
            ev = spec.eigenvalues
            if np.any(np.abs(ev.imag) >= REAL_TOL * (1 + np.abs(ev))):
                real_ok = False
            m = sorted(spec.multiplicities())
            if mults is None:
                mults = m
            elif m != mults:
                const_mult = False
            for g in spec.clusters:
                R = spec.right_vectors[:, g]
                if np.linalg.matrix_rank(R, tol=1e-6) < len(g):
                    semisimple_ok = False
                    continue
                L = np.linalg.pinv(R)
                dl = np.linalg.eigvals(L @ Ad11 @ R).real
                for s in dl:
                    minspeed = min(minspeed, abs(s))
                    if abs(s) <= ZERO_TOL:
                        fails += 1
                        if witness is None:
                            witness = {"u": u, "xi": xi, "dlambda": s}
                    else:
                        signs.add(int(np.sign(s)))
    ok = fails == 0 and real_ok and len(signs) <= 1
    return CheckReport("block11", ok, constant=minspeed, witness=witness, failures=fails,
                       samples=len(S) * len(X),
                       details={"real_spectrum": real_ok, "semisimple": semisimple_ok,
                                "constant_multiplicity": const_mult,
                                "incoming": bool(signs == {1}), "signs": sorted(signs)})
