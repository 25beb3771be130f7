"""Acceptance criteria 1-11: each test prints one PASS/FAIL line with its pinned tolerance."""

import time

import numpy as np

from layerstab.classify import classify_glancing, coupling_matrix, find_roots, glancing_data
from layerstab.evans import LayerProblem, GridSpec, hemisphere, lopatinski, scan_stability
from layerstab.examples import mhd, toy
from layerstab.freq import assemble_G, compute_H0, split_blocks
from layerstab.linalg import stable_split
from layerstab.profiles import check_transversality, constant_profile
from layerstab.symmetrizers import nonglancing_symmetrizer, verify_k_family
from layerstab.system import boundary_indices

BASE_STATE = mhd.MhdState(1.0, (0.1, 0.2, 1.5), (0.3, 0.4, 0.8))


def _random_mhd_states(n, seed=7, margin=0.05):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        st = mhd.MhdState(rng.uniform(0.5, 2.0), tuple(rng.uniform(-1.5, 1.5, 3)),
                          tuple(rng.uniform(-1.0, 1.0, 3)), nu=rng.uniform(0.5, 2), mu=rng.uniform(0.5, 2))
        if mhd.noncharacteristic(st, tol=margin):
            out.append(st)
    return out


def _zeta(w, d):
    return float(w[0]), np.asarray(w[1:d]), float(w[d])


def test_criterion_01_eigenvalue_count(verdict):
    t0 = time.perf_counter()
    cases = [(mhd.mhd_system(s), s.vector()) for s in _random_mhd_states(3)]
    cases += [(toy.toy_system(toy.ToyParams(a)), np.zeros(2)) for a in (0.0, 0.3, 0.7)]
    bad = []
    for k, (sys, u) in enumerate(cases):
        Nb = boundary_indices(sys, u).Nb
        rng = np.random.default_rng(k)
        for _ in range(200):
            w = rng.normal(size=sys.d + 1)
            w[-1] = abs(w[-1]) + 1e-3
            w *= rng.uniform(0.01, 10.0) / np.linalg.norm(w)
            G = assemble_G(sys, u, _zeta(w, sys.d))
            raw = int(np.sum(np.linalg.eigvals(G).real < 0))
            dim = stable_split(G)[2][0]
            if raw != Nb or dim != Nb:
                bad.append((sys.name, w.tolist(), raw, dim, Nb))
    dt = time.perf_counter() - t0
    verdict("criterion 1 eigenvalue count dim E- = Nb (6 systems x 200 frequencies, < 30 s)",
            not bad and dt < 30, f"mismatches={len(bad)} runtime={dt:.1f}s")


def test_criterion_02_low_frequency_expansion(verdict):
    details, ok = [], True
    systems = [("toy a=0.5", toy.toy_system(toy.ToyParams(0.5)), np.zeros(2)),
               ("mhd", mhd.mhd_system(BASE_STATE), BASE_STATE.vector())]
    for name, sys, u in systems:
        worst = 0.0
        for w in hemisphere(sys.d, 8, seed=3, gamma_min=0.05):
            ratios = []
            for r in (1e-2, 1e-3, 1e-4):
                z = _zeta(r * w, sys.d)
                H = split_blocks(sys, u, z)[1]
                ratios.append(np.linalg.norm(H - compute_H0(sys, u, z)) / r ** 2)
            worst = max(worst, max(ratios) / ratios[-1], ratios[-1] / min(ratios))
        ok &= worst <= 2.0
        details.append(f"{name} ratio spread {worst:.3f}")
    A, B = toy.toy_matrices(0.5)
    sys = toy.toy_system(toy.ToyParams(0.5))
    rel = 0.0
    for w in hemisphere(2, 8, seed=4, gamma_min=0.05):
        tau, eta, gamma = 1e-3 * w
        H = split_blocks(sys, np.zeros(2), (tau, np.array([eta]), gamma))[1]
        sigma = gamma + 1j * (tau + eta)
        ref = -sigma * A + (sigma ** 2 - eta ** 2) * A @ B
        rel = max(rel, np.linalg.norm(H - ref) / np.linalg.norm(ref))
    ok &= rel < 1e-4
    details.append(f"toy closed-form relative error {rel:.2e} (tol 1e-4)")
    verdict("criterion 2 low-frequency expansion (factor 2 band, toy closed form)", ok, "; ".join(details))


def _toy_setup(a, c_bar):
    p = toy.ToyParams(a, c_bar=c_bar)
    sys, bc = toy.toy_system(p), toy.toy_boundary(p)
    prof = constant_profile(sys, np.zeros(2))
    return sys, bc, prof, check_transversality(sys, prof, bc)


def test_criterion_03_lopatinski_homogeneity(verdict):
    worst = 0.0
    for a, c_bar in ((0.0, 0.3), (0.8, -toy.b_bar(0.8))):
        sys, bc, prof, rep = _toy_setup(a, c_bar)
        for w in hemisphere(2, 100, seed=5, gamma_min=1e-2):
            base = lopatinski(sys, prof.u_bar, rep.Gamma_red, _zeta(w, 2)).D_value
            for t in (0.5, 2.0, 10.0):
                val = lopatinski(sys, prof.u_bar, rep.Gamma_red, _zeta(t * w, 2)).D_value
                worst = max(worst, abs(val - base))
    st = mhd.with_normal_velocity(BASE_STATE, -0.5)
    sys, bc = mhd.mhd_system(st), mhd.mhd_boundary(st)
    prof = constant_profile(sys, st.vector())
    rep = check_transversality(sys, prof, bc)
    for w in hemisphere(3, 100, seed=5, gamma_min=1e-2):
        base = lopatinski(sys, prof.u_bar, rep.Gamma_red, _zeta(w, 3)).D_value
        for t in (0.5, 2.0, 10.0):
            val = lopatinski(sys, prof.u_bar, rep.Gamma_red, _zeta(t * w, 3)).D_value
            worst = max(worst, abs(val - base))
    verdict("criterion 3 Lopatinski degree-zero homogeneity (100 frequencies, t in {0.5,2,10})",
            worst < 1e-9, f"max deviation {worst:.2e} (tol 1e-9)")


def test_criterion_04_zs_consistency(verdict):
    sys, bc, prof, rep = _toy_setup(0.0, 0.3)
    scan = scan_stability(LayerProblem(sys, prof), bc, GridSpec(n=96))
    ok = bool(rep.transversal and scan.reduced_min > 1e-4 and scan.minima["low"] > 1e-4
              and not scan.zeros_confirmed)
    verdict("criterion 4 ZS consistency on stable toy (a=0, c_bar=0.3)", ok,
            f"transversal={rep.transversal} reduced_min={scan.reduced_min:.3g} "
            f"low-frequency D min={scan.minima['low']:.3g} (tol 1e-4)")


def test_criterion_05_counterexample(verdict):
    t0 = time.perf_counter()
    a = 0.8
    # the boundary constant that produces the instability is c_bar = -b_bar in our sign convention
    c_bar = -toy.b_bar(a)
    sys, bc, prof, rep = _toy_setup(a, c_bar)
    lop_min = min(lopatinski(sys, prof.u_bar, rep.Gamma_red, _zeta(w, 2)).D_value
                  for w in hemisphere(2, 400, seed=6, gamma_min=1e-3))
    pts = toy.toy_instability_locus(toy.ToyParams(a, c_bar=c_bar), [1e-2, 5e-3, 2.5e-3], sigma0=1.0)
    expo = toy.gamma_exponent(pts)
    dt = time.perf_counter() - t0
    ok = (lop_min > 1e-4 and all(p.gamma > 0 and abs(p.D) < 1e-8 for p in pts)
          and abs(expo - 2.0) <= 0.1 and dt < 60)
    verdict("criterion 5 counterexample a=0.8 (uniform Lopatinski, unstable zeros, gamma ~ rho^2)", ok,
            f"Lopatinski min={lop_min:.3g} gammas={[f'{p.gamma:.3e}' for p in pts]} "
            f"|D| max={max(abs(p.D) for p in pts):.1e} exponent={expo:.4f} runtime={dt:.1f}s")


def test_criterion_06_eminus_discontinuity(verdict):
    a5 = toy.toy_Eminus_limits(toy.ToyParams(0.5))["angle"]
    a0 = toy.toy_Eminus_limits(toy.ToyParams(0.0))["angle"]
    verdict("criterion 6 E- limit discontinuity", a5 > 0.1 and a0 < 1e-8,
            f"angle(a=0.5)={a5:.6f} (> 0.1) angle(a=0)={a0:.1e} (< 1e-8)")


def test_criterion_07_mhd_closed_forms(verdict):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(500):
        st = mhd.MhdState(rng.uniform(0.3, 3), tuple(rng.normal(size=3)), tuple(rng.normal(size=3)),
                          c2=rng.uniform(0.3, 3))
        worst = max(worst, mhd.mhd_wave_speeds(st, rng.normal(size=3))["mismatch"])
    pattern_err = entry_err = 0.0
    zeros = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 3), (2, 4)]
    for _ in range(20):
        st = mhd.MhdState(rng.uniform(0.3, 3), tuple(rng.normal(size=3)), tuple(rng.normal(size=3)),
                          nu=rng.uniform(0.2, 3), mu=rng.uniform(0.2, 3))
        xi = mhd.manifold_directions(st)["orthogonal"]
        Bs = mhd.mhd_coupling(st, xi)
        pattern_err = max(pattern_err, max(max(abs(Bs[i, j]), abs(Bs[j, i])) for i, j in zeros))
        cf = mhd.coupling_closed_form(st)
        entry_err = max(entry_err, abs(Bs[1, 2] - cf["1,-1"]), abs(Bs[3, 4] - cf["2,-2"]))
    st = mhd.MhdState(1.0, (0.1, 0.2, 0.3), (0.3, 0.4, 0.5), nu=1.0, mu=1.0)
    b22 = abs(mhd.mhd_coupling(st, mhd.manifold_directions(st)["orthogonal"])[3, 4])
    st2 = mhd.MhdState(2.0, (0.1, 0.2, 0.3), (0.3, 0.4, 0.5), nu=3.0, mu=1.5)
    b22b = abs(mhd.mhd_coupling(st2, mhd.manifold_directions(st2)["orthogonal"])[3, 4])
    ok = worst < 1e-8 and pattern_err < 1e-8 and entry_err < 1e-8 and b22 < 1e-12 and b22b < 1e-12
    verdict("criterion 7 MHD wave speeds and coupling closed forms", ok,
            f"speed mismatch={worst:.1e} pattern={pattern_err:.1e} entries={entry_err:.1e} "
            f"B22 at nu=rho*mu: {b22:.1e}, {b22b:.1e}")


def test_criterion_08_glancing_thresholds(verdict):
    st = BASE_STATE
    closed = mhd.closed_form_glancing(st)
    errs = {}
    ok = True
    for name in ("parallel", "orthogonal"):
        flips = mhd.glancing_flips(st, name, -1.2, 1.2, tol=1e-7)
        thr = sorted(closed[name]["thresholds"])
        matched = len(flips) == len(thr)
        err = max((min(abs(f - t) for f in flips) for t in thr), default=np.inf) if flips else np.inf
        ok &= matched and err < 1e-6
        errs[name] = (np.round(flips, 7).tolist(), err)
    verdict("criterion 8 glancing verdict flips at closed-form thresholds (bisection to 1e-6)", ok,
            " ".join(f"{k}: flips={v[0]} err={v[1]:.1e}" for k, v in errs.items()))


def test_criterion_09_symmetrizer_certificates(verdict):
    rows, ok = [], True
    for u3, sign, kind in ((-1.5, "positive", "totally_outgoing"), (1.5, "negative", "totally_incoming")):
        st = mhd.with_normal_velocity(BASE_STATE, u3)
        sys, U = mhd.mhd_system(st), st.vector()
        for name, xi in mhd.manifold_directions(st).items():
            for root in find_roots(sys, U, xi):
                if root.m < 2:
                    continue
                assert classify_glancing(root, glancing_data(root)) == kind
                cand = nonglancing_symmetrizer(sys, U, root)
                info = cand.info
                r1 = info["R1_min"] / max(1.0, np.linalg.norm(info["R1"], 2))
                r2 = info["R2_min"] / max(1.0, np.linalg.norm(info["R2"], 2))
                ver = verify_k_family(cand)
                ms = [r["m"] for r in ver.table]
                good = r1 > 1e-6 and r2 > 1e-6 and info["sign"] == sign and ver.ok
                if kind == "totally_outgoing":
                    good &= all(b > a for a, b in zip(ms, ms[1:]))
                ok &= good
                rows.append(f"u3={u3} {name} m={root.m} sign={info['sign']} "
                            f"m(kappa)={np.round(ms, 3).tolist()}")
    verdict("criterion 9 nonglancing symmetrizer certificates and K-family", ok, "; ".join(rows))


def test_criterion_10_symmetrizer_window(verdict):
    agree = max(toy.toy_symmetrizer_window(a)["agreement"] for a in np.arange(1, 10) / 10)
    w = toy.toy_symmetrizer_window(0.6)
    err = max(abs(w["s_min"] - 1 / 9), abs(w["s_max"] - 9))
    verdict("criterion 10 toy symmetrizer window", agree < 1e-9 and err < 1e-9,
            f"oracle vs formula {agree:.1e}; a=0.6 window=({w['s_min']:.12f}, {w['s_max']:.12f})")


def _toy_decoupled(a):
    sys = toy.toy_system(toy.ToyParams(a))
    xi = np.array([1 / np.sqrt(2), 0.0])
    root = next(r for r in find_roots(sys, np.zeros(2), xi) if r.m == 2)
    return coupling_matrix(sys, root, glancing_data(root)).decoupled


def test_criterion_11_decoupling(verdict):
    toy_ok = _toy_decoupled(0.0) and not any(_toy_decoupled(a) for a in (0.1, 0.5, 0.9))
    left = mhd.MhdState(1.0, (0.0, 0.0, -0.3), (0.6, 0.0, 0.9), nu=1.0, mu=2.0)
    right, sigma = mhd.weak_shock(left, "slow", eps=0.05)
    rep = mhd.lax_shock_check(left, right, sigma, "slow")
    ok = bool(toy_ok and rep["is_shock"] and rep["lax"] and rep["decoupling_fails"])
    verdict("criterion 11 decoupling verdicts (toy iff a=0; slow shock with nu != rho*mu fails)", ok,
            f"toy={toy_ok} slow shock lax={rep['lax']} B22={rep['B22_coupling']}")
