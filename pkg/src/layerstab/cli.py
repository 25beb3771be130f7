"""Command-line front end: checks, classification, stability scans, profiles and bundled demos.

Exit codes: 0 success, 1 stability failure or scan anomaly, 2 input error,
3 internal numerical failure.
"""

from __future__ import annotations

import json
import sys as _sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import click
import numpy as np

from .linalg import LinalgError
from .report import svg_line, write_json, write_scan_csv
from .system import (BoundaryConditions, CharacteristicBoundaryError, SystemDefinition, SystemError_,
                     boundary_indices, check_block11, check_genuine_coupling, check_parabolicity,
                     check_structure)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
VARIANTS = {"full": "full", "lop": "lop", "lopatinski": "lop", "red": "red", "reduced": "red",
            "sc": "sc", "rescaled": "sc"}
TOL_KEYS = {"threshold": 1e-4, "zero_seed": 1e-3, "fail_fraction": 0.1}


class InputError(ValueError):
    pass


@dataclass
class Setup:
    kind: str
    sys: SystemDefinition
    bc: BoundaryConditions
    u_bar: np.ndarray
    params: object
    raw: dict


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, dict):
        return complex(float(x.get("re", 0.0)), float(x.get("im", 0.0)))
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    return complex(x)


def load_descriptor(text: str) -> dict:
    """A path to a JSON file or inline JSON."""
    if text is None:
        raise InputError("--system is required")
    p = Path(text)
    try:
        src = p.read_text() if (not text.lstrip().startswith("{") and p.exists()) else text
        data = json.loads(src)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse system descriptor: {exc}") from exc
    if not isinstance(data, dict) or "system" not in data:
        raise InputError('descriptor must be a JSON object with a "system" key')
    return data


def build_setup(desc: dict) -> Setup:
    from .examples.mhd import MhdState, mhd_boundary, mhd_system
    from .examples.toy import ToyParams, toy_boundary, toy_system
    kind = str(desc["system"]).lower()
    try:
        if kind == "toy":
            params = ToyParams(a=float(desc.get("a", 0.0)), c_bar=_complex(desc.get("c_bar", 0.0)),
                               s=None if desc.get("s") is None else float(desc["s"]))
            bc = toy_boundary(params)
            if desc.get("g") is not None:
                bc = replace(bc, g=np.array([_complex(v) for v in desc["g"]]))
            return _on_manifold(Setup("toy", toy_system(params), bc, np.zeros(2), params, desc))
        if kind == "mhd":
            state = MhdState.from_dict({k: v for k, v in desc.items() if k != "system"})
            bc = mhd_boundary(state)
            if desc.get("boundary_state") is not None:
                ub = MhdState.from_dict({**{k: desc[k] for k in ("c2", "nu", "mu") if k in desc},
                                         **desc["boundary_state"]}).vector()
                g = ub[1:] if bc.Gamma1.shape[0] == 0 else ub
                bc = replace(bc, g=g)
            return _on_manifold(Setup("mhd", mhd_system(state), bc, state.vector(), state, desc))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid {kind} descriptor: {exc}") from exc
    raise InputError(f"unknown system {kind!r} (expected 'toy' or 'mhd')")


def _on_manifold(s: Setup) -> Setup:
    """Replace g by boundary data of the orbit with the given "manifold_coords", if any."""
    coords = s.raw.get("manifold_coords")
    if coords is None:
        return s
    from .profiles import manifold_boundary_data
    g = manifold_boundary_data(s.sys, s.bc, s.u_bar, np.asarray(coords, dtype=float))
    return replace(s, bc=replace(s.bc, g=g))


def parse_tol(text: Optional[str]) -> dict:
    out = dict(TOL_KEYS)
    if not text:
        return out
    for part in text.split(","):
        if not part.strip():
            continue
        k, sep, v = part.partition("=")
        k = k.strip()
        if not sep or k not in TOL_KEYS:
            raise InputError(f"unknown tolerance {k!r}; known: {', '.join(TOL_KEYS)}")
        try:
            out[k] = float(v)
        except ValueError as exc:
            raise InputError(f"bad tolerance value {v!r}") from exc
    return out


def _outdir(path: Optional[str]) -> Path:
    p = Path(path or ".")
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {p}: {exc}") from exc
    return p


def _emit(obj: dict, out: Optional[Path], name: str) -> None:
    from .system import _jsonable
    data = {"schema": 1, **_jsonable(obj)}
    if out is not None:
        write_json(out / name, data)
    click.echo(json.dumps(data, indent=2, default=str))


def _run(fn):
    """Map exceptions to exit codes."""
    try:
        code = fn()
    except (InputError, SystemError_) as exc:
        if isinstance(exc, CharacteristicBoundaryError):
            click.echo(f"error: {exc}", err=True)
            _sys.exit(EXIT_NUMERIC)
        click.echo(f"input error: {exc}", err=True)
        _sys.exit(EXIT_INPUT)
    except LinalgError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        _sys.exit(EXIT_NUMERIC)
    _sys.exit(code or EXIT_OK)


@click.group()
def main():
    """Spectral stability analysis of viscous boundary layers."""


_system_opt = click.option("--system", "system", required=False, help="Descriptor path or inline JSON.")
_out_opt = click.option("--out", "out", default=None, help="Output directory.")
_tol_opt = click.option("--tol", "tol", default=None, help="Tolerance overrides k=v,...")
_seed_opt = click.option("--seed", "seed", default=0, type=int, help="Seed of the quasi-random samples.")


@main.command()
@_system_opt
@_out_opt
@_tol_opt
@_seed_opt
def check(system, out, tol, seed):
    """Structural hypotheses and boundary indices of a system."""

    def go():
        parse_tol(tol)
        s = build_setup(load_descriptor(system))
        samples = s.sys.sample_states(16, seed=seed) if s.sys.state_domain is not None else [s.u_bar]
        reports = [check_structure(s.sys, samples), check_parabolicity(s.sys, samples),
                   check_genuine_coupling(s.sys, [s.u_bar]), check_block11(s.sys, samples)]
        idx = boundary_indices(s.sys, s.u_bar)
        ranks = s.bc.check_ranks(s.sys)
        full_rank = int(np.linalg.matrix_rank(s.bc.matrix(s.sys, np.ones(s.sys.d - 1))))
        bc_ok = s.bc.rows == idx.Nb and full_rank == idx.Nb
        passed = all(r.passed for r in reports) and bc_ok
        _emit({"command": "check", "system": s.kind, "passed": passed,
               "checks": [r.to_dict() for r in reports],
               "indices": {"Nplus": idx.Nplus, "N1plus": idx.N1plus, "N2minus": idx.N2minus, "Nb": idx.Nb},
               "boundary": {"rows": s.bc.rows, "rank": full_rank, "block_ranks": ranks, "ok": bc_ok}},
              _outdir(out) if out else None, "check.json")
        return EXIT_OK if passed else EXIT_FAIL

    _run(go)


def _default_directions(s: Setup) -> list:
    if s.kind == "mhd":
        from .examples.mhd import manifold_directions
        return list(manifold_directions(s.params).values())
    return [np.array([1 / np.sqrt(2), 0.0])]


@main.command()
@_system_opt
@click.option("--xi", "xi", default=None, help="Comma-separated direction; defaults to the built-in ones.")
@_out_opt
def classify(system, xi, out):
    """Multiple characteristic roots: glancing, regularity and coupling verdicts."""
    from .classify import (classify_glancing, classify_regularity, coupling_matrix, find_roots,
                           glancing_data)

    def go():
        s = build_setup(load_descriptor(system))
        if xi:
            try:
                dirs = [np.array([float(v) for v in xi.split(",")])]
            except ValueError as exc:
                raise InputError(f"bad --xi: {exc}") from exc
            if dirs[0].size != s.sys.d or not np.linalg.norm(dirs[0]) > 0:
                raise InputError(f"--xi needs {s.sys.d} components, not all zero")
        else:
            dirs = _default_directions(s)
        entries = []
        for x in dirs:
            for root in find_roots(s.sys, s.u_bar, x):
                if root.m < 2:
                    continue
                br = glancing_data(root)
                ent = {"xi": x, "lambda": root.lam, "tau_bar": root.tau_bar, "m": root.m,
                       "glancing": classify_glancing(root, br), "nu": [b.nu for b in br],
                       "beta": [b.beta for b in br], "types": [b.mode_type for b in br]}
                try:
                    ent["regularity"] = classify_regularity(root).verdict
                except LinalgError as exc:
                    ent["regularity"] = f"failed: {exc}"
                try:
                    cd = coupling_matrix(s.sys, root, br)
                    ent["Bsharp"] = cd.Bsharp
                    ent["decoupled"] = cd.decoupled
                except LinalgError as exc:
                    ent["decoupled"] = None
                    ent["coupling_error"] = str(exc)
                entries.append(ent)
        extra = {}
        if s.kind == "mhd" and not xi:
            from .examples.mhd import closed_form_glancing, coupling_closed_form
            extra = {"closed_form_glancing": closed_form_glancing(s.params),
                     "coupling_closed_form": coupling_closed_form(s.params)}
        _emit({"command": "classify", "system": s.kind, "roots": entries, **extra},
              _outdir(out) if out else None, "classify.json")
        return EXIT_OK

    _run(go)


@main.command()
@_system_opt
@click.option("--grid", "grid", default="", help='Grid spec, e.g. "n=64,rmin=1e-3,rmax=100,polar=8x6".')
@click.option("--variant", "variant", default="full", help="full | lop | red | sc")
@_out_opt
@_tol_opt
@click.option("--jobs", "jobs", default=1, type=int)
@click.option("--seed", "seed", default=None, type=int)
def scan(system, grid, variant, out, tol, jobs, seed):
    """Grid scan of a stability determinant; writes scan.csv, scan.svg and summary.json."""
    from .evans import GridSpec, LayerProblem, scan_stability
    from .profiles import constant_profile

    def go():
        tols = parse_tol(tol)
        if variant not in VARIANTS:
            raise InputError(f"unknown variant {variant!r}")
        try:
            g = GridSpec.parse(grid)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        if seed is not None:
            g.seed = seed
        if jobs < 1:
            raise InputError("--jobs must be positive")
        s = build_setup(load_descriptor(system))
        od = _outdir(out)
        prob = LayerProblem(s.sys, constant_profile(s.sys, s.u_bar))
        rep = scan_stability(prob, s.bc, g, VARIANTS[variant], jobs=jobs, threshold=tols["threshold"],
                             zero_seed_tol=tols["zero_seed"])
        write_scan_csv(od / "scan.csv", rep.rows, s.sys.d)
        rows = sorted(rep.rows, key=lambda r: r["rho"])
        svg_line(od / "scan.svg", [r["rho"] for r in rows], {f"|D| ({variant})": [r["D"] for r in rows]},
                 title=f"{s.kind} stability scan", xlabel="|zeta|", ylabel="|D|", logx=True, logy=True)
        summ = rep.summary()
        frac = rep.failures / max(1, rep.total)
        anomaly = frac > tols["fail_fraction"] or bool(rep.zeros_confirmed)
        summ["failure_fraction"] = frac
        summ["anomaly"] = anomaly
        write_json(od / "summary.json", summ)
        click.echo(json.dumps(summ, indent=2, default=str))
        return EXIT_FAIL if anomaly else EXIT_OK

    _run(go)


@main.command()
@_system_opt
@_out_opt
@click.option("--zmax", "zmax", default=None, type=float)
def profile(system, out, zmax):
    """Boundary-layer profile by shooting on the stable manifold; writes profile.csv/svg/json."""
    from .profiles import check_transversality, solve_layer_profile

    def go():
        s = build_setup(load_descriptor(system))
        od = _outdir(out)
        prof = solve_layer_profile(s.sys, s.bc, s.u_bar, Zmax=zmax,
                                   initial_guess=s.raw.get("manifold_coords"))
        prof.to_csv(od / "profile.csv")
        series = {f"w{i}": prof.values[:, i] for i in range(prof.values.shape[1])}
        svg_line(od / "profile.svg", prof.grid, series, title=f"{s.kind} layer profile", xlabel="z",
                 ylabel="w", markers=False)
        info = {"command": "profile", "system": s.kind, "constant": prof.constant, "Zmax": prof.Zmax,
                "decay_rate": prof.delta, "decay_fit_residual": prof.fit_residual,
                "w0": prof.values[0], "u_bar": prof.u_bar}
        try:
            rep = check_transversality(s.sys, prof, s.bc)
            info["transversality"] = rep.to_dict()
        except LinalgError as exc:
            info["transversality"] = {"error": str(exc)}
        _emit(info, od, "profile.json")
        return EXIT_OK

    _run(go)


DEMOS = ("toy-instability", "toy-window", "mhd-report", "eminus-limits")


@main.command()
@click.argument("name", type=click.Choice(DEMOS))
@click.option("--a", "a", default=None, type=float, help="Toy coupling parameter.")
@_system_opt
@_out_opt
def demo(name, a, system, out):
    """Bundled reports for the built-in examples."""
    from .examples import mhd, toy

    def go():
        od = _outdir(out) if out else None
        if name == "toy-window":
            aa = 0.6 if a is None else a
            try:
                res = toy.toy_symmetrizer_window(aa)
            except ValueError as exc:
                raise InputError(str(exc)) from exc
            _emit({"demo": name, "a": aa, **res}, od, "toy-window.json")
            return EXIT_OK
        if name == "toy-instability":
            aa = 0.8 if a is None else a
            if not 0 < aa < 1:
                raise InputError("a must lie in (0, 1)")
            params = toy.ToyParams(a=aa, c_bar=-toy.b_bar(aa))
            pts = toy.toy_instability_locus(params, [1e-2, 5e-3, 2.5e-3])
            data = {"demo": name, "a": aa, "c_bar": params.c_bar, "b_bar": toy.b_bar(aa),
                    "points": [{"rho": p.rho, "sigma_hat": p.sigma_hat, "tau": p.zeta[0], "eta": p.zeta[1],
                                "gamma": p.gamma, "D": p.D, "newton_residual": p.residual}
                               for p in pts],
                    "gamma_exponent": toy.gamma_exponent(pts)}
            if od is not None:
                svg_line(od / "toy-instability.svg", [p.rho for p in pts], {"gamma(rho)": [p.gamma for p in pts]},
                         title="unstable frequencies", xlabel="rho", ylabel="gamma", logx=True, logy=True)
            _emit(data, od, "toy-instability.json")
            return EXIT_OK
        if name == "eminus-limits":
            out_d = {"demo": name, "cases": []}
            for aa in ([0.0, 0.5] if a is None else [a]):
                r = toy.toy_Eminus_limits(toy.ToyParams(a=aa))
                out_d["cases"].append({"a": aa, "angle": r["angle"], "gamma_path_error": r["gamma_path_error"],
                                       "rho_path_error": r["rho_path_error"],
                                       "incoming_invariant_under_Bsharp": r["incoming_invariant_under_Bsharp"]})
            _emit(out_d, od, "eminus-limits.json")
            return EXIT_OK
        # mhd-report
        desc = load_descriptor(system) if system else {"system": "mhd", "rho": 1.0, "u": [0.1, 0.2, 1.5],
                                                        "H": [0.3, 0.4, 0.8]}
        s = build_setup(desc)
        st = s.params
        xi = np.array([0.0, 0.0, 1.0])
        data = {"demo": name, "state": desc, "wave_speeds": mhd.mhd_wave_speeds(st, xi),
                "coupling_closed_form": mhd.coupling_closed_form(st),
                "glancing": mhd.mhd_glancing_report(st)}
        orth = mhd.manifold_directions(st)["orthogonal"]
        data["Bsharp"] = mhd.mhd_coupling(st, orth)
        _emit(data, od, "mhd-report.json")
        return EXIT_OK

    _run(go)


if __name__ == "__main__":
    main()
