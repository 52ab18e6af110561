"""Command line front end.

    eqsingular solve   CONFIG [--discount SPEC] [--Nx N --Nt N --Ns N] [--out DIR]
    eqsingular verify  DIR [--refined DIR2]
    eqsingular oracle  CONFIG --gamma G
    eqsingular mc      CONFIG --x0 X [--t0 T0] [--s S] [--n N] [--seed K]
    eqsingular perturb CONFIG --x0 X [--h H ...] [--mode M ...] [--delta D]
    eqsingular check   CONFIG

Exit codes: 0 ok, 1 numerical failure, 2 config error, 3 missing artifacts.
The default output directory is $EQSINGULAR_OUT, else ./eqsingular-out.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, coupling, model, obstacle, simulate
from . import equilibrium as eq
from .config import ConfigError, RunConfig, dump_instance, load_config, parse_config
from .grid import (ResolutionError, ScalarField, SpaceTimeGrid, read_boundary_csv, read_family_csv, read_field_csv,
                   write_boundary_csv, write_family_csv, write_field_csv)

log = logging.getLogger("eqsingular")

OUT_ENV = "EQSINGULAR_OUT"
DEFAULT_OUT = "eqsingular-out"

OK, NUMERICAL, CONFIG, MISSING = 0, 1, 2, 3
STATUS = {OK: "ok", NUMERICAL: "numerical-failure", CONFIG: "config-error", MISSING: "missing-artifacts"}

ARTIFACTS = ("v.csv", "V.csv", "gamma.csv", "d.csv", "f_family.csv", "report.json")
REPORT_NAMES = {"solve": "report.json", "verify": "verify.json", "oracle": "oracle.json",
                "mc": "mc.json", "perturb": "perturb.json", "check": "check.json"}

# verify passes when recomputed residuals stay within this factor of the
# residuals recorded at solve time
VERIFY_FACTOR = 2.0


class MissingArtifacts(FileNotFoundError):
    pass


# ---------------------------------------------------------------------------
# Report plumbing
# ---------------------------------------------------------------------------


def load_schema() -> dict:
    return json.loads(resources.files("eqsingular").joinpath("data/report.schema.json").read_text())


def _clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def validate_report(rep: dict) -> None:
    import jsonschema
    jsonschema.validate(rep, load_schema())


def _grid_dict(g: SpaceTimeGrid) -> dict:
    return {"x_min": g.x_min, "x_max": g.x_max, "Nx": g.Nx, "T": g.T, "Nt": g.Nt, "Ns": g.Ns}


def _manifest(args, cfg: RunConfig | None, out: Path, options: dict | None = None,
              seed: int | None = None) -> dict:
    man = {
        "config_path": cfg.path if cfg else None,
        "config_sha256": cfg.digest if cfg else "",
        "version": __version__,
        "seed": seed,
        "out_dir": str(out),
        "options": options or {},
        "threads": args.threads,
    }
    if cfg is not None:
        man["grid"] = _grid_dict(cfg.grid)
        d = cfg.instance.discount
        man["discount"] = d.family + ":" + ",".join(f"{k}={v!r}" for k, v in d.params().items())
    return man


def _write_report(out: Path, command: str, code: int, manifest: dict, body: dict,
                  message: str = "") -> dict:
    rep = {"tool": "eqsingular", "version": __version__, "command": command,
           "status": STATUS[code], "exit_code": code, "manifest": manifest, **body}
    if message:
        rep["message"] = message
    rep = _clean(rep)
    validate_report(rep)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_NAMES[command]).write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return rep


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


# ---------------------------------------------------------------------------
# Configuration from arguments
# ---------------------------------------------------------------------------


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "discount", None):
        try:
            cfg = cfg.with_discount(model.parse_discount(args.discount))
        except (model.InputError, ValueError) as exc:
            raise ConfigError(f"--discount: {exc}") from None
    changes = {k: getattr(args, k) for k in ("Nx", "Nt", "Ns") if getattr(args, k, None)}
    if changes:
        try:
            cfg = cfg.with_grid(**changes)
        except ValueError as exc:
            raise ConfigError(f"grid override: {exc}") from None
    opts = cfg.options
    ob = {}
    if getattr(args, "method", None):
        ob["method"] = args.method
    kw = {}
    if getattr(args, "damping", None) is not None:
        kw["damping"] = args.damping
    if getattr(args, "coupling_mode", None):
        kw["coupling_mode"] = args.coupling_mode
    if ob:
        kw["obstacle"] = dataclasses.replace(opts.obstacle, **ob)
    if kw:
        try:
            opts = dataclasses.replace(opts, **kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return dataclasses.replace(cfg, options=opts)


# ---------------------------------------------------------------------------
# Solution artifacts
# ---------------------------------------------------------------------------


def write_solution(out: Path, sol: eq.EquilibriumSolution) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_field_csv(out / "v.csv", sol.v)
    write_field_csv(out / "V.csv", sol.V)
    write_boundary_csv(out / "gamma.csv", sol.gamma)
    write_field_csv(out / "d.csv", sol.d)
    write_family_csv(out / "f_family.csv", sol.f)


def _solve_meta(sol: eq.EquilibriumSolution) -> dict:
    m = sol.v.meta
    gf = sol.gamma.forward_values()
    out = {"converged": sol.converged, "iterations": sol.iterations, "method": m.get("method"),
           "eps": m.get("eps"), "C_n": m.get("C_n"), "tol_gamma": m.get("tol_gamma"),
           "eps_schedule": list(sol.options.obstacle.eps_schedule),
           "gamma_range": [float(gf.min()), float(gf.max())]}
    if "levels" in m:
        out["newton"] = {"levels": m["levels"], "halvings": m.get("halvings", 0)}
    if "psor_sweeps" in m:
        out["newton"] = {"psor_sweeps_total": int(sum(m["psor_sweeps"])),
                         "lcp_residual": m["lcp_residual"]}
    return out


def load_solution(directory) -> tuple[eq.EquilibriumSolution, model.ProblemInstance, dict]:
    """Rebuild a solution from a `solve` artifact directory."""
    d = Path(directory)
    missing = [a for a in ARTIFACTS if not (d / a).is_file()]
    if missing:
        raise MissingArtifacts(f"{d}: missing {', '.join(missing)}")
    rep = json.loads((d / "report.json").read_text())
    cfg = parse_config(rep["instance"] + "\n[grid]\n" + "\n".join(
        f"{k} = {v!r}" for k, v in rep["manifest"]["grid"].items() if k != "T"))
    inst, g = cfg.instance, cfg.grid
    try:
        v = read_field_csv(d / "v.csv", g).as_reversed()
        V = read_field_csv(d / "V.csv", g)
        gam = read_boundary_csv(d / "gamma.csv", g)
        dd = read_field_csv(d / "d.csv", g)
        f = read_family_csv(d / "f_family.csv", g)
    except ValueError as exc:
        raise MissingArtifacts(f"{d}: unreadable artifact ({exc})") from None
    meta = rep.get("solve", {})
    v.meta.update({k: meta[k] for k in ("eps", "C_n", "tol_gamma") if meta.get(k) is not None})
    dx = coupling.split_gradient(dd.values, g, gam)
    sol = eq.EquilibriumSolution(v=v, V=V, gamma=gam, d=dd, d_x=ScalarField(dx, g), f=f,
                                 trace=rep.get("trace", []), converged=meta.get("converged", False),
                                 options=eq.FixedPointOptions())
    return sol, inst, rep


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    out = _out_dir(args)
    cfg = _run_config(args)
    man = _manifest(args, cfg, out, cfg.options.to_dict())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            sol = eq.solve_equilibrium(cfg.instance, cfg.grid, cfg.options)
        except (obstacle.ConvergenceError, obstacle.StagnationError, obstacle.WindowError,
                coupling.GammaRoughError, eq.ContractError) as exc:
            body = {"instance": dump_instance(cfg.instance), "trace": getattr(exc, "trace", [])}
            partial = getattr(exc, "partial", None)
            if partial is not None:
                # last complete iterate, flagged as not converged
                write_solution(out, partial)
                body.update(solve=_solve_meta(partial), warnings=partial.warnings)
            _write_report(out, "solve", NUMERICAL, man, body, message=str(exc))
            print(f"solve failed: {exc}", file=sys.stderr)
            if partial is not None:
                _say(args, f"last complete iterate written to {out} (not converged)")
            return NUMERICAL
    notes = list(sol.warnings) + [str(w.message) for w in caught if str(w.message) not in sol.warnings]
    write_solution(out, sol)
    res = eq.verify_residuals(sol, cfg.instance)
    body = {"instance": dump_instance(cfg.instance), "trace": sol.trace, "solve": _solve_meta(sol),
            "residuals": {**res.to_dict(), "hjb_tol_interior": eq.interior_hjb_tol(sol, cfg.instance)},
            "invariants": eq.invariant_suite(sol, cfg.instance), "warnings": notes}
    code = OK if sol.converged else NUMERICAL
    _write_report(out, "solve", code, man, body,
                  message="" if sol.converged else "fixed point did not converge")
    _say(args, f"solve: {'converged' if sol.converged else 'NOT converged'} after "
               f"{sol.iterations} coupling iterations; hjb_tol={res.hjb_tol:.3e}; "
               f"Gamma in [{body['solve']['gamma_range'][0]:.6f}, {body['solve']['gamma_range'][1]:.6f}]")
    for n in notes:
        _say(args, f"warning: {n}")
    _say(args, f"artifacts in {out}")
    return code


def _residual_table(rows) -> str:
    lines = ["    Nx     Nt      hjb_tol   interior   ratio"]
    for r in rows:
        ratio = "" if r.get("ratio") is None else f"{r['ratio']:.3f}"
        lines.append(f"{r['Nx']:6d} {r['Nt']:6d}  {r['hjb_tol']:.3e}  {r['hjb_tol_interior']:.3e}  {ratio}")
    return "\n".join(lines)


def cmd_verify(args) -> int:
    directory = Path(args.directory)
    out = Path(args.out) if args.out else directory
    sol, inst, rep = load_solution(directory)
    res = eq.verify_residuals(sol, inst)
    inv = eq.invariant_suite(sol, inst)
    body = {"residuals": {**res.to_dict(), "hjb_tol_interior": eq.interior_hjb_tol(sol, inst)},
            "invariants": inv}
    failures = [k for k, v in inv.items() if not v["passed"]]
    recorded = rep.get("residuals", {}).get("hjb_tol")
    if recorded is not None and res.hjb_tol > VERIFY_FACTOR * recorded + 1e-12:
        failures.append(f"complementarity residual {res.hjb_tol:.3e} exceeds "
                        f"{VERIFY_FACTOR:g} x recorded {recorded:.3e} near x={res.worst['complementarity']['x']:.4f}, "
                        f"t={res.worst['complementarity']['t']:.4f}")
    rows = [{"Nx": sol.grid.Nx, "Nt": sol.grid.Nt, "hjb_tol": res.hjb_tol,
             "hjb_tol_interior": body["residuals"]["hjb_tol_interior"], "ratio": None}]
    if args.refined:
        sol2, inst2, _ = load_solution(args.refined)
        r2 = eq.verify_residuals(sol2, inst2)
        rows.append({"Nx": sol2.grid.Nx, "Nt": sol2.grid.Nt, "hjb_tol": r2.hjb_tol,
                     "hjb_tol_interior": eq.interior_hjb_tol(sol2, inst2),
                     "ratio": r2.hjb_tol / res.hjb_tol if res.hjb_tol > 0 else None})
    body["refinement"] = rows
    code = NUMERICAL if failures else OK
    man = {**rep["manifest"], "out_dir": str(out), "threads": args.threads}
    _write_report(out, "verify", code, man, body, message="; ".join(failures))
    _say(args, f"verify: r1_neg={res.r1_neg:.3e} r2_neg={res.r2_neg:.3e} "
               f"complementarity={res.complementarity:.3e}")
    for k, v in inv.items():
        _say(args, f"  {'pass' if v['passed'] else 'FAIL'}  {k:32s} margin={v['margin']:+.3e}")
    if args.refined:
        _say(args, _residual_table(rows))
    for f in failures:
        _say(args, f"violation: {f}")
    return code


def cmd_oracle(args) -> int:
    out = _out_dir(args)
    cfg = _run_config(args)
    cfg = cfg.with_discount(model.ExponentialDiscount(args.gamma))
    rep = eq.exponential_oracle(cfg.instance, cfg.grid, cfg.options, compare_modes=not args.no_compare)
    sol = rep["_solution"]
    man = _manifest(args, cfg, out, cfg.options.to_dict())
    code = OK if sol.converged else NUMERICAL
    _write_report(out, "oracle", code, man, {"instance": dump_instance(cfg.instance), "oracle": rep,
                                             "trace": sol.trace})
    _say(args, f"oracle gamma={args.gamma}: E1={rep['E1']:.3e} E2={rep['E2']:.3e} "
               f"E2_dx={rep['E2_dx']:.3e} iterations={rep['iterations']}")
    if "paper_literal" in rep and "E1" in rep["paper_literal"]:
        pl = rep["paper_literal"]
        _say(args, f"  paper-literal coupling: E1={pl['E1']:.3e} E2={pl['E2']:.3e}")
    return code


def _solution_for(args, cfg):
    if args.solution:
        sol, _, _ = load_solution(args.solution)
        return sol
    return eq.solve_equilibrium(cfg.instance, cfg.grid, cfg.options)


def cmd_mc(args) -> int:
    out = _out_dir(args)
    cfg = _run_config(args)
    inst = cfg.instance
    sol = _solution_for(args, cfg)
    s = args.t0 if args.s is None else args.s
    dt = args.dt or inst.horizon / 2000
    pc = simulate.PathConfig(args.x0, args.t0, args.n, dt, args.seed, args.antithetic)
    if args.reference == "extrapolated" and s == args.t0:
        comparison = eq.time_extrapolated_value(inst, sol.grid, [(args.x0, args.t0)], cfg.options)["value"][0]
    elif s == args.t0:
        comparison = eq.value_at(sol, inst, args.x0, args.t0)
    else:
        comparison = eq.family_at(sol, inst, args.x0, args.t0, s)
    r = simulate.simulate_family_point(inst, sol.gamma, pc, s, comparison, bias=not args.no_bias,
                                       record=args.trace)
    paths = r.extra.pop("X", None), r.extra.pop("xi", None)
    if args.trace:
        out.mkdir(parents=True, exist_ok=True)
        _write_traces(out / "paths.csv", pc, inst.horizon, *paths)
    body = {**r.to_dict(), "x0": args.x0, "t0": args.t0, "s": s,
            "within": r.within() if r.comparison is not None else None}
    man = _manifest(args, cfg, out, {"n": args.n, "dt": dt, "antithetic": args.antithetic,
                                     "reference": args.reference}, args.seed)
    code = OK if body["within"] in (True, None) else NUMERICAL
    _write_report(out, "mc", code, man, {"mc": body})
    _say(args, f"mc: J={r.estimate:.6f} +- {r.stderr:.2e} (bias allowance "
               f"{r.bias_allowance if r.bias_allowance is not None else float('nan'):.2e}); "
               f"V={comparison:.6f}; z={r.z:+.2f}; {'within' if body['within'] else 'OUTSIDE'} tolerance")
    return code


def _write_traces(path, pc, T, X, xi):
    n_steps = X.shape[1]
    t = pc.t0 + np.arange(n_steps) * pc.dt
    rows = []
    for p in range(X.shape[0]):
        rows.append(np.column_stack([np.full(n_steps, p), t, X[p], xi[p]]))
    np.savetxt(path, np.vstack(rows), fmt=["%d", "%.17g", "%.17g", "%.17g"], delimiter=",",
               header="path,t,X,xi", comments="")


def cmd_perturb(args) -> int:
    out = _out_dir(args)
    cfg = _run_config(args)
    inst = cfg.instance
    sol = _solution_for(args, cfg)
    dt = args.dt or inst.horizon / 2000
    pc = simulate.PathConfig(args.x0, args.t0, args.n, dt, args.seed, args.antithetic)
    jobs = [(h, m) for h in args.h for m in args.mode]
    if "extra-jump" in args.mode and args.delta is None:
        raise ConfigError("--delta is required for the extra-jump mode")

    # one batch per thread; a batch shares the law arm and the noise
    n_chunks = max(1, min(args.threads, len(jobs)))
    chunks = [jobs[i::n_chunks] for i in range(n_chunks)]

    def run(chunk):
        return simulate.perturbation_tests(inst, sol.gamma, pc, chunk, args.delta)

    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        done = list(pool.map(run, chunks))
    by_job = {}
    for chunk, reps in zip(chunks, done):
        by_job.update(zip(chunk, reps))
    reps = [by_job[j] for j in jobs]
    rows = [{**r.to_dict(), "x0": args.x0, "t0": args.t0} for r in reps]
    man = _manifest(args, cfg, out, {"n": args.n, "dt": dt, "h": args.h, "modes": args.mode,
                                     "delta": args.delta, "antithetic": args.antithetic}, args.seed)
    code = OK if all(r["passed"] for r in rows) else NUMERICAL
    _write_report(out, "perturb", code, man, {"perturbation": rows})
    for r in rows:
        _say(args, f"perturb h={r['h']:<6g} {r['mode']:12s} D={r['delta_hat']:+.5f} "
                   f"bound={r['bound']:+.5f} {'pass' if r['passed'] else 'FAIL'}")
    return code


def cmd_check(args) -> int:
    out = _out_dir(args)
    cfg = _run_config(args)
    inst = cfg.instance
    try:
        remark = model.check_remark_example(model.RemarkParams.from_instance(inst))
    except (AttributeError, model.InputError) as exc:
        log.info("example conditions not applicable: %s", exc)
        remark = None
    grid_rep = model.check_assumption_grid(inst, cfg.grid)
    ok = grid_rep.ok and (remark is None or remark.ok)
    code = OK if ok else NUMERICAL
    man = _manifest(args, cfg, out)
    _write_report(out, "check", code, man, {
        "checks": {"remark": remark.to_dict() if remark else None, "grid": grid_rep.to_dict()}})
    if remark is not None:
        _say(args, "example inequalities")
        _say(args, remark.table())
        _say(args, f"K = {remark.notes['K']:.6f}")
    _say(args, "grid inequalities")
    _say(args, grid_rep.table())
    _say(args, "all checks pass" if ok else "FAILED: " + "; ".join(
        (remark.failed() if remark else []) + grid_rep.failed()))
    return code


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqsingular",
                                description="Equilibrium singular control under non-exponential discounting.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="cap on worker threads for independent jobs")
    common.add_argument("-q", "--quiet", action="store_true", help="no human summary on stdout")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    inst = argparse.ArgumentParser(add_help=False)
    inst.add_argument("config", help="instance configuration file (INI)")
    inst.add_argument("--discount", help="override the discount, e.g. hyperbolic:k=1")
    inst.add_argument("--Nx", type=int)
    inst.add_argument("--Nt", type=int)
    inst.add_argument("--Ns", type=int)
    inst.add_argument("--damping", type=float)
    inst.add_argument("--method", choices=("penalty", "direct"))
    inst.add_argument("--coupling-mode", choices=coupling.MODES)

    paths = argparse.ArgumentParser(add_help=False)
    paths.add_argument("--x0", type=float, required=True)
    paths.add_argument("--t0", type=float, default=0.0)
    paths.add_argument("--n", type=_positive_int, default=100_000, help="number of paths")
    paths.add_argument("--dt", type=float, help="Euler step (default T/2000)")
    paths.add_argument("--seed", type=int, default=0)
    paths.add_argument("--antithetic", action="store_true")
    paths.add_argument("--solution", help="reuse the boundary from a solve directory")

    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("solve", parents=[common, inst], help="solve the coupled equilibrium system")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", parents=[common], help="residuals and invariants of a solve directory")
    sp.add_argument("directory")
    sp.add_argument("--refined", help="second solve directory on a refined grid")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("oracle", parents=[common, inst], help="exponential-discount oracle")
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--no-compare", action="store_true", help="skip the second coupling mode")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("mc", parents=[common, inst, paths], help="Monte-Carlo objective")
    sp.add_argument("--s", type=float, help="discount origin (default t0)")
    sp.add_argument("--reference", choices=("grid", "extrapolated"), default="grid",
                    help="comparison value: V on the grid, or V extrapolated in dt")
    sp.add_argument("--no-bias", action="store_true", help="skip the dt-halving bias run")
    sp.add_argument("--trace", type=int, default=0, metavar="K", help="write K sample paths to paths.csv")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("perturb", parents=[common, inst, paths], help="equilibrium perturbation test")
    sp.add_argument("--h", type=float, nargs="+", default=[0.02, 0.01, 0.005])
    sp.add_argument("--mode", nargs="+", choices=("no-purchase", "extra-jump"),
                    default=["no-purchase"])
    sp.add_argument("--delta", type=float, help="jump size at t0 for extra-jump")
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("check", parents=[common, inst], help="assumption and example inequalities")
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG
    except ResolutionError as exc:
        print(f"config error (grid resolution): {exc}", file=sys.stderr)
        return CONFIG
    except MissingArtifacts as exc:
        print(f"missing artifacts: {exc}", file=sys.stderr)
        return MISSING
    except (obstacle.ConvergenceError, obstacle.StagnationError, obstacle.WindowError,
            coupling.GammaRoughError, simulate.ContractError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
