"""Experiment runner: config parsing, pipelines, manifests, plot data.

Thread-count environment variables are set from MTLAB_THREADS before the
numeric stack is imported, so BLAS pools honor the request; the kernels
keep fixed reduction order either way, so outputs do not depend on it.
"""

import os

_nthreads = os.environ.get("MTLAB_THREADS")
if _nthreads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _nthreads)

import argparse
import hashlib
import json
import sys
import time

import numpy as np
import scipy

from . import __version__, kernels
from .fem import AlphaTooLargeError, Field
from .green import FitAnnulusError, solve_green, bound_over_boundary
from .maximizer import (SubcriticalParams, maximize_subcritical,
                        blowup_diagnostics)
from .meanfield import (MeanFieldProblem, SubcriticalityError,
                        minimize_F, check_corollary)
from .mesh import (BoundaryPoint, DomainError, DomainSpec, build_mesh,
                   load_mesh, pick_boundary_point)
from .plotdata import Series, emit_plotdata
from .spectral import EigenSolveError, neumann_lambda1
from .testfn import (AnnulusCapacitySpec, BlowupProfile, annulus_capacity,
                     appendix_sweep, build_test_function, check_lower_bound,
                     verify_profile)

VALIDATION_ERRORS = (ValueError, DomainError, AlphaTooLargeError,
                     SubcriticalityError, FitAnnulusError, KeyError,
                     FileNotFoundError, json.JSONDecodeError)


class ConvergenceFailure(RuntimeError):
    pass


CONVERGENCE_ERRORS = (ConvergenceFailure, EigenSolveError,
                      kernels.OverflowGuardError)


def _sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path):
    with open(path, "rb") as fh:
        return _sha256_bytes(fh.read())


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _mesh_from(cfg, timings):
    t0 = time.perf_counter()
    if "mesh_file" in cfg:
        mesh = load_mesh(cfg["mesh_file"])
    else:
        spec = DomainSpec(kind=cfg["domain"], target_h=float(cfg["h"]),
                          radius=float(cfg.get("radius", 1.0)),
                          vertices=cfg.get("vertices"))
        mesh = build_mesh(spec)
    timings["mesh"] = time.perf_counter() - t0
    return mesh


def _check_alpha(mesh, alpha):
    """Reject alpha >= lambda1 before any expensive solve."""
    if alpha == 0.0:
        return None
    lam = neumann_lambda1(mesh).lambda1
    if alpha >= lam:
        raise AlphaTooLargeError(
            f"alpha = {alpha:g} is not below the discrete first Neumann "
            f"eigenvalue {lam:g}")
    return lam


def _maximizer_row(res):
    return {"eps": res.eps, "C_eps": res.C_eps, "lambda_eps": res.lambda_eps,
            "mu_eps": res.mu_eps, "c_eps": res.c_eps,
            "x_eps": list(res.x_eps), "r_eps": res.r_eps,
            "el_residual": res.el_residual, "grad_norm": res.grad_norm,
            "converged": res.converged, "restart_index": res.restart_index}


def _green_point(mesh, cfg):
    target = cfg.get("point", [1.0, 0.0])
    return pick_boundary_point(mesh, np.asarray(target, dtype=float))


# ------------------------------------------------------------- pipelines

def cmd_eigen(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    res = neumann_lambda1(mesh, tol=float(cfg.get("tol", 1e-10)))
    out = {"lambda1": res.lambda1, "residual": res.residual,
           "iterations": res.iterations, "mesh_h": res.mesh_h,
           "n_nodes": mesh.n_nodes, "area": mesh.area}
    return out, []


def cmd_maximize(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    params = SubcriticalParams(eps=float(cfg["eps"]), alpha=alpha,
                               restarts=int(cfg.get("restarts", 8)),
                               tol=float(cfg.get("tol", 1e-9)),
                               maxiter=int(cfg.get("maxiter", 5000)),
                               seed=int(cfg.get("seed", 0)))
    res = maximize_subcritical(mesh, params, lambda1=lam)
    if not res.converged:
        raise ConvergenceFailure(f"maximizer stalled at eps = {params.eps:g}")
    return _maximizer_row(res), []


def cmd_sweep(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    eps_grid = [float(e) for e in cfg["eps_grid"]]
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be strictly decreasing")
    results = []
    for eps in eps_grid:
        params = SubcriticalParams(eps=eps, alpha=alpha,
                                   restarts=int(cfg.get("restarts", 4)),
                                   tol=float(cfg.get("tol", 1e-9)),
                                   maxiter=int(cfg.get("maxiter", 5000)),
                                   seed=int(cfg.get("seed", 0)))
        res = maximize_subcritical(mesh, params, lambda1=lam)
        if not res.converged:
            raise ConvergenceFailure(f"maximizer stalled at eps = {eps:g}")
        results.append(res)
    diag = blowup_diagnostics(results)
    out = {"rows": [_maximizer_row(r) for r in results],
           "diagnostics": {"entries": diag.entries,
                           "monotone_C": diag.monotone_C,
                           "bound_ok": diag.bound_ok,
                           "liminf_ok_at_smallest": diag.liminf_ok_at_smallest}}
    series = [
        Series("eps_vs_C", "eps", "C_eps",
               eps_grid, [r.C_eps for r in results]),
        Series("eps_vs_c_max", "eps", "c_eps",
               eps_grid, [r.c_eps for r in results]),
        Series("eps_vs_lambda", "eps", "lambda_eps",
               eps_grid, [r.lambda_eps for r in results]),
    ]
    return out, series


def cmd_green(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    p = _green_point(mesh, cfg)
    res = solve_green(mesh, alpha, p, lambda1=lam)
    out = {"p": list(p.coords), "A_p": res.A_p, "bound_B": res.bound_B,
           "mean_residual": res.mean_residual,
           "fit_radii": list(res.fit_radii),
           "fit_node_count": res.fit_node_count, "G_l2_sq": res.G_l2_sq}
    return out, []


def cmd_green_survey(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    out = bound_over_boundary(mesh, alpha, int(cfg.get("samples", 8)),
                              lambda1=lam)
    idx = list(range(len(out["samples"])))
    series = [Series("boundary_vs_A_p", "sample", "A_p", idx,
                     [r["A_p"] for r in out["samples"]]),
              Series("boundary_vs_bound", "sample", "bound_B", idx,
                     [r["bound_B"] for r in out["samples"]])]
    return out, series


def cmd_testfn(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    p = _green_point(mesh, cfg)
    green = solve_green(mesh, alpha, p, lambda1=lam)
    eps_grid = [float(e) for e in cfg["eps_grid"]]
    rows = []
    for eps in eps_grid:
        tf = build_test_function(eps, green)
        rep = check_lower_bound(tf)
        rep_paper = check_lower_bound(tf, use_paper_c=True)
        rows.append({"eps": eps, "c2": tf.c2, "c2_paper": tf.c2_paper,
                     "c2_rel_gap": abs(tf.c2 - tf.c2_paper) / tf.c2_paper,
                     "integral": rep["integral"], "bound_B": rep["bound_B"],
                     "margin": rep["margin"],
                     "margin_paper_c": rep_paper["margin"],
                     "norm_sq": tf.norm_sq})
    out = {"A_p": green.A_p, "p": list(p.coords), "rows": rows}
    series = [Series("eps_vs_margin", "eps", "margin",
                     eps_grid, [r["margin"] for r in rows]),
              Series("eps_vs_c2", "eps", "c2",
                     eps_grid, [r["c2"] for r in rows])]
    return out, series


def cmd_verify_profile(cfg, timings):
    profile = BlowupProfile(r_max=float(cfg.get("r_max", 1e3)),
                            n=int(cfg.get("n", 10 ** 4)))
    return verify_profile(profile), []


def cmd_appendix(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    p = _green_point(mesh, cfg)
    green = solve_green(mesh, alpha, p, lambda1=lam)
    eps_grid = [float(e) for e in cfg.get("eps_grid", [1e-3, 1e-4, 1e-5])]
    out = appendix_sweep(eps_grid, green)
    cap = annulus_capacity(AnnulusCapacitySpec(
        delta=float(cfg.get("delta", 0.5)),
        Rr_eps=float(cfg.get("Rr_eps", 1e-3)),
        s_eps=float(cfg.get("s_eps", 1.0)),
        i_eps=float(cfg.get("i_eps", 0.25))))
    out["capacity"] = cap
    series = [Series("eps_vs_K_B", "eps", "K_B",
                     eps_grid, [r["K_B"] for r in out["rows"]]),
              Series("eps_vs_K_C", "eps", "K_C",
                     eps_grid, [r["K_C"] for r in out["rows"]])]
    return out, series


def cmd_meanfield(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    kind = cfg.get("f", "one")
    if kind == "one":
        fvals = np.ones(mesh.n_nodes)
    elif kind == "exp_x1":
        fvals = np.exp(mesh.nodes[:, 0])
    else:
        raise ValueError(f"unknown weight '{kind}' (use 'one' or 'exp_x1')")
    problem = MeanFieldProblem(mesh=mesh, alpha=alpha,
                               rho=float(cfg["rho"]), f=Field(mesh, fvals))
    sol = minimize_F(problem, lambda1=lam,
                     tol=float(cfg.get("tol", 1e-10)),
                     maxiter=int(cfg.get("maxiter", 100)))
    if not sol.converged:
        raise ConvergenceFailure("mean-field Newton iteration stalled")
    out = {"F_value": sol.F_value, "mu": sol.mu, "grad_norm": sol.grad_norm,
           "residual": sol.residual, "iterations": sol.iterations,
           "u_max": float(np.max(np.abs(sol.u.values))),
           "trace": sol.trace}
    series = [Series("iter_vs_F", "iteration", "F",
                     [t["iter"] for t in sol.trace],
                     [t["F"] for t in sol.trace])]
    return out, series


def cmd_corollary(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    seeds = [int(s) for s in cfg.get("seeds", [0])]
    reports = [check_corollary(mesh, alpha,
                               n_samples=int(cfg.get("samples", 200)),
                               seed=s, lambda1=lam) for s in seeds]
    c_vals = [r["C_emp"] for r in reports]
    out = {"reports": reports, "C_emp_min": min(c_vals),
           "C_emp_max": max(c_vals),
           "spread": (max(c_vals) - min(c_vals)) / abs(max(c_vals))}
    series = [Series("seed_vs_C_emp", "seed", "C_emp", seeds, c_vals)]
    return out, series


def cmd_full_report(cfg, timings):
    mesh = _mesh_from(cfg, timings)
    alpha = float(cfg.get("alpha", 0.0))
    lam = _check_alpha(mesh, alpha)
    eig = neumann_lambda1(mesh)
    p = _green_point(mesh, cfg)
    green = solve_green(mesh, alpha, p, lambda1=lam)

    eps_grid = [float(e) for e in cfg.get("eps_grid", [2.0, 1.0, 0.5])]
    max_rows = []
    for eps in eps_grid:
        params = SubcriticalParams(eps=eps, alpha=alpha,
                                   restarts=int(cfg.get("restarts", 4)),
                                   seed=int(cfg.get("seed", 0)))
        res = maximize_subcritical(mesh, params, lambda1=lam)
        if not res.converged:
            raise ConvergenceFailure(f"maximizer stalled at eps = {eps:g}")
        max_rows.append(res)

    tf_eps = [float(e) for e in cfg.get("tf_eps_grid", [1e-3, 1e-4, 1e-5])]
    table = []
    for eps in tf_eps:
        tf = build_test_function(eps, green)
        rep = check_lower_bound(tf)
        table.append({"eps": eps, "C_eps": None, "bound_B": rep["bound_B"],
                      "testfn_integral": rep["integral"],
                      "margin": rep["margin"]})
    for eps, res in zip(eps_grid, max_rows):
        table.append({"eps": eps, "C_eps": res.C_eps,
                      "bound_B": green.bound_B, "testfn_integral": None,
                      "margin": None})
    table.sort(key=lambda r: -r["eps"])
    out = {"lambda1": eig.lambda1, "A_p": green.A_p,
           "bound_B": green.bound_B,
           "maximize": [_maximizer_row(r) for r in max_rows],
           "table": table}
    series = [Series("eps_vs_C", "eps", "C_eps", eps_grid,
                     [r.C_eps for r in max_rows]),
              Series("eps_vs_margin", "eps", "margin", tf_eps,
                     [r["margin"] for r in table if r["margin"] is not None])]
    return out, series, table


COMMANDS = {
    "eigen": cmd_eigen,
    "maximize": cmd_maximize,
    "sweep": cmd_sweep,
    "green": cmd_green,
    "green-survey": cmd_green_survey,
    "testfn": cmd_testfn,
    "verify-profile": cmd_verify_profile,
    "appendix": cmd_appendix,
    "meanfield": cmd_meanfield,
    "corollary": cmd_corollary,
    "full-report": cmd_full_report,
}


def _write_table_csv(table, path):
    cols = ["eps", "C_eps", "bound_B", "testfn_integral", "margin"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in table:
            fh.write(",".join("" if row[c] is None else repr(row[c])
                              for c in cols) + "\n")


def run_experiment(config, outdir, config_path=None):
    """Execute the named pipeline, writing results, plot data, a manifest."""
    command = config.get("command")
    if command not in COMMANDS:
        raise ValueError(f"unknown command '{command}'")
    os.makedirs(outdir, exist_ok=True)
    canonical = json.dumps(config, sort_keys=True,
                           separators=(",", ":")).encode()
    inputs = {}
    if config_path:
        inputs[os.path.basename(config_path)] = _sha256_file(config_path)
    if "mesh_file" in config:
        inputs[config["mesh_file"]] = _sha256_file(config["mesh_file"])
    manifest = {
        "schema": "mtlab-manifest v1",
        "command": command,
        "config_hash": _sha256_bytes(canonical),
        "versions": {"mtlab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "kernel_backend": kernels.backend_name,
        "threads": os.environ.get("MTLAB_THREADS", ""),
        "inputs": inputs,
        "timings": {},
        "outputs": {},
        "status": "ok",
    }
    timings = manifest["timings"]
    t0 = time.perf_counter()
    try:
        got = COMMANDS[command](config, timings)
    except Exception as exc:
        timings["total"] = time.perf_counter() - t0
        manifest["status"] = "failed"
        manifest["failure"] = f"{type(exc).__name__}: {exc}"
        _dump_json(manifest, os.path.join(outdir, "manifest.json"))
        raise
    timings["total"] = time.perf_counter() - t0

    results, series = got[0], got[1]
    out_paths = []
    results_path = os.path.join(outdir, "results.json")
    _dump_json({"schema": f"mtlab-{command} v1", "config": config,
                "results": results}, results_path)
    out_paths.append(results_path)
    out_paths.extend(emit_plotdata(series, outdir))
    if len(got) > 2:  # full-report comparison table
        table_path = os.path.join(outdir, "report_table.csv")
        _write_table_csv(got[2], table_path)
        out_paths.append(table_path)
    for path in out_paths:
        manifest["outputs"][os.path.basename(path)] = _sha256_file(path)
    _dump_json(manifest, os.path.join(outdir, "manifest.json"))
    return manifest


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mtlab",
        description="desk-scale experiments around a sharpened "
                    "exponential-integrability inequality")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a pipeline from a JSON config")
    runp.add_argument("--config", required=True)
    runp.add_argument("--outdir", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--outdir", required=True)
    common.add_argument("--domain", default="unit-square",
                        choices=["unit-square", "disk", "polygon"])
    common.add_argument("--h", type=float, default=1.0 / 16)
    common.add_argument("--alpha", type=float, default=0.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mesh-file", dest="mesh_file")

    sub.add_parser("eigen", parents=[common])
    p = sub.add_parser("maximize", parents=[common])
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--restarts", type=int, default=8)
    p = sub.add_parser("sweep", parents=[common])
    p.add_argument("--eps-grid", type=float, nargs="+", required=True)
    p = sub.add_parser("green", parents=[common])
    p.add_argument("--point", type=float, nargs=2, default=[1.0, 0.0])
    p = sub.add_parser("green-survey", parents=[common])
    p.add_argument("--samples", type=int, default=8)
    p = sub.add_parser("testfn", parents=[common])
    p.add_argument("--point", type=float, nargs=2, default=[1.0, 0.0])
    p.add_argument("--eps-grid", type=float, nargs="+", required=True)
    p = sub.add_parser("verify-profile", parents=[common])
    p.add_argument("--r-max", type=float, default=1e3)
    p.add_argument("--n", type=int, default=10 ** 4)
    p = sub.add_parser("appendix", parents=[common])
    p.add_argument("--point", type=float, nargs=2, default=[1.0, 0.0])
    p.add_argument("--eps-grid", type=float, nargs="+",
                   default=[1e-3, 1e-4, 1e-5])
    p = sub.add_parser("meanfield", parents=[common])
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--f", default="one", choices=["one", "exp_x1"])
    p = sub.add_parser("corollary", parents=[common])
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p = sub.add_parser("full-report", parents=[common])
    p.add_argument("--point", type=float, nargs=2, default=[1.0, 0.0])
    p.add_argument("--eps-grid", type=float, nargs="+", default=[2.0, 1.0, 0.5])
    p.add_argument("--tf-eps-grid", type=float, nargs="+",
                   default=[1e-3, 1e-4, 1e-5])
    return parser


def _config_from_args(args):
    cfg = {"command": args.command}
    skip = {"command", "outdir"}
    for key, val in vars(args).items():
        if key in skip or val is None:
            continue
        cfg[key.replace("_", "-") if key == "mesh_file" else key] = val
    if "mesh-file" in cfg:
        cfg["mesh_file"] = cfg.pop("mesh-file")
    return cfg


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            with open(args.config) as fh:
                config = json.load(fh)
            run_experiment(config, args.outdir, config_path=args.config)
        else:
            run_experiment(_config_from_args(args), args.outdir)
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except CONVERGENCE_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
