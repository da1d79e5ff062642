"""Acceptance battery: one test per numbered criterion.

Every expected value is produced by an oracle that is independent of the
code path under test (closed forms, method of images, special-function
root bisection, dense eigen-solves, fixed-point iteration, subprocess
re-execution), evaluated inside the test itself.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.linalg
import scipy.optimize
import scipy.special

from mtlab.fem import Field, MeanZeroSolver, assemble_mass, mean_value, \
    norm_1alpha
from mtlab.green import disk_image_A_p, bound_over_boundary, solve_green
from mtlab.kernels import py_backend
from mtlab.maximizer import SubcriticalParams, blowup_diagnostics, \
    maximize_subcritical
from mtlab.meanfield import MeanFieldProblem, check_corollary, minimize_F
from mtlab.mesh import DomainSpec, Mesh, build_mesh, pick_boundary_point
from mtlab.spectral import neumann_lambda1
from mtlab.testfn import AnnulusCapacitySpec, annulus_capacity, \
    appendix_sweep, build_test_function, check_lower_bound, verify_profile

TWO_PI = 2.0 * math.pi


def _report(num, text):
    print(f"\ncriterion {num:2d}: PASS  {text}")


# --------------------------------------------------------------- 1

def test_criterion_01_eigenvalue_benchmarks(disk32, square8):
    t0 = time.time()
    sq = build_mesh(DomainSpec(kind="unit-square", target_h=1 / 64))
    lam_sq = neumann_lambda1(sq).lambda1
    err_sq = abs(lam_sq - math.pi ** 2) / math.pi ** 2
    elapsed = time.time() - t0
    assert err_sq < 5e-3
    assert elapsed < 30.0

    # oracle: first positive root of J1' by bisection on scipy's Bessel
    lo, hi = 1.5, 2.5
    assert scipy.special.jvp(1, lo) * scipy.special.jvp(1, hi) < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if scipy.special.jvp(1, lo) * scipy.special.jvp(1, mid) <= 0:
            hi = mid
        else:
            lo = mid
    lam_disk_exact = (0.5 * (lo + hi)) ** 2
    assert lam_disk_exact == pytest.approx(3.390, abs=2e-3)
    lam_disk = neumann_lambda1(disk32).lambda1
    err_disk = abs(lam_disk - lam_disk_exact) / lam_disk_exact
    assert err_disk < 1e-2

    s = 2.5
    scaled = Mesh(square8.nodes * s, square8.tris, square8.boundary_edges)
    l1 = neumann_lambda1(square8, tol=1e-12).lambda1
    ls = neumann_lambda1(scaled, tol=1e-12).lambda1
    scale_err = abs(ls - l1 / s ** 2) / (l1 / s ** 2)
    assert scale_err < 1e-10
    _report(1, f"square relerr {err_sq:.2e} in {elapsed:.1f}s, "
               f"disk relerr {err_disk:.2e}, scaling err {scale_err:.2e}")


# --------------------------------------------------------------- 2

def test_criterion_02_blowup_profile():
    rep = verify_profile()
    assert rep["mass_err"] < 1e-8
    assert 1.8 <= rep["order_slope"] <= 2.2
    assert rep["phi0"] == 0.0
    _report(2, f"mass err {rep['mass_err']:.2e}, "
               f"FD order {rep['order_slope']:.3f}, phi(0) = 0")


# --------------------------------------------------------------- 3

def test_criterion_03_green_constant():
    oracle = disk_image_A_p(1.0)
    ap, int_g = {}, {}
    for k in (32, 64, 128):
        mesh = build_mesh(DomainSpec(kind="disk", target_h=1.0 / k))
        p = pick_boundary_point(mesh, np.array([1.0, 0.0]))
        g = solve_green(mesh, 0.0, p)
        ap[k] = g.A_p
        w = np.asarray(assemble_mass(mesh) @ np.ones(mesh.n_nodes))
        int_g[k] = abs(float(w @ g.G.values))
        assert int_g[k] < 1e-10
        if k == 64:
            survey = bound_over_boundary(mesh, 0.0, 4)
    finest_err = abs(ap[128] - oracle) / abs(oracle)
    assert finest_err < 0.02
    inc1 = abs(ap[32] - ap[64])
    inc2 = abs(ap[64] - ap[128])
    assert inc2 < inc1
    aps = [s["A_p"] for s in survey["samples"]]
    spread = (max(aps) - min(aps)) / abs(np.mean(aps))
    assert spread < 0.01
    _report(3, f"A_p relerr {finest_err:.2e} at h=1/128, increments "
               f"{inc1:.2e} > {inc2:.2e}, max |int G| "
               f"{max(int_g.values()):.1e}, symmetry spread {spread:.1e}")


# --------------------------------------------------------------- 4

def test_criterion_04_appendix_validation(green64):
    out = appendix_sweep([1e-3, 1e-4, 1e-5], green64)
    worst = max(r["grad_rel_err"] for r in out["rows"])
    assert worst < 1e-10
    assert out["K_B_ratio"] < 2.0
    assert out["K_C_ratio"] < 2.0
    _report(4, f"inner gradient closed-vs-quad {worst:.1e}, "
               f"K ratios {out['K_B_ratio']:.2f} / {out['K_C_ratio']:.2f}")


# --------------------------------------------------------------- 5

def test_criterion_05_testfn_sign(green64):
    margins = {}
    for eps in (1e-3, 1e-4, 1e-5):
        tf = build_test_function(eps, green64)
        assert abs(tf.norm_sq - 1.0) < 1e-10
        margins[eps] = check_lower_bound(tf)["margin"]
        if eps == 1e-4:
            c2_gap = abs(tf.c2 - tf.c2_paper) / tf.c2_paper
    assert margins[1e-5] > 0.0
    assert c2_gap <= 0.05
    _report(5, f"margin at eps=1e-5 is {margins[1e-5]:+.3f} (> 0), "
               f"c^2 gap at eps=1e-4 is {c2_gap:.2e}")


# --------------------------------------------------------------- 6

def test_criterion_06_subcritical_maximizer(square8, square16):
    t0 = time.time()
    results = []
    for eps in (6.0, 5.0, 4.0, 3.0, 2.0, 1.5):
        params = SubcriticalParams(eps=eps, alpha=0.0, restarts=2, seed=0)
        res = maximize_subcritical(square16, params)
        assert res.converged
        assert abs(mean_value(square16, res.u_eps.values)) < 1e-12
        assert abs(norm_1alpha(res.u_eps, 0.0) - 1.0) < 1e-10
        assert res.el_residual <= 1e-6
        assert abs(res.mu_eps) <= math.e * square16.area + res.lambda_eps
        results.append(res)
    diag = blowup_diagnostics(results)
    assert diag.monotone_C

    # oracle: brute-force maximization over the span of the first six
    # nonconstant Neumann eigenvectors of the dense pencil (K, M)
    solver = MeanZeroSolver(square8, 0.0)
    _, vecs = scipy.linalg.eigh(solver.K.toarray(), solver.M.toarray())
    V = vecs[:, 1:7]
    beta = TWO_PI - 5.0
    A = solver.K

    def neg_obj(c):
        u = V @ c
        u = u / math.sqrt(float(u @ (A @ u)))
        try:
            i0, _, _ = py_backend.exp_quad_u2(square8.nodes, square8.tris,
                                              u, beta)
        except Exception:
            return 1e9
        return -i0

    rng = np.random.default_rng(0)
    best = -1e9
    for _ in range(30):
        r = scipy.optimize.minimize(
            neg_obj, rng.standard_normal(6), method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14,
                     "maxiter": 20000, "maxfev": 20000})
        best = max(best, -r.fun)
    fem = maximize_subcritical(
        square8, SubcriticalParams(eps=5.0, alpha=0.0, restarts=4, seed=0))
    gap = abs(fem.C_eps - best) / best
    elapsed = time.time() - t0
    assert gap < 5e-3
    assert elapsed < 300.0
    _report(6, f"6-eps sweep feasible/stationary/monotone, oracle gap "
               f"{gap:.2e}, total {elapsed:.0f}s")


# --------------------------------------------------------------- 7

def test_criterion_07_capacity_identity():
    triples = [
        AnnulusCapacitySpec(delta=0.3, Rr_eps=1e-4, s_eps=1.3, i_eps=0.4),
        AnnulusCapacitySpec(delta=0.05, Rr_eps=1e-7, s_eps=2.0, i_eps=-1.0),
        AnnulusCapacitySpec(delta=0.2, Rr_eps=1e-5, s_eps=0.7, i_eps=0.7),
    ]
    worst = 0.0
    for spec in triples:
        out = annulus_capacity(spec)
        if spec.s_eps == spec.i_eps:
            assert out["closed"] == 0.0
            assert abs(out["quadrature"]) < 1e-14
        else:
            worst = max(worst, out["rel_err"])
    assert worst < 1e-10
    _report(7, f"closed-vs-quadrature relerr {worst:.1e} on 3 triples "
               f"(degenerate s = i included)")


# --------------------------------------------------------------- 8

def test_criterion_08_meanfield(disk32):
    lam = neumann_lambda1(disk32).lambda1
    rho = math.pi

    ones = MeanFieldProblem(mesh=disk32, alpha=1.0, rho=rho,
                            f=Field(disk32, np.ones(disk32.n_nodes)))
    s0 = minimize_F(ones, lambda1=lam)
    assert s0.residual <= 1e-10
    assert np.max(np.abs(s0.u.values)) < 1e-12

    fvals = np.exp(disk32.nodes[:, 0])
    prob = MeanFieldProblem(mesh=disk32, alpha=1.0, rho=rho,
                            f=Field(disk32, fvals))
    sol = minimize_F(prob, lambda1=lam)
    assert sol.converged
    fs = [t["F"] for t in sol.trace if t["phase"] == "descent"]
    assert all(b < a for a, b in zip(fs, fs[1:]))

    # oracle: under-relaxed fixed-point iteration on A u = rho (b/s - w/|O|)
    solver = MeanZeroSolver(disk32, 1.0)
    w = np.asarray(solver.M @ np.ones(disk32.n_nodes))
    u = np.zeros(disk32.n_nodes)
    for _ in range(2000):
        s = py_backend.exp_quad_fu(disk32.nodes, disk32.tris, u, fvals)
        b = py_backend.exp_load_fu(disk32.nodes, disk32.tris, u, fvals)
        unew = 0.7 * u + 0.3 * solver.solve(rho * (b / s - w / disk32.area))
        du = unew - u
        u = unew
        if math.sqrt(float(du @ (solver.M @ du))) < 1e-13:
            break
    d = sol.u.values - u
    l2_gap = math.sqrt(float(d @ (solver.M @ d)))
    assert l2_gap <= 1e-6

    prob2 = MeanFieldProblem(mesh=disk32, alpha=1.0, rho=rho,
                             f=Field(disk32, 2.0 * fvals))
    sol2 = minimize_F(prob2, lambda1=lam)
    shift_err = abs((sol2.F_value - sol.F_value) + rho * math.log(2.0))
    d2 = sol2.u.values - sol.u.values
    move = math.sqrt(float(d2 @ (solver.M @ d2)))
    assert shift_err < 1e-10
    assert move < 1e-10
    _report(8, f"f=1 residual {s0.residual:.1e}, Picard L2 gap "
               f"{l2_gap:.1e}, descent monotone, doubling shift err "
               f"{shift_err:.1e} with minimizer move {move:.1e}")


# --------------------------------------------------------------- 9

def test_criterion_09_corollary_sampler(square16):
    outs = [check_corollary(square16, 0.0, n_samples=1000, seed=s)
            for s in (0, 1, 2)]
    for out in outs:
        assert abs(out["constant_score"] - out["log_area"]) < 1e-13
        assert out["recheck_drift"] <= 1e-12
    cs = [out["C_emp"] for out in outs]
    spread = (max(cs) - min(cs)) / abs(np.mean(cs))
    assert spread < 0.10
    _report(9, f"D(const) = log|Omega| to {max(abs(o['constant_score'] - o['log_area']) for o in outs):.1e}, "
               f"seed spread {spread:.2e}, drift "
               f"{max(o['recheck_drift'] for o in outs):.1e}")


# --------------------------------------------------------------- 10

def test_criterion_10_reproducibility(tmp_path):
    cfg = {"command": "sweep", "domain": "unit-square", "h": 1 / 8,
           "alpha": 0.0, "eps_grid": [6.0, 5.0, 4.0], "restarts": 2,
           "seed": 0}
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))

    def run(outdir, threads):
        env = dict(os.environ, MTLAB_THREADS=str(threads))
        subprocess.run(
            [sys.executable, "-m", "mtlab.cli", "run",
             "--config", str(cfg_path), "--outdir", str(outdir)],
            check=True, env=env, capture_output=True)

    dirs = [tmp_path / name for name in ("a", "b", "c")]
    for d, threads in zip(dirs, (1, 1, 4)):
        run(d, threads)

    names = sorted(os.listdir(dirs[0]))
    compared = []
    for name in names:
        if name == "manifest.json":
            continue  # carries wall-clock timings by design
        blobs = [open(d / name, "rb").read() for d in dirs]
        assert blobs[0] == blobs[1] == blobs[2], name
        compared.append(name)
    assert "results.json" in compared
    # manifests agree on everything except timings and thread count
    manifests = [json.load(open(d / "manifest.json")) for d in dirs]
    for m in manifests:
        m.pop("timings")
        m.pop("threads")
    assert manifests[0] == manifests[1] == manifests[2]
    _report(10, f"{len(compared)} output files byte-identical across "
                f"reruns and thread counts 1/1/4")
