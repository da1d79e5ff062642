"""Compare the compiled and numpy kernel backends on the hot paths.

Run as: python benchmarks/bench_kernels.py [--h 0.02] [--repeat 5]
"""

import argparse
import time

import numpy as np

from mtlab.kernels import py_backend
from mtlab.mesh import DomainSpec, build_mesh

try:
    from mtlab.kernels import _accel
except ImportError:
    _accel = None


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mesh = build_mesh(DomainSpec(kind="unit-square", target_h=args.h))
    rng = np.random.default_rng(0)
    u = 0.3 * rng.standard_normal(mesh.n_nodes)
    f = np.exp(mesh.nodes[:, 0])
    beta = 5.0
    print(f"mesh: {mesh.n_nodes} nodes, {len(mesh.tris)} triangles")

    cases = [
        ("assemble_p1", lambda b: b.assemble_p1(mesh.nodes, mesh.tris)),
        ("exp_quad_u2", lambda b: b.exp_quad_u2(mesh.nodes, mesh.tris, u, beta)),
        ("exp_load_u2", lambda b: b.exp_load_u2(mesh.nodes, mesh.tris, u, beta)),
        ("exp_hess_u2", lambda b: b.exp_hess_u2(mesh.nodes, mesh.tris, u, beta)),
        ("exp_quad_fu", lambda b: b.exp_quad_fu(mesh.nodes, mesh.tris, u, f)),
        ("exp_mass_fu", lambda b: b.exp_mass_fu(mesh.nodes, mesh.tris, u, f)),
    ]
    header = f"{'kernel':<14}{'python':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py = bench(lambda: call(py_backend), args.repeat)
        if _accel is not None:
            t_cy = bench(lambda: call(_accel), args.repeat)
            print(f"{name:<14}{t_py * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms"
                  f"{t_py / t_cy:>9.1f}x")
        else:
            print(f"{name:<14}{t_py * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")


if __name__ == "__main__":
    main()
