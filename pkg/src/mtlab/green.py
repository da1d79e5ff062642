"""Neumann Green function with a boundary Dirac source.

Solves the deflated weak problem, extracts the constant term of the
boundary expansion (singular prefactor -1/pi at a boundary point) by a
constant-plus-linear least-squares fit over an annulus, and evaluates the
theoretical supremum bound |Omega| + (pi/2) e^{1 + 2 pi A_p}.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fem import Field, MeanZeroSolver
from .mesh import BoundaryPoint, pick_boundary_point


class FitAnnulusError(RuntimeError):
    """Annulus holds too few nodes; the mesh needs refinement."""


@dataclass
class GreenResult:
    p: BoundaryPoint
    alpha: float
    G: Field
    regular_part: Field
    A_p: float
    fit_radii: tuple
    fit_node_count: int
    bound_B: float
    mean_residual: float
    G_l2_sq: float  # integral of G^2, used by the test-function family


def solve_green(mesh, alpha, p, lambda1=None, fit_radii=None, source_scale=1.0):
    """Weak solve of -(Delta)G = delta_p + alpha*G - 1/|Omega|, zero mean."""
    if alpha != 0.0:
        if lambda1 is None:
            from .spectral import neumann_lambda1
            lambda1 = neumann_lambda1(mesh, tol=1e-10).lambda1
        if alpha >= lambda1:
            raise ValueError(f"alpha={alpha:g} is not below the discrete "
                             f"first Neumann eigenvalue {lambda1:g}")
    solver = MeanZeroSolver(mesh, alpha)
    w = np.asarray(solver.M @ np.ones(mesh.n_nodes))
    b = -w / mesh.area
    b[p.node_id] += 1.0
    G = solver.solve(source_scale * b)
    mean_residual = abs(float(w @ G))

    h = mesh.max_edge_length()
    if fit_radii is None:
        fit_radii = (3.0 * h, 9.0 * h)
    r_in, r_out = fit_radii
    if not (3.0 * h <= r_in + 1e-12 and r_in < r_out <= 10.0 * r_in + 1e-12):
        raise ValueError(f"fit radii {fit_radii} violate 3h <= r_in < r_out "
                         f"<= 10 r_in (h = {h:g})")

    d = mesh.nodes - np.asarray(p.coords)
    dist = np.hypot(d[:, 0], d[:, 1])
    sel = (dist >= r_in) & (dist <= r_out)
    count = int(np.sum(sel))
    if count < 12:
        raise FitAnnulusError(
            f"only {count} nodes in annulus [{r_in:g}, {r_out:g}]; refine "
            "the mesh or widen the annulus")
    # regular part: G + (1/pi) log|x-p|; linear term absorbs the O(|x-p|)
    # remainder of the expansion
    with np.errstate(divide="ignore"):
        reg = G + np.log(np.maximum(dist, 1e-300)) / math.pi
    basis = np.column_stack([np.ones(count), d[sel, 0], d[sel, 1]])
    coef, *_ = np.linalg.lstsq(basis, reg[sel], rcond=None)
    A_p = float(coef[0]) / source_scale
    reg[p.node_id] = coef[0]

    bound_B = exp_upper_bound_value(mesh.area, A_p)
    G_l2_sq = float(G @ (solver.M @ G))
    return GreenResult(p=p, alpha=alpha, G=Field(mesh, G),
                       regular_part=Field(mesh, reg), A_p=A_p,
                       fit_radii=(r_in, r_out), fit_node_count=count,
                       bound_B=bound_B, mean_residual=mean_residual,
                       G_l2_sq=G_l2_sq)


def exp_upper_bound_value(area, A_p):
    return area + 0.5 * math.pi * math.exp(1.0 + 2.0 * math.pi * A_p)


def exp_upper_bound(green):
    """|Omega| + (pi/2) e^{1 + 2 pi A_p} for a solved Green function."""
    return exp_upper_bound_value(green.G.mesh.area, green.A_p)


def _boundary_loop(mesh):
    """Boundary nodes in loop order with cumulative arc length."""
    nxt = {int(i): int(j) for i, j in mesh.boundary_edges}
    start = min(nxt)
    loop = [start]
    node = nxt[start]
    while node != start:
        loop.append(node)
        node = nxt[node]
    pts = mesh.nodes[loop]
    seg = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    return loop, arc  # arc[-1] is the perimeter


def _is_corner(mesh, loop, k, tol_deg=15.0):
    prev_pt = mesh.nodes[loop[k - 1]]
    this = mesh.nodes[loop[k]]
    nxt_pt = mesh.nodes[loop[(k + 1) % len(loop)]]
    v1, v2 = this - prev_pt, nxt_pt - this
    c = np.dot(v1, v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    return math.degrees(math.acos(np.clip(c, -1.0, 1.0))) > tol_deg


def bound_over_boundary(mesh, alpha, sample_count, lambda1=None):
    """A_p and bound at equispaced boundary points (corners excluded)."""
    if sample_count < 4:
        raise ValueError("sample_count must be at least 4")
    loop, arc = _boundary_loop(mesh)
    perimeter = arc[-1]
    rows = []
    for k in range(sample_count):
        target = (k + 0.5) * perimeter / sample_count
        order = np.argsort(np.abs(arc[:-1] - target))
        idx = next(i for i in order if not _is_corner(mesh, loop, i))
        p = BoundaryPoint(loop[idx], tuple(mesh.nodes[loop[idx]]))
        res = solve_green(mesh, alpha, p, lambda1=lambda1)
        rows.append({"x": p.coords[0], "y": p.coords[1],
                     "A_p": res.A_p, "bound_B": res.bound_B})
    a_vals = [r["A_p"] for r in rows]
    return {
        "samples": rows,
        "A_p_min": min(a_vals),
        "A_p_max": max(a_vals),
        "argmax": rows[int(np.argmax(a_vals))],
    }


def disk_image_A_p(radius=1.0, quad_n=400):
    """Method-of-images oracle for the unit-disk boundary Green constant.

    N(x) = -(1/pi) log|x-p| + |x|^2/(4 pi) + c0 with c0 fixed by zero mean;
    the mean of each term is computed by polar quadrature.
    """
    from numpy.polynomial.legendre import leggauss
    t, wt = leggauss(quad_n)
    r = 0.5 * radius * (t + 1.0)
    wr = 0.5 * radius * wt
    th = math.pi * (t + 1.0)
    wth = math.pi * wt
    p = np.array([radius, 0.0])
    xx = r[:, None] * np.cos(th)[None, :]
    yy = r[:, None] * np.sin(th)[None, :]
    d = np.hypot(xx - p[0], yy - p[1])
    area = math.pi * radius ** 2
    int_log = float(np.einsum("i,j,ij->", wr, wth, r[:, None] * np.log(d)))
    int_sq = float(np.einsum("i,j,ij->", wr, wth,
                             r[:, None] * (xx ** 2 + yy ** 2) / (4 * math.pi)))
    c0 = -(-int_log / math.pi + int_sq) / area
    return radius ** 2 / (4.0 * math.pi) + c0
