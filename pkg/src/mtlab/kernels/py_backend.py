"""Pure-numpy kernels: P1 assembly and exponential quadrature over triangles.

Every integral uses one fixed 7-point degree-5 rule per triangle.  The
accumulation order over triangles is fixed (numpy reductions over the
triangle axis), so results are reproducible run to run.
"""

import numpy as np

from .common import OverflowGuardError, EXP_CAP

# 7-point degree-5 rule on the reference triangle (barycentric coordinates).
_A1 = 0.059715871789769820
_B1 = 0.470142064105115090
_W1 = 0.132394152788506181
_A2 = 0.797426985353087322
_B2 = 0.101286507323456339
_W2 = 0.125939180544827153

QUAD_BARY = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
QUAD_W = np.array([9.0 / 40.0, _W1, _W1, _W1, _W2, _W2, _W2])

BACKEND = "python"


def tri_geometry(nodes, tris):
    """Signed areas and P1 shape-function gradients per triangle."""
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # grad(lambda_i) = perp(opposite edge) / (2A)
    g = np.empty((len(tris), 3, 2))
    g[:, 0, 0] = p1[:, 1] - p2[:, 1]
    g[:, 0, 1] = p2[:, 0] - p1[:, 0]
    g[:, 1, 0] = p2[:, 1] - p0[:, 1]
    g[:, 1, 1] = p0[:, 0] - p2[:, 0]
    g[:, 2, 0] = p0[:, 1] - p1[:, 1]
    g[:, 2, 1] = p1[:, 0] - p0[:, 0]
    g /= (2.0 * areas)[:, None, None]
    return areas, g


def assemble_p1(nodes, tris):
    """COO triplets of the P1 stiffness and consistent mass matrices."""
    areas, g = tri_geometry(nodes, tris)
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise ValueError(f"degenerate triangle {bad}: signed area {areas[bad]:g}")
    m = len(tris)
    kloc = np.einsum("tid,tjd->tij", g, g) * areas[:, None, None]
    mref = np.full((3, 3), 1.0 / 12.0)
    np.fill_diagonal(mref, 1.0 / 6.0)
    mloc = mref[None, :, :] * areas[:, None, None]
    rows = np.repeat(tris, 3, axis=1).reshape(m * 9)
    cols = np.tile(tris, (1, 3)).reshape(m * 9)
    return rows, cols, kloc.reshape(m * 9), mloc.reshape(m * 9)


def _quad_points(nodes, tris):
    corners = nodes[tris]  # (m, 3, 2)
    return np.einsum("qi,tid->tqd", QUAD_BARY, corners)


def _point_mask(nodes, tris, center, radius, invert):
    """Quadrature-point inclusion weights for an optional circular cutout."""
    if center is None:
        return None
    pts = _quad_points(nodes, tris)
    d2 = (pts[:, :, 0] - center[0]) ** 2 + (pts[:, :, 1] - center[1]) ** 2
    inside = d2 < radius * radius
    keep = inside if invert else ~inside
    return keep.astype(float)


def _check_exp(expo, u_at_q, what):
    cap = np.max(expo) if expo.size else 0.0
    if cap > EXP_CAP:
        tri = int(np.unravel_index(np.argmax(expo), expo.shape)[0])
        raise OverflowGuardError(what, tri, float(np.max(np.abs(u_at_q))), float(cap))


def exp_quad_u2(nodes, tris, u, beta, center=None, radius=0.0, invert=False):
    """Integrals of e^{beta*u^2} * (1, u, u^2) over the mesh.

    With `center`/`radius` set, quadrature points inside the disk of that
    radius are dropped (or, with invert=True, only those are kept).
    """
    areas, _ = tri_geometry(nodes, tris)
    uq = np.einsum("qi,ti->tq", QUAD_BARY, u[tris])
    expo = beta * uq * uq
    _check_exp(expo, uq, "exp(beta*u^2)")
    e = np.exp(expo)
    mask = _point_mask(nodes, tris, center, radius, invert)
    if mask is not None:
        e = e * mask
    w = QUAD_W[None, :] * areas[:, None]
    i0 = float(np.sum(np.sum(e * w, axis=1)))
    i1 = float(np.sum(np.sum(e * uq * w, axis=1)))
    i2 = float(np.sum(np.sum(e * uq * uq * w, axis=1)))
    return i0, i1, i2


def exp_load_u2(nodes, tris, u, beta):
    """Load vector L_i = ∫ e^{beta*u^2} u phi_i dx."""
    areas, _ = tri_geometry(nodes, tris)
    uq = np.einsum("qi,ti->tq", QUAD_BARY, u[tris])
    expo = beta * uq * uq
    _check_exp(expo, uq, "exp(beta*u^2)")
    vals = np.exp(expo) * uq * (QUAD_W[None, :] * areas[:, None])
    loc = np.einsum("tq,qi->ti", vals, QUAD_BARY)
    out = np.zeros(len(nodes))
    np.add.at(out, tris.reshape(-1), loc.reshape(-1))
    return out


def exp_hess_u2(nodes, tris, u, beta):
    """COO triplets of H_ij = ∫ 2b e^{b u^2} (1 + 2b u^2) phi_i phi_j dx.

    Second derivative of u -> ∫ e^{beta u^2}.
    """
    areas, _ = tri_geometry(nodes, tris)
    uq = np.einsum("qi,ti->tq", QUAD_BARY, u[tris])
    expo = beta * uq * uq
    _check_exp(expo, uq, "exp(beta*u^2)")
    vals = (2.0 * beta * np.exp(expo) * (1.0 + 2.0 * expo)
            * (QUAD_W[None, :] * areas[:, None]))
    loc = np.einsum("tq,qi,qj->tij", vals, QUAD_BARY, QUAD_BARY)
    m = len(tris)
    rows = np.repeat(tris, 3, axis=1).reshape(m * 9)
    cols = np.tile(tris, (1, 3)).reshape(m * 9)
    return rows, cols, loc.reshape(m * 9)


def exp_quad_fu(nodes, tris, u, f, center=None, radius=0.0, invert=False):
    """Integral of f * e^{u} over the mesh (f, u both P1 fields)."""
    areas, _ = tri_geometry(nodes, tris)
    uq = np.einsum("qi,ti->tq", QUAD_BARY, u[tris])
    fq = np.einsum("qi,ti->tq", QUAD_BARY, f[tris])
    _check_exp(uq, uq, "f*exp(u)")
    e = fq * np.exp(uq)
    mask = _point_mask(nodes, tris, center, radius, invert)
    if mask is not None:
        e = e * mask
    return float(np.sum(np.sum(e * (QUAD_W[None, :] * areas[:, None]), axis=1)))


def exp_load_fu(nodes, tris, u, f):
    """Load vector b_i = ∫ f e^{u} phi_i dx."""
    areas, _ = tri_geometry(nodes, tris)
    uq = np.einsum("qi,ti->tq", QUAD_BARY, u[tris])
    fq = np.einsum("qi,ti->tq", QUAD_BARY, f[tris])
    _check_exp(uq, uq, "f*exp(u)")
    vals = fq * np.exp(uq) * (QUAD_W[None, :] * areas[:, None])
    loc = np.einsum("tq,qi->ti", vals, QUAD_BARY)
    out = np.zeros(len(nodes))
    np.add.at(out, tris.reshape(-1), loc.reshape(-1))
    return out


def exp_mass_fu(nodes, tris, u, f):
    """COO triplets of W_ij = ∫ f e^{u} phi_i phi_j dx."""
    areas, _ = tri_geometry(nodes, tris)
    uq = np.einsum("qi,ti->tq", QUAD_BARY, u[tris])
    fq = np.einsum("qi,ti->tq", QUAD_BARY, f[tris])
    _check_exp(uq, uq, "f*exp(u)")
    vals = fq * np.exp(uq) * (QUAD_W[None, :] * areas[:, None])
    loc = np.einsum("tq,qi,qj->tij", vals, QUAD_BARY, QUAD_BARY)
    m = len(tris)
    rows = np.repeat(tris, 3, axis=1).reshape(m * 9)
    cols = np.tile(tris, (1, 3)).reshape(m * 9)
    return rows, cols, loc.reshape(m * 9)
