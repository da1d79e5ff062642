# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: P1 assembly and exponential quadrature over triangles.

Mirrors py_backend exactly (same 7-point degree-5 rule, same overflow
guard).  Triangles are accumulated strictly in index order.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

from .common import OverflowGuardError, EXP_CAP

cnp.import_array()

cdef double _EXP_CAP = EXP_CAP

cdef double[7][3] _BARY
cdef double[7] _W

_A1 = 0.059715871789769820
_B1 = 0.470142064105115090
_W1 = 0.132394152788506181
_A2 = 0.797426985353087322
_B2 = 0.101286507323456339
_W2 = 0.125939180544827153

_bary_py = [
    (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    (_A1, _B1, _B1), (_B1, _A1, _B1), (_B1, _B1, _A1),
    (_A2, _B2, _B2), (_B2, _A2, _B2), (_B2, _B2, _A2),
]
_w_py = [9.0 / 40.0, _W1, _W1, _W1, _W2, _W2, _W2]
for _q in range(7):
    for _i in range(3):
        _BARY[_q][_i] = _bary_py[_q][_i]
    _W[_q] = _w_py[_q]

BACKEND = "cython"


def tri_geometry(double[:, ::1] nodes, long[:, ::1] tris):
    cdef Py_ssize_t m = tris.shape[0], t
    cdef cnp.ndarray[double, ndim=1] areas = np.empty(m)
    cdef cnp.ndarray[double, ndim=3] g = np.empty((m, 3, 2))
    cdef double[::1] av = areas
    cdef double[:, :, ::1] gv = g
    cdef double x0, y0, x1, y1, x2, y2, a2
    for t in range(m):
        x0 = nodes[tris[t, 0], 0]; y0 = nodes[tris[t, 0], 1]
        x1 = nodes[tris[t, 1], 0]; y1 = nodes[tris[t, 1], 1]
        x2 = nodes[tris[t, 2], 0]; y2 = nodes[tris[t, 2], 1]
        a2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        av[t] = 0.5 * a2
        gv[t, 0, 0] = (y1 - y2) / a2; gv[t, 0, 1] = (x2 - x1) / a2
        gv[t, 1, 0] = (y2 - y0) / a2; gv[t, 1, 1] = (x0 - x2) / a2
        gv[t, 2, 0] = (y0 - y1) / a2; gv[t, 2, 1] = (x1 - x0) / a2
    return areas, g


def assemble_p1(double[:, ::1] nodes, long[:, ::1] tris):
    cdef Py_ssize_t m = tris.shape[0], t, i, j, n
    areas_np, g_np = tri_geometry(nodes, tris)
    cdef double[::1] areas = areas_np
    cdef double[:, :, ::1] g = g_np
    cdef cnp.ndarray[long, ndim=1] rows = np.empty(m * 9, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] cols = np.empty(m * 9, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] kv = np.empty(m * 9)
    cdef cnp.ndarray[double, ndim=1] mv = np.empty(m * 9)
    cdef long[::1] rv = rows
    cdef long[::1] cv = cols
    cdef double[::1] kvv = kv
    cdef double[::1] mvv = mv
    cdef double a
    for t in range(m):
        a = areas[t]
        if a <= 0.0:
            raise ValueError(f"degenerate triangle {t}: signed area {a:g}")
        n = t * 9
        for i in range(3):
            for j in range(3):
                rv[n] = tris[t, i]
                cv[n] = tris[t, j]
                kvv[n] = a * (g[t, i, 0] * g[t, j, 0] + g[t, i, 1] * g[t, j, 1])
                mvv[n] = a * (1.0 / 6.0 if i == j else 1.0 / 12.0)
                n += 1
    return rows, cols, kv, mv


cdef inline double _area(double[:, ::1] nodes, long[:, ::1] tris, Py_ssize_t t):
    cdef double x0 = nodes[tris[t, 0], 0], y0 = nodes[tris[t, 0], 1]
    cdef double x1 = nodes[tris[t, 1], 0], y1 = nodes[tris[t, 1], 1]
    cdef double x2 = nodes[tris[t, 2], 0], y2 = nodes[tris[t, 2], 1]
    return 0.5 * ((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))


def exp_quad_u2(double[:, ::1] nodes, long[:, ::1] tris, double[::1] u,
                double beta, center=None, double radius=0.0, bint invert=False):
    cdef Py_ssize_t m = tris.shape[0], t, q
    cdef double i0 = 0.0, i1 = 0.0, i2 = 0.0
    cdef double a, uq, expo, e, w, xq, yq, d2
    cdef bint has_cut = center is not None
    cdef double cx = 0.0, cy = 0.0, r2 = radius * radius
    cdef bint inside
    if has_cut:
        cx = center[0]; cy = center[1]
    for t in range(m):
        a = _area(nodes, tris, t)
        for q in range(7):
            uq = (_BARY[q][0] * u[tris[t, 0]] + _BARY[q][1] * u[tris[t, 1]]
                  + _BARY[q][2] * u[tris[t, 2]])
            expo = beta * uq * uq
            if expo > _EXP_CAP:
                raise OverflowGuardError("exp(beta*u^2)", t, fabs(uq), expo)
            if has_cut:
                xq = (_BARY[q][0] * nodes[tris[t, 0], 0]
                      + _BARY[q][1] * nodes[tris[t, 1], 0]
                      + _BARY[q][2] * nodes[tris[t, 2], 0])
                yq = (_BARY[q][0] * nodes[tris[t, 0], 1]
                      + _BARY[q][1] * nodes[tris[t, 1], 1]
                      + _BARY[q][2] * nodes[tris[t, 2], 1])
                d2 = (xq - cx) * (xq - cx) + (yq - cy) * (yq - cy)
                inside = d2 < r2
                if inside != invert:
                    continue
            e = exp(expo)
            w = _W[q] * a
            i0 += e * w
            i1 += e * uq * w
            i2 += e * uq * uq * w
    return i0, i1, i2


def exp_load_u2(double[:, ::1] nodes, long[:, ::1] tris, double[::1] u,
                double beta):
    cdef Py_ssize_t m = tris.shape[0], n = nodes.shape[0], t, q, i
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef double[::1] ov = out
    cdef double a, uq, expo, v
    for t in range(m):
        a = _area(nodes, tris, t)
        for q in range(7):
            uq = (_BARY[q][0] * u[tris[t, 0]] + _BARY[q][1] * u[tris[t, 1]]
                  + _BARY[q][2] * u[tris[t, 2]])
            expo = beta * uq * uq
            if expo > _EXP_CAP:
                raise OverflowGuardError("exp(beta*u^2)", t, fabs(uq), expo)
            v = exp(expo) * uq * _W[q] * a
            for i in range(3):
                ov[tris[t, i]] += v * _BARY[q][i]
    return out


def exp_quad_fu(double[:, ::1] nodes, long[:, ::1] tris, double[::1] u,
                double[::1] f, center=None, double radius=0.0,
                bint invert=False):
    cdef Py_ssize_t m = tris.shape[0], t, q
    cdef double total = 0.0
    cdef double a, uq, fq, xq, yq, d2
    cdef bint has_cut = center is not None
    cdef double cx = 0.0, cy = 0.0, r2 = radius * radius
    cdef bint inside
    if has_cut:
        cx = center[0]; cy = center[1]
    for t in range(m):
        a = _area(nodes, tris, t)
        for q in range(7):
            uq = (_BARY[q][0] * u[tris[t, 0]] + _BARY[q][1] * u[tris[t, 1]]
                  + _BARY[q][2] * u[tris[t, 2]])
            if uq > _EXP_CAP:
                raise OverflowGuardError("f*exp(u)", t, fabs(uq), uq)
            if has_cut:
                xq = (_BARY[q][0] * nodes[tris[t, 0], 0]
                      + _BARY[q][1] * nodes[tris[t, 1], 0]
                      + _BARY[q][2] * nodes[tris[t, 2], 0])
                yq = (_BARY[q][0] * nodes[tris[t, 0], 1]
                      + _BARY[q][1] * nodes[tris[t, 1], 1]
                      + _BARY[q][2] * nodes[tris[t, 2], 1])
                d2 = (xq - cx) * (xq - cx) + (yq - cy) * (yq - cy)
                inside = d2 < r2
                if inside != invert:
                    continue
            fq = (_BARY[q][0] * f[tris[t, 0]] + _BARY[q][1] * f[tris[t, 1]]
                  + _BARY[q][2] * f[tris[t, 2]])
            total += fq * exp(uq) * _W[q] * a
    return total


def exp_hess_u2(double[:, ::1] nodes, long[:, ::1] tris, double[::1] u,
                double beta):
    """COO triplets of ∫ 2b e^{b u^2} (1 + 2b u^2) phi_i phi_j dx."""
    cdef Py_ssize_t m = tris.shape[0], t, q, i, j, n
    cdef cnp.ndarray[long, ndim=1] rows = np.empty(m * 9, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] cols = np.empty(m * 9, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] vals = np.zeros(m * 9)
    cdef long[::1] rv = rows
    cdef long[::1] cv = cols
    cdef double[::1] vv = vals
    cdef double a, uq, ex, v
    for t in range(m):
        a = _area(nodes, tris, t)
        n = t * 9
        for i in range(3):
            for j in range(3):
                rv[n + 3 * i + j] = tris[t, i]
                cv[n + 3 * i + j] = tris[t, j]
        for q in range(7):
            uq = (_BARY[q][0] * u[tris[t, 0]] + _BARY[q][1] * u[tris[t, 1]]
                  + _BARY[q][2] * u[tris[t, 2]])
            ex = beta * uq * uq
            if ex > _EXP_CAP:
                raise OverflowGuardError("exp(beta*u^2)", t, fabs(uq), ex)
            v = 2.0 * beta * exp(ex) * (1.0 + 2.0 * ex) * _W[q] * a
            for i in range(3):
                for j in range(3):
                    vv[n + 3 * i + j] += v * _BARY[q][i] * _BARY[q][j]
    return rows, cols, vals


def exp_load_fu(double[:, ::1] nodes, long[:, ::1] tris, double[::1] u,
                double[::1] f):
    cdef Py_ssize_t m = tris.shape[0], n = nodes.shape[0], t, q, i
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef double[::1] ov = out
    cdef double a, uq, fq, v
    for t in range(m):
        a = _area(nodes, tris, t)
        for q in range(7):
            uq = (_BARY[q][0] * u[tris[t, 0]] + _BARY[q][1] * u[tris[t, 1]]
                  + _BARY[q][2] * u[tris[t, 2]])
            if uq > _EXP_CAP:
                raise OverflowGuardError("f*exp(u)", t, fabs(uq), uq)
            fq = (_BARY[q][0] * f[tris[t, 0]] + _BARY[q][1] * f[tris[t, 1]]
                  + _BARY[q][2] * f[tris[t, 2]])
            v = fq * exp(uq) * _W[q] * a
            for i in range(3):
                ov[tris[t, i]] += v * _BARY[q][i]
    return out


def exp_mass_fu(double[:, ::1] nodes, long[:, ::1] tris, double[::1] u,
                double[::1] f):
    cdef Py_ssize_t m = tris.shape[0], t, q, i, j, n
    cdef cnp.ndarray[long, ndim=1] rows = np.empty(m * 9, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] cols = np.empty(m * 9, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] vals = np.zeros(m * 9)
    cdef long[::1] rv = rows
    cdef long[::1] cv = cols
    cdef double[::1] vv = vals
    cdef double a, uq, fq, v
    for t in range(m):
        a = _area(nodes, tris, t)
        n = t * 9
        for i in range(3):
            for j in range(3):
                rv[n + 3 * i + j] = tris[t, i]
                cv[n + 3 * i + j] = tris[t, j]
        for q in range(7):
            uq = (_BARY[q][0] * u[tris[t, 0]] + _BARY[q][1] * u[tris[t, 1]]
                  + _BARY[q][2] * u[tris[t, 2]])
            if uq > _EXP_CAP:
                raise OverflowGuardError("f*exp(u)", t, fabs(uq), uq)
            fq = (_BARY[q][0] * f[tris[t, 0]] + _BARY[q][1] * f[tris[t, 1]]
                  + _BARY[q][2] * f[tris[t, 2]])
            v = fq * exp(uq) * _W[q] * a
            for i in range(3):
                for j in range(3):
                    vv[n + 3 * i + j] += v * _BARY[q][i] * _BARY[q][j]
    return rows, cols, vals
