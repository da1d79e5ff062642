import math

import numpy as np
import pytest
import scipy.sparse as sp

from mtlab import kernels
from mtlab.kernels import OverflowGuardError, py_backend
from mtlab.kernels.py_backend import QUAD_BARY, QUAD_W


def test_quadrature_weights():
    assert QUAD_W.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(QUAD_BARY.sum(axis=1), 1.0, atol=1e-15)


def test_moments_match_mass_matrix(square16):
    # beta = 0 reduces the exponential moments to plain quadrature,
    # exact for the quadratic integrands it is compared against
    rng = np.random.default_rng(11)
    u = rng.standard_normal(square16.n_nodes)
    rows, cols, kv, mv = kernels.assemble_p1(square16.nodes, square16.tris)
    n = square16.n_nodes
    M = sp.csr_matrix((mv, (rows, cols)), shape=(n, n))
    i0, i1, i2 = kernels.exp_quad_u2(square16.nodes, square16.tris, u, 0.0)
    assert i0 == pytest.approx(square16.area, abs=1e-13)
    assert i2 == pytest.approx(float(u @ (M @ u)), rel=1e-12)


def test_overflow_guard(square8):
    u = np.full(square8.n_nodes, 40.0)
    with pytest.raises(OverflowGuardError):
        kernels.exp_quad_u2(square8.nodes, square8.tris, u, 1.0)


def test_disk_exclusion_mask(disk16):
    u = np.zeros(disk16.n_nodes)
    center = np.array([0.0, 0.0])
    full, _, _ = kernels.exp_quad_u2(disk16.nodes, disk16.tris, u, 1.0)
    outer, _, _ = kernels.exp_quad_u2(disk16.nodes, disk16.tris, u, 1.0,
                                      center=center, radius=0.5)
    hole, _, _ = kernels.exp_quad_u2(disk16.nodes, disk16.tris, u, 1.0,
                                     center=center, radius=0.5, invert=True)
    assert full == pytest.approx(disk16.area, abs=1e-13)
    assert outer + hole == pytest.approx(full, abs=1e-13)
    assert hole == pytest.approx(math.pi * 0.25, rel=0.05)


@pytest.mark.skipif(kernels.backend_name != "cython",
                    reason="compiled backend unavailable")
def test_backend_parity(square16):
    rng = np.random.default_rng(2)
    u = 0.3 * rng.standard_normal(square16.n_nodes)
    f = np.exp(square16.nodes[:, 0])
    nodes, tris = square16.nodes, square16.tris
    beta = 1.2

    for a, b in zip(kernels.exp_quad_u2(nodes, tris, u, beta),
                    py_backend.exp_quad_u2(nodes, tris, u, beta)):
        assert a == pytest.approx(b, rel=1e-13)
    assert np.allclose(kernels.exp_load_u2(nodes, tris, u, beta),
                       py_backend.exp_load_u2(nodes, tris, u, beta),
                       rtol=1e-13, atol=1e-15)
    assert kernels.exp_quad_fu(nodes, tris, u, f) == pytest.approx(
        py_backend.exp_quad_fu(nodes, tris, u, f), rel=1e-13)
    assert np.allclose(kernels.exp_load_fu(nodes, tris, u, f),
                       py_backend.exp_load_fu(nodes, tris, u, f),
                       rtol=1e-13, atol=1e-15)
    for a, b in zip(kernels.exp_mass_fu(nodes, tris, u, f),
                    py_backend.exp_mass_fu(nodes, tris, u, f)):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-15)
    for a, b in zip(kernels.exp_hess_u2(nodes, tris, u, beta),
                    py_backend.exp_hess_u2(nodes, tris, u, beta)):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-15)


def test_hessian_is_fd_of_load(square8):
    # directional derivative of the exp load matches the Hessian form
    rng = np.random.default_rng(4)
    u = 0.2 * rng.standard_normal(square8.n_nodes)
    v = rng.standard_normal(square8.n_nodes)
    beta = 1.0
    nodes, tris = square8.nodes, square8.tris
    n = square8.n_nodes
    rows, cols, vals = kernels.exp_hess_u2(nodes, tris, u, beta)
    H = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    # L_i(u) = int e^{beta u^2} u phi_i has derivative H/(2 beta) in u
    eps = 1e-6
    lp = kernels.exp_load_u2(nodes, tris, u + eps * v, beta)
    lm = kernels.exp_load_u2(nodes, tris, u - eps * v, beta)
    fd = (lp - lm) / (2 * eps)
    assert np.max(np.abs(H @ v - 2.0 * beta * fd)) < 1e-8
