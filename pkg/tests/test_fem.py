import math

import numpy as np
import pytest

from mtlab.fem import (AlphaTooLargeError, Field, MeanZeroSolver,
                       assemble_mass, assemble_stiffness, exp_moments,
                       load_field, mean_value, norm_1alpha,
                       project_mean_zero)
from mtlab.spectral import neumann_lambda1


def test_mass_integrates_constants(square16):
    M = assemble_mass(square16)
    one = np.ones(square16.n_nodes)
    assert float(one @ (M @ one)) == pytest.approx(square16.area, abs=1e-13)


def test_stiffness_annihilates_constants(square16):
    K = assemble_stiffness(square16)
    one = np.ones(square16.n_nodes)
    assert np.max(np.abs(K @ one)) < 1e-13


def test_stiffness_exact_on_linears(square16):
    # u = x has |grad u|^2 = 1, so the energy equals the area exactly
    K = assemble_stiffness(square16)
    u = square16.nodes[:, 0]
    assert float(u @ (K @ u)) == pytest.approx(square16.area, abs=1e-13)


def test_mean_value_linear(square16):
    u = square16.nodes[:, 0]
    assert mean_value(square16, u) == pytest.approx(0.5, abs=1e-13)
    v = project_mean_zero(Field(square16, u))
    assert abs(mean_value(square16, v.values)) < 1e-14


def test_norm_1alpha_matches_matrices(square16):
    rng = np.random.default_rng(3)
    u = rng.standard_normal(square16.n_nodes)
    K = assemble_stiffness(square16)
    M = assemble_mass(square16)
    alpha = 1.5
    want = math.sqrt(float(u @ (K @ u)) - alpha * float(u @ (M @ u)))
    got = norm_1alpha(Field(square16, u), alpha)
    assert got == pytest.approx(want, rel=1e-13)


def test_alpha_validation(square16):
    # on the first eigenfunction the quadratic form flips sign at lambda1
    res = neumann_lambda1(square16)
    with pytest.raises(AlphaTooLargeError):
        norm_1alpha(res.eigenfield, res.lambda1 * 1.01)


def test_constrained_solve(square16):
    solver = MeanZeroSolver(square16, 1.0)
    rng = np.random.default_rng(5)
    b = rng.standard_normal(square16.n_nodes)
    w = np.asarray(solver.M @ np.ones(square16.n_nodes))
    b -= w * (w @ b) / (w @ w)  # compatible right-hand side
    u = solver.solve(b)
    assert abs(mean_value(square16, u)) < 1e-12
    r = solver.A @ u - b
    # residual lies in the multiplier direction w; remove it
    r -= w * (w @ r) / (w @ w)
    assert np.max(np.abs(r)) < 1e-10


def test_exp_moments_beta_zero(square16):
    # with beta = 0 the moments reduce to plain quadrature of 1, u, u^2,
    # exact for P1 data
    u = square16.nodes[:, 0] - 0.5
    M = assemble_mass(square16)
    i0, i1, i2 = exp_moments(Field(square16, u), 0.0)
    assert i0 == pytest.approx(square16.area, abs=1e-13)
    assert i1 == pytest.approx(float(np.ones(len(u)) @ (M @ u)), abs=1e-13)
    assert i2 == pytest.approx(float(u @ (M @ u)), abs=1e-13)


def test_field_save_load(tmp_path, square8):
    u = np.sin(square8.nodes[:, 0])
    f = Field(square8, u)
    path = tmp_path / "f.npz"
    f.save(path, mesh_hash=square8.content_hash())
    back = load_field(path, square8)
    assert np.array_equal(back.values, u)


def test_field_shape_validation(square8):
    with pytest.raises(ValueError):
        Field(square8, np.zeros(square8.n_nodes + 1))
