import math

import numpy as np
import pytest

from mtlab.fem import Field, assemble_mass
from mtlab.meanfield import (MeanFieldProblem, SubcriticalityError,
                             check_corollary, minimize_F,
                             residual_meanfield)


def _ones_problem(mesh, rho=2.0, alpha=0.0):
    return MeanFieldProblem(mesh=mesh, alpha=alpha, rho=rho,
                            f=Field(mesh, np.ones(mesh.n_nodes)))


def test_problem_validation(square8):
    with pytest.raises(SubcriticalityError):
        _ones_problem(square8, rho=4.0 * math.pi)
    with pytest.raises(SubcriticalityError):
        _ones_problem(square8, rho=0.0)
    with pytest.raises(ValueError):
        MeanFieldProblem(mesh=square8, alpha=0.0, rho=1.0,
                         f=Field(square8, np.zeros(square8.n_nodes)))


def test_constant_weight_gives_zero(square16):
    sol = minimize_F(_ones_problem(square16, rho=3.0))
    assert sol.converged
    assert np.max(np.abs(sol.u.values)) < 1e-12
    assert sol.residual < 1e-12
    assert sol.F_value == pytest.approx(-3.0 * math.log(square16.area),
                                        abs=1e-13)


def test_descent_is_monotone(disk16):
    f = Field(disk16, np.exp(disk16.nodes[:, 0]))
    prob = MeanFieldProblem(mesh=disk16, alpha=0.0, rho=math.pi, f=f)
    sol = minimize_F(prob)
    assert sol.converged
    fs = [t["F"] for t in sol.trace if t["phase"] == "descent"]
    assert all(b < a for a, b in zip(fs, fs[1:]))


def test_doubling_weight_shifts_F(disk16):
    fvals = np.exp(disk16.nodes[:, 0])
    rho = math.pi
    s1 = minimize_F(MeanFieldProblem(mesh=disk16, alpha=0.0, rho=rho,
                                     f=Field(disk16, fvals)))
    s2 = minimize_F(MeanFieldProblem(mesh=disk16, alpha=0.0, rho=rho,
                                     f=Field(disk16, 2.0 * fvals)))
    assert abs((s2.F_value - s1.F_value) + rho * math.log(2.0)) < 1e-10
    M = assemble_mass(disk16)
    d = s2.u.values - s1.u.values
    assert math.sqrt(float(d @ (M @ d))) < 1e-10


def test_residual_recomputation(disk16):
    f = Field(disk16, np.exp(disk16.nodes[:, 0]))
    prob = MeanFieldProblem(mesh=disk16, alpha=0.0, rho=2.0, f=f)
    sol = minimize_F(prob)
    assert residual_meanfield(sol, prob) == pytest.approx(sol.residual)
    assert sol.residual <= 1e-10


def test_corollary_sampler_small(square8):
    out = check_corollary(square8, 0.0, n_samples=50, seed=1)
    assert out["recheck_drift"] <= 1e-12
    assert abs(out["constant_score"] - out["log_area"]) < 1e-13
    assert out["C_emp"] >= out["p90"] >= out["mean"]
    assert out["n_flagged"] == 0


def test_corollary_alpha_guard(square8):
    with pytest.raises(ValueError):
        check_corollary(square8, 1e6, n_samples=2)
