import math

import pytest

from mtlab.fem import mean_value
from mtlab.mesh import Mesh
from mtlab.spectral import EigenSolveError, neumann_lambda1


def test_square_lambda1(square16):
    res = neumann_lambda1(square16)
    assert res.lambda1 == pytest.approx(math.pi ** 2, rel=5e-3)
    assert res.residual <= 1e-10
    assert abs(mean_value(square16, res.eigenfield.values)) < 1e-12


def test_refinement_from_above(square8, square16):
    # conforming FEM eigenvalues decrease toward the limit under refinement
    l8 = neumann_lambda1(square8).lambda1
    l16 = neumann_lambda1(square16).lambda1
    assert math.pi ** 2 < l16 < l8


def test_scaling_exact(square8):
    s = 2.5
    scaled = Mesh(square8.nodes * s, square8.tris, square8.boundary_edges)
    l1 = neumann_lambda1(square8, tol=1e-12).lambda1
    ls = neumann_lambda1(scaled, tol=1e-12).lambda1
    assert abs(ls - l1 / s ** 2) / (l1 / s ** 2) < 1e-10


def test_disk_lambda1(disk32):
    # first positive root of J1' is near 1.8412; lambda1 = root^2
    res = neumann_lambda1(disk32)
    assert res.lambda1 == pytest.approx(1.8412 ** 2, rel=5e-3)


def test_tol_validation(square8):
    with pytest.raises(ValueError):
        neumann_lambda1(square8, tol=0.0)


def test_maxiter_exhaustion(square16):
    with pytest.raises(EigenSolveError):
        neumann_lambda1(square16, tol=1e-15, maxiter=1)
