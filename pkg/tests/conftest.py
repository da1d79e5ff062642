"""Shared meshes and Green solves; session-scoped, built once."""

import numpy as np
import pytest

from mtlab.mesh import DomainSpec, build_mesh, pick_boundary_point
from mtlab.green import solve_green


@pytest.fixture(scope="session")
def square8():
    return build_mesh(DomainSpec(kind="unit-square", target_h=1 / 8))


@pytest.fixture(scope="session")
def square16():
    return build_mesh(DomainSpec(kind="unit-square", target_h=1 / 16))


@pytest.fixture(scope="session")
def disk16():
    return build_mesh(DomainSpec(kind="disk", target_h=1 / 16))


@pytest.fixture(scope="session")
def disk32():
    return build_mesh(DomainSpec(kind="disk", target_h=1 / 32))


@pytest.fixture(scope="session")
def disk64():
    return build_mesh(DomainSpec(kind="disk", target_h=1 / 64))


@pytest.fixture(scope="session")
def green64(disk64):
    p = pick_boundary_point(disk64, np.array([1.0, 0.0]))
    return solve_green(disk64, 0.0, p)
