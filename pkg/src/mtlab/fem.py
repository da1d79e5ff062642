"""P1 finite elements on the mean-zero subspace.

Stiffness/mass assembly, mean-zero projection, the alpha-modified norm
sqrt(u'Ku - alpha*u'Mu), and quadrature of exponential functionals.  The
mean value is always taken through the consistent mass matrix (exact for
P1 fields).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .kernels import OverflowGuardError


class AlphaTooLargeError(ValueError):
    """alpha >= first discrete nonzero Neumann eigenvalue."""


@dataclass
class Field:
    """Nodal coefficients of a piecewise-linear function on a mesh."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.values) != self.mesh.n_nodes:
            raise ValueError("coefficient count does not match node count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")

    def save(self, path, mesh_hash=""):
        with open(path, "w") as fh:
            fh.write("mt-field v1\n")
            fh.write(f"mesh {mesh_hash or self.mesh.content_hash()}\n")
            fh.write(f"n {len(self.values)}\n")
            for v in self.values:
                fh.write(f"{float(v)!r}\n")


def load_field(path, mesh):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if lines[0] != "mt-field v1":
        raise ValueError(f"{path}: not an mt-field v1 file")
    n = int(lines[2].split()[1])
    values = np.array(lines[3:3 + n], dtype=float)
    return Field(mesh, values)


def assemble_stiffness(mesh):
    rows, cols, kvals, _ = kernels.assemble_p1(mesh.nodes, mesh.tris)
    n = mesh.n_nodes
    return sp.csr_matrix((kvals, (rows, cols)), shape=(n, n))


def assemble_mass(mesh):
    rows, cols, _, mvals = kernels.assemble_p1(mesh.nodes, mesh.tris)
    n = mesh.n_nodes
    return sp.csr_matrix((mvals, (rows, cols)), shape=(n, n))


def mean_value(mesh, u, M=None):
    """Integral mean |Omega|^-1 * integral of u."""
    M = assemble_mass(mesh) if M is None else M
    return float((M @ u).sum()) / mesh.area


def project_mean_zero(field, M=None):
    """Subtract the integral mean; idempotent."""
    u = field.values
    return Field(field.mesh, u - mean_value(field.mesh, u, M))


def norm_1alpha(field, alpha, K=None, M=None):
    """sqrt(u'Ku - alpha*u'Mu); requires alpha below the discrete lambda_1."""
    mesh = field.mesh
    K = assemble_stiffness(mesh) if K is None else K
    M = assemble_mass(mesh) if M is None else M
    u = field.values
    q = float(u @ (K @ u)) - alpha * float(u @ (M @ u))
    if q < -1e-12 * max(1.0, float(u @ (K @ u))):
        raise AlphaTooLargeError(
            f"quadratic form is negative ({q:g}); alpha={alpha:g} is at or "
            "above the discrete first Neumann eigenvalue")
    return float(np.sqrt(max(q, 0.0)))


def functional_exp(field, beta, center=None, radius=0.0, invert=False):
    """Quadrature of exp(beta * u^2) with the fixed degree-5 rule."""
    if beta < 0.0:
        raise ValueError("beta must be non-negative")
    i0, _, _ = kernels.exp_quad_u2(field.mesh.nodes, field.mesh.tris,
                                   field.values, beta,
                                   center=center, radius=radius, invert=invert)
    return i0


def exp_moments(field, beta, center=None, radius=0.0, invert=False):
    """(integral e^{b u^2}, integral e^{b u^2} u, integral e^{b u^2} u^2)."""
    return kernels.exp_quad_u2(field.mesh.nodes, field.mesh.tris,
                               field.values, beta,
                               center=center, radius=radius, invert=invert)


class MeanZeroSolver:
    """Factorized solver for (K - alpha*M) x = b on the mean-zero subspace.

    The constant mode is deflated through a Lagrange multiplier on the
    consistent-mass mean, so the Neumann structure is untouched.
    """

    def __init__(self, mesh, alpha, K=None, M=None):
        self.mesh = mesh
        self.alpha = alpha
        self.K = assemble_stiffness(mesh) if K is None else K
        self.M = assemble_mass(mesh) if M is None else M
        self.A = (self.K - alpha * self.M).tocsr()
        w = np.asarray(self.M @ np.ones(mesh.n_nodes))
        aug = sp.bmat([[self.A, w[:, None]], [w[None, :], None]],
                      format="csc")
        self._lu = spla.splu(aug)
        self._w = w

    def solve(self, b):
        rhs = np.concatenate([b, [0.0]])
        x = self._lu.solve(rhs)
        return x[:-1]

    def solve_mass(self, b):
        """M x = b (no constraint); used for M^{-1}-norm residuals."""
        if not hasattr(self, "_lu_mass"):
            self._lu_mass = spla.splu(self.M.tocsc())
        return self._lu_mass.solve(b)

    def minv_norm(self, r):
        return minv_norm(self, r)


def minv_norm(solver, r):
    """sqrt(r' M^-1 r)."""
    x = solver.solve_mass(r)
    return float(np.sqrt(max(r @ x, 0.0)))
