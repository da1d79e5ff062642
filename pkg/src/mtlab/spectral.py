"""First nonzero Neumann eigenvalue on the mean-zero subspace.

Inverse iteration with the constant mode deflated by projection at every
step (shift 0 on the projected space); the first eigenvalue is well
separated at desk scale, so plain inverse iteration converges quickly.
"""

from dataclasses import dataclass

import numpy as np

from .fem import Field, MeanZeroSolver, assemble_mass, assemble_stiffness


class EigenSolveError(RuntimeError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"eigen iteration did not reach tolerance after {iterations} "
            f"steps (last residual {residual:.3e})")


@dataclass
class EigenResult:
    lambda1: float
    eigenfield: Field
    residual: float
    mesh_h: float
    iterations: int


def neumann_lambda1(mesh, tol=1e-10, maxiter=500):
    """Smallest nonzero generalized eigenvalue of (K, M), mean-zero sector.

    Block inverse iteration with two vectors and a Rayleigh-Ritz step;
    symmetric domains carry a near-degenerate lowest pair (the square's x
    and y modes are split only by the diagonal of the triangulation), and
    a single-vector iteration stalls on the tiny gap.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    import scipy.linalg

    K = assemble_stiffness(mesh)
    M = assemble_mass(mesh)
    solver = MeanZeroSolver(mesh, 0.0, K=K, M=M)

    w = np.asarray(M @ np.ones(mesh.n_nodes))

    def deflate(v):
        return v - w @ v / mesh.area  # M-orthogonalize against constants

    U = np.column_stack([deflate(mesh.nodes[:, 0].copy()),
                         deflate(mesh.nodes[:, 1].copy())])
    res = np.inf
    lam = 0.0
    u = U[:, 0]
    for it in range(1, maxiter + 1):
        V = np.column_stack([deflate(solver.solve(np.asarray(M @ U[:, j])))
                             for j in range(U.shape[1])])
        # M-orthonormalize, then solve the 2x2 Ritz problem
        MV = np.column_stack([np.asarray(M @ V[:, j])
                              for j in range(V.shape[1])])
        G = V.T @ MV
        V = V @ np.linalg.inv(np.linalg.cholesky(G).T)
        KV = np.column_stack([np.asarray(K @ V[:, j])
                              for j in range(V.shape[1])])
        MV = np.column_stack([np.asarray(M @ V[:, j])
                              for j in range(V.shape[1])])
        evals, Q = scipy.linalg.eigh(V.T @ KV, V.T @ MV)
        U = V @ Q
        lam = float(evals[0])
        u = U[:, 0]
        r = np.asarray(K @ u) - lam * np.asarray(M @ u)
        res = float(np.linalg.norm(r))
        if res <= tol:
            u = u / np.sqrt(u @ (M @ u))
            return EigenResult(lam, Field(mesh, u), res,
                               mesh.max_edge_length(), it)
    raise EigenSolveError(res, maxiter)
