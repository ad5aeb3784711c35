"""Tensor-product Galerkin system for the stochastic obstacle problem.

The fully discrete problem couples a P1 space on the mesh (I interior nodes)
with the multilinear hat basis on the parameter grid (J nodes).  The system
matrix is a sum of Kronecker products G ⊗ K and is kept in factored form;
matrix-vector products work blockwise on (J, I) reshapes of flat vectors
with index j*I + i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import assemble_load, assemble_weighted_stiffness
from .fields import AffineField
from .mesh import Mesh
from .param import Gramians, ParamGrid, assemble_gramians

__all__ = ["SGSystem", "assemble_sg", "dump_matrix"]

EXPLICIT_LIMIT = 500_000


@dataclass
class SGSystem:
    """Factored Galerkin LCP data: find u >= obs with Au - b >= 0 complementary.

    Attributes
    ----------
    K0, Kk : CSR stiffness factors over interior nodes (Kk entries may be None
        for parameter dimensions the coefficient does not touch).
    gram : parametric Gramians (G0, Gk, g0, gk).
    b : flat right-hand side of length I*J, parameter-major.
    obs : flat obstacle values at the tensor nodes.
    boundary_values : (n_boundary, J) Dirichlet data per parameter node.
    mean_stiffness : stiffness at the y-averaged coefficient, used to build
        the Kronecker preconditioner G0 ⊗ K_mean.
    A : explicit CSR matrix when I*J is small enough, else None.
    """

    mesh: Mesh
    grid: ParamGrid
    K0: sp.csr_array
    Kk: list
    gram: Gramians
    b: np.ndarray
    obs: np.ndarray
    boundary_values: np.ndarray
    mean_stiffness: sp.csr_array
    A: sp.csr_array | None

    def __post_init__(self):
        self._precond = None

    @property
    def n_spatial(self) -> int:
        return self.K0.shape[0]

    @property
    def n_param(self) -> int:
        return self.gram.G0.shape[0]

    @property
    def n(self) -> int:
        return self.n_spatial * self.n_param

    def matvec(self, v: np.ndarray) -> np.ndarray:
        I, J = self.n_spatial, self.n_param
        V = v.reshape(J, I)
        out = self.gram.G0 @ (self.K0 @ V.T).T
        for G, K in zip(self.gram.Gk, self.Kk):
            if K is not None:
                out += G @ (K @ V.T).T
        return out.reshape(-1)

    def diag(self) -> np.ndarray:
        d = np.outer(self.gram.G0.diagonal(), self.K0.diagonal())
        for G, K in zip(self.gram.Gk, self.Kk):
            if K is not None:
                d += np.outer(G.diagonal(), K.diagonal())
        return d.reshape(-1)

    def explicit(self) -> sp.csr_array | None:
        return self.A

    def precond(self) -> Callable[[np.ndarray], np.ndarray]:
        """Apply (G0 ⊗ K_mean)^-1, factorizations cached on first use."""
        if self._precond is None:
            lu_k = spla.splu(sp.csc_matrix(self.mean_stiffness))
            lu_g = spla.splu(sp.csc_matrix(self.gram.G0))
            I, J = self.n_spatial, self.n_param

            def apply(r: np.ndarray) -> np.ndarray:
                R = r.reshape(J, I)
                W = lu_k.solve(R.T).T
                return lu_g.solve(W).reshape(-1)

            self._precond = apply
        return self._precond

    def mean_weights(self) -> np.ndarray:
        """Weights turning coefficient blocks into the mean field: g0."""
        return self.gram.g0


def _nodal_affine(field: AffineField, points: np.ndarray, y_nodes: np.ndarray) -> np.ndarray:
    """Evaluate an affine field at all (point, parameter-node) pairs, (J, n)."""
    J = y_nodes.shape[0]
    vals = np.tile(np.asarray(field.mean.values(points), dtype=float), (J, 1))
    for m in field.modes:
        shape_vals = np.asarray(m.shape.values(points))
        vals += m.coeff * y_nodes[:, m.dim][:, None] * shape_vals[None, :]
    return vals


def assemble_sg(mesh: Mesh, grid: ParamGrid, a_field: AffineField,
                f_field: AffineField, g_field, dirichlet=None,
                explicit_limit: int = EXPLICIT_LIMIT,
                quad_degree: int = 2) -> SGSystem:
    """Assemble the tensor Galerkin LCP for given coefficient/source/obstacle.

    ``g_field`` may be an AffineField or a callable (x, y) -> values.
    ``dirichlet`` is a callable (x, y) -> boundary values or None for
    homogeneous data; nonhomogeneous data enters b through lifting.
    """
    if not isinstance(a_field, AffineField) or not isinstance(f_field, AffineField):
        raise TypeError("Galerkin assembly needs affine coefficient and source fields")
    M = grid.n_dims
    if a_field.n_dims > M or f_field.n_dims > M:
        raise ValueError("field parameter dimensions exceed the grid's")

    interior = mesh.interior
    bnd = np.flatnonzero(mesh.boundary)
    gram = assemble_gramians(grid)
    I = len(interior)
    J = grid.n_nodes
    y_nodes = grid.nodes()

    K0_full = assemble_weighted_stiffness(mesh, a_field.mean, quad_degree)
    f0_full = assemble_load(mesh, f_field.mean, quad_degree)
    Kk_full = [None] * M
    fk_full = [None] * M
    for k in range(M):
        wa = a_field.dim_weight(k)
        if wa is not None:
            Kk_full[k] = assemble_weighted_stiffness(mesh, wa, quad_degree)
        wf = f_field.dim_weight(k)
        if wf is not None:
            fk_full[k] = assemble_load(mesh, wf, quad_degree)

    dim_means = [rho.moment(1) for rho in grid.densities]
    mean_stiff = assemble_weighted_stiffness(mesh, a_field.mean_weight(dim_means),
                                             quad_degree)

    def restrict(K):
        return None if K is None else K[interior][:, interior]

    K0 = restrict(K0_full)
    Kk = [restrict(K) for K in Kk_full]
    Kmean = restrict(mean_stiff)

    # right-hand side blocks, (J, I)
    B = np.outer(gram.g0, f0_full[interior])
    for k in range(M):
        if fk_full[k] is not None:
            B += np.outer(gram.gk[k], fk_full[k][interior])

    if dirichlet is not None and len(bnd) > 0:
        xb = mesh.nodes[bnd]
        D = np.empty((len(bnd), J))
        for j in range(J):
            D[:, j] = np.asarray(dirichlet(xb, y_nodes[j]), dtype=float)
        B -= gram.G0 @ (K0_full[interior][:, bnd] @ D).T
        for k in range(M):
            if Kk_full[k] is not None:
                B -= gram.Gk[k] @ (Kk_full[k][interior][:, bnd] @ D).T
    else:
        D = np.zeros((len(bnd), J))

    x_int = mesh.nodes[interior]
    if isinstance(g_field, AffineField):
        obs = _nodal_affine(g_field, x_int, y_nodes)
    else:
        obs = np.empty((J, I))
        for j in range(J):
            obs[j] = np.asarray(g_field(x_int, y_nodes[j]), dtype=float)

    A = None
    if I * J <= explicit_limit:
        A = sp.kron(gram.G0, K0, format="csr")
        for G, K in zip(gram.Gk, Kk):
            if K is not None:
                A = A + sp.kron(G, K, format="csr")
        A = sp.csr_array(A)
        A.sort_indices()

    return SGSystem(mesh=mesh, grid=grid, K0=K0, Kk=Kk, gram=gram,
                    b=B.reshape(-1), obs=obs.reshape(-1),
                    boundary_values=D, mean_stiffness=Kmean, A=A)


def dump_matrix(system: SGSystem, path: str) -> None:
    """Write the explicit matrix as 'row col value' lines (0-based indices)."""
    A = system.explicit()
    if A is None:
        raise ValueError("explicit matrix was not assembled for this system size")
    coo = sp.coo_array(A)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.16e}\n")
