"""Linear unweighted least-squares gradients and their successive application.

The gradient at node j minimizes sum_k (u_j + grad.(x_k - x_j) - u_k)^2 over
the first neighbours k. Because this is linear in the nodal values, it is
assembled once per mesh into one sparse matrix per coordinate direction;
applying those matrices twice gives the second derivatives (on uniform 1D
grids this is the wide (u_{j+2} - 2u_j + u_{j-2}) / (2h)^2 difference).
"""

from __future__ import annotations

import weakref

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateStencilError
from .mesh import Mesh

_CACHE: "weakref.WeakKeyDictionary[Mesh, LSQOperator]" = weakref.WeakKeyDictionary()


class LSQOperator:
    """Sparse gradient operators ``G[d]`` with ``grad_d(u) = G[d] @ u``."""

    def __init__(self, mesh: Mesh):
        dim = mesh.dim
        x = mesh.coords[:, :dim]
        a, b = mesh.edges[:, 0], mesh.edges[:, 1]
        d = x[b] - x[a]                                        # (E, dim)
        outer = d[:, :, None] * d[:, None, :]
        normal_mat = np.zeros((mesh.n_nodes, dim, dim))
        np.add.at(normal_mat, a, outer)
        np.add.at(normal_mat, b, outer)

        scale = np.einsum("nii->n", normal_mat)
        det = np.linalg.det(normal_mat)
        bad = np.flatnonzero(~(np.abs(det) > 1e-12 * scale ** dim))
        if bad.size:
            raise DegenerateStencilError(int(bad[0]))
        inv = np.linalg.inv(normal_mat)

        # row j: coefficient inv_j @ d on column k, minus the same on column j
        ca = np.einsum("eij,ej->ei", inv[a], d)                # (E, dim) for row a
        cb = np.einsum("eij,ej->ei", inv[b], -d)               # for row b
        rows = np.concatenate([a, a, b, b])
        cols = np.concatenate([b, a, a, b])
        n = mesh.n_nodes
        self.dim = dim
        self.n_nodes = n
        self.G = []
        for c in range(dim):
            vals = np.concatenate([ca[:, c], -ca[:, c], cb[:, c], -cb[:, c]])
            self.G.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
        self.normal_matrices = normal_mat

    def gradient(self, q: np.ndarray) -> np.ndarray:
        """(N,) or (N, m) nodal values -> (N, dim) or (N, dim, m)."""
        return np.stack([g @ q for g in self.G], axis=1)

    def hessian(self, grad: np.ndarray) -> np.ndarray:
        """Gradient of each gradient component, symmetrized.

        (N, dim[, m]) -> (N, dim, dim[, m]).
        """
        dim = self.dim
        out = np.empty((grad.shape[0], dim, dim) + grad.shape[2:])
        for i in range(dim):
            for j in range(dim):
                out[:, i, j] = self.G[j] @ grad[:, i]
        if dim > 1:
            out = 0.5 * (out + np.swapaxes(out, 1, 2))
        return out


def lsq_operator(mesh: Mesh) -> LSQOperator:
    op = _CACHE.get(mesh)
    if op is None:
        op = _CACHE[mesh] = LSQOperator(mesh)
    return op


def lsq_gradient(field: np.ndarray, mesh: Mesh) -> np.ndarray:
    return lsq_operator(mesh).gradient(np.asarray(field, dtype=float))


def lsq_hessian(grad: np.ndarray, mesh: Mesh) -> np.ndarray:
    return lsq_operator(mesh).hessian(np.asarray(grad, dtype=float))
