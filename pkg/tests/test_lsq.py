import numpy as np
import pytest

from fsr.lsq import lsq_gradient, lsq_hessian, lsq_operator
from fsr.mesh import build_mesh, build_uniform_1d


def test_1d_gradient_is_central_difference(rng):
    m = build_uniform_1d(21)
    h = 1.0 / 20
    u = rng.normal(size=21)
    g = lsq_gradient(u, m)[:, 0]
    np.testing.assert_allclose(g[1:-1], (u[2:] - u[:-2]) / (2 * h), rtol=0, atol=1e-13 / h)


def test_1d_hessian_is_2h_laplacian(rng):
    m = build_uniform_1d(21)
    h = 1.0 / 20
    u = rng.normal(size=21)
    H = lsq_hessian(lsq_gradient(u, m), m)[:, 0, 0]
    lap2h = (u[4:] - 2 * u[2:-2] + u[:-4]) / (4 * h * h)
    np.testing.assert_allclose(H[2:-2] * h * h, lap2h * h * h, rtol=0, atol=1e-13)


@pytest.mark.parametrize("family", ["quad", "right-tri", "equilateral-tri", "irregular-tri"])
def test_linear_exactness(family):
    m = build_mesh(family, 9, seed=2)
    x, y = m.coords[:, 0], m.coords[:, 1]
    u = np.stack([1 + 2 * x - 3 * y, -x + 0.5 * y], axis=1)
    g = lsq_gradient(u, m)
    np.testing.assert_allclose(g[:, 0], np.tile([2.0, -1.0], (m.n_nodes, 1)), atol=1e-12)
    np.testing.assert_allclose(g[:, 1], np.tile([-3.0, 0.5], (m.n_nodes, 1)), atol=1e-12)


def test_irregular_matches_dense_normal_equations():
    m = build_mesh("irregular-tri", 9, seed=1)
    x = m.coords[:, :2]
    u = x[:, 0] ** 2
    g = lsq_gradient(u, m)
    adj = m.adjacency
    for j in range(m.n_nodes):
        nb = sorted(adj[j])
        D = x[nb] - x[j]
        ref = np.linalg.solve(D.T @ D, D.T @ (u[nb] - u[j]))
        np.testing.assert_allclose(g[j], ref, atol=1e-12)


def test_hessian_symmetric_and_exact_on_quadratics_interior():
    m = build_mesh("quad", 11)
    x, y = m.coords[:, 0], m.coords[:, 1]
    u = 0.5 * x * x + 2 * x * y - y * y
    H = lsq_hessian(lsq_gradient(u, m), m)
    np.testing.assert_allclose(H, np.swapaxes(H, 1, 2), atol=1e-14)
    inner = m.boundary_depth >= 2
    np.testing.assert_allclose(H[inner], np.tile([[1.0, 2.0], [2.0, -2.0]], (inner.sum(), 1, 1)),
                               atol=1e-10)


def test_operator_is_cached():
    m = build_mesh("quad", 5)
    assert lsq_operator(m) is lsq_operator(m)


def test_multicomponent_shapes(rng):
    m = build_mesh("right-tri", 6)
    q = rng.normal(size=(m.n_nodes, 4))
    g = lsq_gradient(q, m)
    assert g.shape == (m.n_nodes, 2, 4)
    assert lsq_hessian(g, m).shape == (m.n_nodes, 2, 2, 4)
    np.testing.assert_allclose(g[:, :, 2], lsq_gradient(q[:, 2], m), atol=1e-14)
