import numpy as np
import pytest

from conftest import random_primitive, random_unit
from fsr.errors import InadmissibleStateError, InvalidParameterError
from fsr.physics import EulerModel, ScalarModel, State, convert, make_model, z_jump_to_u_jump

EULER = [EulerModel(1), EulerModel(2)]


def _fd_jacobian(f, q, eps=1e-6):
    m = q.shape[-1]
    cols = []
    for i in range(m):
        dq = np.zeros_like(q)
        dq[:, i] = eps
        cols.append((f(q + dq) - f(q - dq)) / (2 * eps))
    return np.stack(cols, axis=-1)


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
@pytest.mark.parametrize("var", ["w", "z", "u"])
def test_conversion_round_trip(model, var, rng):
    w = random_primitive(rng, 30, model.dim)
    q = model.convert(w, "w", var)
    for target in ("w", "z", "u"):
        back = model.convert(model.convert(q, var, target), target, "w")
        np.testing.assert_allclose(back, w, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
@pytest.mark.parametrize("var", ["w", "z", "u"])
def test_flux_independent_of_variables(model, var, rng):
    w = random_primitive(rng, 20, model.dim)
    n = random_unit(rng, 20, model.dim)
    ref = model.directional_flux(w, n, "w")
    np.testing.assert_allclose(model.directional_flux(model.convert(w, "w", var), n, var), ref,
                               rtol=1e-13, atol=1e-13)


def test_euler_flux_known_values():
    model = EulerModel(1)
    w = np.array([[1.0, 2.0, 3.0]])
    n = np.array([[1.0]])
    rhoE = 3.0 / 0.4 + 0.5 * 4.0
    np.testing.assert_allclose(model.directional_flux(w, n, "w"), [[2.0, 7.0, 2.0 * (rhoE + 3.0)]])


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
@pytest.mark.parametrize("var", ["w", "z", "u"])
def test_jacobian_finite_difference(model, var, rng):
    w = random_primitive(rng, 25, model.dim)
    n = random_unit(rng, 25, model.dim)
    q = model.convert(w, "w", var)
    J = model.jacobian(q, n, var)
    fd = _fd_jacobian(lambda s: model.directional_flux(s, n, var), q)
    assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
@pytest.mark.parametrize("var", ["w", "z"])
def test_hessian_contraction_finite_difference(model, var, rng):
    w = random_primitive(rng, 25, model.dim)
    n = random_unit(rng, 25, model.dim)
    q = model.convert(w, "w", var)
    dq = rng.normal(size=q.shape)
    K = model.hessian_contract(q, dq, n, var)
    eps = 1e-5
    fd = (model.jacobian(q + eps * dq, n, var) - model.jacobian(q - eps * dq, n, var)) / (2 * eps)
    assert np.max(np.abs(K - fd)) <= 1e-5 * max(1.0, np.max(np.abs(K)))


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
def test_z_flux_is_exactly_quadratic(model, rng):
    w = random_primitive(rng, 40, model.dim)
    n = random_unit(rng, 40, model.dim)
    z = model.convert(w, "w", "z")
    dz = 0.3 * rng.normal(size=z.shape)
    f0 = model.directional_flux(z, n, "z")
    f1 = model.directional_flux(z + dz, n, "z")
    lin = np.einsum("eij,ej->ei", model.jacobian(z, n, "z"), dz)
    quad = 0.5 * model.hessian_apply(z, dz, dz, n, "z")
    assert np.max(np.abs(f1 - f0 - lin - quad)) <= 1e-13 * max(1.0, np.max(np.abs(f1)))


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
@pytest.mark.parametrize("var", ["w", "z"])
def test_matrix_free_operators(model, var, rng):
    w = random_primitive(rng, 30, model.dim)
    n = random_unit(rng, 30, model.dim)
    q = model.convert(w, "w", var)
    a, b = rng.normal(size=q.shape), rng.normal(size=q.shape)
    np.testing.assert_allclose(model.jacobian_apply(q, a, n, var),
                               np.einsum("eij,ej->ei", model.jacobian(q, n, var), a), atol=1e-12)
    np.testing.assert_allclose(model.hessian_apply(q, a, b, n, var),
                               np.einsum("eij,ej->ei", model.hessian_contract(q, a, n, var), b),
                               atol=1e-12)


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
@pytest.mark.parametrize("eps", [0.0, 0.2])
def test_roe_dissipation_apply_matches_matrix(model, eps, rng):
    wj = random_primitive(rng, 30, model.dim)
    wk = random_primitive(rng, 30, model.dim)
    n = random_unit(rng, 30, model.dim)
    du = rng.normal(size=wj.shape)
    D = model.roe_dissipation(wj, wk, n, eps)
    np.testing.assert_allclose(model.roe_dissipation_apply(wj, wk, n, du, eps),
                               np.einsum("eij,ej->ei", D, du), atol=1e-12)


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
def test_roe_dissipation_is_abs_jacobian_for_equal_states(model, rng):
    w = random_primitive(rng, 10, model.dim)
    n = random_unit(rng, 10, model.dim)
    D = model.roe_dissipation(w, w, n)
    A = model.jacobian(model.convert(w, "w", "u"), n, "u")
    for e in range(w.shape[0]):
        lam, V = np.linalg.eig(A[e])
        absA = (V * np.abs(lam)) @ np.linalg.inv(V)
        np.testing.assert_allclose(D[e], absA.real, atol=1e-11)


@pytest.mark.parametrize("model", EULER, ids=["1d", "2d"])
def test_roe_average_property(model, rng):
    """A_roe (u_k - u_j) = f(u_k) - f(u_j): check through |A| with all speeds of one sign."""
    wj = random_primitive(rng, 10, model.dim)
    wk = random_primitive(rng, 10, model.dim)
    wj[:, 1] += 3.0
    wk[:, 1] += 3.0
    n = np.zeros((10, model.dim))
    n[:, 0] = 1.0
    D = model.roe_dissipation(wj, wk, n)
    du = model.convert(wk, "w", "u") - model.convert(wj, "w", "u")
    df = model.directional_flux(wk, n, "w") - model.directional_flux(wj, n, "w")
    np.testing.assert_allclose(np.einsum("eij,ej->ei", D, du), df, atol=1e-11)


def test_z_jump_reproduces_exact_u_jump(rng):
    model = EulerModel(2)
    zj = model.convert(random_primitive(rng, 20, 2), "w", "z")
    zk = model.convert(random_primitive(rng, 20, 2), "w", "z")
    du = z_jump_to_u_jump(model, zj, zk, zj, zk)
    np.testing.assert_allclose(du, model.convert(zk, "z", "u") - model.convert(zj, "z", "u"), atol=1e-13)


@pytest.mark.parametrize("kind", ["burgers", "cubic", "linear"])
def test_scalar_derivatives(kind, rng):
    model = ScalarModel(kind)
    u = rng.uniform(-2, 2, (20, 1))
    n = np.ones((20, 1))
    fd = _fd_jacobian(lambda s: model.directional_flux(s, n), u)
    np.testing.assert_allclose(model.jacobian(u, n), fd, atol=1e-6)
    du = np.ones_like(u)
    fd2 = (model.jacobian(u + 1e-5, n) - model.jacobian(u - 1e-5, n)) / 2e-5
    np.testing.assert_allclose(model.hessian_contract(u, du, n), fd2, atol=1e-5)
    uk = rng.uniform(-2, 2, (20, 1))
    np.testing.assert_allclose(model.roe_speed(u, uk) * (uk - u), model.f(uk) - model.f(u), atol=1e-13)


def test_inadmissible_states():
    model = EulerModel(1)
    with pytest.raises(InadmissibleStateError):
        model.convert(np.array([[-1.0, 0.0, 1.0]]), "w", "u")
    with pytest.raises(InadmissibleStateError):
        model.check_admissible(np.array([[1.0, 0.0, 1.0], [1.0, 0.0, -1.0]]), "w")
    with pytest.raises(InvalidParameterError):
        ScalarModel("burgers").convert(np.ones((2, 1)), "u", "z")


def test_make_model_and_state_convert():
    assert make_model("euler-2d").m == 4
    assert make_model("cubic").kind == "cubic"
    with pytest.raises(InvalidParameterError):
        make_model("mhd")
    s = State(np.array([[1.0, 0.5, 1.0]]))
    u = convert(s, "u")
    assert u.variables == "u"
    np.testing.assert_allclose(convert(u, "w").values, s.values)
