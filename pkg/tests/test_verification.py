import numpy as np
import pytest

from fsr.errors import InvalidParameterError, InvalidSeriesError, IterationFailureError
from fsr.mesh import build_uniform_1d
from fsr.verification import (CASES, MACH_INF, T_SHOCK, acoustic_V, case_norm, convergence_order,
                              error_norm, euler_probe, exact_eval, get_case, probe_solution,
                              scalar_probe, truncation_error_probe, truncation_error_residual)
from fsr.reconstruction import get_scheme


def test_convergence_order_oracle():
    h = np.array([0.1, 0.05, 0.025])
    rep = convergence_order(h, 3.0 * h ** 4)
    np.testing.assert_allclose(rep.orders, 4.0)
    assert rep.final_order == pytest.approx(4.0)
    rows = rep.rows()
    assert np.isnan(rows[0][2]) and rows[2][2] == pytest.approx(4.0)


@pytest.mark.parametrize("h,e", [([0.1], [1.0]), ([0.1, 0.2], [1.0, 0.5]), ([0.1, 0.05], [1.0, 0.0])])
def test_convergence_order_rejects_bad_series(h, e):
    with pytest.raises(InvalidSeriesError):
        convergence_order(h, e)


def test_error_norms():
    exact = np.zeros((5, 3))
    sol = exact.copy()
    sol[2, 1] = -0.5
    sol[3, 0] = 0.2
    assert error_norm(sol, exact, "Linf") == 0.5
    assert error_norm(sol, exact, "L1") == pytest.approx(0.2 / 5)
    with pytest.raises(InvalidParameterError):
        error_norm(sol, exact, "L7")
    assert case_norm(get_case("euler2d-steady").model()) == "L1"
    assert case_norm(get_case("burgers-steady").model()) == "Linf"


@pytest.mark.parametrize("case", ["burgers-steady", "cubic-steady", "euler1d-steady", "euler2d-steady"])
def test_analytic_gradients(case):
    exact = get_case(case)
    rng = np.random.default_rng(0)
    x = rng.uniform(exact.domain[0], exact.domain[1], 20)
    y = rng.uniform(exact.domain[2], exact.domain[3], 20)
    g = exact.gradient(x, y)
    h = 1e-6
    gx = (exact(x + h, y) - exact(x - h, y)) / (2 * h)
    np.testing.assert_allclose(g[:, 0], gx, atol=1e-7)
    if exact.dim == 2:
        gy = (exact(x, y + h) - exact(x, y - h)) / (2 * h)
        np.testing.assert_allclose(g[:, 1], gy, atol=1e-7)


def test_aspect_variant_scales_y_frequencies():
    iso, thin = get_case("euler2d-steady"), get_case("euler2d-steady", aspect=0.1)
    assert thin.domain[3] == 0.1
    x = np.array([0.3, 0.7])
    y = np.array([0.5, 0.2])
    np.testing.assert_allclose(thin(x, 0.1 * y), iso(x, y))


def test_acoustic_fixed_point_solves_implicit_relation():
    x = np.linspace(0, 1, 41)
    t = 0.07
    V = acoustic_V(x, t)
    g = 1.4
    a = 1 + 0.5 * (g - 1) * V
    rhs = np.sin(2 * np.pi * (x - (MACH_INF + V + a) * t)) / (np.pi * T_SHOCK * (g + 1))
    np.testing.assert_allclose(V, rhs, atol=1e-13)


def test_acoustic_is_isentropic_and_simple_wave():
    exact = get_case("euler1d-acoustic")
    w = exact(np.linspace(0, 1, 30), None, 0.05)
    g = 1.4
    np.testing.assert_allclose(w[:, 2] * g / w[:, 0] ** g, 1.0, rtol=1e-13)
    a = np.sqrt(g * w[:, 2] / w[:, 0])
    np.testing.assert_allclose(w[:, 1] - 2 * a / (g - 1), MACH_INF - 2 / (g - 1), atol=1e-13)


def test_acoustic_fails_past_breaking():
    with pytest.raises(IterationFailureError):
        acoustic_V(np.linspace(0, 1, 200), 0.5, max_iter=50)


def test_vortex_is_translated_and_isentropic():
    exact = get_case("euler2d-vortex")
    x = np.array([0.0, 1.0, -2.0])
    y = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(exact(x + 0.5, y, 1.0), exact(x, y, 0.0), atol=1e-14)
    w = exact(x, y, 0.0)
    np.testing.assert_allclose(w[:, 3] * 1.4 / w[:, 0] ** 1.4, 1.0, rtol=1e-13)


def test_case_registry():
    assert set(CASES) == {"burgers-steady", "cubic-steady", "euler1d-steady", "euler1d-acoustic",
                          "euler2d-steady", "euler2d-vortex"}
    with pytest.raises(InvalidParameterError, match="valid cases"):
        get_case("sod")
    assert exact_eval("burgers-steady", np.array([0.5]))[0, 0] == pytest.approx(np.sin(1.23 * 0.5))


def test_initial_states():
    mesh = build_uniform_1d(11)
    lin = get_case("burgers-steady").initial_state(mesh)
    assert lin[0, 0] == pytest.approx(0.0) and lin[-1, 0] == pytest.approx(np.sin(1.23))
    np.testing.assert_allclose(np.diff(lin[:, 0]), np.diff(lin[:, 0])[0])
    const = get_case("euler1d-steady").initial_state(mesh)
    np.testing.assert_allclose(const, np.tile([1.0, 0.2, 1.7], (11, 1)))


def test_probe_fields():
    assert probe_solution("burgers-steady", None).case == "burgers-probe"
    assert probe_solution("euler1d-steady", None).model_name == "euler-1d"
    with pytest.raises(InvalidParameterError):
        probe_solution("euler2d-steady", None)
    w = euler_probe()(np.linspace(0, 1, 200))
    mach = np.abs(w[:, 1]) / np.sqrt(1.4 * w[:, 2] / w[:, 0])
    assert w[:, 0].min() > 0 and w[:, 2].min() > 0 and mach.max() < 1
    assert scalar_probe("cubic")(np.linspace(0, 1, 50)).min() >= 1.0


def test_truncation_error_residual_interior_only():
    exact = scalar_probe("burgers")
    mesh = build_uniform_1d(64)
    res, e = truncation_error_residual(mesh, exact, exact.model(), get_scheme("fsr3"))
    assert e == pytest.approx(np.max(np.abs(res[mesh.boundary_depth >= 3])))


def test_truncation_error_probe_euler():
    rep = truncation_error_probe("euler1d-steady", [64, 128, 256, 512], get_scheme("qfsr5z"))
    assert abs(rep.final_order - 5) < 0.3


def test_vortex_centre_values():
    w = get_case("euler2d-vortex")(np.array([0.0]), np.array([0.0]), 0.0)
    T = 1 - 25 * 0.4 * np.e / (8 * np.pi ** 2)
    assert w[0, 1] == pytest.approx(0.5) and w[0, 2] == pytest.approx(0.0)
    assert w[0, 3] / w[0, 0] * 1.4 == pytest.approx(T, rel=1e-14)
    assert T == pytest.approx(0.6557256, abs=1e-7)


def test_acoustic_initial_amplitude():
    assert acoustic_V(np.array([0.25]), 0.0)[0] == pytest.approx(1 / (np.pi * 0.2 * 2.4))
    assert acoustic_V(np.array([0.25]), 0.0)[0] == pytest.approx(0.663146, abs=1e-6)
