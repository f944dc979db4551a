import numpy as np
import pytest

from fsr.discretization import Discretization, forcing_field
from fsr.errors import SolverDivergenceError
from fsr.mesh import build_mesh, build_uniform_1d, disjoint_union
from fsr.physics import EulerModel
from fsr.reconstruction import get_scheme
from fsr.solver import (advance_unsteady, column_coloring, fd_jacobian, residual_l1, residual_sparsity,
                        solve_newton, solve_steady, solve_steady_blocks, ssp_rk3_step)
from fsr.verification import get_case


def test_ssp_rk3_is_third_order():
    errs = []
    for n in (20, 40):
        u, dt = 1.0, 1.0 / n
        for _ in range(n):
            u = ssp_rk3_step(u, dt, lambda v: -v)
        errs.append(abs(u - np.exp(-1.0)))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(3.0, abs=0.1)


def _burgers(n, scheme="fsr3"):
    exact = get_case("burgers-steady")
    model = exact.model()
    mesh = build_uniform_1d(n, *exact.domain[:2])
    disc = Discretization(mesh, model, get_scheme(scheme))
    s = forcing_field(exact, model, mesh, method="analytic")
    U0 = exact.initial_state(mesh)
    U0[disc.pinned] = exact.on_mesh(mesh)[disc.pinned]
    return exact, mesh, disc, s, U0


def test_solve_steady_converges():
    exact, mesh, disc, s, U0 = _burgers(32)
    U, rep = solve_steady(disc, U0, s, drop=1e-10, max_iter=5000)
    assert rep.converged and not rep.stalled
    assert rep.final_residual <= 1e-10 * rep.initial_residual
    assert rep.reduction <= 1e-10
    assert np.max(np.abs(U - exact.on_mesh(mesh))) < 1e-4
    np.testing.assert_array_equal(U[disc.pinned], U0[disc.pinned])
    assert residual_l1(disc.residual(U, s)) == pytest.approx(rep.final_residual)


def test_solve_steady_reports_iteration_limit():
    _, _, disc, s, U0 = _burgers(32)
    _, rep = solve_steady(disc, U0, s, drop=1e-12, max_iter=5)
    assert rep.iterations == 5 and not rep.converged


def test_blocks_match_separate_solves():
    parts = [_burgers(n) for n in (24, 40)]
    mesh, offsets = disjoint_union([p[1] for p in parts])
    exact = parts[0][0]
    model = exact.model()
    disc = Discretization(mesh, model, get_scheme("fsr3"))
    s = np.concatenate([p[3] for p in parts])
    U0 = np.concatenate([p[4] for p in parts])
    U, reps = solve_steady_blocks(disc, U0, s, offsets, drop=1e-9, max_iter=[3000, 4000])
    for i, (_, m, d, si, Ui) in enumerate(parts):
        Us, rep = solve_steady(d, Ui, si, drop=1e-9, max_iter=4000)
        assert reps[i].iterations == rep.iterations
        np.testing.assert_allclose(U[offsets[i]:offsets[i + 1]], Us, atol=1e-13)


def test_divergence_raises_with_snapshot():
    exact = get_case("euler1d-steady")
    model = exact.model()
    mesh = build_uniform_1d(30)
    disc = Discretization(mesh, model, get_scheme("fromm"))
    s = forcing_field(exact, model, mesh, method="analytic")
    U0 = model.convert(exact.on_mesh(mesh), "w", "u")
    with pytest.raises(SolverDivergenceError) as info:
        solve_steady(disc, U0, s, cfl=40.0, max_iter=500)
    assert info.value.snapshot is not None and info.value.step >= 0


def _steady_2d(n=10, scheme="cfsr3"):
    exact = get_case("euler2d-steady")
    model = exact.model()
    mesh = build_mesh("quad", n)
    disc = Discretization(mesh, model, get_scheme(scheme))
    s = forcing_field(exact, model, mesh, method="analytic")
    U = model.convert(exact.on_mesh(mesh), "w", "u")
    return exact, model, mesh, disc, s, U


def test_sparsity_and_coloring():
    _, _, mesh, disc, _, _ = _steady_2d(8)
    pat = residual_sparsity(disc)
    colors = column_coloring(pat)
    conflict = (pat.T @ pat).tocoo()
    off = conflict.row != conflict.col
    assert np.all(colors[conflict.row[off]] != colors[conflict.col[off]])
    assert colors.max() + 1 < mesh.n_nodes


def test_fd_jacobian_matches_directional_derivative(rng):
    _, model, mesh, disc, s, U = _steady_2d(9, "cfsr4")
    J = fd_jacobian(disc, U, s)
    m = U.shape[1]
    free = disc.free
    v = np.zeros_like(U)
    v[free] = rng.normal(size=(free.sum(), m)) * 1e-3
    eps = 1e-4
    fd = (disc.residual(U + eps * v, s) - disc.residual(U - eps * v, s)) / (2 * eps)
    Jv = (J @ v[free].ravel()).reshape(-1, m)
    np.testing.assert_allclose(Jv, fd[free], rtol=0, atol=1e-6 * np.abs(fd).max())


def test_newton_converges_from_perturbed_state():
    exact, model, mesh, disc, s, U = _steady_2d(12, "cfsr3")
    W = exact.on_mesh(mesh)
    W0 = W.copy()
    W0[disc.free] *= 1.02
    U0 = model.convert(W0, "w", "u")
    ref = residual_l1(disc.residual(U0, s))
    Us, rep = solve_newton(disc, U0, s, drop=1e-10, reference_residual=ref)
    assert rep.converged or rep.stalled
    assert rep.final_residual < 1e-9 * ref
    np.testing.assert_array_equal(Us[disc.pinned], U0[disc.pinned])


def _velocity_scaled_start(exact, model, mesh, disc, factor):
    W0 = exact.on_mesh(mesh)
    W0[disc.free, 1:3] = factor * W0[disc.free, 1:3] + 0.3 * (factor - 1)
    return model.convert(W0, "w", "u")


def test_newton_globalization_reaches_far_solution():
    """A full Newton step from this start fails; damping and the pseudo-time shift recover."""
    exact, model, mesh, disc, s, U = _steady_2d(12, "cfsr3")
    U0 = _velocity_scaled_start(exact, model, mesh, disc, 1.6)
    ref = residual_l1(disc.residual(U0, s))
    history = []
    Us, rep = solve_newton(disc, U0, s, drop=1e-10, reference_residual=ref,
                           callback=lambda it, r: history.append(r))
    assert rep.converged
    assert history[0] > 0.5 * ref
    assert rep.iterations > 5


def test_newton_failure_is_not_reported_as_stall():
    exact, model, mesh, disc, s, U = _steady_2d(12, "cfsr3")
    U0 = _velocity_scaled_start(exact, model, mesh, disc, 2.0)
    ref = residual_l1(disc.residual(U0, s))
    _, rep = solve_newton(disc, U0, s, drop=1e-10, reference_residual=ref)
    assert not rep.converged
    assert not rep.stalled


def test_unsteady_freestream_and_pinning():
    model = EulerModel(2)
    mesh = build_mesh("right-tri", 8)
    disc = Discretization(mesh, model, get_scheme("qfsr5z", dissipation=False))
    U = model.convert(np.tile([1.0, 0.5, 0.2, 1.0], (mesh.n_nodes, 1)), "w", "u")
    calls = []

    def pinned(t):
        calls.append(t)
        return U[disc.pinned]

    out = advance_unsteady(disc, U, 0.01, 3, pinned_values=pinned)
    np.testing.assert_allclose(out, U, atol=1e-13)
    np.testing.assert_allclose(calls[:3], [0.01, 0.005, 0.01])
    assert len(calls) == 9


def test_unsteady_acoustic_short_run_is_accurate():
    exact = get_case("euler1d-acoustic")
    model = exact.model()
    mesh = build_uniform_1d(81)
    disc = Discretization(mesh, model, get_scheme("fsr5", dissipation=False))
    x = mesh.coords[disc.pinned, 0]
    U0 = model.convert(exact.on_mesh(mesh, 0.0), "w", "u")
    U = advance_unsteady(disc, U0, 1e-4, 50,
                         pinned_values=lambda t: model.convert(exact(x, None, t), "w", "u"))
    W = model.convert(U, "u", "w")
    assert np.max(np.abs(W - exact.on_mesh(mesh, 5e-3))) < 1e-6
