"""Steady and unsteady drivers.

Steady problems march in pseudo-time with three-stage SSP Runge-Kutta and
local time steps, or, where that iteration has growing modes, are solved by
Newton's method with a finite-difference Jacobian. Unsteady problems use
SSP-RK3 with one global step. Pinned nodes (boundary depth <= 2) never
change in the steady solvers, and are reset to the exact solution at every
stage time in the unsteady one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import Discretization
from .errors import FSRError, SolverDivergenceError

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    iterations: int
    initial_residual: float
    final_residual: float
    converged: bool
    wall_seconds: float
    reference_residual: float | None = None
    stalled: bool = False

    @property
    def reduction(self) -> float:
        ref = self.reference_residual or self.initial_residual
        return self.final_residual / ref if ref > 0 else 0.0


def residual_l1(res: np.ndarray) -> float:
    return float(np.mean(np.abs(res)))


def ssp_rk3_step(u, dt, rhs):
    """One SSP-RK3 step of du/dt = rhs(u); dt may be per-node (broadcast)."""
    u1 = u + dt * rhs(u)
    u2 = 0.75 * u + 0.25 * (u1 + dt * rhs(u1))
    return u / 3.0 + 2.0 / 3.0 * (u2 + dt * rhs(u2))


def _guard(disc: Discretization, fn, U, step):
    try:
        r = fn(U)
    except FSRError as exc:
        raise SolverDivergenceError(f"solver diverged at iteration {step}: {exc}",
                                    step=step, snapshot=U.copy()) from exc
    if not np.all(np.isfinite(r)):
        raise SolverDivergenceError(f"non-finite residual at iteration {step}",
                                    step=step, snapshot=U.copy())
    return r


def solve_steady(disc: Discretization, U0, forcing=None, *, cfl: float = 0.99,
                 drop: float = 1e-7, max_iter: int = 10000, reference_residual: float | None = None,
                 stall_window: int | None = None, callback=None):
    """Pseudo-time SSP-RK3 with local time steps until L1(Res) <= drop * reference.

    ``reference_residual`` defaults to the residual of ``U0``. With
    ``stall_window`` set, the iteration also stops once the residual has gone
    that many iterations without a new minimum (round-off floor); the report
    then has ``stalled=True`` and ``converged=False``.

    Returns ``(U, SolveReport)``; hitting ``max_iter`` is reported, not raised.
    """
    U, reports = solve_steady_blocks(
        disc, U0, forcing, [0, disc.mesh.n_nodes], cfl=cfl, drop=drop, max_iter=max_iter,
        reference_residuals=None if reference_residual is None else [reference_residual],
        stall_window=stall_window, callback=callback)
    return U, reports[0]


def solve_steady_blocks(disc: Discretization, U0, forcing, offsets, *, cfl: float = 0.99,
                        drop: float = 1e-7, max_iter: int = 10000, reference_residuals=None,
                        stall_window: int | None = None, callback=None):
    """:func:`solve_steady` on a mesh made of unconnected parts.

    ``offsets`` are the node offsets of the parts (see ``disjoint_union``).
    Each part has its own reference, stopping test and iteration count; a
    finished part is frozen (zero time step) while the others continue, so
    its result equals that of a separate solve. ``max_iter`` may be one
    limit per part.
    """
    t0 = time.perf_counter()
    U = np.array(U0, dtype=float, copy=True)
    offsets = np.asarray(offsets, dtype=np.int64)
    nb = offsets.size - 1
    parts = [slice(int(offsets[i]), int(offsets[i + 1])) for i in range(nb)]

    def R(V, step):
        return _guard(disc, lambda W: disc.residual(W, forcing), V, step)

    def norms(res):
        return np.array([residual_l1(res[p]) for p in parts])

    pin = disc.pinned
    U_pin = U[pin].copy()
    res = R(U, 0)
    r0 = norms(res)
    ref = r0.copy() if reference_residuals is None else np.asarray(reference_residuals, dtype=float)
    target = drop * ref
    rk = r0.copy()
    best, best_it = r0.copy(), np.zeros(nb, dtype=np.int64)
    limit = np.broadcast_to(np.asarray(max_iter, dtype=np.int64), (nb,))
    active = (rk > target) & (limit > 0)
    stalled = np.zeros(nb, dtype=bool)
    iters = np.zeros(nb, dtype=np.int64)
    done_at = np.zeros(nb)
    it = 0
    while active.any():
        dt = disc.local_time_step(U, cfl)
        for i in np.flatnonzero(~active):
            dt[parts[i]] = 0.0
        dt = dt[:, None]
        # stage 1 reuses the residual already evaluated at U
        U1 = U - dt * res
        r1 = R(U1, it)
        U2 = 0.75 * U + 0.25 * (U1 - dt * r1)
        r2 = R(U2, it)
        Un = U / 3.0 + 2.0 / 3.0 * (U2 - dt * r2)
        # the convex combination is not exact in floating point: restore fixed values
        Un[pin] = U_pin
        for i in np.flatnonzero(~active):
            Un[parts[i]] = U[parts[i]]
        U = Un
        it += 1
        res = R(U, it)
        rn = norms(res)
        for i in np.flatnonzero(active):
            rk[i] = rn[i]
            iters[i] = it
            if rk[i] < best[i]:
                best[i], best_it[i] = rk[i], it
            if rk[i] <= target[i]:
                active[i] = False
            elif stall_window is not None and it - best_it[i] >= stall_window:
                active[i] = False
                stalled[i] = True
            elif it >= limit[i]:
                active[i] = False
            if not active[i]:
                done_at[i] = time.perf_counter() - t0
        if callback is not None:
            callback(it, float(rn.max()))
    wall = time.perf_counter() - t0
    reports = []
    for i in range(nb):
        converged = bool(rk[i] <= target[i])
        if stalled[i]:
            log.info("steady solve stalled at residual ratio %.3e after %d iterations",
                     rk[i] / ref[i], iters[i])
        elif not converged:
            log.warning("steady solve stopped at max_iter=%d with residual ratio %.3e",
                        limit[i], rk[i] / ref[i])
        reports.append(SolveReport(int(iters[i]), float(r0[i]), float(rk[i]), converged,
                                   float(done_at[i] if done_at[i] else wall), float(ref[i]),
                                   bool(stalled[i])))
    return U, reports


def residual_sparsity(disc: Discretization) -> sp.csr_matrix:
    """Boolean (N, N) pattern: entry (j, i) set if Res_j can depend on node i.

    Gradients reach one ring, their gradients two; an edge residual also
    uses the far end-point's derivatives, adding one more ring.
    """
    mesh = disc.mesh
    n = mesh.n_nodes
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    adj = sp.csr_matrix((np.ones(2 * a.size), (np.concatenate([a, b]), np.concatenate([b, a]))),
                        shape=(n, n)) + sp.identity(n, format="csr")
    rings = 3 if disc.scheme.needs_hessian else 2
    pat = adj
    for _ in range(rings - 1):
        pat = pat @ adj
    pat = pat.tocsr()
    pat.data[:] = 1.0
    return pat


def column_coloring(pattern: sp.csr_matrix) -> np.ndarray:
    """Greedy coloring so that columns of one color never share a row."""
    pattern = pattern.tocsr()
    conflict = (pattern.T @ pattern).tocsr()
    n = pattern.shape[1]
    color = np.full(n, -1, dtype=np.int64)
    indptr, indices = conflict.indptr, conflict.indices
    for i in range(n):
        used = color[indices[indptr[i]:indptr[i + 1]]]
        used = np.unique(used[used >= 0])
        c = 0
        for u in used:
            if u != c:
                break
            c += 1
        color[i] = c
    return color


def fd_jacobian(disc: Discretization, U, forcing=None, pattern=None, colors=None):
    """Sparse Jacobian of the masked residual on free nodes by colored forward differences.

    Unknowns and equations are ordered node-major over ``disc.free``.
    """
    U = np.asarray(U, dtype=float)
    n, m = U.shape
    if pattern is None:
        pattern = residual_sparsity(disc)
    if colors is None:
        colors = column_coloring(pattern)
    free = disc.free
    slot = np.full(n, -1, dtype=np.int64)
    slot[free] = np.arange(int(free.sum()))
    R0 = disc.residual(U, forcing)
    pc = pattern.tocsc()
    rows_l, cols_l, vals_l = [], [], []
    for c in range(int(colors.max()) + 1):
        nodes = np.flatnonzero((colors == c) & free)
        if nodes.size == 0:
            continue
        # entries (row r, column i) of the pattern for the perturbed nodes
        starts, ends = pc.indptr[nodes], pc.indptr[nodes + 1]
        counts = ends - starts
        col_of = np.repeat(nodes, counts)
        row_of = pc.indices[np.concatenate([np.arange(s0, e0) for s0, e0 in zip(starts, ends)])]
        keep = free[row_of]
        col_of, row_of = col_of[keep], row_of[keep]
        for q in range(m):
            step = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(U[nodes, q]))
            Up = U.copy()
            Up[nodes, q] += step
            step_full = np.zeros(n)
            step_full[nodes] = step
            D = disc.residual(Up, forcing) - R0
            vals = D[row_of] / step_full[col_of][:, None]      # (nnz, m)
            for p in range(m):
                rows_l.append(slot[row_of] * m + p)
                cols_l.append(slot[col_of] * m + q)
                vals_l.append(vals[:, p])
    size = int(free.sum()) * m
    J = sp.csc_matrix((np.concatenate(vals_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
                      shape=(size, size))
    return J


def solve_newton(disc: Discretization, U0, forcing=None, *, drop: float = 1e-8, max_iter: int = 30,
                 reference_residual: float | None = None, refresh_ratio: float = 0.1,
                 cfl0: float = 100.0, floor_ratio: float = 1e-4, cfl_start: float | None = None,
                 callback=None):
    """Newton iteration on the free nodes, with pseudo-transient fallback.

    Steps solve ``(V/dtau + J) dU = -Res`` with a colored finite-difference
    Jacobian ``J``. The shift starts at CFL ``cfl_start`` (default: none,
    plain Newton). When a step from a fresh Jacobian cannot reduce the
    residual, even after halving up to six times, local pseudo-time steps are
    switched on at CFL ``cfl0`` and cut tenfold on each further failure; the
    CFL grows as ``r_switch / r`` so the iteration returns to Newton as the
    residual falls. The factorization is reused while each step reduces the
    residual by at least ``refresh_ratio``. Iteration stops at
    ``L1(Res) <= drop * reference``, or at the round-off floor
    (``stalled=True``): no descent from a fresh Jacobian after the residual
    already fell below ``floor_ratio`` times its starting value.
    """
    t0 = time.perf_counter()
    U = np.array(U0, dtype=float, copy=True)
    free = disc.free
    m = U.shape[1]
    pattern = residual_sparsity(disc)
    colors = column_coloring(pattern)

    def R(V, step):
        return _guard(disc, lambda W: disc.residual(W, forcing), V, step)

    def trial(V, du, scale, step):
        """Damped update; an inadmissible or non-finite trial counts as infinite residual."""
        Vn = V.copy()
        Vn[free] += scale * du
        try:
            r = R(Vn, step)
        except SolverDivergenceError:
            return Vn, None, np.inf
        return Vn, r, residual_l1(r)

    res = R(U, 0)
    r0 = residual_l1(res)
    ref = r0 if reference_residual is None else float(reference_residual)
    target = drop * ref
    rk, it, lu, J, stalled = r0, 0, None, None, False
    cfl, r_switch = cfl_start, r0
    fresh = False
    while rk > target and it < max_iter:
        if lu is None:
            if J is None:
                J = fd_jacobian(disc, U, forcing, pattern, colors)
            A = J
            if cfl is not None:
                dtau = disc.local_time_step(U, min(cfl * r_switch / rk, 1e12))[free]
                A = J + sp.diags(np.repeat(1.0 / dtau, m))
            lu = spla.splu(A.tocsc())
            fresh = True
        du = lu.solve(-res[free].ravel()).reshape(-1, m)
        Un, rn_vec, rn = trial(U, du, 1.0, it + 1)
        scale = 1.0
        while fresh and not rn < rk and scale > 1.0 / 64:
            scale *= 0.5
            Un, rn_vec, rn = trial(U, du, scale, it + 1)
        it += 1
        if callback is not None:
            callback(it, rn)
        if rn < rk:
            if rn > refresh_ratio * rk:
                lu, J = None, None
            U, res, rk, fresh = Un, rn_vec, rn, False
        elif not fresh:
            lu, J = None, None
        elif rk <= floor_ratio * r0:
            stalled = True
            break
        elif cfl is None or cfl > 1e-3 * cfl0:
            # same Jacobian, smaller pseudo-time step
            cfl = cfl0 if cfl is None else 0.1 * cfl
            r_switch, lu = rk, None
        else:
            break
    converged = rk <= target
    if stalled and not converged:
        log.info("newton stalled at residual ratio %.3e after %d steps", rk / ref, it)
    elif not converged:
        log.warning("newton stopped at residual ratio %.3e after %d steps", rk / ref, it)
    return U, SolveReport(it, r0, rk, converged, time.perf_counter() - t0, ref, stalled)


def advance_unsteady(disc: Discretization, U0, dt: float, n_steps: int, *, t0: float = 0.0,
                     pinned_values=None):
    """Fixed-step SSP-RK3 from ``t0`` to ``t0 + n_steps * dt``.

    ``pinned_values(t)`` returns conservative values for ``disc.pinned`` nodes
    at time ``t``; stages use t_n, t_n + dt, t_n + dt/2.
    """
    U = np.array(U0, dtype=float, copy=True)
    pin = disc.pinned
    t = t0

    def R(V):
        return -disc.residual(V)

    for step in range(n_steps):
        r0 = _guard(disc, R, U, step)
        U1 = U + dt * r0
        if pinned_values is not None:
            U1[pin] = pinned_values(t + dt)
        r1 = _guard(disc, R, U1, step)
        U2 = 0.75 * U + 0.25 * (U1 + dt * r1)
        if pinned_values is not None:
            U2[pin] = pinned_values(t + 0.5 * dt)
        r2 = _guard(disc, R, U2, step)
        U = U / 3.0 + 2.0 / 3.0 * (U2 + dt * r2)
        t = t0 + (step + 1) * dt
        if pinned_values is not None:
            U[pin] = pinned_values(t)
    return U
