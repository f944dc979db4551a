"""Exact solutions, error norms, observed orders and the truncation-error probe."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretization import Discretization, forcing_field
from .errors import InvalidParameterError, InvalidSeriesError, IterationFailureError
from .mesh import Mesh, build_uniform_1d, effective_spacing
from .physics import GAMMA, Model, make_model
from .reconstruction import SchemeConfig

A_SINE = 1.23
MACH_INF = 1.7
T_SHOCK = 0.2
VORTEX_K = 5.0
VORTEX_U_INF = 0.5
VORTEX_V_INF = 0.0

STEADY_1D_COEFFS = ((1.0, 0.29, 2.3), (0.2, 0.30, 2.0), (1.7, 0.27, 2.5))
STEADY_2D_COEFFS = ((1.00, 2.3), (0.15, 2.0), (0.02, 2.0), (1.00, 2.5))
STEADY_2D_AMPLITUDE = 0.2

PROBE_OMEGA = 20.0
PROBE_OFFSET = 2.0


@dataclass(frozen=True)
class ExactSolution:
    """Primitive-variable exact solution of one verification case.

    ``values(x, y, t)`` returns (N, m); ``grad(x, y, t)``, when present,
    returns the (N, dim, m) primitive gradient used for analytic forcing.
    """

    case: str
    model_name: str
    dim: int
    steady: bool
    domain: tuple[float, float, float, float]
    values: Callable
    grad: Callable | None = None
    constants: dict = field(default_factory=dict)
    initial_guess: tuple | str | None = None

    def __call__(self, x, y=None, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x) if y is None else np.asarray(y, dtype=float)
        return self.values(x, y, t)

    def gradient(self, x, y=None, t: float = 0.0):
        if self.grad is None:
            raise InvalidParameterError(f"case {self.case!r} has no analytic gradient")
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x) if y is None else np.asarray(y, dtype=float)
        return self.grad(x, y, t)

    def model(self) -> Model:
        return make_model(self.model_name)

    def on_mesh(self, mesh: Mesh, t: float = 0.0):
        return self(mesh.coords[:, 0], mesh.coords[:, 1], t)

    def initial_state(self, mesh: Mesh):
        """Primitive starting field for a steady solve (pinned nodes not yet set).

        A tuple is a constant state; ``"linear"`` interpolates the exact
        end values in x, which keeps scalar transients free of steady shocks.
        """
        x = mesh.coords[:, 0]
        if isinstance(self.initial_guess, str):
            ends = self(np.array([x.min(), x.max()]))
            frac = ((x - x.min()) / (x.max() - x.min()))[:, None]
            return ends[0] + (ends[1] - ends[0]) * frac
        if self.initial_guess is None:
            return self.on_mesh(mesh)
        return np.tile(np.asarray(self.initial_guess, dtype=float), (mesh.n_nodes, 1))


# -- scalar ------------------------------------------------------------------

# sin(A x) increases on both intervals; the cubic one avoids u = 0, where
# f' = u^2 degenerates quadratically and costs the solution one order
SINE_DOMAINS = {"burgers": (0.0, 1.0), "cubic": (0.2, 1.2)}


def _sine_case(case, model_name, A=A_SINE):
    lo, hi = SINE_DOMAINS[model_name]
    return ExactSolution(
        case, model_name, 1, True, (lo, hi, 0.0, 0.0),
        values=lambda x, y, t: np.sin(A * x)[:, None],
        grad=lambda x, y, t: (A * np.cos(A * x))[:, None, None],
        constants={"A": A},
        initial_guess="linear",
    )


def scalar_probe(model_name, omega=PROBE_OMEGA, offset=PROBE_OFFSET):
    """u = offset + sin(omega x): positive, so |f'| stays smooth."""
    return ExactSolution(
        f"{model_name}-probe", model_name, 1, True, (0.0, 1.0, 0.0, 0.0),
        values=lambda x, y, t: (offset + np.sin(omega * x))[:, None],
        grad=lambda x, y, t: (omega * np.cos(omega * x))[:, None, None],
        constants={"omega": omega, "offset": offset},
    )


# -- 1D Euler ----------------------------------------------------------------

def _steady_1d_values(x, y, t):
    out = np.empty((x.size, 3))
    for i, (c0, c1, c2) in enumerate(STEADY_1D_COEFFS):
        out[:, i] = c0 + c1 * np.sin(c2 * np.pi * x) + x ** 5
    return out


def _steady_1d_grad(x, y, t):
    out = np.empty((x.size, 1, 3))
    for i, (c0, c1, c2) in enumerate(STEADY_1D_COEFFS):
        out[:, 0, i] = c1 * c2 * np.pi * np.cos(c2 * np.pi * x) + 5.0 * x ** 4
    return out


EULER_PROBE_OMEGA = 12.0


def euler_probe(omega=EULER_PROBE_OMEGA):
    """Subsonic smooth 1D Euler field (Mach < 0.9) with one frequency in every variable.

    Large amplitudes make the non-quadratic part of the flux visible on
    moderate grids.
    """
    base = (1.0, 0.5, 1.0)
    amp = (0.5, 0.4, 0.5)
    phase = (0.0, 1.0, 2.0)

    def values(x, y, t):
        return np.stack([b + a * np.sin(omega * x + p) for b, a, p in zip(base, amp, phase)], axis=1)

    def grad(x, y, t):
        g = np.stack([a * omega * np.cos(omega * x + p) for a, p in zip(amp, phase)], axis=1)
        return g[:, None, :]

    return ExactSolution("euler-probe", "euler-1d", 1, True, (0.0, 1.0, 0.0, 0.0), values, grad,
                         constants={"omega": omega})


def acoustic_V(x, t, gamma=GAMMA, mach=MACH_INF, t_s=T_SHOCK, tol=1e-14, max_iter=200):
    """Solve V = sin(2 pi (x - (u + a) t)) / (pi t_s (gamma + 1)) by fixed-point iteration.

    u = M + V and a = 1 + (gamma - 1) V / 2 follow from the isentropic
    relations of the solution; iteration starts from the t = 0 value.
    """
    x = np.asarray(x, dtype=float)
    c = 1.0 / (np.pi * t_s * (gamma + 1.0))
    V = c * np.sin(2.0 * np.pi * x)
    if t == 0.0:
        return V
    for _ in range(max_iter):
        a = 1.0 + 0.5 * (gamma - 1.0) * V
        Vn = c * np.sin(2.0 * np.pi * (x - (mach + V + a) * t))
        delta = np.max(np.abs(Vn - V)) if V.size else 0.0
        V = Vn
        if delta < tol:
            return V
    raise IterationFailureError(
        f"acoustic fixed point did not converge in {max_iter} iterations at t={t} (shock near t={t_s})")


def _acoustic_values(x, y, t, gamma=GAMMA):
    V = acoustic_V(x, t, gamma)
    s = 1.0 + 0.5 * (gamma - 1.0) * V
    rho = s ** (2.0 / (gamma - 1.0))
    p = s ** (2.0 * gamma / (gamma - 1.0)) / gamma
    return np.stack([rho, MACH_INF + V, p], axis=1)


# -- 2D Euler ----------------------------------------------------------------

def _steady_2d(aspect=1.0):
    """Sinusoids in pi (c x + c y); y-frequencies scale by 1/aspect."""
    ky = 1.0 / aspect

    def values(x, y, t):
        return np.stack([m + STEADY_2D_AMPLITUDE * np.sin(np.pi * c * (x + ky * y))
                         for m, c in STEADY_2D_COEFFS], axis=1)

    def grad(x, y, t):
        out = np.empty((x.size, 2, 4))
        for i, (m, c) in enumerate(STEADY_2D_COEFFS):
            g = STEADY_2D_AMPLITUDE * np.pi * c * np.cos(np.pi * c * (x + ky * y))
            out[:, 0, i] = g
            out[:, 1, i] = ky * g
        return out

    tag = "euler2d-steady" if aspect == 1.0 else f"euler2d-steady(aspect={aspect:g})"
    return ExactSolution(tag, "euler-2d", 2, True, (0.0, 1.0, 0.0, aspect), values, grad,
                         constants={"aspect": aspect},
                         initial_guess=tuple(m for m, _ in STEADY_2D_COEFFS))


VORTEX_HALF_WIDTH = 5.0


def _vortex_values(x, y, t, gamma=GAMMA, K=VORTEX_K, uinf=VORTEX_U_INF, vinf=VORTEX_V_INF):
    xb = x - uinf * t
    yb = y - vinf * t
    r2 = xb * xb + yb * yb
    e = np.exp(0.5 * (1.0 - r2))
    u = uinf - K * yb / (2.0 * np.pi) * e
    v = vinf + K * xb / (2.0 * np.pi) * e
    T = 1.0 - K * K * (gamma - 1.0) / (8.0 * np.pi ** 2) * e * e
    rho = T ** (1.0 / (gamma - 1.0))
    p = rho ** gamma / gamma
    return np.stack([rho, u, v, p], axis=1)


def get_case(case: str, aspect: float = 1.0) -> ExactSolution:
    if case == "burgers-steady":
        return _sine_case(case, "burgers")
    if case == "cubic-steady":
        return _sine_case(case, "cubic")
    if case == "euler1d-steady":
        return ExactSolution(case, "euler-1d", 1, True, (0.0, 1.0, 0.0, 0.0),
                             _steady_1d_values, _steady_1d_grad,
                             constants={"coeffs": STEADY_1D_COEFFS}, initial_guess=(1.0, 0.2, 1.7))
    if case == "euler1d-acoustic":
        return ExactSolution(case, "euler-1d", 1, False, (0.0, 1.0, 0.0, 0.0), _acoustic_values,
                             constants={"M_inf": MACH_INF, "t_s": T_SHOCK})
    if case == "euler2d-steady":
        return _steady_2d(aspect)
    if case == "euler2d-vortex":
        w = VORTEX_HALF_WIDTH
        return ExactSolution(case, "euler-2d", 2, False, (-w, w, -w, w), _vortex_values,
                             constants={"K": VORTEX_K, "u_inf": VORTEX_U_INF, "v_inf": VORTEX_V_INF})
    raise InvalidParameterError(f"unknown case {case!r}; valid cases: {', '.join(CASES)}")


CASES = ("burgers-steady", "cubic-steady", "euler1d-steady", "euler1d-acoustic",
         "euler2d-steady", "euler2d-vortex")


def exact_eval(case: str, x, y=None, t: float = 0.0, aspect: float = 1.0):
    return get_case(case, aspect)(x, y, t)


# -- norms and orders --------------------------------------------------------

def error_norm(solution, exact, norm: str = "Linf") -> float:
    """Linf over all nodes and components, or L1 of the density error per node."""
    diff = np.asarray(solution, dtype=float) - np.asarray(exact, dtype=float)
    if diff.ndim == 1:
        diff = diff[:, None]
    if norm == "Linf":
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    if norm == "L1":
        return float(np.sum(np.abs(diff[:, 0])) / diff.shape[0])
    raise InvalidParameterError(f"unknown norm {norm!r}")


def case_norm(model: Model) -> str:
    return "L1" if getattr(model, "is_euler", False) else "Linf"


@dataclass(frozen=True)
class ConvergenceReport:
    h: np.ndarray
    error: np.ndarray
    orders: np.ndarray

    @property
    def final_order(self) -> float:
        return float(self.orders[-1])

    def rows(self):
        """(h, error, order) per grid; order is nan on the coarsest."""
        o = np.concatenate([[np.nan], self.orders])
        return list(zip(self.h.tolist(), self.error.tolist(), o.tolist()))


def convergence_order(h, e) -> ConvergenceReport:
    h = np.asarray(h, dtype=float)
    e = np.asarray(e, dtype=float)
    if h.ndim != 1 or h.shape != e.shape or h.size < 2:
        raise InvalidSeriesError("need at least two (h, error) pairs")
    if not np.all(np.diff(h) < 0):
        raise InvalidSeriesError("mesh spacings must be strictly decreasing")
    if not np.all(e > 0):
        raise InvalidSeriesError("errors must be positive")
    p = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    return ConvergenceReport(h, e, p)


# -- truncation-error probe --------------------------------------------------

PROBE_MIN_DEPTH = 3


def probe_solution(case: str, scheme: SchemeConfig) -> ExactSolution:
    """Smooth field used for the probe of ``case``."""
    if case in ("burgers-steady", "burgers-probe"):
        return scalar_probe("burgers")
    if case in ("cubic-steady", "cubic-probe"):
        return scalar_probe("cubic")
    if case in ("euler1d-steady", "euler1d-acoustic", "euler-probe"):
        return euler_probe()
    raise InvalidParameterError(f"the truncation-error probe runs on 1D cases, not {case!r}")


def truncation_error_residual(mesh: Mesh, exact: ExactSolution, model: Model, scheme: SchemeConfig,
                              forcing: str = "analytic"):
    """Residual of the injected exact solution and its interior Linf norm."""
    W = exact.on_mesh(mesh)
    U = model.convert(W, "w", "u") if model.is_euler else W
    s = forcing_field(exact, model, mesh, method=forcing)
    res = Discretization(mesh, model, scheme).residual(U, s, masked=False)
    interior = mesh.boundary_depth >= PROBE_MIN_DEPTH
    return res, float(np.max(np.abs(res[interior])))


def truncation_error_probe(case: str, sizes, scheme: SchemeConfig, forcing: str = "analytic"):
    """Decay of the interior Linf residual of the exact solution on uniform 1D grids."""
    exact = probe_solution(case, scheme)
    model = exact.model()
    hs, es = [], []
    for n in sizes:
        mesh = build_uniform_1d(int(n), exact.domain[0], exact.domain[1])
        _, e = truncation_error_residual(mesh, exact, model, scheme, forcing)
        hs.append(effective_spacing(mesh))
        es.append(e)
    return convergence_order(hs, es)
