"""Command-line driver for convergence studies and truncation-error probes.

    fsr run --case burgers-steady --scheme fsr3 --grids 32,64,128,256
    fsr te-probe --case burgers-steady --scheme fsr5 --no-dissipation

Options may also come from a ``key=value`` file given with ``--config``;
command-line flags override it. Each study writes ``convergence.csv`` (or
``te.csv``) with the columns grid, h, error, observed_order, iterations,
wall_seconds, floats at 17 significant digits.

Exit codes: 0 done, 1 configuration error, 2 solver divergence.

Work is split into fixed units: all grids of a 1D study form one disjoint
mesh solved together, each 2D grid is its own unit. ``FSR_THREADS`` caps
the process pool running the units; it never changes the split, so results
are bitwise independent of it.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .discretization import Discretization, forcing_field
from .errors import ConfigError, FSRError, SolverDivergenceError
from .mesh import FAMILIES, Mesh, build_mesh, disjoint_union, effective_spacing
from .reconstruction import SCHEME_NAMES, get_scheme
from .solver import advance_unsteady, solve_newton, solve_steady_blocks
from .verification import (CASES, ExactSolution, case_norm, convergence_order, error_norm, get_case,
                           probe_solution, truncation_error_residual)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("grid", "h", "error", "observed_order", "iterations", "wall_seconds")

# per-case defaults; ``drop`` is relative to the residual of the initial guess
CASE_DEFAULTS = {
    "burgers-steady": dict(family="uniform-1d", grids=(32, 64, 128, 256), solver="rk3",
                           drop=1e-14, stall_window=300, init="guess"),
    "cubic-steady": dict(family="uniform-1d", grids=(32, 64, 128, 256), solver="rk3",
                         drop=1e-14, stall_window=300, init="guess"),
    "euler1d-steady": dict(family="uniform-1d", grids=(22, 44, 88, 176), solver="rk3",
                           drop=1e-12, stall_window=2000, init="exact"),
    "euler1d-acoustic": dict(family="uniform-1d", grids=(21, 41, 81, 161), dt=2e-6, steps=35000),
    "euler2d-steady": dict(family="quad", grids=(32, 48, 64), solver="newton", drop=1e-8,
                           init="exact"),
    "euler2d-vortex": dict(family="quad", grids=(64, 96, 128), dt=1e-3, steps=1000),
}
TE_GRIDS = (64, 128, 256, 512, 1024)


@dataclass(frozen=True)
class CaseConfig:
    """One study: a case, a scheme and a list of grid sizes.

    ``None`` fields take the case default from :data:`CASE_DEFAULTS`.
    """

    case: str
    scheme: str
    grids: tuple[int, ...] | None = None
    family: str | None = None
    dissipation: bool = True
    cfl: float = 0.99
    drop: float | None = None
    dt: float | None = None
    steps: int | None = None
    aspect: float = 1.0
    seed: int = 1
    out: str = "."
    plot: bool = False
    solver: str | None = None
    init: str | None = None
    max_iter: int | None = None
    stall_window: int | None = None
    entropy_eps: float = 0.0

    def resolved(self) -> "CaseConfig":
        """Validate and fill case defaults; raises :class:`ConfigError`."""
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; valid cases: {', '.join(CASES)}")
        if self.scheme.lower() not in SCHEME_NAMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; valid schemes: {', '.join(SCHEME_NAMES)}")
        cfg = replace(self, scheme=self.scheme.lower())
        if cfg.scheme == "qfsr5z" and not cfg.case.startswith("euler"):
            raise ConfigError("qfsr5z reconstructs the parameter vector and needs an Euler case")
        defaults = CASE_DEFAULTS[cfg.case]
        cfg = replace(cfg, **{k: v for k, v in defaults.items() if getattr(cfg, k) is None})
        grids = tuple(int(g) for g in cfg.grids)
        if len(grids) < 1 or any(b <= a for a, b in zip(grids, grids[1:])):
            raise ConfigError(f"grid sizes must be strictly increasing, got {grids}")
        if cfg.family not in FAMILIES:
            raise ConfigError(f"unknown grid family {cfg.family!r}; valid families: {', '.join(FAMILIES)}")
        if (cfg.family == "uniform-1d") != (_dim(cfg.case) == 1):
            raise ConfigError(f"grid family {cfg.family!r} does not fit case {cfg.case!r}")
        if cfg.solver not in (None, "rk3", "newton"):
            raise ConfigError(f"unknown solver {cfg.solver!r}; valid solvers: rk3, newton")
        if cfg.init not in (None, "exact", "guess"):
            raise ConfigError(f"unknown init {cfg.init!r}; valid values: exact, guess")
        if cfg.aspect <= 0 or cfg.cfl <= 0:
            raise ConfigError("aspect and cfl must be positive")
        if cfg.aspect != 1.0 and cfg.case != "euler2d-steady":
            raise ConfigError("aspect applies to euler2d-steady only")
        return replace(cfg, grids=grids)


def _dim(case: str) -> int:
    return 2 if case.startswith("euler2d") else 1


def _unsteady(case: str) -> bool:
    return case in ("euler1d-acoustic", "euler2d-vortex")


# -- meshes and states ---------------------------------------------------------

def case_mesh(cfg: CaseConfig, exact: ExactSolution, n: int) -> Mesh:
    """Mesh of size ``n`` covering the case domain."""
    xlo, xhi, ylo, yhi = exact.domain
    if cfg.family == "uniform-1d":
        return build_mesh("uniform-1d", n, x_lo=xlo, x_hi=xhi)
    if cfg.case == "euler2d-vortex":
        return build_mesh(cfg.family, n, seed=cfg.seed).scaled(xhi - xlo).translated((xlo, ylo))
    return build_mesh(cfg.family, n, aspect=cfg.aspect, seed=cfg.seed)


def _to_u(model, W):
    return model.convert(W, "w", "u") if model.is_euler else np.array(W, dtype=float)


def _to_w(model, U):
    return model.convert(U, "u", "w") if model.is_euler else U


@dataclass
class GridResult:
    grid: int
    h: float
    error: float
    iterations: int
    wall_seconds: float
    converged: bool = True


# -- work units ------------------------------------------------------------------

def _steady_setup(cfg, exact, model, mesh, disc):
    """Exact primitive field, start state, forcing and the residual of the initial guess."""
    W = exact.on_mesh(mesh)
    U_exact = _to_u(model, W)
    forcing = forcing_field(exact, model, mesh, method="analytic")
    guess = _to_u(model, exact.initial_state(mesh))
    guess[disc.pinned] = U_exact[disc.pinned]
    guess_res = disc.residual(guess, forcing)
    start = U_exact.copy() if cfg.init == "exact" else guess
    return W, start, forcing, guess_res


def _run_1d_unit(cfg: CaseConfig) -> list[GridResult]:
    """All grids of a 1D study on one disjoint mesh."""
    exact = get_case(cfg.case)
    model = exact.model()
    scheme = get_scheme(cfg.scheme, cfg.dissipation)
    meshes = [case_mesh(cfg, exact, n) for n in cfg.grids]
    mesh, offsets = disjoint_union(meshes)
    disc = Discretization(mesh, model, scheme, cfg.entropy_eps)
    parts = [slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(meshes))]
    if _unsteady(cfg.case):
        t0 = time.perf_counter()
        U = _to_u(model, exact.on_mesh(mesh, 0.0))
        x = mesh.coords[disc.pinned, 0]

        def pinned(t):
            return _to_u(model, exact(x, None, t))

        U = advance_unsteady(disc, U, cfg.dt, cfg.steps, pinned_values=pinned)
        wall = time.perf_counter() - t0
        W_ref = exact.on_mesh(mesh, cfg.dt * cfg.steps)
        W = _to_w(model, U)
        return [GridResult(n, effective_spacing(m), error_norm(W[p], W_ref[p], case_norm(model)),
                           cfg.steps, wall) for n, m, p in zip(cfg.grids, meshes, parts)]

    W_ref, start, forcing, guess_res = _steady_setup(cfg, exact, model, mesh, disc)
    refs = [float(np.mean(np.abs(guess_res[p]))) for p in parts]
    limits = [cfg.max_iter or 500 * n for n in cfg.grids]
    U, reports = solve_steady_blocks(disc, start, forcing, offsets, cfl=cfg.cfl, drop=cfg.drop,
                                     max_iter=limits, reference_residuals=refs,
                                     stall_window=cfg.stall_window)
    W = _to_w(model, U)
    return [GridResult(n, effective_spacing(m), error_norm(W[p], W_ref[p], case_norm(model)),
                       r.iterations, r.wall_seconds, r.converged or r.stalled)
            for n, m, p, r in zip(cfg.grids, meshes, parts, reports)]


def _run_2d_unit(cfg: CaseConfig, n: int) -> GridResult:
    exact = get_case(cfg.case, cfg.aspect)
    model = exact.model()
    mesh = case_mesh(cfg, exact, n)
    disc = Discretization(mesh, model, get_scheme(cfg.scheme, cfg.dissipation), cfg.entropy_eps)
    h = effective_spacing(mesh)
    if _unsteady(cfg.case):
        t0 = time.perf_counter()
        x, y = mesh.coords[disc.pinned, 0], mesh.coords[disc.pinned, 1]

        def pinned(t):
            return _to_u(model, exact(x, y, t))

        U = advance_unsteady(disc, _to_u(model, exact.on_mesh(mesh, 0.0)), cfg.dt, cfg.steps,
                             pinned_values=pinned)
        err = error_norm(_to_w(model, U), exact.on_mesh(mesh, cfg.dt * cfg.steps), case_norm(model))
        return GridResult(n, h, err, cfg.steps, time.perf_counter() - t0)

    W_ref, start, forcing, guess_res = _steady_setup(cfg, exact, model, mesh, disc)
    ref = float(np.mean(np.abs(guess_res)))
    if cfg.solver == "newton":
        U, rep = solve_newton(disc, start, forcing, drop=cfg.drop, reference_residual=ref,
                              **({"max_iter": cfg.max_iter} if cfg.max_iter else {}))
    else:
        U, (rep,) = solve_steady_blocks(disc, start, forcing, [0, mesh.n_nodes], cfl=cfg.cfl,
                                        drop=cfg.drop, max_iter=cfg.max_iter or 2000 * n,
                                        reference_residuals=[ref], stall_window=cfg.stall_window)
    err = error_norm(_to_w(model, U), W_ref, case_norm(model))
    return GridResult(n, h, err, rep.iterations, rep.wall_seconds, rep.converged or rep.stalled)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FSR_THREADS", "1")))
    except ValueError:
        return 1


def solve_study(cfg: CaseConfig) -> list[GridResult]:
    """Run every grid of a resolved config; rows come back in grid order."""
    if _dim(cfg.case) == 1:
        return _run_1d_unit(cfg)
    workers = min(_threads(), len(cfg.grids))
    if workers <= 1:
        return [_run_2d_unit(cfg, n) for n in cfg.grids]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_2d_unit, cfg, n) for n in cfg.grids]
        return [f.result() for f in futures]


def probe_study(cfg: CaseConfig) -> list[GridResult]:
    """Interior residual of the exact probe field on each grid (no solve)."""
    if _dim(cfg.case) != 1:
        raise ConfigError(f"the truncation-error probe runs on 1D cases, not {cfg.case!r}")
    scheme = get_scheme(cfg.scheme, cfg.dissipation)
    exact = probe_solution(cfg.case, scheme)
    model = exact.model()
    rows = []
    for n in cfg.grids:
        t0 = time.perf_counter()
        mesh = case_mesh(cfg, exact, n)
        _, err = truncation_error_residual(mesh, exact, model, scheme)
        rows.append(GridResult(n, effective_spacing(mesh), err, 0, time.perf_counter() - t0))
    return rows


# -- reports -------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{float(x):.17g}"


def observed_orders(rows: list[GridResult]) -> list[float]:
    """nan on the first row, then pairwise log-ratio orders."""
    if len(rows) < 2:
        return [float("nan")] * len(rows)
    rep = convergence_order([r.h for r in rows], [r.error for r in rows])
    return [float("nan")] + rep.orders.tolist()


def write_csv(path: Path, rows: list[GridResult]) -> list[float]:
    orders = observed_orders(rows)
    lines = [",".join(CSV_COLUMNS)]
    for r, p in zip(rows, orders):
        lines.append(",".join([str(r.grid), _fmt(r.h), _fmt(r.error), _fmt(p), str(r.iterations),
                               _fmt(r.wall_seconds)]))
    path.write_text("\n".join(lines) + "\n")
    return orders


def write_plot_script(path: Path, csv_name: str, title: str) -> None:
    path.write_text(
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'h'\n"
        "set ylabel 'error'\n"
        f"set title '{title}'\n"
        "set key off\n"
        f"plot '{csv_name}' using 2:3 skip 1 with linespoints\n")


def _csv_name(mode: str) -> str:
    return "te.csv" if mode == "te-probe" else "convergence.csv"


def execute(cfg: CaseConfig, mode: str = "run") -> tuple[list[GridResult], list[float]]:
    """Resolve ``cfg``, run the study and write the report files.

    Returns the rows and observed orders. Raises :class:`ConfigError` or
    :class:`SolverDivergenceError`.
    """
    if mode == "te-probe":
        if cfg.grids is None:
            cfg = replace(cfg, grids=TE_GRIDS)
        cfg = cfg.resolved()
        rows = probe_study(cfg)
    else:
        cfg = cfg.resolved()
        rows = solve_study(cfg)
    for r in rows:
        if not r.converged:
            log.warning("grid %d stopped at the iteration limit before converging", r.grid)
    if len(rows) >= 2 and not all(r.error > 0 for r in rows):
        raise ConfigError("zero error on some grid; observed orders are undefined")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    name = _csv_name(mode)
    orders = write_csv(out / name, rows)
    if cfg.plot:
        write_plot_script(out / (Path(name).stem + ".gp"), name, f"{cfg.case} {cfg.scheme}")
    return rows, orders


def run_case(cfg: CaseConfig, mode: str = "run") -> int:
    """:func:`execute` with exit codes and a one-line summary on stdout."""
    try:
        rows, orders = execute(cfg, mode)
    except ConfigError as exc:
        print(f"fsr: error: {exc}", file=sys.stderr)
        return 1
    except SolverDivergenceError as exc:
        print(f"fsr: solver diverged: {exc}", file=sys.stderr)
        return 2
    except FSRError as exc:
        print(f"fsr: error: {exc}", file=sys.stderr)
        return 1
    final = orders[-1] if rows else float("nan")
    print(f"{cfg.case} {cfg.scheme.lower()} {mode}: grids {','.join(str(r.grid) for r in rows)} "
          f"final error {rows[-1].error:.6e} final observed order {final:.4f}")
    return 0


# -- argument parsing ----------------------------------------------------------

def _grid_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(g) for g in str(text).replace(" ", "").split(",") if g)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid sizes must be integers, got {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    conf = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        conf[key.replace("-", "_")] = value
    return conf


_CONVERTERS = {f.name: f.type for f in fields(CaseConfig)}


def _coerce(key: str, value):
    if key == "grids":
        return _grid_list(value)
    if key == "no_dissipation":
        return _bool(value)
    kind = _CONVERTERS.get(key)
    if kind is None:
        raise ConfigError(f"unknown config key {key!r}")
    if "bool" in kind:
        return _bool(value)
    if "int" in kind and "tuple" not in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsr", description="Flux-reconstruction convergence studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "solve on each grid and measure the error"),
                            ("te-probe", "measure the truncation error of the exact solution")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--case", help=f"one of: {', '.join(CASES)}")
        p.add_argument("--scheme", help=f"one of: {', '.join(SCHEME_NAMES)}")
        p.add_argument("--grids", type=_grid_list, help="comma-separated sizes, increasing")
        p.add_argument("--family", help=f"grid family, one of: {', '.join(FAMILIES)}")
        p.add_argument("--no-dissipation", action="store_true", default=None,
                       help="central flux only")
        p.add_argument("--cfl", type=float)
        p.add_argument("--drop", type=float, help="residual reduction relative to the initial guess")
        p.add_argument("--dt", type=float, help="time step (unsteady cases)")
        p.add_argument("--steps", type=int, help="number of time steps (unsteady cases)")
        p.add_argument("--aspect", type=float, help="y extent of the 2D steady domain")
        p.add_argument("--seed", type=int, help="irregular-grid seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--plot", action="store_true", default=None, help="also write a gnuplot script")
        p.add_argument("--solver", choices=("rk3", "newton"), help="steady solver")
        p.add_argument("--init", choices=("exact", "guess"), help="steady starting state")
        p.add_argument("--max-iter", type=int, help="iteration limit per grid")
        p.add_argument("--stall-window", type=int, help="stop after this many iterations without progress")
        p.add_argument("--entropy-eps", type=float, help="entropy-fix width (0 disables)")
    return parser


def config_from_args(args: argparse.Namespace) -> CaseConfig:
    conf = read_config_file(args.config) if args.config else {}
    conf = {k: _coerce(k, v) for k, v in conf.items()}
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        conf[key] = value
    if "no_dissipation" in conf:
        conf["dissipation"] = not conf.pop("no_dissipation")
    missing = [k for k in ("case", "scheme") if k not in conf]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + k for k in missing)}; "
                          f"valid cases: {', '.join(CASES)}; valid schemes: {', '.join(SCHEME_NAMES)}")
    return CaseConfig(**conf)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"fsr: error: {exc}", file=sys.stderr)
        return 1
    return run_case(cfg, args.command)


if __name__ == "__main__":
    sys.exit(main())
