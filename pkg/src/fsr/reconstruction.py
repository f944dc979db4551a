"""Edge reconstruction of solution states and fluxes.

Every function here works on arrays over edges: ``d`` is the (E, dim)
vector from a node to the edge midpoint, gradients are (E, dim, m) and
Hessians (E, dim, dim, m), gathered at the edge end-points beforehand.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import InadmissibleStateError, InvalidParameterError

FAMILIES = ("SR2", "FSR", "CFSR", "QFSR")


@dataclass(frozen=True)
class SchemeConfig:
    name: str
    family: str
    order: int
    kappa: float = 0.5
    kappa3: float = 0.0
    theta: float = 1.0 / 3.0
    theta3: float = 0.0
    theta2: float = 2.0 / 3.0
    a_q5: float = 0.0
    b_q5: float = 0.0
    c_q5: float = 0.0
    variables: str = "w"
    dissipation: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown scheme family {self.family!r}")
        if self.variables not in ("w", "z"):
            raise InvalidParameterError("reconstruction variables must be 'w' or 'z'")

    @property
    def needs_hessian(self) -> bool:
        return self.kappa3 != 0.0 or self.theta3 != 0.0 or self.a_q5 != 0.0 \
            or self.b_q5 != 0.0 or self.c_q5 != 0.0

    def with_dissipation(self, on: bool) -> "SchemeConfig":
        return replace(self, dissipation=bool(on))


def _presets() -> dict[str, SchemeConfig]:
    k = 0.5
    third = 1.0 / 3.0
    out = {
        "fromm": SchemeConfig("fromm", "SR2", 2, kappa=0.0, kappa3=0.0),
        "yh": SchemeConfig("yh", "SR2", 2, kappa=third, kappa3=-2.0 / 3.0),
    }
    for fam in ("FSR", "CFSR"):
        low = fam.lower()
        out[f"{low}3"] = SchemeConfig(f"{low}3", fam, 3, kappa=k, kappa3=0.0)
        out[f"{low}4"] = SchemeConfig(f"{low}4", fam, 4, kappa=k, kappa3=k - 1.0)
        out[f"{low}5"] = SchemeConfig(f"{low}5", fam, 5, kappa=k, kappa3=k - 1.0, theta3=-8.0 / 15.0)
    q5 = dict(a_q5=2.0 / 15.0, b_q5=16.0 / 45.0, c_q5=4.0 / 5.0)
    out["qfsr3"] = SchemeConfig("qfsr3", "QFSR", 3, kappa=third, kappa3=0.0)
    out["qfsr4"] = SchemeConfig("qfsr4", "QFSR", 4, kappa=third, kappa3=third - 1.0)
    out["qfsr5"] = SchemeConfig("qfsr5", "QFSR", 5, kappa=third, kappa3=third - 1.0, **q5)
    out["qfsr5z"] = SchemeConfig("qfsr5z", "QFSR", 5, kappa=third, kappa3=third - 1.0,
                                 variables="z", **q5)
    return out


PRESETS = _presets()
SCHEME_NAMES = tuple(PRESETS)


def get_scheme(name: str, dissipation: bool = True) -> SchemeConfig:
    try:
        cfg = PRESETS[name.lower()]
    except KeyError:
        raise InvalidParameterError(
            f"unknown scheme {name!r}; valid names: {', '.join(SCHEME_NAMES)}") from None
    return cfg.with_dissipation(dissipation)


# ---------------------------------------------------------------------------


class DirectionalOps(NamedTuple):
    """Derivatives along d = x_m - x_self.

    first      d . grad q_self
    cross      d . grad q_other (the neighbour's gradient, our direction)
    second     d^T H_self d
    third      (cross - first) / 2 - second
    """

    first: np.ndarray
    cross: np.ndarray
    second: np.ndarray
    third: np.ndarray


def _along(d, g):
    out = d[:, :1] * g[:, 0]
    for a in range(1, d.shape[1]):
        out = out + d[:, a:a + 1] * g[:, a]
    return out


def directional_ops(d, grad_self, grad_other, hess_self=None) -> DirectionalOps:
    first = _along(d, grad_self)
    cross = _along(d, grad_other)
    if hess_self is None:
        second = np.zeros_like(first)
        third = second
    else:
        second = _along(d, np.stack([_along(d, hess_self[:, a]) for a in range(d.shape[1])], axis=1))
        third = 0.5 * (cross - first) - second
    return DirectionalOps(first, cross, second, third)


def kappa_blend(q_self, q_other, ops: DirectionalOps, k, k3):
    """k (q_s + q_o)/2 + (1 - k)(q_s + d.grad q_s) + k3 * third."""
    out = k * 0.5 * (q_self + q_other) + (1.0 - k) * (q_self + ops.first)
    if k3 != 0.0:
        out = out + k3 * ops.third
    return out


def reconstruct_solution(qj, qk, ops_j: DirectionalOps, ops_k: DirectionalOps, config: SchemeConfig):
    """Left/right states at the edge midpoint from the extended kappa scheme."""
    qL = kappa_blend(qj, qk, ops_j, config.kappa, config.kappa3)
    qR = kappa_blend(qk, qj, ops_k, config.kappa, config.kappa3)
    return qL, qR


def _check_states(model, q, variables, side):
    if not getattr(model, "is_euler", False):
        return
    if variables == "z":
        z1 = q[:, 0]
        pres = z1 * q[:, -1] - 0.5 * np.sum(q[:, 1:-1] ** 2, axis=1)
        ok = (z1 > 0) & (pres > 0)
    else:
        ok = (q[:, 0] > 0) & (q[:, -1] > 0)
    if not np.all(ok):
        e = int(np.flatnonzero(~ok)[0])
        raise InadmissibleStateError(f"reconstructed {side} state inadmissible at edge {e}", edge=e)


def flux_pair_sr2(model, qL, qR, nhat, config: SchemeConfig):
    _check_states(model, qL, config.variables, "left")
    _check_states(model, qR, config.variables, "right")
    var = config.variables
    return model.directional_flux(qL, nhat, var), model.directional_flux(qR, nhat, var)


def flux_pair_direct(fj, fk, fops_j: DirectionalOps, fops_k: DirectionalOps, config: SchemeConfig):
    """Direct flux reconstruction from nodal fluxes and their LSQ derivatives."""
    fL = kappa_blend(fj, fk, fops_j, config.theta, config.theta3)
    fR = kappa_blend(fk, fj, fops_k, config.theta, config.theta3)
    return fL, fR


def chain_rule_ops(model, q_self, q_other, nhat, ops: DirectionalOps, variables, second_order):
    """Flux derivatives along d from solution derivatives by the chain rule."""
    first = model.jacobian_apply(q_self, ops.first, nhat, variables)
    cross = model.jacobian_apply(q_other, ops.cross, nhat, variables)
    if second_order:
        second = (model.hessian_apply(q_self, ops.first, ops.first, nhat, variables)
                  + model.jacobian_apply(q_self, ops.second, nhat, variables))
        third = 0.5 * (cross - first) - second
    else:
        second = np.zeros_like(first)
        third = second
    return DirectionalOps(first, cross, second, third)


def flux_pair_chain(model, qj, qk, nhat, ops_j, ops_k, config: SchemeConfig):
    var = config.variables
    second = config.theta3 != 0.0
    fj = model.directional_flux(qj, nhat, var)
    fk = model.directional_flux(qk, nhat, var)
    fops_j = chain_rule_ops(model, qj, qk, nhat, ops_j, var, second)
    fops_k = chain_rule_ops(model, qk, qj, nhat, ops_k, var, second)
    return flux_pair_direct(fj, fk, fops_j, fops_k, config)


def _quadratic_side(model, q, dq, nhat, ops: DirectionalOps, config: SchemeConfig):
    var = config.variables
    f = model.directional_flux(q, nhat, var)
    lin = dq
    if config.a_q5 != 0.0:
        lin = lin + config.a_q5 * ops.third
    quad = model.hessian_apply(q, dq, dq, nhat, var)
    if config.b_q5 != 0.0:
        quad = quad + config.b_q5 * model.hessian_apply(q, ops.second, ops.second, nhat, var)
    if config.c_q5 != 0.0:
        quad = quad + config.c_q5 * model.hessian_apply(q, ops.first, ops.third, nhat, var)
    return f + model.jacobian_apply(q, lin, nhat, var) + 0.5 * config.theta2 * quad


def flux_pair_quadratic(model, qj, qk, qL, qR, nhat, ops_j, ops_k, config: SchemeConfig):
    fL = _quadratic_side(model, qj, qL - qj, nhat, ops_j, config)
    fR = _quadratic_side(model, qk, qR - qk, nhat, ops_k, config)
    return fL, fR
