"""Control Hamiltonians built from the eigenbases of parameter gradients.

The counter-diabatic term of a gradient ``A(t)`` with instantaneous
eigenpairs ``(a_k, |k>)`` is

    K(t) = i sum_{k != l} |k><k| dA/dt |l><l| / (a_l - a_k),

i.e. ``i sum_k |d_t k><k|`` in the parallel-transport gauge. The diagonal
freedom left over is exactly the ``f_k(t)`` gauge functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateSpectrumError
from .evolve import OperatorFn, TimeDepOperator, sample
from .linalg import check_hermitian, dagger, eig_hermitian, max_norm

GAP_TOL = 1e-8
CD_HERMITIAN_TOL = 1e-9


def _default_probe(t: float) -> float:
    return 1e-6 * max(1.0, abs(t))


def counterdiabatic_term(grad: OperatorFn, t: float, dt_probe: float | None = None, dim: int = 3) -> np.ndarray:
    """Counter-diabatic operator of ``grad`` at time ``t`` (gap formula,
    central-difference time derivative)."""
    t = float(t)
    h = _default_probe(t) if dt_probe is None else dt_probe
    a = check_hermitian(sample(grad, t, dim))
    a_dot = (sample(grad, t + h, dim) - sample(grad, t - h, dim)) / (2.0 * h)
    evals, v = eig_hermitian(a)
    gaps = evals[None, :] - evals[:, None]  # a_l - a_k
    off = ~np.eye(dim, dtype=bool)
    min_gap = float(np.min(np.abs(gaps[off])))
    if min_gap < GAP_TOL:
        raise DegenerateSpectrumError(t, min_gap)
    m = dagger(v) @ a_dot @ v
    k_eig = np.zeros((dim, dim), dtype=complex)
    k_eig[off] = 1j * m[off] / gaps[off]
    k = v @ k_eig @ dagger(v)
    return check_hermitian(k, CD_HERMITIAN_TOL * max(1.0, max_norm(k)), where=f"counter-diabatic term at t={t}")


def counterdiabatic_fn(target: TimeDepOperator, name: str) -> OperatorFn:
    """Vectorized counter-diabatic term for parameter ``name``: the model's
    closed form when it provides one, the numeric construction otherwise."""
    if name in target.counterdiabatic:
        return target.counterdiabatic[name]
    grad = target.gradients[name]

    def numeric(t):
        t = np.asarray(t, dtype=float)
        flat = [counterdiabatic_term(grad, ti, dim=target.dim) for ti in t.ravel()]
        return np.asarray(flat).reshape(t.shape + (target.dim, target.dim))

    return numeric


@dataclass(frozen=True)
class ControlSpec:
    """Variational control weights and optional gauge functions.

    ``shared=True`` selects the single-term construction used when every
    parameter has the same counter-diabatic operator: the common term is
    applied once, weighted by the (necessarily equal) gammas. Otherwise
    the weighted sum over parameters is used.

    ``gauge_fns`` are functions ``f_k(t)`` for the eigenbasis of the
    gradient named by ``gauge_param`` (default: first parameter), ordered
    by ascending eigenvalue.
    """

    gammas: Mapping[str, float]
    gauge_fns: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = None
    gauge_param: str | None = None
    shared: bool = False

    def __post_init__(self):
        for k, g in self.gammas.items():
            if not math.isfinite(g):
                raise ValueError(f"gamma for {k!r} is not finite: {g!r}")
        if self.shared and len(set(self.gammas.values())) > 1:
            raise ValueError("shared control needs identical weights for every parameter")


def _check_spec(target: TimeDepOperator, spec: ControlSpec) -> None:
    if set(spec.gammas) != set(target.params):
        raise ValueError(f"control weights {sorted(spec.gammas)} do not match parameters {sorted(target.params)}")
    if spec.gauge_param is not None and spec.gauge_param not in target.params:
        raise ValueError(f"unknown gauge parameter {spec.gauge_param!r}")
    if spec.gauge_fns is not None and len(spec.gauge_fns) != target.dim:
        raise ValueError(f"need {target.dim} gauge functions, got {len(spec.gauge_fns)}")


def _gauge_term(target: TimeDepOperator, spec: ControlSpec) -> OperatorFn:
    name = spec.gauge_param or target.params[0]
    fns = spec.gauge_fns

    def term(t):
        t = np.asarray(t, dtype=float)
        _, v = eig_hermitian(target.dH(name, t))
        f = np.stack([np.broadcast_to(np.asarray(fk(t), dtype=float), t.shape) for fk in fns], axis=-1)
        return (v * f[..., None, :]) @ dagger(v)

    return term


def control_hamiltonian(target: TimeDepOperator, spec: ControlSpec) -> TimeDepOperator:
    """Total Hamiltonian ``H + H_c``: the control cancels ``H`` and adds the
    weighted counter-diabatic terms (plus any gauge term).

    The returned operator keeps the target's gradients, which are what the
    generator integral needs.
    """
    _check_spec(target, spec)
    if spec.shared:
        name = target.params[0]
        weighted = [(spec.gammas[name], counterdiabatic_fn(target, name))]
    else:
        weighted = [(spec.gammas[n], counterdiabatic_fn(target, n)) for n in target.params if spec.gammas[n] != 0.0]
    gauge = _gauge_term(target, spec) if spec.gauge_fns is not None else None
    dim = target.dim

    def total(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (dim, dim), dtype=complex)
        for g, k in weighted:
            out = out + g * sample(k, t, dim)
        if gauge is not None:
            out = out + gauge(t)
        return out

    return target.with_hamiltonian(total)


def control_term(target: TimeDepOperator, spec: ControlSpec) -> OperatorFn:
    """The control Hamiltonian ``H_c(t)`` alone (total minus target)."""
    total = control_hamiltonian(target, spec)

    def hc(t):
        return total.H(t) - target.H(t)

    return hc
