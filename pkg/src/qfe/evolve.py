"""Time-ordered propagation and accumulation of parameter generators.

Hamiltonian callables are vectorized: given an array of times of shape
``(n,)`` they return a stack ``(n, d, d)``; given a scalar they return a
single ``(d, d)`` matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .linalg import check_hermitian, check_unitary, dagger, expm_i, max_norm

OperatorFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_STEPS_PER_UNIT = 4096
GENERATOR_HERMITIAN_TOL = 1e-10


def sample(fn: OperatorFn, t, dim: int) -> np.ndarray:
    """Evaluate an operator callable on ``t``, always returning ``t.shape + (dim, dim)``."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(fn(t), dtype=complex)
    return np.broadcast_to(out, t.shape + (dim, dim))


@dataclass(frozen=True)
class TimeDepOperator:
    """A Hamiltonian family ``t -> H(t)`` with per-parameter gradients.

    ``counterdiabatic`` optionally carries closed-form counter-diabatic terms
    keyed by parameter name; the control module prefers them to the numeric
    construction (which cannot cope with isolated degeneracies).
    """

    hamiltonian: OperatorFn
    gradients: Mapping[str, OperatorFn]
    dim: int = 3
    counterdiabatic: Mapping[str, OperatorFn] = field(default_factory=dict)

    def __post_init__(self):
        if not self.gradients:
            raise ValueError("at least one parameter gradient is required")
        if len(set(self.gradients)) != len(self.gradients):
            raise ValueError("parameter names must be unique")

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(self.gradients)

    def H(self, t) -> np.ndarray:
        return sample(self.hamiltonian, t, self.dim)

    def dH(self, name: str, t) -> np.ndarray:
        return sample(self.gradients[name], t, self.dim)

    def with_hamiltonian(self, hamiltonian: OperatorFn) -> "TimeDepOperator":
        """Same gradients, different propagating Hamiltonian."""
        return TimeDepOperator(hamiltonian, dict(self.gradients), self.dim, dict(self.counterdiabatic))


@dataclass(frozen=True)
class PropagationGrid:
    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)) or self.t1 < self.t0:
            raise ValueError(f"invalid time interval [{self.t0}, {self.t1}]")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")

    @classmethod
    def uniform(cls, t0: float, t1: float, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> "PropagationGrid":
        steps = max(2, math.ceil((t1 - t0) * steps_per_unit))
        return cls(t0, t1, steps + (steps % 2))

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    def nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def midpoints(self) -> np.ndarray:
        return self.t0 + self.dt * (np.arange(self.steps) + 0.5)

    def refined(self, factor: int = 2) -> "PropagationGrid":
        return PropagationGrid(self.t0, self.t1, self.steps * factor)


@dataclass(frozen=True)
class GeneratorSet:
    """Hermitian generators for each estimated parameter over ``[t0, t0 + horizon]``."""

    horizon: float
    ops: Mapping[str, np.ndarray]

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(self.ops)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.ops[name]

    def matrices(self) -> list[np.ndarray]:
        return [self.ops[k] for k in self.ops]


def _step_unitaries(op: TimeDepOperator, grid: PropagationGrid) -> np.ndarray:
    h_mid = check_hermitian(op.H(grid.midpoints()), where="H(t) sample")
    return expm_i(h_mid, grid.dt)


def _cumulative(steps: np.ndarray) -> np.ndarray:
    n, d = steps.shape[0], steps.shape[-1]
    out = np.empty((n + 1, d, d), dtype=complex)
    u = np.eye(d, dtype=complex)
    out[0] = u
    for k in range(n):
        u = steps[k] @ u
        out[k + 1] = u
    return out


def propagate(op: TimeDepOperator, grid: PropagationGrid) -> np.ndarray:
    """``U(t0 -> t1)`` as an ordered product of exponential-midpoint steps."""
    u = np.eye(op.dim, dtype=complex)
    for step in _step_unitaries(op, grid):
        u = step @ u
    return check_unitary(u)


def propagators(op: TimeDepOperator, grid: PropagationGrid) -> np.ndarray:
    """``U(t0 -> t_k)`` at every grid node, shape ``(steps + 1, d, d)``."""
    us = _cumulative(_step_unitaries(op, grid))
    check_unitary(us[-1])
    return us


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def generators(op: TimeDepOperator, grid: PropagationGrid) -> GeneratorSet:
    """``int U^dag(t0 -> t) dH_m(t) U(t0 -> t) dt`` for every parameter.

    Composite Simpson over the propagation nodes; odd step counts are
    doubled internally so the rule applies.
    """
    if grid.steps % 2:
        grid = grid.refined(2)
    us = propagators(op, grid)
    nodes = grid.nodes()
    weights = _simpson_weights(grid.steps, grid.dt)
    ops = {}
    for name in op.params:
        g = check_hermitian(op.dH(name, nodes), where=f"gradient {name!r}")
        integrand = dagger(us) @ g @ us
        acc = np.einsum("k,kij->ij", weights, integrand)
        check_hermitian(acc, GENERATOR_HERMITIAN_TOL * max(1.0, max_norm(acc)), where=f"generator {name!r}")
        ops[name] = acc
    return GeneratorSet(grid.t1 - grid.t0, ops)


@dataclass(frozen=True)
class ConvergenceProbe:
    order: float
    errors: tuple[float, float]
    saturated: bool


def convergence_probe(op: TimeDepOperator, T: float, base_steps: int = 256, floor: float = 1e-11) -> ConvergenceProbe:
    """Observed order of the propagation+quadrature scheme on ``[0, T]``.

    Uses three grids (n, 2n, 4n): ``order = log2(|X_n - X_2n| / |X_2n - X_4n|)``
    where ``X`` stacks the final propagator with every generator. When the
    finer difference is at rounding level the probe reports ``saturated``.
    """
    if base_steps < 64:
        raise ValueError("base_steps must be at least 64")
    base_steps += base_steps % 2

    def state(steps):
        grid = PropagationGrid(0.0, T, steps)
        gens = generators(op, grid)
        return np.stack([propagate(op, grid), *gens.matrices()])

    x1, x2, x4 = (state(base_steps * f) for f in (1, 2, 4))
    e1, e2 = max_norm(x1 - x2), max_norm(x2 - x4)
    scale = max(1.0, max_norm(x4))
    if e2 <= floor * scale:
        return ConvergenceProbe(float("nan"), (e1, e2), True)
    return ConvergenceProbe(math.log2(e1 / e2), (e1, e2), False)
