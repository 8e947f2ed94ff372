"""Three-level Landau-Zener sweep ``H(t) = xi*Gamma*t Jz + Gamma Jx``.

Both the splitting ``Gamma`` and the sweep proportionality factor ``xi``
(sweep speed ``nu = xi*Gamma``) are estimated. The control cancels ``H``
and keeps a weight ``gamma`` of the counter-diabatic term for ``Gamma``;
``gamma = 1`` is the single-parameter optimum for ``Gamma`` and
``gamma = 0`` the one for ``xi``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.integrate import quad

from ..control import ControlSpec, control_hamiltonian
from ..errors import ConstraintViolation, UnbracketedMinimum
from ..evolve import DEFAULT_STEPS_PER_UNIT, GeneratorSet, PropagationGrid, TimeDepOperator, generators
from ..qfi import PrecisionReport, precision_report, saturation_ok
from ..spin import J, plus_minus_state

Source = Literal["closed_form", "propagated"]
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class LZParams:
    Gamma: float
    xi: float
    T: float

    def __post_init__(self):
        if not self.Gamma > 0:
            raise ValueError(f"Gamma must be positive, got {self.Gamma!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not math.isfinite(self.xi):
            raise ValueError(f"xi must be finite, got {self.xi!r}")


def _col(t):
    return np.asarray(t, dtype=float)[..., None, None]


def lz_hamiltonian(p: LZParams) -> TimeDepOperator:
    G, xi = p.Gamma, p.xi
    jx, jy, jz = J.jx, J.jy, J.jz

    def h(t):
        return xi * G * _col(t) * jz + G * jx

    def d_gamma(t):
        return xi * _col(t) * jz + jx

    def d_xi(t):
        return G * _col(t) * jz

    # eigenbasis of d_gamma rotates about y by arctan(xi t); d_xi has a fixed eigenbasis
    def cd_gamma(t):
        return -(xi / (1 + (xi * _col(t)) ** 2)) * jy

    def cd_xi(t):
        return np.zeros(np.shape(t) + (3, 3), dtype=complex)

    return TimeDepOperator(h, {"Gamma": d_gamma, "xi": d_xi}, 3, {"Gamma": cd_gamma, "xi": cd_xi})


def lz_total_hamiltonian(p: LZParams, gamma: float) -> TimeDepOperator:
    """Target plus variational control: the total is ``gamma`` times the
    counter-diabatic term of ``Gamma``, ``-gamma xi/(1 + xi^2 t^2) Jy``."""
    return control_hamiltonian(lz_hamiltonian(p), ControlSpec({"Gamma": gamma, "xi": 0.0}))


def _quad(f, T):
    val, _ = quad(f, 0.0, T, epsabs=QUAD_TOL, epsrel=0.0, limit=200)
    return val


def lz_coefficients(p: LZParams, gamma: float) -> tuple[float, float, float, float]:
    """The four integrals ``(c_x, c_z, d_x, d_z)`` with sweep angle
    ``theta(t) = arctan(xi t)``:

        c_x = int sqrt(1+xi^2 t^2) cos((1-gamma) theta),  c_z: same with sin
        d_x = int Gamma t cos(gamma theta),                d_z: same with sin
    """
    G, xi, T = p.Gamma, p.xi, p.T

    def theta(t):
        return math.atan(xi * t)

    def amp(t):
        return math.sqrt(1 + (xi * t) ** 2)

    cx = _quad(lambda t: amp(t) * math.cos((1 - gamma) * theta(t)), T)
    cz = _quad(lambda t: amp(t) * math.sin((1 - gamma) * theta(t)), T)
    dx = _quad(lambda t: G * t * math.cos(gamma * theta(t)), T)
    dz = _quad(lambda t: G * t * math.sin(gamma * theta(t)), T)
    return cx, cz, dx, dz


def lz_generators_quadrature(p: LZParams, gamma: float) -> GeneratorSet:
    """Generators from the closed integral forms:
    ``H_Gamma = c_x Jx + c_z Jz`` and ``H_xi = d_x Jx + d_z Jz``."""
    cx, cz, dx, dz = lz_coefficients(p, gamma)
    return GeneratorSet(p.T, {"Gamma": cx * J.jx + cz * J.jz, "xi": dx * J.jx + dz * J.jz})


def lz_generators_propagated(p: LZParams, gamma: float, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> GeneratorSet:
    """Generators by explicit propagation under the controlled Hamiltonian."""
    return generators(lz_total_hamiltonian(p, gamma), PropagationGrid.uniform(0.0, p.T, steps_per_unit))


def lz_generators(p: LZParams, gamma: float, source: Source = "closed_form", steps_per_unit: int = DEFAULT_STEPS_PER_UNIT):
    if source == "closed_form":
        return lz_generators_quadrature(p, gamma)
    if source == "propagated":
        return lz_generators_propagated(p, gamma, steps_per_unit)
    raise ValueError(f"unknown generator source {source!r}")


def lz_precision(
    p: LZParams,
    gamma: float,
    G: np.ndarray | None = None,
    source: Source = "closed_form",
    steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
) -> PrecisionReport:
    return precision_report(plus_minus_state(), lz_generators(p, gamma, source, steps_per_unit), G)


@dataclass(frozen=True)
class GammaScan:
    grid: np.ndarray
    costs: np.ndarray
    residuals: np.ndarray
    qfis: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("gamma grid must be strictly ascending")

    @property
    def argmin(self) -> tuple[float, float]:
        i = int(np.argmin(self.costs))
        return float(self.grid[i]), float(self.costs[i])

    def rows(self):
        for g, c, f, r in zip(self.grid, self.costs, self.qfis, self.residuals):
            yield float(g), float(c), float(f[0, 0]), float(f[1, 1]), float(f[0, 1]), float(r)


def scan_workers() -> int:
    try:
        return max(1, int(os.environ.get("QFE_THREADS", "1")))
    except ValueError:
        return 1


def lz_scan(
    p: LZParams,
    grid: Sequence[float],
    G: np.ndarray | None = None,
    source: Source = "closed_form",
    steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
) -> GammaScan:
    grid = np.asarray(grid, dtype=float)

    def point(g):
        return lz_precision(p, float(g), G, source, steps_per_unit)

    with ThreadPoolExecutor(max_workers=scan_workers()) as pool:
        reports = list(pool.map(point, grid))
    return GammaScan(
        grid=grid,
        costs=np.array([r.cost for r in reports]),
        residuals=np.array([r.saturation_residual for r in reports]),
        qfis=np.array([r.qfi for r in reports]),
    )


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a: float, b: float, tol: float) -> float:
    """Minimize a unimodal ``f`` on ``[a, b]`` until the interval is ``<= tol``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class GammaOptimum:
    gamma: float
    cost: float
    scan: GammaScan
    report: PrecisionReport


def lz_optimize_gamma(
    p: LZParams,
    G: np.ndarray | None = None,
    bracket: tuple[float, float] = (0.0, 3.0),
    tol: float = 1e-6,
    points: int = 301,
    source: Source = "closed_form",
    steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
) -> GammaOptimum:
    """Global grid scan over ``bracket`` followed by golden-section refinement.

    The saturation constraint is checked at the optimum rather than carried
    as a Lagrange term: for the (|+1> + |-1>)/sqrt(2) probe it vanishes
    identically in ``gamma``.
    """
    lo, hi = bracket
    if not lo < hi:
        raise ValueError(f"empty bracket {bracket!r}")
    if tol < 1e-8:
        raise ValueError("tol must be >= 1e-8")
    if points < 3:
        raise ValueError("need at least 3 scan points")
    scan = lz_scan(p, np.linspace(lo, hi, points), G, source, steps_per_unit)
    i = int(np.argmin(scan.costs))
    if i in (0, points - 1):
        raise UnbracketedMinimum(float(scan.grid[i]), float(scan.costs[i]))

    def cost(g):
        return lz_precision(p, g, G, source, steps_per_unit).cost

    g_star = golden_section(cost, float(scan.grid[i - 1]), float(scan.grid[i + 1]), tol)
    report = lz_precision(p, g_star, G, source, steps_per_unit)
    gens = lz_generators(p, g_star, source, steps_per_unit)
    if not saturation_ok(plus_minus_state(), gens):
        raise ConstraintViolation(f"saturation residual {report.saturation_residual:.3e} at gamma={g_star!r}")
    return GammaOptimum(g_star, report.cost, scan, report)
