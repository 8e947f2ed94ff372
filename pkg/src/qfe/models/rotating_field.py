"""Spin-1 particle in a uniformly rotating magnetic field.

``H(t) = -B (cos(wt) Jx + sin(wt) Jz)`` with unknown amplitude ``B`` and
rotation frequency ``w`` (called ``omega`` in code). Units: hbar = 1 and a
unit magnetic moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..control import ControlSpec, control_hamiltonian, control_term
from ..errors import RegimeError
from ..evolve import DEFAULT_STEPS_PER_UNIT, GeneratorSet, PropagationGrid, TimeDepOperator, generators
from ..linalg import expm_i
from ..qfi import PrecisionReport, precision_report
from ..spin import J, plus_minus_state, rf_uncontrolled_optimal_state, tilted_ops

PARAMS = ("B", "omega")
EXPANSION_LIMIT = 0.1


@dataclass(frozen=True)
class RotatingFieldParams:
    B: float
    omega: float
    T: float

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError(f"B must be positive, got {self.B!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not math.isfinite(self.omega):
            raise ValueError(f"omega must be finite, got {self.omega!r}")

    @property
    def W(self) -> float:
        """Effective precession frequency sqrt(B^2 + omega^2)."""
        return math.hypot(self.B, self.omega)


@dataclass(frozen=True)
class ControlEstimates:
    B_c: float
    omega_c: float

    def __post_init__(self):
        if not self.B_c > 0:
            raise ValueError(f"B_c must be positive, got {self.B_c!r}")

    @classmethod
    def offset(cls, p: RotatingFieldParams, dB: float, domega: float) -> "ControlEstimates":
        return cls(p.B + dB, p.omega + domega)


def _col(t):
    return np.asarray(t, dtype=float)[..., None, None]


def rf_hamiltonian(p: RotatingFieldParams) -> TimeDepOperator:
    B, w = p.B, p.omega
    jx, jy, jz = J.jx, J.jy, J.jz

    def h(t):
        t = _col(t)
        return -B * (np.cos(w * t) * jx + np.sin(w * t) * jz)

    def d_b(t):
        t = _col(t)
        return -(np.cos(w * t) * jx + np.sin(w * t) * jz)

    def d_omega(t):
        t = _col(t)
        return -B * t * (-np.sin(w * t) * jx + np.cos(w * t) * jz)

    # both gradients rotate rigidly about y at rate w
    def cd(t):
        return np.broadcast_to(-w * jy, np.shape(t) + (3, 3))

    return TimeDepOperator(h, {"B": d_b, "omega": d_omega}, 3, {"B": cd, "omega": cd})


def rf_closed_propagator(p: RotatingFieldParams, t: float) -> np.ndarray:
    """``U(0 -> t) = exp(i w t Jy) exp[i (B Jx - w Jy) t]``."""
    return expm_i(J.jy, -p.omega * t) @ expm_i(p.B * J.jx - p.omega * J.jy, -t)


def _frame(p: RotatingFieldParams):
    # tilted axis along (B, -omega, 0)/W, the axis of the rotating-frame Hamiltonian
    theta = -math.atan2(p.omega, p.B)
    jn, jperp = tilted_ops(theta)
    return jn, jperp


def rf_closed_generators(p: RotatingFieldParams) -> GeneratorSet:
    """Exact uncontrolled generators over ``[0, T]``.

    With ``c = B/W``, ``s = omega/W`` and ``phi = W T``::

        H_B     = -c T J_n - s sin(phi)/W J_perp - s (1 - cos phi)/W Jz
        H_omega = -B [T sin(phi)/W - (1 - cos phi)/W^2] Jz
                  + B [sin(phi)/W^2 - T cos(phi)/W] J_perp
    """
    B, T, W = p.B, p.T, p.W
    c, s = B / W, p.omega / W
    phi = W * T
    jn, jperp = _frame(p)
    h_b = -c * T * jn - s * math.sin(phi) / W * jperp - s * (1 - math.cos(phi)) / W * J.jz
    h_w = -B * (T * math.sin(phi) / W - (1 - math.cos(phi)) / W**2) * J.jz + B * (
        math.sin(phi) / W**2 - T * math.cos(phi) / W
    ) * jperp
    return GeneratorSet(T, {"B": h_b, "omega": h_w})


def rf_asymptotic_generators(p: RotatingFieldParams) -> GeneratorSet:
    """Leading large-T terms of :func:`rf_closed_generators`."""
    T, W = p.T, p.W
    jn, jperp = _frame(p)
    amp = -p.B * T / W
    return GeneratorSet(
        T,
        {"B": amp * jn, "omega": amp * (math.cos(W * T) * jperp + math.sin(W * T) * J.jz)},
    )


def rf_uncontrolled_precision(p: RotatingFieldParams) -> PrecisionReport:
    psi = rf_uncontrolled_optimal_state(p.B, p.omega, p.T)
    return precision_report(psi, rf_closed_generators(p))


def optimal_control_spec() -> ControlSpec:
    # B and omega share their counter-diabatic term, so it is applied once
    return ControlSpec({"B": 1.0, "omega": 1.0}, shared=True)


def rf_optimal_total(p: RotatingFieldParams) -> TimeDepOperator:
    """Target plus optimal control; the total reduces to ``-omega Jy``."""
    return control_hamiltonian(rf_hamiltonian(p), optimal_control_spec())


def _grid(p: RotatingFieldParams, steps_per_unit: int) -> PropagationGrid:
    return PropagationGrid.uniform(0.0, p.T, steps_per_unit)


def rf_optimal_generators(p: RotatingFieldParams, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> GeneratorSet:
    return generators(rf_optimal_total(p), _grid(p, steps_per_unit))


def rf_optimal_controlled_precision(p: RotatingFieldParams, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> PrecisionReport:
    return precision_report(plus_minus_state(), rf_optimal_generators(p, steps_per_unit))


def rf_practical_total(p: RotatingFieldParams, est: ControlEstimates) -> TimeDepOperator:
    """True Hamiltonian plus the optimal control built from estimates
    ``(B_c, omega_c)``: ``H_c = B_c (cos(w_c t) Jx + sin(w_c t) Jz) - w_c Jy``."""
    target = rf_hamiltonian(p)
    guess = rf_hamiltonian(RotatingFieldParams(est.B_c, est.omega_c, p.T))
    hc = control_term(guess, optimal_control_spec())

    def total(t):
        return target.H(t) + hc(t)

    return target.with_hamiltonian(total)


def rf_practical_generators(
    p: RotatingFieldParams, est: ControlEstimates, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT
) -> GeneratorSet:
    return generators(rf_practical_total(p, est), _grid(p, steps_per_unit))


def rf_practical_precision_numeric(
    p: RotatingFieldParams, est: ControlEstimates, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT
) -> PrecisionReport:
    return precision_report(plus_minus_state(), rf_practical_generators(p, est, steps_per_unit))


# --- small-deviation expansions around exact control -----------------------


def _check_small(dB: float, domega: float) -> None:
    if abs(dB) > EXPANSION_LIMIT or abs(domega) > EXPANSION_LIMIT:
        raise RegimeError(
            f"expansion valid only for |dB|, |domega| <= {EXPANSION_LIMIT}; got dB={dB!r}, domega={domega!r}"
        )


def rf_generator_derivatives(p: RotatingFieldParams) -> dict[str, dict[str, np.ndarray]]:
    """Derivatives of the controlled generators with respect to the control
    estimates at exact control, keyed ``[generator][derivative]`` with
    derivative names ``dw, dB, dw2, dB2, dBdw``."""
    B, T = p.B, p.T
    jx, jy, jz = J.jx, J.jy, J.jz
    zero = np.zeros((3, 3), dtype=complex)
    return {
        "omega": {
            "dw": -B * T**3 / 3 * jx,
            "dB": -B * T**3 / 3 * jy,
            "dw2": 2 * B**2 * T**5 / 15 * jy + B * T**4 / 4 * jz,
            "dB2": B * T**4 / 4 * jz,
            "dBdw": -(B**2) * T**5 / 30 * jx,
        },
        "B": {
            "dw": B * T**3 / 6 * jy + T**2 / 2 * jz,
            "dB": zero,
            "dw2": (B**2 * T**5 / 20 + T**3 / 3) * jx,
            "dB2": zero,
            "dBdw": T**3 / 3 * jy,
        },
    }


def rf_expansion_generators(p: RotatingFieldParams, dB: float, domega: float) -> GeneratorSet:
    """Second-order Taylor expansion of the practical-control generators in
    the estimate errors ``dB = B_c - B``, ``domega = omega_c - omega``."""
    _check_small(dB, domega)
    B, T = p.B, p.T
    base = {"B": -T * J.jx, "omega": -B * T**2 / 2 * J.jz}
    d = rf_generator_derivatives(p)
    ops = {}
    for name in PARAMS:
        dn = d[name]
        ops[name] = (
            base[name]
            + dn["dw"] * domega
            + dn["dB"] * dB
            + 0.5 * dn["dw2"] * domega**2
            + 0.5 * dn["dB2"] * dB**2
            + dn["dBdw"] * dB * domega
        )
    return GeneratorSet(T, ops)


def rf_expansion_qfi(p: RotatingFieldParams, dB: float, domega: float) -> np.ndarray:
    """Closed-form QFI elements to second order, ordered (B, omega)."""
    _check_small(dB, domega)
    B, T = p.B, p.T
    f_bb = 4 * T**2 * (1 - (B**2 * T**3 / 20 + T**2 / 12) * domega**2)
    f_ww = B**2 * T**4 * (1 - (T**2 * domega**2 / 2 + T**2 * dB**2 / 18))
    f_wb = -B * T**4 * domega + 4 * B * T**4 * dB / 3 + 2 * B**2 * T**5 * dB * domega / 15
    return np.array([[f_bb, f_wb], [f_wb, f_ww]])


def _den_omega(T, dB, dw):
    return 1 - (3 * T**2 * dw**2 / 4 + T**2 * dB**2 / 2) + 2 * T**2 * dB * dw / 3


def _den_b(B, T, dB, dw):
    return 1 - (B**2 * T**4 / 20 + T**2 / 3) * dw**2 - 4 * T**2 * dB**2 / 9 + 2 * T**2 * dB * dw / 3


def rf_expansion_variances(p: RotatingFieldParams, dB: float, domega: float) -> dict[str, float]:
    """Approximate variances under imperfect control, keyed by parameter."""
    _check_small(dB, domega)
    B, T = p.B, p.T
    return {
        "B": 1.0 / (4 * T**2 * _den_b(B, T, dB, domega)),
        "omega": 1.0 / (B**2 * T**4 * _den_omega(T, dB, domega)),
    }


# --- two-stage feedback ----------------------------------------------------


@dataclass(frozen=True)
class FeedbackResult:
    var_omega: float
    var_B: float
    mode: str
    stderr_omega: float = 0.0
    stderr_B: float = 0.0
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "samples": self.samples,
            "stderr_B": self.stderr_B,
            "stderr_omega": self.stderr_omega,
            "var_B": self.var_B,
            "var_omega": self.var_omega,
        }


def first_stage_variance(p: RotatingFieldParams, N: int) -> float:
    """Variance of each uncontrolled first-stage estimate after ``N`` rounds."""
    return (p.B**2 + p.omega**2) / (4 * N * p.B**2 * p.T**2)


def feedback_threshold(p: RotatingFieldParams) -> float:
    """Round count above which feedback reaches the exact-control optimum."""
    return (25 + p.B**2 * p.T**2) * (p.B**2 + p.omega**2) / (80 * p.B**2)


_CHUNK = 8192


def gaussian_pairs(seed: int, n: int) -> np.ndarray:
    """``n`` independent standard-normal pairs from a counter-based stream.

    Sample ``i`` is drawn from the Philox stream keyed by ``seed`` with
    block counter ``i // CHUNK``, so any subset of blocks can be generated
    independently and in any order.
    """
    out = np.empty((n, 2))
    for block in range((n + _CHUNK - 1) // _CHUNK):
        lo, hi = block * _CHUNK, min(n, (block + 1) * _CHUNK)
        bitgen = np.random.Philox(key=seed, counter=[0, 0, 0, block])
        out[lo:hi] = np.random.Generator(bitgen).standard_normal((hi - lo, 2))
    return out


def rf_feedback_precision(
    p: RotatingFieldParams,
    N: int,
    mode: Literal["analytic", "monte_carlo"] = "analytic",
    samples: int = 100_000,
    seed: int = 0,
) -> FeedbackResult:
    """Final variances of the two-stage scheme (N uncontrolled rounds, then
    N rounds with control built from the first-stage estimates)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N!r}")
    B, w, T = p.B, p.omega, p.T
    if mode == "analytic":
        den_w = 1 - 5 * (B**2 + w**2) / (16 * N * B**2)
        den_b = 1 - (7 / 9 + B**2 * T**2 / 20) * (B**2 + w**2) / (4 * N * B**2)
        if den_w <= 0 or den_b <= 0:
            raise RegimeError(f"N={N} too small for the feedback expansion (denominators {den_w:.3g}, {den_b:.3g})")
        return FeedbackResult(1 / (B**2 * T**4 * den_w), 1 / (4 * T**2 * den_b), mode)
    if mode != "monte_carlo":
        raise ValueError(f"unknown feedback mode {mode!r}")
    if samples < 1000:
        raise ValueError("monte_carlo mode needs at least 1000 samples")
    sigma = math.sqrt(first_stage_variance(p, N))
    z = gaussian_pairs(seed, samples) * sigma
    dw, db = z[:, 0], z[:, 1]
    dens = {"omega": _den_omega(T, db, dw), "B": _den_b(B, T, db, dw)}
    pref = {"omega": B**2 * T**4, "B": 4 * T**2}
    var, err = {}, {}
    for k, d in dens.items():
        mean = float(np.mean(d))
        if mean <= 0:
            raise RegimeError(f"N={N} too small: mean denominator for {k} is {mean:.3g}")
        se_mean = float(np.std(d, ddof=1)) / math.sqrt(samples)
        var[k] = 1 / (pref[k] * mean)
        err[k] = var[k] * se_mean / mean
    return FeedbackResult(var["omega"], var["B"], mode, err["omega"], err["B"], samples)
