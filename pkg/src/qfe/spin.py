"""Spin-1 operators and the probe states used by the worked models.

Basis ordering is (m=+1, 0, -1) throughout, so ``jz = diag(1, 0, -1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import expm_i


@dataclass(frozen=True)
class SpinOps:
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray

    @property
    def dim(self) -> int:
        return self.jz.shape[0]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def spin1_ops() -> SpinOps:
    r = 1.0 / math.sqrt(2.0)
    jx = np.array([[0, r, 0], [r, 0, r], [0, r, 0]], dtype=complex)
    jy = np.array([[0, -1j * r, 0], [1j * r, 0, -1j * r], [0, 1j * r, 0]], dtype=complex)
    jz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    for m in (jx, jy, jz):
        m.setflags(write=False)
    return SpinOps(jx, jy, jz)


J = spin1_ops()


def tilted_ops(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """In-plane pair ``J_n = cos(theta) Jx + sin(theta) Jy`` and its
    perpendicular ``J_nperp = -sin(theta) Jx + cos(theta) Jy``."""
    c, s = math.cos(theta), math.sin(theta)
    return c * J.jx + s * J.jy, -s * J.jx + c * J.jy


def basis_state(m: int) -> np.ndarray:
    """Z-basis state ``|m>`` for m in (+1, 0, -1)."""
    if m not in (1, 0, -1):
        raise ValueError(f"spin-1 projection must be one of 1, 0, -1, got {m}")
    v = np.zeros(3, dtype=complex)
    v[1 - m] = 1.0
    return v


def plus_minus_state() -> np.ndarray:
    """``(|-1> + |+1>)/sqrt(2)`` in the Z basis."""
    return (basis_state(1) + basis_state(-1)) / math.sqrt(2.0)


def rf_uncontrolled_optimal_state(B: float, omega: float, T: float) -> np.ndarray:
    """Probe state for the uncontrolled rotating field,
    ``exp(i theta Jz) exp[i(pi/2 - W T) Jx] |+->`` with ``W = sqrt(B^2 + omega^2)``
    and ``theta = arccos(B/W)``.

    The positive branch of ``theta`` is the one that reaches the asymptotic
    bound; the other branch fails for generic ``T``.
    """
    if not B > 0:
        raise ValueError(f"field amplitude must be positive, got B={B!r}")
    w = math.hypot(B, omega)
    theta = math.acos(B / w)
    rot_x = expm_i(J.jx, -(math.pi / 2 - w * T))
    rot_z = expm_i(J.jz, -theta)
    return rot_z @ rot_x @ plus_minus_state()
