"""Pure-state QFI matrix, saturation residual and Cramer-Rao cost."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DimensionError, NonIdentifiableError
from .evolve import GeneratorSet
from .linalg import commutator, expect, max_norm

COND_LIMIT = 1e12
SATURATION_REL_TOL = 1e-8


def _mats(gens: GeneratorSet | Sequence[np.ndarray]) -> list[np.ndarray]:
    if isinstance(gens, GeneratorSet):
        return gens.matrices()
    return [np.asarray(g) for g in gens]


def qfi_matrix(psi: np.ndarray, gens: GeneratorSet | Sequence[np.ndarray]) -> np.ndarray:
    """QFI matrix of a pure probe state for the given generators.

    ``F_ab = 4 (<{H_a, H_b}>/2 - <H_a><H_b>)``; the result is symmetric by
    construction.
    """
    psi = np.asarray(psi, dtype=complex)
    mats = _mats(gens)
    for m in mats:
        if m.shape != (psi.shape[0], psi.shape[0]):
            raise DimensionError(f"generator {m.shape} incompatible with state of dim {psi.shape[0]}")
    kets = [m @ psi for m in mats]
    means = np.array([np.vdot(psi, k).real for k in kets])
    n = len(mats)
    f = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            # <{A,B}>/2 = Re <A psi | B psi> for Hermitian A, B
            f[a, b] = f[b, a] = 4.0 * (np.vdot(kets[a], kets[b]).real - means[a] * means[b])
    return f


def saturation_residual(psi: np.ndarray, gens: GeneratorSet | Sequence[np.ndarray]) -> float:
    """max over pairs of ``|<psi|[H_a, H_b]|psi>|`` (0 for a single parameter)."""
    mats = _mats(gens)
    res = 0.0
    for a, b in combinations(mats, 2):
        res = max(res, abs(expect(psi, commutator(a, b), hermitian=False)))
    return res


def saturation_ok(psi: np.ndarray, gens: GeneratorSet | Sequence[np.ndarray], rel_tol: float = SATURATION_REL_TOL) -> bool:
    """Pairwise check ``|<[H_a, H_b]>| <= rel_tol * |H_a| |H_b|`` (spectral norms)."""
    mats = _mats(gens)
    for a, b in combinations(mats, 2):
        r = abs(expect(psi, commutator(a, b), hermitian=False))
        if r > rel_tol * max(np.linalg.norm(a, 2) * np.linalg.norm(b, 2), np.finfo(float).tiny):
            return False
    return True


def inverse_qfi(f: np.ndarray) -> np.ndarray:
    """Inverse of a QFI matrix; closed form for 2x2, guarded eigen-inverse otherwise."""
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    evals, evecs = np.linalg.eigh(f)
    top = max(abs(evals[-1]), np.finfo(float).tiny)
    cond = top / evals[0] if evals[0] > 0 else np.inf
    if not cond <= COND_LIMIT:
        raise NonIdentifiableError(cond, evecs[:, 0])
    if n == 1:
        return np.array([[1.0 / f[0, 0]]])
    if n == 2:
        det = f[0, 0] * f[1, 1] - f[0, 1] * f[1, 0]
        return np.array([[f[1, 1], -f[0, 1]], [-f[1, 0], f[0, 0]]]) / det
    return (evecs / evals) @ evecs.T


def crb_cost(f: np.ndarray, g: np.ndarray | None = None) -> float:
    """``Tr[G F^-1]``; ``G`` defaults to the identity."""
    finv = inverse_qfi(f)
    if g is None:
        return float(np.trace(finv))
    g = np.asarray(g, dtype=float)
    if g.shape != finv.shape:
        raise DimensionError(f"cost matrix {g.shape} vs QFI {finv.shape}")
    if max_norm(g - g.T) > 1e-12 or np.min(np.linalg.eigvalsh(g)) <= 0:
        raise ValueError("cost matrix must be symmetric positive definite")
    return float(np.trace(g @ finv))


@dataclass(frozen=True)
class PrecisionReport:
    params: tuple[str, ...]
    qfi: np.ndarray
    variances: dict[str, float]
    cost: float
    saturation_residual: float
    attainable: bool

    def to_dict(self) -> dict:
        return {
            "params": list(self.params),
            "qfi": [[float(x) for x in row] for row in self.qfi],
            "variances": {k: float(v) for k, v in self.variances.items()},
            "cost": float(self.cost),
            "saturation_residual": float(self.saturation_residual),
            "attainable": bool(self.attainable),
        }


def precision_report(psi: np.ndarray, gens: GeneratorSet, g: np.ndarray | None = None) -> PrecisionReport:
    f = qfi_matrix(psi, gens)
    finv = inverse_qfi(f)
    variances = {name: float(finv[i, i]) for i, name in enumerate(gens.params)}
    return PrecisionReport(
        params=gens.params,
        qfi=f,
        variances=variances,
        cost=crb_cost(f, g),
        saturation_residual=saturation_residual(psi, gens),
        attainable=saturation_ok(psi, gens),
    )
