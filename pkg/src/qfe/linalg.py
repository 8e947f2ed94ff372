"""Dense linear algebra for small Hermitian matrices.

Every function accepts a single ``(d, d)`` matrix or a stack ``(..., d, d)``;
stacks are processed in one vectorized pass, which is what the propagator
relies on to exponentiate thousands of 3x3 Hamiltonian samples at once.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, HermiticityError, UnitarityError

HERMITIAN_TOL = 1e-12
EIG_RESIDUAL_TOL = 1e-10

_MAX_SWEEPS = 30


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_deviation(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - dagger(a))))


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL, where: str = "") -> np.ndarray:
    """Return ``a`` as a complex array, raising if it is not Hermitian."""
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrix, got shape {a.shape}")
    dev = hermiticity_deviation(a)
    if not dev <= tol:
        raise HermiticityError(dev, tol, where)
    return a


def _pairs(n: int):
    return [(p, q) for p in range(n - 1) for q in range(p + 1, n)]


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi on a stack of Hermitian matrices.

    Each rotation first removes the phase of the pivot element with a
    diagonal unitary, then applies the classical real rotation. Sweep order
    is fixed, so results are reproducible for identical input.
    """
    a = a.copy()
    batch = a.shape[:-2]
    n = a.shape[-1]
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    scale = np.maximum(np.max(np.abs(a), axis=(-2, -1)), np.finfo(float).tiny)
    eps = np.finfo(float).eps
    for _ in range(_MAX_SWEEPS):
        off = np.abs(a - np.einsum("...ii->...i", a)[..., None] * np.eye(n))
        if np.all(np.max(off, axis=(-2, -1)) <= eps * scale):
            break
        for p, q in _pairs(n):
            apq = a[..., p, q]
            r = np.abs(apq)
            active = r > eps * scale * 1e-3
            r_safe = np.where(active, r, 1.0)
            phase = np.where(active, apq / r_safe, 1.0)
            tau = (a[..., q, q].real - a[..., p, p].real) / (2.0 * r_safe)
            sgn = np.where(tau >= 0.0, 1.0, -1.0)
            t = np.where(active, sgn / (np.abs(tau) + np.sqrt(1.0 + tau * tau)), 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            g = np.broadcast_to(np.eye(n, dtype=complex), batch + (n, n)).copy()
            g[..., p, p] = c
            g[..., p, q] = s
            g[..., q, p] = -s * np.conj(phase)
            g[..., q, q] = c * np.conj(phase)
            a = dagger(g) @ a @ g
            a[..., p, q] = 0.0
            a[..., q, p] = 0.0
            v = v @ g
    evals = np.einsum("...ii->...i", a).real.copy()
    return evals, v


def _gauge_fix(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column real positive."""
    idx = np.argmax(np.abs(v), axis=-2)
    lead = np.take_along_axis(v, idx[..., None, :], axis=-2)
    return v * (np.conj(lead) / np.abs(lead))


def eig_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix (or stack).

    Returns
    -------
    evals : ndarray
        Real eigenvalues in ascending order, shape ``(..., d)``.
    evecs : ndarray
        Orthonormal eigenvectors as columns, shape ``(..., d, d)``; each column
        has its largest-magnitude component real and positive.
    """
    a = check_hermitian(a, tol)
    evals, v = _jacobi(a)
    order = np.argsort(evals, axis=-1, kind="stable")
    evals = np.take_along_axis(evals, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return evals, _gauge_fix(v)


def expm_i(a: np.ndarray, s=1.0) -> np.ndarray:
    """``exp(-i s A)`` for Hermitian ``A`` via its spectral decomposition.

    ``s`` may be a scalar or an array broadcasting against the stack shape.
    """
    evals, v = eig_hermitian(a)
    s = np.asarray(s, dtype=float)
    phases = np.exp(-1j * s[..., None] * evals)
    return (v * phases[..., None, :]) @ dagger(v)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"commutator of {a.shape} and {b.shape}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"anticommutator of {a.shape} and {b.shape}")
    return a @ b + b @ a


def expect(psi: np.ndarray, a: np.ndarray, hermitian: bool | None = None) -> complex | float:
    """``<psi|A|psi>``.

    For Hermitian ``A`` (auto-detected unless ``hermitian`` is given) the
    imaginary part is checked against 1e-12 and a real float is returned.
    """
    psi = np.asarray(psi)
    a = np.asarray(a)
    if a.shape != (psi.shape[0], psi.shape[0]):
        raise DimensionError(f"state of dim {psi.shape[0]} with operator {a.shape}")
    val = complex(np.vdot(psi, a @ psi))
    if hermitian is None:
        hermitian = hermiticity_deviation(a) <= HERMITIAN_TOL * max(1.0, float(np.max(np.abs(a))))
    if hermitian:
        scale = max(1.0, float(np.max(np.abs(a))))
        if abs(val.imag) > HERMITIAN_TOL * scale:
            raise HermiticityError(abs(val.imag), HERMITIAN_TOL, "imaginary expectation")
        return val.real
    return val


def check_unitary(u: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    d = u.shape[-1]
    dev = float(np.max(np.abs(dagger(u) @ u - np.eye(d))))
    if not dev <= tol:
        raise UnitarityError(dev, tol)
    return u


def max_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))
