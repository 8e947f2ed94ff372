"""Exception types raised across the package."""

from __future__ import annotations


class QFEError(Exception):
    """Base class for all package errors."""


class HermiticityError(QFEError, ValueError):
    """A matrix expected to be Hermitian is not, within tolerance."""

    def __init__(self, deviation: float, tol: float, where: str = ""):
        self.deviation = deviation
        self.tol = tol
        loc = f" ({where})" if where else ""
        super().__init__(
            f"matrix is not Hermitian{loc}: max|A - A^H| = {deviation:.3e} > {tol:.1e}"
        )


class UnitarityError(QFEError):
    """A propagator drifted from unitarity beyond tolerance."""

    def __init__(self, deviation: float, tol: float):
        self.deviation = deviation
        super().__init__(f"propagator not unitary: max|U^H U - I| = {deviation:.3e} > {tol:.1e}")


class DimensionError(QFEError, ValueError):
    pass


class DegenerateSpectrumError(QFEError):
    """Eigenvalue gap too small to build a counter-diabatic term."""

    def __init__(self, t: float, gap: float):
        self.t = t
        self.gap = gap
        super().__init__(f"degenerate spectrum at t={t!r}: minimal gap {gap:.3e}")


class NonIdentifiableError(QFEError):
    """QFI matrix is singular (or too ill-conditioned) to invert."""

    def __init__(self, condition: float, null_direction):
        self.condition = condition
        self.null_direction = null_direction
        super().__init__(
            f"parameters not identifiable: condition number {condition:.3e}, "
            f"null direction {list(null_direction)}"
        )


class RegimeError(QFEError):
    """Inputs fall outside the validity range of an approximate formula."""


class ConstraintViolation(QFEError):
    """Saturation condition does not hold where it is required to."""


class UnbracketedMinimum(QFEError):
    """Scan minimum lies on the boundary of the search interval."""

    def __init__(self, gamma: float, cost: float):
        self.gamma = gamma
        self.cost = cost
        super().__init__(f"minimum at bracket boundary: gamma={gamma!r}, cost={cost!r}")
