import math

import numpy as np
import pytest

from qfe.errors import UnbracketedMinimum
from qfe.evolve import PropagationGrid, propagate
from qfe.linalg import expm_i, max_norm
from qfe.models.landau_zener import (
    GammaScan,
    LZParams,
    golden_section,
    lz_coefficients,
    lz_generators_propagated,
    lz_generators_quadrature,
    lz_hamiltonian,
    lz_optimize_gamma,
    lz_precision,
    lz_scan,
    lz_total_hamiltonian,
    scan_workers,
)
from qfe.qfi import qfi_matrix
from qfe.spin import J, plus_minus_state

P = LZParams(1.0, 1.0, 1.0)
GAMMAS = [0.0, 0.5, 1.0, 1.9095, 3.0]


def test_hamiltonian_values():
    op = lz_hamiltonian(LZParams(1.4, 0.6, 1.0))
    np.testing.assert_allclose(op.H(0.0), 1.4 * J.jx)
    np.testing.assert_allclose(op.dH("xi", 0.0), 0.0)
    np.testing.assert_allclose(lz_hamiltonian(P).H(1.0), J.jz + J.jx)
    np.testing.assert_allclose(op.dH("Gamma", 2.0), 1.2 * J.jz + J.jx)


def test_params_validation():
    with pytest.raises(ValueError):
        LZParams(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        LZParams(1.0, math.nan, 1.0)


def test_zero_weight_total_vanishes():
    assert max_norm(lz_total_hamiltonian(P, 0.0).H(np.linspace(0, 1, 9))) == 0.0


@pytest.mark.parametrize("gamma", [0.3, 1.0, 2.2])
def test_total_propagator_commuting_family(gamma):
    p = LZParams(1.0, 1.7, 1.3)
    u = propagate(lz_total_hamiltonian(p, gamma), PropagationGrid.uniform(0.0, p.T))
    # total is -gamma xi/(1+xi^2 t^2) Jy, so the phase integral is -gamma arctan(xi T)
    assert max_norm(u - expm_i(J.jy, -gamma * math.atan(p.xi * p.T))) <= 1e-7


def test_gamma_zero_coefficients():
    cx, cz, dx, dz = lz_coefficients(P, 0.0)
    assert cx == pytest.approx(1.0, abs=1e-10)
    gens = lz_generators_quadrature(LZParams(1.5, 0.8, 2.0), 0.0)
    np.testing.assert_allclose(gens["xi"], 1.5 * 4 / 2 * J.jx, atol=1e-10)


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("source", ["quadrature", "propagated"])
def test_generators_in_xz_plane(gamma, source):
    gens = lz_generators_quadrature(P, gamma) if source == "quadrature" else lz_generators_propagated(P, gamma, 1024)
    for g in gens.matrices():
        assert abs(np.trace(g @ J.jy)) / 2 <= 1e-9


@pytest.mark.parametrize("gamma", GAMMAS)
def test_saturation_independent_of_gamma(gamma):
    assert lz_precision(P, gamma).saturation_residual <= 1e-10


@pytest.mark.parametrize("gamma", [0.2, 1.0, 2.5])
def test_qfi_reduction(gamma):
    cx, cz, dx, dz = lz_coefficients(P, gamma)
    f = qfi_matrix(plus_minus_state(), lz_generators_quadrature(P, gamma))
    ref = 4 * np.array([[cx**2 + cz**2, cx * dx + cz * dz], [cx * dx + cz * dz, dx**2 + dz**2]])
    assert max_norm(f - ref) <= 1e-9


def test_gamma_generator_oracle_pair():
    # H_Gamma from the integral forms agrees with propagation
    for gamma in (0.0, 0.7, 1.5, 2.4):
        q = lz_generators_quadrature(P, gamma)["Gamma"]
        r = lz_generators_propagated(P, gamma)["Gamma"]
        assert max_norm(q - r) <= 1e-7


def _oracle_grid():
    return [(g, T) for g in (0.0, 0.75, 1.5, 2.25, 3.0) for T in (0.5, 1.0)]


def test_oracle_pair_agreement():
    worst = 0.0
    for gamma, T in _oracle_grid():
        p = LZParams(1.0, 1.0, T)
        q, r = lz_generators_quadrature(p, gamma), lz_generators_propagated(p, gamma)
        worst = max(worst, max(max_norm(q[k] - r[k]) for k in ("Gamma", "xi")))
    assert worst <= 1e-7


def test_single_parameter_optima_not_joint_optimum():
    best = lz_precision(P, 1.9095).cost
    assert lz_precision(P, 0.0).cost > best
    assert lz_precision(P, 1.0).cost > best


def test_optimize_location_and_refinement():
    a = lz_optimize_gamma(P)
    assert abs(a.gamma - 1.9095) <= 0.01
    b = lz_optimize_gamma(P, points=601)
    assert abs(a.gamma - b.gamma) <= 1e-6
    assert a.report.attainable


def test_scan_continuity():
    jump = float(np.max(np.abs(np.diff(lz_scan(P, np.linspace(0, 3, 301)).costs))))
    assert jump <= 0.05


def test_propagated_scan_continuity():
    jump = float(np.max(np.abs(np.diff(lz_scan(P, np.linspace(0, 3, 301), source="propagated", steps_per_unit=512).costs))))
    assert jump <= 0.05


def test_unbracketed_raises():
    with pytest.raises(UnbracketedMinimum):
        lz_optimize_gamma(P, bracket=(2.5, 3.0), points=11)


def test_optimizer_argument_checks():
    with pytest.raises(ValueError):
        lz_optimize_gamma(P, bracket=(1.0, 1.0))
    with pytest.raises(ValueError):
        lz_optimize_gamma(P, tol=1e-10)


def test_scan_rows_and_order():
    grid = [0.5, 1.0, 2.0]
    scan = lz_scan(P, grid)
    rows = list(scan.rows())
    assert [r[0] for r in rows] == grid
    assert scan.argmin[0] == 2.0
    with pytest.raises(ValueError):
        GammaScan(np.array([1.0, 0.5]), np.zeros(2), np.zeros(2), np.zeros((2, 2, 2)))


def test_threaded_scan_matches_serial(monkeypatch):
    grid = np.linspace(0.1, 2.9, 15)
    serial = lz_scan(P, grid)
    monkeypatch.setenv("QFE_THREADS", "4")
    assert scan_workers() == 4
    threaded = lz_scan(P, grid)
    np.testing.assert_array_equal(serial.costs, threaded.costs)


def test_golden_section():
    x = golden_section(lambda v: (v - 0.3) ** 2, -1.0, 2.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-8)


def test_weighted_cost():
    g = np.diag([2.0, 0.5])
    rep = lz_precision(P, 1.2, G=g)
    assert rep.cost == pytest.approx(2 * rep.variances["Gamma"] + 0.5 * rep.variances["xi"])
