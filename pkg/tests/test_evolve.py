import numpy as np
import pytest

from qfe.evolve import (
    GeneratorSet,
    PropagationGrid,
    TimeDepOperator,
    convergence_probe,
    generators,
    propagate,
    propagators,
)
from qfe.linalg import check_unitary, expm_i, hermiticity_deviation, max_norm
from qfe.models.landau_zener import LZParams, lz_total_hamiltonian
from qfe.models.rotating_field import RotatingFieldParams, rf_hamiltonian
from qfe.spin import J


def static(h, grads):
    return TimeDepOperator(lambda t: np.broadcast_to(h, np.shape(t) + h.shape), grads)


def test_grid_validation():
    with pytest.raises(ValueError):
        PropagationGrid(1.0, 0.0, 10)
    with pytest.raises(ValueError):
        PropagationGrid(0.0, 1.0, 0)
    g = PropagationGrid.uniform(0.0, 1.0, 101)
    assert g.steps % 2 == 0 and g.steps >= 101


def test_static_hamiltonian_exact():
    h = 0.7 * J.jx + 0.2 * J.jz
    op = static(h, {"a": lambda t: np.broadcast_to(J.jz, np.shape(t) + (3, 3))})
    u = propagate(op, PropagationGrid(0.0, 2.0, 16))
    np.testing.assert_allclose(u, expm_i(h, 2.0), atol=1e-13)


def test_generator_of_commuting_gradient():
    # H = a Jz: generator for a is T Jz exactly
    h = 0.9 * J.jz
    op = static(h, {"a": lambda t: np.broadcast_to(J.jz, np.shape(t) + (3, 3))})
    gens = generators(op, PropagationGrid(0.0, 1.5, 8))
    np.testing.assert_allclose(gens["a"], 1.5 * J.jz, atol=1e-14)


def test_unitarity_and_hermiticity():
    op = rf_hamiltonian(RotatingFieldParams(1.3, 0.8, 2.0))
    grid = PropagationGrid.uniform(0.0, 2.0, 1024)
    us = propagators(op, grid)
    worst = max(max_norm(u.conj().T @ u - np.eye(3)) for u in us[:: len(us) // 16])
    assert worst <= 1e-10
    for g in generators(op, grid).matrices():
        assert hermiticity_deviation(g) <= 1e-10


def test_generator_additivity():
    # H_[0,T] = H_[0,t1] + U1^dag H_[t1,T] U1
    op = rf_hamiltonian(RotatingFieldParams(1.0, 0.6, 2.0))
    full = generators(op, PropagationGrid(0.0, 2.0, 8192))
    first = generators(op, PropagationGrid(0.0, 0.8, 8192 * 2 // 5))
    second = generators(op, PropagationGrid(0.8, 2.0, 8192 * 3 // 5))
    u1 = propagate(op, PropagationGrid(0.0, 0.8, 8192 * 2 // 5))
    for name in ("B", "omega"):
        combined = first[name] + u1.conj().T @ second[name] @ u1
        assert max_norm(combined - full[name]) <= 1e-8


def test_refinement_reduces_error():
    op = rf_hamiltonian(RotatingFieldParams(1.0, 1.0, 2.0))
    ref = generators(op, PropagationGrid(0.0, 2.0, 16384))["omega"]
    e1 = max_norm(generators(op, PropagationGrid(0.0, 2.0, 128))["omega"] - ref)
    e2 = max_norm(generators(op, PropagationGrid(0.0, 2.0, 256))["omega"] - ref)
    assert e1 / e2 >= 3.5


def test_convergence_probe_rotating_field():
    probe = convergence_probe(rf_hamiltonian(RotatingFieldParams(1.0, 1.0, 2.0)), 2.0)
    assert not probe.saturated
    assert 1.8 <= probe.order <= 2.2


def test_convergence_probe_landau_zener():
    op = lz_total_hamiltonian(LZParams(1.0, 1.0, 1.0), 0.5)
    probe = convergence_probe(op, 1.0)
    assert 1.8 <= probe.order <= 2.2


def test_convergence_probe_saturates_for_static():
    h = 0.5 * J.jx
    op = static(h, {"a": lambda t: np.broadcast_to(J.jx, np.shape(t) + (3, 3))})
    assert convergence_probe(op, 1.0).saturated


def test_probe_rejects_coarse_base():
    with pytest.raises(ValueError):
        convergence_probe(rf_hamiltonian(RotatingFieldParams(1.0, 1.0, 1.0)), 1.0, base_steps=16)


def test_generator_set_access():
    gs = GeneratorSet(1.0, {"a": J.jx, "b": J.jz})
    assert gs.params == ("a", "b")
    assert gs["b"] is J.jz


def test_operator_needs_gradients():
    with pytest.raises(ValueError):
        TimeDepOperator(lambda t: J.jx, {})
