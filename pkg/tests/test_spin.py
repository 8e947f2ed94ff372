import math

import numpy as np
import pytest

from qfe.linalg import commutator, expm_i
from qfe.spin import J, basis_state, plus_minus_state, rf_uncontrolled_optimal_state, spin1_ops, tilted_ops


def test_matrix_entries():
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(J.jx, [[0, r, 0], [r, 0, r], [0, r, 0]])
    np.testing.assert_allclose(J.jy, [[0, -1j * r, 0], [1j * r, 0, -1j * r], [0, 1j * r, 0]])
    np.testing.assert_allclose(J.jz, np.diag([1, 0, -1]))


@pytest.mark.parametrize(
    "a,b,c",
    [("jx", "jy", "jz"), ("jy", "jz", "jx"), ("jz", "jx", "jy")],
)
def test_commutation(a, b, c):
    ja, jb, jc = (getattr(J, n) for n in (a, b, c))
    np.testing.assert_allclose(commutator(ja, jb), 1j * jc, atol=1e-15)


def test_casimir():
    total = J.jx @ J.jx + J.jy @ J.jy + J.jz @ J.jz
    np.testing.assert_allclose(total, 2 * np.eye(3), atol=1e-15)


def test_read_only():
    with pytest.raises(ValueError):
        spin1_ops().jx[0, 0] = 1.0


def test_rotation_identities(rng):
    worst = 0.0
    for a in rng.uniform(-2 * np.pi, 2 * np.pi, 100):
        about_y = expm_i(J.jy, -a) @ J.jx @ expm_i(J.jy, a) - (np.cos(a) * J.jx + np.sin(a) * J.jz)
        about_z = expm_i(J.jz, -a) @ J.jx @ expm_i(J.jz, a) - (np.cos(a) * J.jx - np.sin(a) * J.jy)
        worst = max(worst, np.max(np.abs(about_y)), np.max(np.abs(about_z)))
    assert worst <= 1e-11


def test_expm_i_jz_pi():
    np.testing.assert_allclose(expm_i(J.jz, -np.pi), np.diag([-1, 1, -1]), atol=1e-15)


def test_tilted_ops():
    jn, jp = tilted_ops(0.0)
    np.testing.assert_allclose(jn, J.jx)
    np.testing.assert_allclose(jp, J.jy)
    jn, jp = tilted_ops(0.4)
    np.testing.assert_allclose(commutator(jn, jp), 1j * J.jz, atol=1e-14)


def test_states():
    np.testing.assert_allclose(J.jz @ basis_state(-1), -basis_state(-1))
    psi = plus_minus_state()
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert np.vdot(psi, J.jz @ psi).real == pytest.approx(0.0)
    with pytest.raises(ValueError):
        basis_state(2)


def test_uncontrolled_state_normalized():
    psi = rf_uncontrolled_optimal_state(1.0, 0.5, 3.0)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        rf_uncontrolled_optimal_state(0.0, 1.0, 1.0)
