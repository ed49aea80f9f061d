import numpy as np
import pytest

from perflim.core_algebra import (
    Polynomial,
    RationalMatrix,
    h2_norm,
    h2_norm_quad,
    para_adjoint,
    poly_roots,
    rf_eval,
    zeros_poles,
)
from perflim.errors import DegenerateInput, NotInH2, PoleEvaluation

from instances import integrating_nmp, tf


def sorted_roots(p):
    return np.sort_complex(np.asarray(poly_roots(p), dtype=complex))


def test_roots_of_factorable_quadratic():
    assert np.allclose(sorted_roots(Polynomial([2.0, -3.0, 1.0])), [1, 2], atol=1e-12)


def test_root_at_origin():
    assert np.allclose(sorted_roots(Polynomial([0.0, 1.0])), [0.0], atol=1e-14)


def test_conjugate_pair_is_exact():
    r = sorted_roots(Polynomial([1.0, 0.0, 1.0]))
    assert np.allclose(r, [-1j, 1j], atol=1e-12)
    assert abs(r[0] - np.conj(r[1])) <= 1e-10


def test_zero_polynomial_rejected():
    with pytest.raises(DegenerateInput):
        poly_roots(Polynomial([0.0]))


def test_roots_reconstruct_coefficients():
    rng = np.random.default_rng(1)
    for _ in range(20):
        roots = rng.uniform(-5, 5, 3).tolist() + [complex(rng.uniform(-3, 3), 1.5)]
        roots.append(np.conj(roots[-1]))
        p = Polynomial.from_roots(roots)
        q = Polynomial.from_roots(poly_roots(p))
        assert np.allclose(q.coeffs, p.coeffs, rtol=1e-8, atol=1e-8 * np.max(np.abs(p.coeffs)))


def test_eval_plant_on_axis():
    val = rf_eval(integrating_nmp(2.0), 1j)[0, 0]
    assert val == pytest.approx((1j - 2) / (1j * (1j + 1)), rel=1e-14)


def test_eval_identity_and_dc_gain():
    assert np.allclose(rf_eval(RationalMatrix.identity(2), 0.3 + 2j), np.eye(2))
    assert rf_eval(RationalMatrix.scalar([3.0], [3.0, 1.0]), 0.0)[0, 0] == pytest.approx(1.0)


def test_eval_at_pole_names_entry():
    with pytest.raises(PoleEvaluation):
        rf_eval(integrating_nmp(2.0), 0.0)


def test_zeros_and_poles_of_plant():
    zp = zeros_poles(integrating_nmp(2.0))
    assert np.allclose([z for z, _ in zp.zeros], [2.0])
    assert np.allclose(sorted(p.real for p, _ in zp.poles), [-1.0, 0.0], atol=1e-12)


def test_unstable_first_order_has_no_zeros():
    zp = zeros_poles(tf([], [1.0]))
    assert zp.zeros == []
    assert np.allclose([p for p, _ in zp.poles], [1.0])


def test_zero_direction_of_diagonal_plant():
    G = RationalMatrix.diag([tf([1.0], [-1.0]), tf([-2.0], [-3.0])])
    (z, eta), = zp_rhp = zeros_poles(G).rhp_zeros()
    assert z == pytest.approx(1.0)
    assert np.allclose(np.abs(eta), [1.0, 0.0], atol=1e-10)


def test_zero_directions_annihilate():
    rng = np.random.default_rng(3)
    c, s = np.cos(0.7), np.sin(0.7)
    R = RationalMatrix.constant([[c, -s], [s, c]])
    G = R @ RationalMatrix.diag([tf([1.5], [-1.0, -2.0]), tf([3.0], [-4.0, -1.0])]) @ R.T
    for z, eta in zeros_poles(G).rhp_zeros():
        gz = G(z)
        assert np.linalg.norm(eta.conj() @ gz) <= 1e-8 * np.linalg.norm(gz)
        assert np.linalg.norm(eta) == pytest.approx(1.0)
    del rng


def test_h2_first_order():
    assert h2_norm(tf([], [-1.0])) == pytest.approx(1 / np.sqrt(2), rel=1e-12)


def test_h2_zero():
    assert h2_norm(RationalMatrix.scalar([0.0])) == 0.0


def test_h2_rejects_axis_pole():
    with pytest.raises(NotInH2):
        h2_norm(integrating_nmp(2.0))


def test_h2_rejects_biproper():
    with pytest.raises(NotInH2):
        h2_norm(tf([-2.0], [-1.0]))


def test_h2_lyapunov_matches_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        G = tf(rng.uniform(-4, 4, n - 1).tolist(), (-rng.uniform(0.2, 5, n)).tolist(), gain=rng.uniform(0.5, 3))
        a, b = h2_norm(G), h2_norm_quad(G)
        assert abs(a - b) <= 1e-6 * (1 + a)


def test_para_adjoint_examples():
    G = tf([], [-1.0])
    Ga = para_adjoint(G)
    for s in (0.3, 1j, 2 - 1j):
        assert Ga(s)[0, 0] == pytest.approx(1 / (-s + 1))
    K = RationalMatrix.constant([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(para_adjoint(K)(0.5), [[1, 3], [2, 4]])
    H = tf([2.0], [-3.0])
    assert para_adjoint(H)(0.7)[0, 0] == pytest.approx((-0.7 - 2) / (-0.7 + 3))


def test_para_adjoint_involution():
    G = RationalMatrix.from_entries([[(Polynomial([1.0, 2.0]), Polynomial([2.0, 3.0, 1.0])),
                                      (Polynomial([5.0]), Polynomial([4.0, 1.0]))]])
    GG = para_adjoint(para_adjoint(G))
    for s in (0.1 + 1j, 3.0, -0.4j):
        assert np.allclose(GG(s), G(s), rtol=1e-12)


def test_realization_matches_entries():
    G = RationalMatrix.from_entries([
        [(Polynomial([1.0, 1.0]), Polynomial([2.0, 3.0, 1.0])), (Polynomial([2.0]), Polynomial([3.0, 1.0]))],
        [(Polynomial([-1.0]), Polynomial([1.0, 1.0])), (Polynomial([0.5, 1.0]), Polynomial([6.0, 5.0, 1.0]))],
    ])
    ss = G.to_state_space()
    rng = np.random.default_rng(11)
    for s in rng.uniform(-3, 3, 16) + 1j * rng.uniform(-3, 3, 16):
        assert np.allclose(ss(s), G(s), rtol=1e-8, atol=1e-12)
