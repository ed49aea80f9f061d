import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from perflim.core_algebra import Polynomial, h2_norm, poly_roots
from perflim.factorization import allpass_extract_zeros, coprime_factorize
from perflim.oracle import optimize_finite_basis
from perflim.perf_limits import theorem1_jstar

from instances import channel, integrating_nmp, random_mimo, random_siso, tf

ks = st.floats(0.5, 8.0)
epss = st.floats(0.05, 0.95)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
def test_roots_reconstruct(rts):
    rts = sorted(rts)
    assume(all(b - a > 0.05 for a, b in zip(rts, rts[1:])))
    got = np.sort(np.real(poly_roots(Polynomial.from_roots(rts))))
    assert np.allclose(got, rts, atol=1e-7)


@given(st.floats(0.1, 10.0), st.floats(-10.0, 10.0))
def test_allpass_factor_unit_modulus(a, w):
    c = allpass_extract_zeros(tf([a], [-1.0, -2.0]), "L")
    assert abs(abs(c.product(1j * w)[0, 0]) - 1.0) <= 1e-10


@given(st.integers(0, 2 ** 31 - 1))
def test_bezout_random_siso(seed):
    P, _ = random_siso(np.random.default_rng(seed))
    cf = coprime_factorize(P)
    for s in (0.3 + 1j, 2.0, 0.5j):
        assert cf.bezout_residual(s) <= 1e-8
        assert cf.factor_residual(P, s) <= 1e-8


@given(ks, epss, st.floats(-4.0, -0.3))
def test_jstar_independent_of_pole_placement(k, eps, pole):
    a = theorem1_jstar(integrating_nmp(k), channel(), eps).j_star
    b = theorem1_jstar(integrating_nmp(k), channel(), eps, pole=pole).j_star
    assert b == pytest.approx(a, rel=1e-7)


@given(ks, epss, st.floats(0.0, 2.0), st.floats(0.01, 0.5))
def test_jstar_nondecreasing_in_gamma(k, eps, g, dg):
    lo = theorem1_jstar(integrating_nmp(k), channel(gamma=g), eps).j_star
    hi = theorem1_jstar(integrating_nmp(k), channel(gamma=g + dg), eps).j_star
    assert hi >= lo - 1e-12


@given(ks, epss, st.floats(0.5, 5.0), st.floats(0.5, 5.0))
def test_jstar_nondecreasing_in_noise_bandwidth(k, eps, h, dh):
    lo = theorem1_jstar(integrating_nmp(k), channel(h=h), eps).j_star
    hi = theorem1_jstar(integrating_nmp(k), channel(h=h + dh), eps).j_star
    assert hi >= lo - 1e-9 * max(1.0, lo)


@given(ks, epss, st.integers(1, 6))
def test_oracle_never_beats_closed_form(k, eps, m):
    P, ch = integrating_nmp(k), channel()
    j = theorem1_jstar(P, ch, eps).j_star
    assert optimize_finite_basis(P, ch, eps, m, closed_form=j).j_value >= j - 1e-9


@given(st.integers(0, 2 ** 31 - 1))
def test_mimo_jstar_order_invariant(seed):
    P, zs = random_mimo(np.random.default_rng(seed))
    ch = channel(2, sigma=[1.0, 0.6], gamma=[0.8, 0.5])
    a = theorem1_jstar(P, ch, 0.5).j_star
    b = theorem1_jstar(P, ch, 0.5, zero_order=zs[::-1], noise_zero_order=zs[::-1]).j_star
    assert b == pytest.approx(a, rel=1e-7)


@given(st.floats(0.2, 5.0))
def test_h2_first_order(a):
    assert h2_norm(tf([], [-a])) ** 2 == pytest.approx(1 / (2 * a), rel=1e-10)
