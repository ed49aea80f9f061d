import numpy as np
import pytest

from perflim.core_algebra import RationalMatrix, gram_of_outputs
from perflim.errors import DegenerateInput, IllConditionedBasis, NotH2Admissible, PreconditionViolated
from perflim.oracle import j_of_parameters, laguerre_row, monte_carlo_j, optimize_finite_basis
from perflim.perf_limits import ChannelModel, theorem1_jstar

from instances import channel, integrating_nmp, random_mimo, tf


@pytest.fixture(scope="module")
def sec4():
    P, ch = integrating_nmp(2.0), channel()
    return P, ch, theorem1_jstar(P, ch, 0.5).j_star


def test_laguerre_rows_orthonormal():
    for m, lam in ((4, 1.0), (12, 0.3), (8, 2.5)):
        assert np.abs(gram_of_outputs(laguerre_row(m, lam)) - np.eye(m)).max() <= 1e-12


def test_zero_parameter_is_not_admissible(sec4):
    P, ch, _ = sec4
    zero = RationalMatrix.constant([[0.0]])
    with pytest.raises(NotH2Admissible):
        j_of_parameters(P, ch, 0.5, zero, zero)


def test_oracle_bounds_closed_form_and_decreases(sec4):
    P, ch, jstar = sec4
    vals = [optimize_finite_basis(P, ch, 0.5, m, closed_form=jstar).j_value for m in (2, 5, 10, 20)]
    assert all(v >= jstar - 1e-9 for v in vals)
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_oracle_value_is_achieved(sec4):
    P, ch, jstar = sec4
    res = optimize_finite_basis(P, ch, 0.5, 8, closed_form=jstar)
    ju, jv, j = j_of_parameters(P, ch, 0.5, res.parameter.Q(), res.parameter.R())
    assert j == pytest.approx(res.j_value, rel=1e-8)
    assert ju == pytest.approx(res.j_u, rel=1e-8) and jv == pytest.approx(res.j_v, rel=1e-8)
    assert res.gap == pytest.approx(res.j_value - jstar, abs=1e-15)


def test_degenerate_plant_oracle_reaches_zero():
    P = tf([-2.0], [-1.0])
    res = optimize_finite_basis(P, ChannelModel.lowpass(None, None, 1.0, 0.0), 0.0, 10)
    assert res.j_value <= 1e-4
    assert abs(res.closed_form) <= 1e-10


def test_matrix_oracle_upper_bound():
    P, _ = random_mimo(np.random.default_rng(3))
    ch = channel(2, sigma=[1.0, 0.6], gamma=[0.8, 0.5])
    gaps = []
    for m in (5, 10, 20):
        res = optimize_finite_basis(P, ch, 0.5, m, lam=2.0)
        assert res.j_value >= res.closed_form - 1e-9
        gaps.append(res.gap)
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_ill_conditioned_basis(sec4):
    P, ch, jstar = sec4
    with pytest.raises(IllConditionedBasis):
        optimize_finite_basis(P, ch, 0.5, 80, lam=20.0, closed_form=jstar)


def test_bad_basis_arguments(sec4):
    P, ch, jstar = sec4
    with pytest.raises(DegenerateInput):
        optimize_finite_basis(P, ch, 0.5, 0, closed_form=jstar)


@pytest.fixture(scope="module")
def small_parameter(sec4):
    P, ch, jstar = sec4
    return optimize_finite_basis(P, ch, 0.5, 5, closed_form=jstar).parameter


def test_monte_carlo_seed_determinism(sec4, small_parameter):
    P, ch, _ = sec4
    Q, R = small_parameter.Q(), small_parameter.R()
    a = monte_carlo_j(P, ch, Q, R, 10.0, 2e-3, 8, seed=11)
    b = monte_carlo_j(P, ch, Q, R, 10.0, 2e-3, 8, seed=11)
    c = monte_carlo_j(P, ch, Q, R, 10.0, 2e-3, 8, seed=12)
    assert a.estimate == b.estimate and a.stderr == b.stderr
    assert c.estimate != a.estimate


def test_monte_carlo_tracks_exact_value(sec4, small_parameter):
    P, ch, _ = sec4
    Q, R = small_parameter.Q(), small_parameter.R()
    exact = j_of_parameters(P, ch, 0.5, Q, R)[2]
    est = monte_carlo_j(P, ch, Q, R, 40.0, 2e-3, 40, seed=3)
    assert abs(est.estimate - exact) <= 4 * est.stderr


def test_monte_carlo_step_precondition(sec4, small_parameter):
    P, ch, _ = sec4
    with pytest.raises(PreconditionViolated):
        monte_carlo_j(P, ch, small_parameter.Q(), small_parameter.R(), 10.0, 0.5, 2, seed=0)
