import numpy as np
import pytest

from perflim.core_algebra import RationalMatrix
from perflim.errors import DegenerateInput, NotSISO, PreconditionViolated
from perflim.perf_limits import (
    ChannelModel,
    FZeroData,
    corollary1_siso,
    corollary2_awgn,
    corollary3_noise_free,
    jv_star,
    ju_star,
    poisson_log_integral,
    theorem1_jstar,
)

from instances import channel, integrating_nmp, random_mimo, random_siso, rotation, tf

# k = 2, eps = 0.5, f = 3, h = 4, sigma = 1, gamma = 0.8; frozen from the independent SISO route
FROZEN_JU = 0.8623724356959407
FROZEN_JV = 1.8771398135601436


def test_poisson_reference_profile():
    f = RationalMatrix.scalar([2.0, 1.0], [2.0, 2.0])
    fd = FZeroData(f=f, f0=1.0, nmp_zeros=[], f_m=f)
    assert poisson_log_integral(fd) == pytest.approx(-0.25, abs=1e-8)


def test_poisson_constant_is_zero():
    f = RationalMatrix.constant([[1.0]])
    assert poisson_log_integral(FZeroData(f=f, f0=1.0, nmp_zeros=[], f_m=f)) == 0.0


def test_poisson_single_pole_identity():
    # |f/f0|^2 = 1/(1 + w^2/a^2) integrates to -1/(2a)
    f = RationalMatrix.scalar([3.0], [3.0, 1.0])
    assert poisson_log_integral(FZeroData(f=f, f0=1.0, nmp_zeros=[], f_m=f)) == pytest.approx(-1 / 6, abs=1e-8)


def test_frozen_section_iv_point():
    b = theorem1_jstar(integrating_nmp(2.0), channel(), 0.5)
    assert b.ju_star == pytest.approx(FROZEN_JU, rel=1e-8)
    assert b.jv_star == pytest.approx(FROZEN_JV, rel=1e-8)
    assert b.j_star == pytest.approx(b.ju_star + b.jv_star, abs=1e-12)


@pytest.mark.parametrize("k", [1.0, 2.0, 5.0])
@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_zero_direction_term(k, eps):
    b = theorem1_jstar(integrating_nmp(k), channel(), eps)
    assert b.ju_zero_direction_term == pytest.approx(2 * (1 - eps) / k, rel=1e-12)
    assert b.ju_log_integral_term >= 0.0


def test_scaled_reference_intensity():
    a = theorem1_jstar(integrating_nmp(2.0), channel(sigma=1.0, gamma=0.0), 0.3)
    b = theorem1_jstar(integrating_nmp(2.0), channel(sigma=1.7, gamma=0.0), 0.3)
    assert b.ju_star == pytest.approx(1.7 ** 2 * a.ju_star, rel=1e-9)


def test_gamma_monotone_and_quadratic():
    P = integrating_nmp(2.0)
    jv = [jv_star(P, channel(gamma=g), 0.5) for g in (0.0, 0.4, 0.8, 1.6)]
    assert jv[0] == 0.0
    assert np.all(np.diff(jv) > 0)
    assert jv[2] == pytest.approx(4 * jv[1], rel=1e-9)


def test_eps_one_has_no_tracking_cost():
    b = theorem1_jstar(integrating_nmp(2.0), channel(), 1.0)
    assert b.ju_star == 0.0
    assert b.jv_star > 0.0
    near = [theorem1_jstar(integrating_nmp(2.0), channel(), 1 - d).jv_star for d in (1e-4, 1e-6)]
    assert near[0] > near[1] > b.jv_star
    assert near[1] - b.jv_star < 0.2 * (near[0] - b.jv_star)


def test_eps_one_matrix_pole_invariant():
    P, _ = random_mimo(np.random.default_rng(3))
    ch = channel(2, sigma=[1.0, 0.6], gamma=[0.8, 0.5])
    a = theorem1_jstar(P, ch, 1.0).jv_star
    assert theorem1_jstar(P, ch, 1.0, pole=-2.5).jv_star == pytest.approx(a, rel=1e-7)


def test_stable_minimum_phase_plant_is_free():
    P = tf([-2.0], [-1.0])
    b = theorem1_jstar(P, ChannelModel.lowpass(None, None, 1.0, 0.0), 0.0)
    assert abs(b.j_star) <= 1e-10


def test_precondition_fm0():
    with pytest.raises(PreconditionViolated):
        theorem1_jstar(tf([2.0], [-1.0, -3.0]), channel(), 0.5)


def test_bad_epsilon():
    with pytest.raises(DegenerateInput):
        theorem1_jstar(integrating_nmp(2.0), channel(), 1.5)


def test_corollary1_matches_theorem1():
    rng = np.random.default_rng(11)
    for _ in range(6):
        P, _ = random_siso(rng, integrator=True)
        eps = float(rng.uniform(0.05, 0.95))
        a = theorem1_jstar(P, channel(), eps).j_star
        b = corollary1_siso(P, channel(), eps).j_star
        assert b == pytest.approx(a, rel=1e-9)


def test_corollary1_rejects_matrix():
    P, _ = random_mimo(np.random.default_rng(1))
    with pytest.raises(NotSISO):
        corollary1_siso(P, channel(2), 0.5)


def test_corollary2_and_corollary3():
    P = integrating_nmp(3.0)
    ch = ChannelModel(RationalMatrix.identity(1), RationalMatrix.identity(1), [1.0], [0.8])
    assert corollary2_awgn(P, [1.0], [0.8], 0.5).j_star == pytest.approx(theorem1_jstar(P, ch, 0.5).j_star, rel=1e-9)
    F = tf([], [-3.0], 3.0)
    c3 = corollary3_noise_free(P, F, [1.0], 0.4)
    ju = ju_star(P, ChannelModel(F, RationalMatrix.identity(1), [1.0], [0.0]), 0.4)[3]
    assert c3.ju_star == ju and c3.jv_star == 0.0
    with pytest.raises(PreconditionViolated):
        corollary3_noise_free(P, F, [1.0], 0.4, gamma=[0.5])


def test_decoupled_mimo_is_sum_of_channels():
    g1, g2 = integrating_nmp(2.0), integrating_nmp(5.0)
    P = RationalMatrix.diag([g1, g2])
    eps = 0.5
    whole = theorem1_jstar(P, channel(2), eps)
    parts = theorem1_jstar(g1, channel(), eps).j_star + theorem1_jstar(g2, channel(), eps).j_star
    assert whole.j_star == pytest.approx(parts, rel=1e-7)


def test_zero_directions_rotate_with_output():
    P = rotation(0.5) @ RationalMatrix.diag([integrating_nmp(2.0), integrating_nmp(5.0)])
    b = theorem1_jstar(P, channel(2, sigma=[1.0, 0.6]), 0.0)
    for d in b.diagnostics:
        assert np.sum(d.cos2) == pytest.approx(1.0, abs=1e-10)
    for pole in (-1.0, -3.0):
        assert theorem1_jstar(P, channel(2, sigma=[1.0, 0.6]), 0.5, pole=pole).j_star == pytest.approx(
            theorem1_jstar(P, channel(2, sigma=[1.0, 0.6]), 0.5).j_star, rel=1e-7)


def test_mimo_invariance_sample():
    rng = np.random.default_rng(3)
    P, zs = random_mimo(rng)
    ch = channel(2, sigma=[1.0, 0.6], gamma=[0.8, 0.5])
    base = theorem1_jstar(P, ch, 0.5).j_star
    assert theorem1_jstar(P, ch, 0.5, pole=-2.5).j_star == pytest.approx(base, rel=1e-7)
    assert theorem1_jstar(P, ch, 0.5, zero_order=zs[::-1]).j_star == pytest.approx(base, rel=1e-7)
