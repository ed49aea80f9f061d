"""Closed-form optimal tracking performance over a bandlimited, noisy channel.

The loop is y = P(F u + H n), with G = P F = N M^{-1}.  The index weighs
tracking error against channel input power:

    J = E (1 - eps)|r - y|^2 + eps |F u + H n|^2

and splits into a reference part J_U and a noise part J_V.
"""

from __future__ import annotations

import warnings

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core_algebra import (
    Polynomial,
    RationalMatrix,
    StateSpace,
    classify,
    poly_roots,
    ss_from,
)
from .errors import (
    ConsistencyFailure,
    DegenerateInput,
    EvaluationCollision,
    NotSISO,
    NumericalInconsistency,
    PoleEvaluation,
    PreconditionViolated,
    QuadratureFailure,
)
from .factorization import (
    CoprimeData,
    InnerOuterPair,
    _common_denominator,
    _realify,
    _extract,
    allpass_extract_zeros,
    coprime_factorize,
    inner_outer,
)

QUAD_TOL = 1e-9
F0_RTOL = 1e-6
COLLISION_TOL = 1e-8


@dataclass(frozen=True)
class ChannelModel:
    """Channel filter F = f*I, noise colouring H and intensities U = diag(sigma), V = diag(gamma)."""

    F: RationalMatrix
    H: RationalMatrix
    sigma: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        sig = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        gam = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "gamma", gam)
        if np.any(sig <= 0):
            raise DegenerateInput("reference intensities must be positive")
        if np.any(gam < 0):
            raise DegenerateInput("noise intensities must be nonnegative")
        F = self.F
        if F.rows != F.cols:
            raise DegenerateInput("F must be square")
        f0 = F.entries[0][0]
        for i in range(F.rows):
            for j in range(F.cols):
                n, d = F.entries[i][j]
                if i == j:
                    if not (n.allclose(f0[0], 1e-9) and d.allclose(f0[1], 1e-9)):
                        raise DegenerateInput("F must have identical diagonal entries")
                elif not n.is_zero():
                    raise DegenerateInput("F must be diagonal")
        if not F.is_stable() or not self.H.is_stable():
            raise DegenerateInput("F and H must be stable")
        if self.H.rows != F.rows or self.H.cols != gam.size:
            raise DegenerateInput("H must be (inputs x len(gamma))")

    @property
    def U(self):
        return np.diag(self.sigma)

    @property
    def V(self):
        return np.diag(self.gamma)

    @property
    def f(self) -> RationalMatrix:
        n, d = self.F.entries[0][0]
        return RationalMatrix.scalar(n, d)

    @classmethod
    def lowpass(cls, f=None, h=None, sigma=1.0, gamma=0.0, size=1):
        """First-order low-pass F = f/(s+f), H = h/(s+h); None means an all-pass unit gain."""
        def lp(c):
            if c is None:
                return RationalMatrix.identity(size)
            return RationalMatrix.diag([RationalMatrix.scalar([c], [c, 1.0])] * size)

        sig = np.broadcast_to(np.asarray(sigma, dtype=float), (size,)).copy()
        gam = np.broadcast_to(np.asarray(gamma, dtype=float), (size,)).copy()
        return cls(F=lp(f), H=lp(h), sigma=sig, gamma=gam)


@dataclass(frozen=True)
class FZeroData:
    f: RationalMatrix
    f0: float
    nmp_zeros: list
    f_m: RationalMatrix
    evaluate: Optional[Callable] = None  # pointwise f when assembled from matrix factors

    def __call__(self, s) -> complex:
        return self.evaluate(s) if self.evaluate is not None else complex(self.f(s)[0, 0])


@dataclass(frozen=True)
class ZeroDiagnostic:
    location: complex
    direction: np.ndarray
    cos2: np.ndarray


@dataclass(frozen=True)
class PerfBreakdown:
    epsilon: float
    ju_zero_direction_term: float
    ju_szero_term: float
    ju_log_integral_term: float
    ju_star: float
    jv_star: float
    j_star: float
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        if abs(self.j_star - (self.ju_star + self.jv_star)) > 1e-10:
            raise NumericalInconsistency("j_star != ju_star + jv_star")


# --------------------------------------------------------------------------
# loop data


@dataclass(frozen=True)
class LoopData:
    P: RationalMatrix
    channel: ChannelModel
    G: RationalMatrix
    cf: CoprimeData
    FM: RationalMatrix
    PM: RationalMatrix


def loop_data(P: RationalMatrix, channel: ChannelModel, pole: float = -1.0) -> LoopData:
    if P.cols != channel.F.rows:
        raise DegenerateInput("plant inputs must match the channel size")
    if P.rows != channel.sigma.size:
        raise DegenerateInput("one reference intensity per plant output")
    G = P @ channel.F
    cf = coprime_factorize(G, pole)
    # F = f1 I commutes, so P M = N / f1: no unstable pole has to cancel numerically
    fn, fd = channel.F.entries[0][0]
    PM = (cf.N @ RationalMatrix.diag([RationalMatrix.scalar(fd, fn)] * cf.N.cols)).simplified()
    return LoopData(P=P, channel=channel, G=G, cf=cf, FM=channel.F @ cf.M, PM=PM)


def _stack(top: RationalMatrix, bottom: RationalMatrix, eps: float) -> RationalMatrix:
    return RationalMatrix.vstack([top * np.sqrt(1.0 - eps), bottom * np.sqrt(eps)])


def _reference_realization(ld: LoopData, eps: float) -> Optional[StateSpace]:
    """Shared-state realization of [sqrt(1-eps) N; sqrt(eps) F M] (matrix plants)."""
    cf = ld.cf.realization
    if cf is None:
        return None
    Fc = ss_from(ld.channel.F)
    Af, Bf, Cf, Df = (np.real(x) for x in (Fc.A, Fc.B, Fc.C, Fc.E))
    n, nf = cf["AF"].shape[0], Af.shape[0]
    a, b = np.sqrt(1.0 - eps), np.sqrt(eps)
    A = np.block([[cf["AF"], np.zeros((n, nf))], [Bf @ cf["F"], Af]])
    B = np.vstack([cf["B"], Bf])
    C = np.block([[a * cf["CN"], np.zeros((cf["CN"].shape[0], nf))], [b * Df @ cf["F"], b * Cf]])
    E = np.vstack([a * cf["D"], b * Df])
    return StateSpace(A, B, C, E)


def _noise_realization(ld: LoopData, eps: float) -> Optional[StateSpace]:
    """Shared-state realization of [sqrt(1-eps) P M; sqrt(eps) M] with P M = N / f1.

    Needs a channel entry f1 = c / d(s) with constant numerator, so that
    N d(s) / c stays proper given the relative degree of N.
    """
    cf = ld.cf.realization
    if cf is None:
        return None
    fn, fd = ld.channel.F.entries[0][0]
    if fn.degree > 0:
        return None
    A, B, CN, D = cf["AF"], cf["B"], cf["CN"], cf["D"]
    coeffs = np.real(fd.coeffs) / float(np.real(fn.coeffs[0]))
    # N(s) s^k = CN A^k (sI-A)^-1 B + sum_i CN A^i B s^(k-1-i)  (D = 0 when k >= 1)
    Cpm = sum(c * CN @ np.linalg.matrix_power(A, k) for k, c in enumerate(coeffs))
    Epm = coeffs[0] * D
    scale = max(1.0, np.linalg.norm(CN) * np.linalg.norm(B))
    for k, c in enumerate(coeffs[1:], start=1):
        if c == 0:
            continue
        if np.linalg.norm(D) > 1e-9 * scale:
            return None
        for i in range(k - 1):
            if np.linalg.norm(CN @ np.linalg.matrix_power(A, i) @ B) > 1e-9 * scale * max(1.0, np.linalg.norm(A)) ** i:
                return None
        Epm = Epm + c * CN @ np.linalg.matrix_power(A, k - 1) @ B
    a, b = np.sqrt(1.0 - eps), np.sqrt(eps)
    q = B.shape[1]
    return StateSpace(A, B, np.vstack([a * Cpm, b * cf["F"]]), np.vstack([a * Epm, b * np.eye(q)]))


def _trace(G: RationalMatrix) -> RationalMatrix:
    acc = RationalMatrix.scalar([0.0], [1.0])
    for i in range(G.rows):
        n, d = G.entries[i][i]
        acc = acc + RationalMatrix.scalar(n, d)
    return acc


# --------------------------------------------------------------------------
# f(s) and the Poisson integral


def _relative_degree_at_infinity(fun, probe=1e5) -> int:
    a, b = abs(fun(1j * probe)), abs(fun(10j * probe))
    if a == 0.0 or b == 0.0:
        return 0
    return max(0, int(round(np.log10(a / b))))


def _interpolate_numerator(fun, den: Polynomial, excess: int = 0) -> Polynomial:
    """num with num/den = fun and deg num = deg den - excess, fitted on a circle enclosing den's roots."""
    n = den.degree
    m = max(n - excess, 0)
    rts = poly_roots(den) if n > 0 else np.array([])
    rho = 1.5 * max(1.0, float(np.max(np.abs(rts)))) if n > 0 else 1.0
    npts = 2 * (n + 1)
    k = np.arange(npts)
    pts = rho * np.exp(2j * np.pi * (k + 0.5) / npts)
    vals = np.array([fun(z) * den(z) for z in pts])
    # num(rho x) in the scaled variable: the sampled Vandermonde has orthogonal columns
    V = np.exp(2j * np.pi * np.outer(k + 0.5, np.arange(m + 1)) / npts)
    c = np.linalg.lstsq(V, vals, rcond=None)[0] / rho ** np.arange(m + 1)
    if np.max(np.abs(c.imag)) <= 1e-9 * max(np.max(np.abs(c)), 1e-300):
        c = c.real
    return Polynomial(c)


def _confirm_zero(fun, z, scale) -> bool:
    try:
        return abs(fun(z)) <= 1e-6 * scale
    except PoleEvaluation:
        return False


def build_f_function(N_m: RationalMatrix, Theta_o, sigma, epsilon) -> FZeroData:
    """f(s) = (1-eps) tr(U^T N_m(s) Theta_o^{-1}(s) Theta_o^{-H}(0) N_m^H(0) U).

    Theta_o may be an InnerOuterPair or the outer factor itself.  Scalar inputs
    are assembled by exact rational algebra.  For matrices f is evaluated
    pointwise from its factors and its rational form is interpolated over the
    union of the factor poles, which avoids cancelling near-common roots.
    """
    if not 0.0 <= epsilon < 1.0:
        raise DegenerateInput("epsilon must lie in [0, 1)")
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    UU = np.diag(sigma ** 2)
    Tinv = Theta_o.outer_inverse if isinstance(Theta_o, InnerOuterPair) else Theta_o.inv()
    T0 = N_m(0.0) @ (Theta_o.inverse_at(0.0) if isinstance(Theta_o, InnerOuterPair) else Tinv(0.0))
    K0 = (1.0 - epsilon) * (T0.conj().T @ UU)
    if N_m.shape == (1, 1) and Tinv.shape == (1, 1):
        f = _realify(_trace(N_m @ Tinv @ RationalMatrix.constant(K0)).simplified(), tol=1e-7)
        evaluate = None
    else:
        at = Theta_o.inverse_at if isinstance(Theta_o, InnerOuterPair) else Tinv

        def evaluate(s):
            return complex(np.trace(N_m(s) @ at(s) @ K0))

        den = _common_denominator([d for row in N_m.entries for _, d in row])
        if isinstance(Theta_o, InnerOuterPair) and Theta_o.core_inverse is not None:
            den = den * Polynomial.from_roots(np.linalg.eigvals(Theta_o.core_inverse.A))
        else:
            den = den * _common_denominator([d for row in Tinv.entries for _, d in row])
        if not den.is_real and np.max(np.abs(den.coeffs.imag)) <= 1e-9 * np.max(np.abs(den.coeffs)):
            den = Polynomial(den.coeffs.real)
        num = _interpolate_numerator(evaluate, den, _relative_degree_at_infinity(evaluate))
        f = _realify(RationalMatrix((((Polynomial(num.coeffs), den),),)), tol=1e-7)
    f0 = complex(evaluate(0.0) if evaluate is not None else f(0.0)[0, 0])
    target = float(np.sum(sigma ** 2))
    if abs(f0 - target) > F0_RTOL * target:
        raise ConsistencyFailure(f"f(0) = {f0} differs from sum sigma^2 = {target}")
    num, den = f.num, f.den
    cand = poly_roots(num) if num.degree > 0 else []
    zs = [complex(z) for z in cand if classify(z, 1e-7) == "rhp"]
    if evaluate is not None:
        zs = [z for z in zs if _confirm_zero(evaluate, z, target)]
    mnum = num
    for z in zs:
        q, _ = mnum.divmod(Polynomial([-z, 1.0]))
        # f / B_z with B_z = (conj z / z)(z - s)/(conj z + s)
        mnum = q * Polynomial([np.conj(z), 1.0]) * (-z / np.conj(z))
    f_m = _realify(RationalMatrix.scalar(mnum, den), tol=1e-7)
    return FZeroData(f=f, f0=float(f0.real), nmp_zeros=zs, f_m=f_m, evaluate=evaluate)


def _log_second_derivative(f: RationalMatrix) -> float:
    """(log f)''(0) from polynomial derivatives."""
    vals = []
    for p in (f.num, f.den):
        p0, p1, p2 = p(0.0), p.deriv()(0.0), p.deriv().deriv()(0.0)
        vals.append((p2 * p0 - p1 * p1) / (p0 * p0))
    return float(np.real(vals[0] - vals[1]))


def poisson_log_integral(fd: FZeroData, tol: float = QUAD_TOL) -> float:
    """(1/pi) * int_0^inf log|f(jw)/f(0)| / w^2 dw."""
    f = fd.f
    n, d = f.num, f.den
    f0 = abs(fd.f0)
    if f0 == 0.0:
        raise DegenerateInput("f(0) must be nonzero")
    if n.degree == 0 and d.degree == 0:
        return 0.0
    if fd.evaluate is None:
        guard, w_small = -0.5 * _log_second_derivative(f), 1e-4
    else:
        # pointwise f: below w_small use the quadratic model h(w) = c + d w^2
        # fitted at w_small and 2 w_small; rounding in f would swamp h there
        w_small = 1e-2
        guard = None

    def logmag(w):
        if fd.evaluate is not None:
            return np.log(abs(fd.evaluate(1j * w)) / f0)
        return np.log(abs(n(1j * w)) / abs(d(1j * w)) / f0)

    if guard is None:
        h1 = logmag(w_small) / w_small ** 2
        h2 = logmag(2 * w_small) / (2 * w_small) ** 2
        d2 = (h2 - h1) / (3 * w_small ** 2)
        c2 = h1 - d2 * w_small ** 2

    def head(w):
        if w < w_small:
            return guard if guard is not None else c2 + d2 * w * w
        return logmag(w) / (w * w)

    # reversed coefficients give n(jw) = (jw)^deg n_rev(1/(jw)) without overflow
    nr, dr = Polynomial(n.coeffs[::-1]), Polynomial(d.coeffs[::-1])
    excess = n.degree - d.degree

    def tail(t):
        # w = 1/t maps [1, inf) onto (0, 1]; the 1/w^2 weight cancels the Jacobian
        if t == 0.0:
            return -np.inf if excess < 0 else np.log(abs(nr(0.0) / dr(0.0)) / f0)
        if fd.evaluate is not None:
            return logmag(1.0 / t)
        return -excess * np.log(t) + np.log(abs(nr(-1j * t)) / abs(dr(-1j * t)) / f0)

    with warnings.catch_warnings():
        # quad warns when epsrel is below the integrand noise; the absolute error is checked below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        a, ea = integrate.quad(head, 0.0, w_small, epsabs=tol * 1e-2, epsrel=1e-12, limit=500)
        a2, ea2 = integrate.quad(head, w_small, 1.0, epsabs=tol * 1e-2, epsrel=1e-12, limit=500)
        b, eb = integrate.quad(tail, 0.0, 1.0, epsabs=tol * 1e-2, epsrel=1e-12, limit=500)
    a, ea = a + a2, ea + ea2
    err = ea + eb
    val = (a + b) / np.pi
    if not np.isfinite(val) or err / np.pi > tol:
        raise QuadratureFailure("log integral did not converge", val, err / np.pi)
    return float(val)


# --------------------------------------------------------------------------
# J_U


def _reference_part(ld: LoopData, epsilon, zero_order=None):
    ch = ld.channel
    N = ld.cf.N
    sig2 = ch.sigma ** 2
    if epsilon > 0 and np.linalg.norm(ld.FM(0.0)) > 1e-9:
        raise PreconditionViolated("channel input does not settle under a step reference: F M(0) != 0")
    chain = allpass_extract_zeros(N, "L", zero_order=zero_order)
    diags = []
    zero_term = 0.0
    for fct in chain.factors:
        z = fct.location
        cos2 = np.abs(fct.direction.conj()) ** 2
        diags.append(ZeroDiagnostic(z, fct.direction, cos2))
        zero_term += z.real / abs(z) ** 2 * float(np.sum(sig2 * cos2))
    zero_term *= 2.0 * (1.0 - epsilon)
    if epsilon >= 1.0:
        return zero_term, 0.0, 0.0, diags, None
    theta = inner_outer(_stack(N, ld.FM, epsilon), realization=_reference_realization(ld, epsilon))
    fd = build_f_function(chain.minimum_phase_part, theta, ch.sigma, epsilon)
    total = float(np.sum(sig2))
    szero = 2.0 * (1.0 - epsilon) * total * sum(z.real / abs(z) ** 2 for z in fd.nmp_zeros)
    logt = -2.0 * (1.0 - epsilon) * total * poisson_log_integral(fd)
    return zero_term, float(szero), float(logt), diags, fd


def ju_star(P: RationalMatrix, channel: ChannelModel, epsilon: float, pole: float = -1.0, zero_order=None):
    """Return (zero_direction_term, szero_term, log_integral_term, ju, diagnostics)."""
    if not 0.0 <= epsilon <= 1.0:
        raise DegenerateInput("epsilon must lie in [0, 1]")
    ld = loop_data(P, channel, pole)
    zt, st, lt, diags, _ = _reference_part(ld, epsilon, zero_order)
    ju = zt + st + lt
    if ju < -1e-9:
        raise NumericalInconsistency(f"negative J_U* = {ju}")
    return zt, st, lt, max(ju, 0.0), diags


# --------------------------------------------------------------------------
# J_V


def _check_collision(z, ld: LoopData):
    for p in ld.G.poles():
        if abs(z - p) <= COLLISION_TOL * max(1.0, abs(p)):
            raise EvaluationCollision(f"zero {z} coincides with plant pole {p}")


def _noise_residues(ld: LoopData, epsilon, Delta_o: RationalMatrix, zero_order=None):
    """Terms K_i with the antistable part of Delta_o Xt H V D^{-1} equal to sum K_i/(s - z_i)."""
    ch = ld.channel
    gam = ch.gamma
    if np.all(gam == 0):
        return [], []
    if np.any(gam == 0):
        if ld.G.shape != (1, 1):
            raise PreconditionViolated("noise intensities must be all zero or all positive")
    if ld.cf.Nt.rows != ld.cf.Nt.cols:
        raise PreconditionViolated("noise bound needs a square plant")
    K = ld.cf.Nt @ ch.H @ RationalMatrix.constant(ch.V)
    chain = allpass_extract_zeros(K, "D", zero_order=zero_order, side="right")
    terms = []
    for i, fct in enumerate(chain.factors):
        z = fct.location
        _check_collision(z, ld)
        try:
            left = Delta_o(z) @ ld.cf.Xt(z) @ ch.H(z) @ ch.V
        except PoleEvaluation as exc:
            raise EvaluationCollision(f"evaluation at zero {z} hit a pole") from exc
        terms.append(left @ chain.inverse_residue(i))
    return chain.locations, terms


def _hermitian_sum(zs, terms) -> float:
    tot = 0.0 + 0.0j
    for zi, Ki in zip(zs, terms):
        for zj, Kj in zip(zs, terms):
            tot += np.trace(Ki.conj().T @ Kj) / (np.conj(zi) + zj)
    if abs(tot.imag) > 1e-9 * max(1.0, abs(tot)):
        raise NumericalInconsistency(f"noise quadratic form has imaginary part {tot.imag}")
    return float(tot.real)


def _noise_outer(ld: LoopData, epsilon):
    PM = ld.PM
    if not PM.is_stable():
        raise NumericalInconsistency("P M kept an unstable pole after cancellation")
    if epsilon >= 1.0:
        # the stack is [0; M]: its outer factor is M with RHP zeros reflected, axis zeros kept.
        # Those zeros are the unstable poles of G; taking them from G keeps axis zeros out.
        zs = []
        for p in ld.G.poles():
            if classify(p) == "rhp" and all(abs(p - q) > 1e-6 * max(1.0, abs(q)) for q in zs):
                zs.append(complex(p))
        return _extract(ld.cf.M, "L", "left", zs)[1]
    return inner_outer(_stack(PM, ld.cf.M, epsilon), realization=_noise_realization(ld, epsilon)).outer_at


def jv_star(P: RationalMatrix, channel: ChannelModel, epsilon: float, pole: float = -1.0, zero_order=None) -> float:
    ld = loop_data(P, channel, pole)
    return _jv(ld, epsilon, zero_order)


def _jv(ld, epsilon, zero_order=None, Delta_o=None):
    if np.all(ld.channel.gamma == 0):
        return 0.0
    if Delta_o is None:
        Delta_o = _noise_outer(ld, epsilon)
    zs, terms = _noise_residues(ld, epsilon, Delta_o, zero_order)
    val = _hermitian_sum(zs, terms)
    if val < -1e-9:
        raise NumericalInconsistency(f"negative J_V* = {val}")
    return max(val, 0.0)


# --------------------------------------------------------------------------
# assembled bounds


def theorem1_jstar(P: RationalMatrix, channel: ChannelModel, epsilon: float, pole: float = -1.0,
                   zero_order=None, noise_zero_order=None) -> PerfBreakdown:
    if not 0.0 <= epsilon <= 1.0:
        raise DegenerateInput("epsilon must lie in [0, 1]")
    ld = loop_data(P, channel, pole)
    zt, st, lt, diags, _ = _reference_part(ld, epsilon, zero_order)
    ju = zt + st + lt
    if ju < -1e-9:
        raise NumericalInconsistency(f"negative J_U* = {ju}")
    ju = max(ju, 0.0)
    jv = _jv(ld, epsilon, noise_zero_order)
    return PerfBreakdown(epsilon, zt, st, lt, ju, jv, ju + jv, diags)


def corollary1_siso(P: RationalMatrix, channel: ChannelModel, epsilon: float, pole: float = -1.0) -> PerfBreakdown:
    """Scalar specialization: Blaschke residues written out through M^{-1}(z_i)."""
    if P.shape != (1, 1) or channel.F.shape != (1, 1):
        raise NotSISO("corollary 1 needs a scalar plant and channel")
    ld = loop_data(P, channel, pole)
    sig2 = float(channel.sigma[0] ** 2)
    gam = float(channel.gamma[0])
    zs = allpass_extract_zeros(ld.cf.N, "L").locations
    zt = 2.0 * (1.0 - epsilon) * sig2 * sum(z.real / abs(z) ** 2 for z in zs)
    if epsilon > 0 and abs(ld.FM(0.0)[0, 0]) > 1e-9:
        raise PreconditionViolated("channel input does not settle under a step reference: F M(0) != 0")
    st = lt = 0.0
    if epsilon < 1.0:
        theta = inner_outer(_stack(ld.cf.N, ld.FM, epsilon))
        # N_m = N / L with the scalar Blaschke product of the zeros
        Nm = _scalar_minimum_phase(ld.cf.N, zs)
        fd = build_f_function(Nm, theta, channel.sigma, epsilon)
        st = 2.0 * (1.0 - epsilon) * sig2 * sum(z.real / abs(z) ** 2 for z in fd.nmp_zeros)
        lt = -2.0 * (1.0 - epsilon) * sig2 * poisson_log_integral(fd)
    ju = max(zt + st + lt, 0.0)
    jv = 0.0
    if gam > 0:
        Delta_o = _noise_outer(ld, epsilon)
        K = ld.cf.Nt @ channel.H
        kz = [complex(z) for z in poly_roots(K.num) if classify(z) == "rhp"] if K.num.degree > 0 else []
        r = []
        for i, z in enumerate(kz):
            _check_collision(z, ld)
            prod = 1.0 + 0j
            for k, w in enumerate(kz):
                if k != i:
                    prod *= (z + np.conj(w)) / (z - w)
            Minv = 1.0 / ld.cf.M(z)[0, 0]
            r.append(Delta_o(z)[0, 0] * Minv * channel.H(z)[0, 0] * gam * 2.0 * z.real * prod)
        tot = sum(np.conj(ri) * rj / (np.conj(zi) + zj) for zi, ri in zip(kz, r) for zj, rj in zip(kz, r))
        jv = float(np.real(tot)) if kz else 0.0
        jv = max(jv, 0.0)
    return PerfBreakdown(epsilon, zt, st, lt, ju, jv, ju + jv, [])


def _scalar_minimum_phase(N: RationalMatrix, zs) -> RationalMatrix:
    n, d = N.num, N.den
    for z in zs:
        q, _ = n.divmod(Polynomial([-z, 1.0]))
        n = q * Polynomial([np.conj(z), 1.0]) * (-z / np.conj(z))
    return _realify(RationalMatrix.scalar(n, d), tol=1e-7)


def corollary2_awgn(P: RationalMatrix, sigma, gamma, epsilon: float, pole: float = -1.0) -> PerfBreakdown:
    """F = H = I: outer factor taken from the minimum-phase stack [sqrt(1-eps) N_m; sqrt(eps) M_m]."""
    size = P.cols
    ch = ChannelModel(RationalMatrix.identity(size), RationalMatrix.identity(size), sigma, gamma)
    ld = loop_data(P, ch, pole)
    Lchain = allpass_extract_zeros(ld.cf.N, "L")
    Mchain = allpass_extract_zeros(ld.cf.M, "L")
    Nm, Mm = Lchain.minimum_phase_part, Mchain.minimum_phase_part
    sig2 = ch.sigma ** 2
    zt = 0.0
    diags = []
    for fct in Lchain.factors:
        z = fct.location
        cos2 = np.abs(fct.direction.conj()) ** 2
        diags.append(ZeroDiagnostic(z, fct.direction, cos2))
        zt += z.real / abs(z) ** 2 * float(np.sum(sig2 * cos2))
    zt *= 2.0 * (1.0 - epsilon)
    if epsilon > 0 and np.linalg.norm(ld.cf.M(0.0)) > 1e-9:
        raise PreconditionViolated("channel input does not settle under a step reference: M(0) != 0")
    st = lt = 0.0
    lam = None
    if epsilon < 1.0:
        lam = inner_outer(_stack(Nm, Mm, epsilon))
        fd = build_f_function(Nm, lam, ch.sigma, epsilon)
        total = float(np.sum(sig2))
        st = 2.0 * (1.0 - epsilon) * total * sum(z.real / abs(z) ** 2 for z in fd.nmp_zeros)
        lt = -2.0 * (1.0 - epsilon) * total * poisson_log_integral(fd)
    ju = max(zt + st + lt, 0.0)
    jv = _jv(ld, epsilon, Delta_o=lam.outer_at if lam is not None else None)
    return PerfBreakdown(epsilon, zt, st, lt, ju, jv, ju + jv, diags)


def corollary3_noise_free(P: RationalMatrix, channel_F: RationalMatrix, sigma, epsilon: float,
                          gamma=None, pole: float = -1.0) -> PerfBreakdown:
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    q = channel_F.rows
    if gamma is not None and np.any(np.asarray(gamma) != 0):
        raise PreconditionViolated("noise-free bound requires gamma = 0")
    ch = ChannelModel(channel_F, RationalMatrix.identity(q), sigma, np.zeros(q))
    zt, st, lt, ju, diags = ju_star(P, ch, epsilon, pole)
    return PerfBreakdown(epsilon, zt, st, lt, ju, 0.0, ju, diags)
