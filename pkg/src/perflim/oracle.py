"""Independent upper bounds on J: exact index evaluation, finite-basis optimization, simulation.

Q and R are searched over
    Q = Q0 + s * sum_i D_i l_i,      R = R_0 + sum_i R_i l_i
with l_0..l_{m-1} the orthonormal Laguerre functions of pole lam.  The span of
{s l_i} plus Q0 equals {sum_j c_j (lam/(s+lam))^j : Q(0) = Q0}, and {1, l_i}
spans {(lam/(s+lam))^j, j = 0..m}.  Orthonormal coordinates keep the Gram
matrix well conditioned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .core_algebra import (
    RationalMatrix,
    StateSpace,
    gram_of_outputs,
    ss_add,
    ss_dc_gain,
    ss_from,
    ss_gain,
    ss_hstack,
    ss_inv,
    ss_kron_eye,
    ss_series,
    ss_times_s_over,
)
from .errors import (
    DegenerateInput,
    IllConditionedBasis,
    NotH2Admissible,
    NotInH2,
    PreconditionViolated,
    UnstableSimulation,
)
from .perf_limits import ChannelModel, LoopData, loop_data, theorem1_jstar

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
DC_TOL = 1e-9

System = Union[RationalMatrix, StateSpace]


# --------------------------------------------------------------------------
# Laguerre basis


def laguerre_column(m: int, lam: float) -> StateSpace:
    """Column [l_0; ...; l_{m-1}] with l_k = sqrt(2 lam)/(s+lam) ((s-lam)/(s+lam))^k."""
    A = np.zeros((m, m))
    b = np.zeros((m, 1))
    C = np.zeros((m, m))
    A[0, 0] = -lam
    b[0, 0] = np.sqrt(2 * lam)
    C[0, 0] = 1.0
    for k in range(1, m):
        # stage k: x_k' = -lam x_k + y_{k-1};  y_k = y_{k-1} - 2 lam x_k
        A[k, :] += C[k - 1, :]
        A[k, k] -= lam
        C[k, :] = C[k - 1, :]
        C[k, k] -= 2 * lam
    return StateSpace(A, b, C, np.zeros((m, 1)))


def laguerre_row(m: int, lam: float, constant: bool = False) -> StateSpace:
    """Row [l_0 ... l_{m-1}] (optionally led by the constant 1) as an m-input system."""
    col = laguerre_column(m, lam)
    B = col.C.T
    E = np.zeros((1, m))
    if constant:
        B = np.hstack([np.zeros((m, 1)), B])
        E = np.hstack([np.ones((1, 1)), E])
    return StateSpace(col.A.T, B, col.B.T, E)


def _s_times_column(m: int, lam: float) -> StateSpace:
    """Column [s l_0; ...]: C(sI-A)^-1 B s = C B + C A (sI-A)^-1 B."""
    col = laguerre_column(m, lam)
    return StateSpace(col.A, col.B, col.C @ col.A, col.C @ col.B)


def _column_with_constant(m: int, lam: float) -> StateSpace:
    col = laguerre_column(m, lam)
    C = np.vstack([np.zeros((1, m)), col.C])
    E = np.vstack([np.ones((1, 1)), np.zeros((m, 1))])
    return StateSpace(col.A, col.B, C, E)


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class YoulaParameter:
    """Q = Q0 + Dq (I_p (x) s l(s)),  R = Dr (I_p (x) [1; l(s)])."""

    lam: float
    m: int
    Q0: np.ndarray
    Dq: np.ndarray  # q x (p m), column (b, i) = D_i e_b
    Dr: np.ndarray  # q x (p (m+1)), column (b, i) = R_i e_b

    def Q(self) -> StateSpace:
        p = self.Q0.shape[1]
        base = ss_kron_eye(_s_times_column(self.m, self.lam), p)
        sys = ss_gain(base, left=self.Dq)
        return StateSpace(sys.A, sys.B, sys.C, sys.E + self.Q0)

    def R(self) -> StateSpace:
        p = self.Q0.shape[1]
        base = ss_kron_eye(_column_with_constant(self.m, self.lam), p)
        return ss_gain(base, left=self.Dr)


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    stderr: float
    runs: int
    horizon: float
    step: float
    seed: int


@dataclass(frozen=True)
class OracleResult:
    j_value: float
    j_u: float
    j_v: float
    m: int
    lam: float
    closed_form: Optional[float]
    gap: Optional[float]
    parameter: YoulaParameter
    gram_condition: tuple
    monte_carlo: Optional[MonteCarloResult] = None


# --------------------------------------------------------------------------
# block maps


def _sqrt_weights(eps):
    return np.sqrt(1.0 - eps), np.sqrt(eps)


def _ref_map(ld: LoopData, eps) -> StateSpace:
    """T = [-sqrt(1-eps) N; sqrt(eps) F M]; then [sqrt(1-eps) I; 0] + T Q is the reference block."""
    a, b = _sqrt_weights(eps)
    return ss_from(RationalMatrix.vstack([ld.cf.N * (-a), ld.FM * b]))


def _noise_weight(ld: LoopData, eps) -> StateSpace:
    a, b = _sqrt_weights(eps)
    PM = ld.PM
    if not PM.is_stable():
        raise PreconditionViolated("P M is not stable after cancellation")
    return ss_from(RationalMatrix.vstack([PM * a, ld.cf.M * b]))


def _with_constant(ss: StateSpace, K) -> StateSpace:
    return StateSpace(ss.A, ss.B, ss.C, ss.E + K)


def _h2sq(ss: StateSpace, what: str) -> float:
    if np.max(np.abs(ss.E), initial=0.0) > 1e-12:
        raise NotInH2(f"{what} has a feedthrough term", 0)
    if ss.A.shape[0] == 0:
        return 0.0
    if np.max(np.linalg.eigvals(ss.A).real) >= 0:
        raise NotInH2(f"{what} is not stable", None)
    return float(np.real(np.trace(gram_of_outputs(ss))))


def _reference_block(ld: LoopData, eps, Q: StateSpace) -> StateSpace:
    p = ld.P.rows
    top = np.vstack([np.sqrt(1.0 - eps) * np.eye(p), np.zeros((ld.FM.rows, p))])
    Z = _with_constant(ss_series(Q, _ref_map(ld, eps)), top)
    return ss_gain(Z, right=ld.channel.U)


def j_of_parameters(P: RationalMatrix, channel: ChannelModel, epsilon: float, Q: System, R: System,
                    pole: float = -1.0, ld: Optional[LoopData] = None):
    """Exact (J_U, J_V, J) of the loop with Youla parameters (Q, R)."""
    ld = ld or loop_data(P, channel, pole)
    Q, R = ss_from(Q), ss_from(R)
    Z = _reference_block(ld, epsilon, Q)
    if np.max(np.abs(ss_dc_gain(Z))) > DC_TOL * max(1.0, np.max(np.abs(ss_dc_gain(ss_gain(Q, right=channel.U))))):
        raise NotH2Admissible("tracking constraint violated: the reference block does not vanish at s = 0")
    ju = _h2sq(ss_times_s_over(Z), "reference block") if Z.A.shape[0] else 0.0
    if np.all(channel.gamma == 0):
        return ju, 0.0, ju
    K = ss_from(ld.cf.Nt @ channel.H @ RationalMatrix.constant(channel.V))
    XHV = ss_from(ld.cf.Xt @ channel.H @ RationalMatrix.constant(channel.V))
    inner = ss_add(XHV, ss_gain(ss_series(K, R), left=-np.eye(R.E.shape[0])))
    jv = _h2sq(ss_series(inner, _noise_weight(ld, epsilon)), "noise block")
    return ju, jv, ju + jv


# --------------------------------------------------------------------------
# finite-basis optimization


def _solve_gram(G, h, what):
    G = 0.5 * (G + G.T)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedBasis(f"{what} Gram matrix condition {cond:.3e} exceeds {COND_LIMIT:.0e}; "
                                  "use a smaller m or a different lambda")
    c, low = linalg.cho_factor(G)
    return linalg.cho_solve((c, low), h), cond


def _reference_problem(ld: LoopData, eps, m, lam):
    """Per reference column b: min || g_b + Phi theta_b ||, Phi = T (I_q (x) row)."""
    N0 = ld.cf.N(0.0).real
    p, q = N0.shape
    Q0 = np.linalg.pinv(N0)
    T = _ref_map(ld, eps)
    Phi = ss_series(ss_kron_eye(laguerre_row(m, lam), q), T)
    top = np.vstack([np.sqrt(1.0 - eps) * np.eye(p), np.zeros((T.E.shape[0] - p, p))])
    Z0 = _with_constant(ss_gain(T, right=Q0), top)
    if np.max(np.abs(ss_dc_gain(Z0))) > 1e-8:
        raise NotH2Admissible("step reference cannot be tracked: N(0) Q0 != I or F M(0) != 0")
    g = ss_times_s_over(Z0)
    full = ss_hstack(Phi, g)
    W = np.real(gram_of_outputs(full))
    k = q * m
    G, H, t = W[:k, :k], W[:k, k:], np.diag(W[k:, k:])
    theta, cond = _solve_gram(G, -H, "reference")
    sig2 = ld.channel.sigma ** 2
    vals = t + np.einsum("kb,kb->b", H, theta)
    ju = float(np.sum(sig2 * vals))
    # Dq column (b, i) collects D_i e_b = theta[k*m + i, b] over k
    Dq = np.zeros((q, p * m))
    for b in range(p):
        for i in range(m):
            Dq[:, b * m + i] = theta[np.arange(q) * m + i, b]
    return max(ju, 0.0), Q0, Dq, cond


def _noise_problem(ld: LoopData, eps, m, lam):
    """Shared R over noise columns c: min sum_c || g_c - Phi_c theta ||."""
    ch = ld.channel
    p, q = ld.P.shape
    K = ld.cf.Nt @ ch.H @ RationalMatrix.constant(ch.V)
    Wt = _noise_weight(ld, eps)
    row1 = laguerre_row(m, lam, constant=True)
    k = q * p * (m + 1)
    Gsum = np.zeros((k, k))
    hsum = np.zeros(k)
    tsum = 0.0
    for c in range(K.cols):
        Kc = ss_from(K.block(cols=[c]).transpose())  # 1 x p
        h_c = ss_series(ss_kron_eye(row1, p), Kc)
        Phi = ss_series(ss_kron_eye(h_c, q), Wt)
        g = ss_series(ss_from(ld.cf.Xt @ ch.H @ RationalMatrix.constant(ch.V[:, [c]])), Wt)
        for part, what in ((Phi, "noise features"), (g, "noise target")):
            if np.max(np.abs(part.E), initial=0.0) > 1e-12:
                raise NotInH2(f"{what} are not strictly proper", 0)
        W = np.real(gram_of_outputs(ss_hstack(Phi, g)))
        Gsum += W[:k, :k]
        hsum += W[:k, k]
        tsum += W[k, k]
    theta, cond = _solve_gram(Gsum, hsum, "noise")
    jv = float(tsum - hsum @ theta)
    # theta index (a, b, i) -> a * p (m+1) + b (m+1) + i;  Dr column (b, i)
    Dr = theta.reshape(q, p * (m + 1))
    return max(jv, 0.0), Dr, cond


def optimize_finite_basis(P: RationalMatrix, channel: ChannelModel, epsilon: float, m: int, lam: float = 1.0,
                          pole: float = -1.0, closed_form: Optional[float] = None,
                          compare: bool = True) -> OracleResult:
    """Minimize J over m-term Laguerre expansions of Q and R (a linear least-squares problem)."""
    if m < 1 or lam <= 0:
        raise DegenerateInput("need m >= 1 and lam > 0")
    ld = loop_data(P, channel, pole)
    ju, Q0, Dq, cu = _reference_problem(ld, epsilon, m, lam)
    q, p = Q0.shape
    if np.all(channel.gamma == 0):
        jv, Dr, cv = 0.0, np.zeros((q, p * (m + 1))), 1.0
    else:
        jv, Dr, cv = _noise_problem(ld, epsilon, m, lam)
    if closed_form is None and compare:
        closed_form = theorem1_jstar(P, channel, epsilon, pole).j_star
    j = ju + jv
    gap = None if closed_form is None else j - closed_form
    param = YoulaParameter(lam, m, Q0, Dq, Dr)
    return OracleResult(j, ju, jv, m, lam, closed_form, gap, param, (cu, cv))


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class _Loop:
    A: np.ndarray  # closed-loop drift over z = [x, r]
    G: np.ndarray  # diffusion for [dW_r, dW_n]
    Ce: np.ndarray  # tracking error r - y
    Cv: np.ndarray  # plant input v = F u + H n
    nr: int
    nn: int


def _closed_loop(ld: LoopData, Q: StateSpace, R: StateSpace) -> _Loop:
    """Linear SDE of the two-parameter loop.

    Controller: X~ u = Q r + (Y~ - R M~) y + R N~ u, realized with X~^{-1}.
    Channel: v = F u + H n, y = P v.
    """
    ch = ld.channel
    blocks = {
        "P": ss_from(ld.P),
        "F": ss_from(ch.F),
        "H": ss_from(ch.H),
        "Q": Q,
        "Y": ss_add(ss_from(ld.cf.Yt), ss_gain(ss_series(ss_from(ld.cf.Mt), R), left=-np.eye(R.E.shape[0]))),
        "RN": ss_series(ss_from(ld.cf.Nt), R),
        "Xi": ss_inv(ss_from(ld.cf.Xt)),
    }
    if np.max(np.abs(blocks["H"].E), initial=0.0) > 0:
        raise PreconditionViolated("white noise reaches the plant input directly: H must be strictly proper")
    names = list(blocks)
    sizes = [blocks[k].A.shape[0] for k in names]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    nx = int(offs[-1])
    p, q = ld.P.shape
    nr, nn = p, ch.gamma.size
    nz = nx + nr
    # signals s = [u (q), v (q), y (p), w (q)] as affine maps of z and n
    su, sv, sy, sw = slice(0, q), slice(q, 2 * q), slice(2 * q, 2 * q + p), slice(2 * q + p, 3 * q + p)
    ns = 3 * q + p
    Ms = np.zeros((ns, ns))
    Sz = np.zeros((ns, nz))
    Sn = np.zeros((ns, nn))

    def xs(name):
        i = names.index(name)
        return slice(int(offs[i]), int(offs[i + 1]))

    rz = slice(nx, nz)
    b = blocks
    # v = F(u) + H(n)
    Sz[sv, xs("F")] += b["F"].C
    Ms[sv, su] += b["F"].E
    Sz[sv, xs("H")] += b["H"].C
    # y = P(v)
    Sz[sy, xs("P")] += b["P"].C
    Ms[sy, sv] += b["P"].E
    # w = Q(r) + Y(y) + RN(u)
    Sz[sw, xs("Q")] += b["Q"].C
    Sz[sw, rz] += b["Q"].E
    Sz[sw, xs("Y")] += b["Y"].C
    Ms[sw, sy] += b["Y"].E
    Sz[sw, xs("RN")] += b["RN"].C
    Ms[sw, su] += b["RN"].E
    # u = Xi(w)
    Sz[su, xs("Xi")] += b["Xi"].C
    Ms[su, sw] += b["Xi"].E
    Minv = np.linalg.inv(np.eye(ns) - Ms)
    Lz, Ln = Minv @ Sz, Minv @ Sn
    A = np.zeros((nz, nz))
    Gn = np.zeros((nz, nn))

    def drive(name, sig):
        blk = b[name]
        if sig == "n":
            Gn[xs(name)] += blk.B
            return
        A[xs(name)] += blk.B @ Lz[sig]

    for name in names:
        A[xs(name), xs(name)] += np.real(b[name].A)
    drive("F", su)
    drive("H", "n")
    drive("P", sv)
    A[xs("Q"), rz] += b["Q"].B
    drive("Y", sy)
    drive("RN", su)
    drive("Xi", sw)
    Gfull = np.zeros((nz, nr + nn))
    Gfull[rz, :nr] = ch.U
    Gfull[:, nr:] = Gn @ ch.V
    Ce = -Lz[sy].copy()
    Ce[:, rz] += np.eye(nr)
    return _Loop(np.real(A), np.real(Gfull), np.real(Ce), np.real(Lz[sv]), nr, nn)


def monte_carlo_j(P: RationalMatrix, channel: ChannelModel, Q: System, R: System, horizon: float, dt: float,
                  runs: int, seed: int, epsilon: float = 0.5, pole: float = -1.0, batch: int = 50,
                  burn_in: Optional[float] = None) -> MonteCarloResult:
    """Time-averaged index over Euler-Maruyama paths of the closed loop.

    Runs are drawn in fixed batches, each batch seeded by its own spawned
    SeedSequence child, so a given (seed, runs) is reproducible bit for bit.
    """
    ld = loop_data(P, channel, pole)
    loop = _closed_loop(ld, ss_from(Q), ss_from(R))
    nz = loop.A.shape[0]
    eig = np.linalg.eigvals(loop.A[: nz - loop.nr, : nz - loop.nr])
    if eig.size and np.max(eig.real) >= 0:
        raise UnstableSimulation("closed loop is not stable")
    fastest = float(np.max(np.abs(eig))) if eig.size else 0.0
    if dt * fastest > 0.1:
        raise PreconditionViolated(f"dt * fastest pole = {dt * fastest:.3g} exceeds 0.1")
    burn = min(20.0, horizon / 10.0) if burn_in is None else burn_in
    steps = int(round(horizon / dt))
    start = int(round(burn / dt))
    if steps <= start:
        raise DegenerateInput("horizon shorter than burn-in")
    Ad = np.eye(nz) + dt * loop.A
    AdT = Ad.T
    Gs = np.sqrt(dt) * loop.G
    GT = Gs.T
    CeT, CvT = loop.Ce.T, loop.Cv.T
    we, wv = 1.0 - epsilon, epsilon
    nb = (runs + batch - 1) // batch
    children = np.random.SeedSequence(seed).spawn(nb)
    per_run = []
    for bi in range(nb):
        k = min(batch, runs - bi * batch)
        rng = np.random.default_rng(children[bi])
        z = np.zeros((k, nz))
        acc = np.zeros(k)
        for step in range(steps):
            xi = rng.standard_normal((k, GT.shape[0]))
            z = z @ AdT + xi @ GT
            if step >= start:
                e = z @ CeT
                v = z @ CvT
                acc += we * np.einsum("ij,ij->i", e, e) + wv * np.einsum("ij,ij->i", v, v)
            if step % 1000 == 0 and np.max(np.abs(z)) > 1e9:
                raise UnstableSimulation(f"state norm exceeded 1e9 at t = {step * dt:.3g}")
        per_run.append(acc / (steps - start))
    vals = np.concatenate(per_run)
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(runs)) if runs > 1 else float("nan")
    return MonteCarloResult(est, se, runs, horizon, dt, seed)
