"""Coprime, allpass, inner-outer and partial-fraction factorizations."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, signal

from .core_algebra import (
    Polynomial,
    RationalMatrix,
    StateSpace,
    classify,
    laurent_leading,
    left_null_direction,
    poly_roots,
    right_null_direction,
    simplify,
    ss_from,
    ss_inv,
    ss_minimal,
    ss_series,
    transmission_zeros,
)
from .errors import (
    ConjugacyViolation,
    ConsistencyFailure,
    DegenerateInput,
    ExpansionSingular,
    ImproperPlant,
    NoStabilizingSolution,
    NotAPole,
    NotSimplePole,
    NotStabilizable,
    PoleEvaluation,
    RepeatedNMPZeros,
    SpectralFactorizationSingular,
)

log = logging.getLogger(__name__)

ONE = Polynomial([1.0])


# --------------------------------------------------------------------------
# coprime factorization


@dataclass(frozen=True)
class CoprimeData:
    N: RationalMatrix
    M: RationalMatrix
    Nt: RationalMatrix
    Mt: RationalMatrix
    X: RationalMatrix
    Y: RationalMatrix
    Xt: RationalMatrix
    Yt: RationalMatrix
    # matrix path only: shared realization, N = (AF, B, CN, D) and M = (AF, B, F, I)
    realization: Optional[dict] = None

    def bezout_residual(self, s) -> float:
        """Norm of [Xt -Yt; -Nt Mt][M Y; N X] - I at s."""
        left = np.block([[self.Xt(s), -self.Yt(s)], [-self.Nt(s), self.Mt(s)]])
        right = np.block([[self.M(s), self.Y(s)], [self.N(s), self.X(s)]])
        return float(np.linalg.norm(left @ right - np.eye(left.shape[0])))

    def factor_residual(self, P: RationalMatrix, s) -> float:
        Ps = P(s)
        r1 = Ps - self.N(s) @ np.linalg.inv(self.M(s))
        r2 = Ps - np.linalg.solve(self.Mt(s), self.Nt(s))
        return float(max(np.linalg.norm(r1), np.linalg.norm(r2)) / max(np.linalg.norm(Ps), 1.0))


def _is_stable_plant(P: RationalMatrix) -> bool:
    return P.is_stable()


def _siso_coprime(P: RationalMatrix, pole: float) -> CoprimeData:
    num, den = P.num, P.den
    n = den.degree
    d = Polynomial([-pole, 1.0]) ** n
    N = RationalMatrix.scalar(num, d)
    M = RationalMatrix.scalar(den, d)
    # x*den - y*num = d*d with deg x = n, deg y = n-1
    target = (d * d).coeffs
    size = 2 * n + 1
    Acols = []
    for i in range(n + 1):
        e = np.zeros(i + 1)
        e[i] = 1.0
        c = np.convolve(e, den.coeffs)
        Acols.append(np.pad(c, (0, size - len(c)))[:size])
    for i in range(n):
        e = np.zeros(i + 1)
        e[i] = 1.0
        c = -np.convolve(e, num.coeffs)
        Acols.append(np.pad(c, (0, max(0, size - len(c))))[:size])
    Amat = np.array(Acols).T
    rhs = np.pad(target, (0, size - len(target)))
    sol = np.linalg.solve(Amat, rhs)
    x, y = Polynomial(sol[: n + 1]), Polynomial(sol[n + 1:])
    X = RationalMatrix.scalar(x, d)
    Y = RationalMatrix.scalar(y, d)
    return CoprimeData(N=N, M=M, Nt=N, Mt=M, X=X, Y=Y, Xt=X, Yt=Y)


def _place(A, B, poles):
    try:
        with warnings.catch_warnings():
            # YT reports when its robustness refinement stalls; placement itself is checked below
            warnings.simplefilter("ignore", UserWarning)
            res = signal.place_poles(A, B, poles, method="YT")
    except Exception as exc:  # scipy raises ValueError for uncontrollable pairs
        raise NotStabilizable(f"pole placement failed: {exc}") from exc
    K = res.gain_matrix
    got = np.sort(np.linalg.eigvals(A - B @ K).real)
    if np.max(got) >= 0:
        raise NotStabilizable("pole placement did not stabilize")
    return K


def _shifted_balance(ss: StateSpace):
    """Similarity to the balanced basis of the shifted system (A - a I, B, C), a past every pole.

    Entrywise realizations come out badly scaled (|B| ~ 0.1 against |C| ~ 1e2),
    which made the stabilizing gains, and the factors, needlessly large.
    """
    A, B, C, D = ss.A.real, ss.B.real, ss.C.real, ss.E.real
    n = A.shape[0]
    a = max(float(np.max(np.linalg.eigvals(A).real)), 0.0) + 1.0
    As = A - a * np.eye(n)
    try:
        Lc = linalg.cholesky(linalg.solve_continuous_lyapunov(As, -B @ B.T), lower=True)
        Lo = linalg.cholesky(linalg.solve_continuous_lyapunov(As.T, -C.T @ C), lower=True)
    except linalg.LinAlgError:
        return A, B, C, D
    U, sv, Vt = linalg.svd(Lo.T @ Lc)
    S = np.diag(sv ** -0.5)
    T, Ti = Lc @ Vt.T @ S, S @ U.T @ Lo.T
    return Ti @ A @ T, Ti @ B, C @ T, D


def _partial_place(A, B, pole: float):
    """Gain K moving only the modes of A with Re >= 0, to pole, pole-1, ...

    Ordered real Schur form puts the stable block first; with K = [0 K2] Z^T
    the closed loop stays block triangular, so the stable modes and their
    eigenvectors are untouched and the gain is as small as the unstable part
    requires.  Placing every mode cost up to 1e-6 in the Bezout identity.
    """
    n = A.shape[0]
    T, Z, k_stable = linalg.schur(A, output="real", sort=lambda re, im: re < -1e-6 * max(1.0, abs(complex(re, im))))
    k = n - k_stable
    if k == 0:
        return np.zeros((B.shape[1], n))
    keep = np.linalg.eigvals(T[:k_stable, :k_stable]) if k_stable else np.array([])
    targets, j = [], 0
    while len(targets) < k:
        c = pole - j
        j += 1
        if all(abs(c - e) > 0.05 for e in keep):
            targets.append(c)
    B2 = (Z.T @ B)[k_stable:]
    A22 = T[k_stable:, k_stable:]
    if k == 1:
        # scalar block: least-norm gain
        b = B2[0]
        if np.linalg.norm(b) <= 1e-12 * max(1.0, np.linalg.norm(B)):
            raise NotStabilizable("an unstable mode is not controllable")
        K2 = (b / (b @ b))[:, None] * (A22[0, 0] - targets[0])
    else:
        K2 = _place(A22, B2, np.array(targets, dtype=float))
    K = np.zeros((B.shape[1], n))
    K[:, k_stable:] = K2
    return K @ Z.T


def _mimo_coprime(P: RationalMatrix, pole: float) -> CoprimeData:
    A, B, C, D = _shifted_balance(ss_minimal(P.to_state_space()))
    n = A.shape[0]
    p, q = D.shape
    K = _partial_place(A, B, pole)
    Lt = _partial_place(A.T, C.T, pole)
    F, L = -K, -Lt.T
    AF, AL = A + B @ F, A + L @ C
    if np.max(np.linalg.eigvals(AF).real) >= 0 or np.max(np.linalg.eigvals(AL).real) >= 0:
        raise NotStabilizable("unstable modes are not controllable/observable")
    rm = RationalMatrix.from_state_space
    M = rm(AF, B, F, np.eye(q))
    N = rm(AF, B, C + D @ F, D)
    U = rm(AF, L, F, np.zeros((q, p)))
    V = rm(AF, -L, C + D @ F, np.eye(p))
    Vt = rm(AL, -(B + L @ D), F, np.eye(q))
    Ut = rm(AL, L, F, np.zeros((q, p)))
    Nt = rm(AL, B + L @ D, C, D)
    Mt = rm(AL, L, C, np.eye(p))
    real = {"AF": AF, "B": B, "CN": C + D @ F, "D": D, "F": F}
    return CoprimeData(N=N, M=M, Nt=Nt, Mt=Mt, X=V, Y=-U, Xt=Vt, Yt=-Ut, realization=real)


def _identity_coprime(P: RationalMatrix) -> CoprimeData:
    p, q = P.shape
    return CoprimeData(
        N=P, M=RationalMatrix.identity(q), Nt=P, Mt=RationalMatrix.identity(p),
        X=RationalMatrix.identity(p), Y=RationalMatrix.constant(np.zeros((q, p))),
        Xt=RationalMatrix.identity(q), Yt=RationalMatrix.constant(np.zeros((q, p))),
    )


def coprime_factorize(P: RationalMatrix, pole: float = -1.0) -> CoprimeData:
    """Right/left coprime factors with the double Bezout identity.

    Stable plants get the trivial factorization M = I.  Scalar plants use the
    polynomial route with synthetic poles at ``pole``; matrices use observer
    based formulas with poles at pole, pole-1, ...
    """
    if not P.is_proper():
        raise ImproperPlant("plant must be proper")
    if _is_stable_plant(P):
        return _identity_coprime(P)
    if P.shape == (1, 1):
        return _siso_coprime(P, pole)
    return _mimo_coprime(P, pole)


# --------------------------------------------------------------------------
# allpass chains

VARIANTS = ("L", "Lhat", "Btilde", "D")


def _blaschke(variant, z):
    """(num, den) of the scalar block of one factor."""
    zc = np.conj(z)
    if variant == "L":
        return Polynomial([z, -1.0]) * (zc / z), Polynomial([zc, 1.0])
    return Polynomial([-z, 1.0]), Polynomial([zc, 1.0])


def _inv_residue(variant, z):
    """Residue at z of the reciprocal scalar block."""
    if variant == "L":
        return -2 * z.real * z / np.conj(z)
    return 2 * z.real


def _inv_excess(variant, z):
    """c(s) with 1/b(s) - 1 = c(s)/(s - z)."""
    if variant == "L":
        return Polynomial([0.0, -2 * z.real / np.conj(z)])
    return Polynomial([2 * z.real])


@dataclass(frozen=True)
class AllpassFactor:
    location: complex
    direction: np.ndarray
    completion: np.ndarray
    variant: str
    trivial: bool = False  # imaginary-axis location: the factor is the identity

    def scalar(self, s):
        if self.trivial:
            return 1.0
        n, d = _blaschke(self.variant, self.location)
        return n(s) / d(s)

    def __call__(self, s):
        k = self.direction.size
        if self.trivial:
            return np.eye(k, dtype=complex)
        e = self.direction.reshape(-1, 1)
        return np.eye(k) + (self.scalar(s) - 1.0) * (e @ e.conj().T)

    def inv(self, s):
        k = self.direction.size
        if self.trivial:
            return np.eye(k, dtype=complex)
        e = self.direction.reshape(-1, 1)
        return np.eye(k) + (1.0 / self.scalar(s) - 1.0) * (e @ e.conj().T)

    def inv_residue(self):
        k = self.direction.size
        if self.trivial:
            return np.zeros((k, k), dtype=complex)
        e = self.direction.reshape(-1, 1)
        return _inv_residue(self.variant, self.location) * (e @ e.conj().T)

    def unitary(self):
        return np.hstack([self.direction.reshape(-1, 1), self.completion])

    def as_rational(self) -> RationalMatrix:
        k = self.direction.size
        if self.trivial:
            return RationalMatrix.identity(k)
        n, d = _blaschke(self.variant, self.location)
        e = self.direction
        rows = []
        for i in range(k):
            row = []
            for j in range(k):
                w = e[i] * np.conj(e[j])
                num = (n - d) * w + (d if i == j else Polynomial([0.0]))
                row.append(simplify(num, d))
            rows.append(tuple(row))
        return RationalMatrix(tuple(rows))


@dataclass(frozen=True)
class AllpassChain:
    """Factors in extraction order.

    side == "left":  G = F_1 F_2 ... F_n * mp
    side == "right": G = mp * F_n ... F_2 F_1
    """

    factors: list
    variant: str
    side: str
    minimum_phase_part: RationalMatrix
    size: int

    @property
    def locations(self):
        return [f.location for f in self.factors]

    def product(self, s):
        out = np.eye(self.size, dtype=complex)
        seq = self.factors if self.side == "left" else self.factors[::-1]
        for f in seq:
            out = out @ f(s)
        return out

    def inverse(self, s):
        out = np.eye(self.size, dtype=complex)
        seq = self.factors[::-1] if self.side == "left" else self.factors
        for f in seq:
            out = out @ f.inv(s)
        return out

    def reconstruct(self, s):
        mp = self.minimum_phase_part(s)
        return self.product(s) @ mp if self.side == "left" else mp @ self.product(s)

    def inverse_residue(self, i):
        """Residue of the chain inverse at the i-th location (order-correct cross products)."""
        z = self.factors[i].location
        n = len(self.factors)
        seq = self.factors[::-1] if self.side == "left" else self.factors
        k = n - 1 - i if self.side == "left" else i
        out = np.eye(self.size, dtype=complex)
        for j, f in enumerate(seq):
            out = out @ (f.inv_residue() if j == k else f.inv(z))
        return out


def _complete(direction):
    e = direction.reshape(1, -1).conj()
    return linalg.null_space(e)


def _order_zeros(zs, zero_order=None):
    if zero_order is not None:
        out = []
        pool = list(zs)
        for z in zero_order:
            k = int(np.argmin([abs(w - z) for w in pool]))
            if abs(pool[k] - z) > 1e-6 * max(1.0, abs(z)):
                raise DegenerateInput(f"requested zero {z} is not a zero of the input")
            out.append(pool.pop(k))
        if pool:
            raise DegenerateInput("zero_order must list every right-half-plane zero")
        return out
    zs = sorted(zs, key=lambda z: (round(abs(z), 9), round(float(np.angle(z)), 9)))
    # keep conjugate partners consecutive
    out, used = [], [False] * len(zs)
    for i, z in enumerate(zs):
        if used[i]:
            continue
        used[i] = True
        out.append(z)
        if abs(z.imag) > 0:
            for j in range(i + 1, len(zs)):
                if not used[j] and abs(zs[j] - np.conj(z)) <= 1e-6 * max(1.0, abs(z)):
                    used[j] = True
                    out.append(zs[j])
                    break
    return out


def _check_conjugacy(G: RationalMatrix, zs):
    if not G.is_real():
        return
    for z in zs:
        if abs(z.imag) > 1e-9 * max(1.0, abs(z)):
            if not any(abs(w - np.conj(z)) <= 1e-6 * max(1.0, abs(z)) for w in zs):
                raise ConjugacyViolation(f"complex zero {z} lacks its conjugate partner")


def _divide_out(poly: Polynomial, z, tol=1e-6):
    q, r = poly.divmod(Polynomial([-z, 1.0]))
    if abs(r.coeffs[0]) > tol * max(poly.scale_norm(z), 1e-300):
        raise ConsistencyFailure(f"expected a root at {z}, residual {abs(r.coeffs[0]):.3e}")
    return q


def _over(D: Polynomial, n: Polynomial, d: Polynomial) -> Polynomial:
    """Numerator of n/d written over the multiple D of d."""
    if n.is_zero():
        return n
    q, _ = D.divmod(d)
    return n * q


def _deflate(G: RationalMatrix, z, direction, variant, side):
    """Apply one inverse factor to G and cancel the pole at z exactly.

    left:  F^{-1} G = G + e c(s)/(s - z) (e^H G)
    right: G F^{-1} = G + (G e) c(s)/(s - z) e^H

    Each column (left) or row (right) is combined over one common denominator
    so that repeated deflation does not inflate degrees.
    """
    c = _inv_excess(variant, z)
    e = direction
    T = G if side == "left" else G.transpose()
    w_e = np.conj(e) if side == "left" else e
    p, q = T.shape
    cols = []
    for j in range(q):
        dens = [T.entries[k][j][1] for k in range(p)]
        D = _common_denominator(dens)
        nums = [_over(D, *T.entries[k][j]) for k in range(p)]
        w = Polynomial([0.0])
        for k in range(p):
            w = w + nums[k] * w_e[k]
        # a column orthogonal to the direction leaves only rounding in w
        scale = max((float(np.max(np.abs(n.coeffs))) for n in nums if not n.is_zero()), default=0.0)
        if w.is_zero() or np.max(np.abs(w.coeffs)) <= 1e-9 * scale:
            qj = Polynomial([0.0])
        else:
            qj = _divide_out(w, z)
        e_i = e if side == "left" else np.conj(e)
        cols.append([simplify(nums[i] + qj * c * e_i[i], D) for i in range(p)])
    rows = tuple(tuple(cols[j][i] for j in range(q)) for i in range(p))
    out = RationalMatrix(rows)
    if side == "right":
        out = out.transpose()
    return _realify(out)


def _realify(G: RationalMatrix, tol=1e-9):
    """Drop imaginary coefficient noise once a conjugate pair has been removed."""
    worst = 0.0
    for row in G.entries:
        for n, d in row:
            for pol in (n, d):
                if not pol.is_real:
                    worst = max(worst, np.max(np.abs(pol.coeffs.imag)) / max(np.max(np.abs(pol.coeffs)), 1e-300))
    if worst == 0.0 or worst > tol:
        return G
    return G._map(lambda e: (Polynomial(e[0].coeffs.real), Polynomial(e[1].coeffs.real)))


def _radd(a, b):
    from .core_algebra import _radd as radd

    return radd(a, b)


def _extract(G: RationalMatrix, variant, side, zs, include_axis=False):
    factors = []
    cur = G
    k = G.rows if side == "left" else G.cols
    for z in zs:
        if classify(z) != "rhp":
            if include_axis:
                e = np.zeros(k, dtype=complex)
                e[0] = 1.0
                factors.append(AllpassFactor(z, e, _complete(e), variant, trivial=True))
            continue
        Gz = cur(z)
        e = left_null_direction(Gz) if side == "left" else right_null_direction(Gz)
        if k == 1:
            e = np.array([1.0 + 0j])
        factors.append(AllpassFactor(complex(z), e, _complete(e), variant))
        cur = _deflate(cur, z, e, variant, side)
    return factors, cur


def _rhp_zeros(G: RationalMatrix, closed=False):
    zs = transmission_zeros(G)
    keep = [complex(z) for z in zs if classify(z) == "rhp" or (closed and classify(z) == "imag")]
    rhp = [z for z in keep if classify(z) == "rhp"]
    for a in range(len(rhp)):
        for b in range(a + 1, len(rhp)):
            if abs(rhp[a] - rhp[b]) <= 1e-6 * max(1.0, abs(rhp[a])):
                raise RepeatedNMPZeros(f"repeated right-half-plane zeros near {rhp[a]}")
    return keep


def allpass_extract_zeros(N: RationalMatrix, variant: str = "L", zero_order=None, side: str = "left") -> AllpassChain:
    """Factor the open right-half-plane zeros of a stable N one at a time."""
    if variant not in VARIANTS:
        raise DegenerateInput(f"unknown variant {variant}")
    zs = _rhp_zeros(N)
    _check_conjugacy(N, zs)
    zs = _order_zeros(zs, zero_order)
    factors, mp = _extract(N, variant, side, zs)
    return AllpassChain(factors, variant, side, mp, N.rows if side == "left" else N.cols)


def allpass_extract_poles(Mt: RationalMatrix) -> AllpassChain:
    """Mt = Mt_m * B with B built from the closed right-half-plane zeros of Mt (right factors)."""
    zs = _rhp_zeros(Mt, closed=True)
    _check_conjugacy(Mt, zs)
    zs = _order_zeros(zs)
    factors, mp = _extract(Mt, "Btilde", "right", zs, include_axis=True)
    return AllpassChain(factors, "Btilde", "right", mp, Mt.cols)


# --------------------------------------------------------------------------
# inner-outer factorization


@dataclass(frozen=True)
class InnerOuterPair:
    inner: RationalMatrix
    outer: RationalMatrix
    outer_inverse: RationalMatrix
    variant: str = "Theta"
    # matrix path only: outer = core * diag((s+1)^-w); core_inverse realizes core^-1
    weights: Optional[tuple] = None
    core: Optional[StateSpace] = None
    core_inverse: Optional[StateSpace] = None

    def _weight(self, s, sign):
        return np.diag([(s + 1.0) ** (sign * k) for k in self.weights])

    def outer_at(self, s) -> np.ndarray:
        """Outer factor at s, through the realization when one is held."""
        if self.core is None:
            return self.outer(s)
        return self.core(s) @ self._weight(s, -1)

    def inverse_at(self, s) -> np.ndarray:
        if self.core_inverse is None:
            return self.outer_inverse(s)
        return self._weight(s, 1) @ self.core_inverse(s)


def _spectral_poly(p: Polynomial, what: str):
    """Stable q and sign c with p = c q q~, |c| = 1."""
    if p.degree == 0:
        c = np.real(p.coeffs[0])
        return Polynomial([np.sqrt(abs(c))]), np.sign(c)
    rts = poly_roots(p)
    lhp = [r for r in rts if classify(r, 1e-7) == "lhp"]
    axis = [r for r in rts if classify(r, 1e-7) == "imag"]
    if axis:
        raise SpectralFactorizationSingular(f"{what} vanishes on the imaginary axis at {axis[0]}")
    if 2 * len(lhp) != len(rts):
        raise SpectralFactorizationSingular(f"{what} root split is unbalanced")
    # p = lead prod(s - r);  q q~ = (-1)^m prod(s - r) for monic q with m roots
    c = np.real(p.lead * (-1) ** len(lhp))
    q = Polynomial.from_roots(lhp)
    q = Polynomial(np.real_if_close(q.coeffs * np.sqrt(abs(c)), tol=1e6))
    return q, np.sign(c)


def _divides(a: Polynomial, b: Polynomial) -> bool:
    """True if a divides b up to rounding."""
    if a.degree > b.degree:
        return False
    _, r = b.divmod(a)
    return np.max(np.abs(r.coeffs)) <= 1e-9 * np.max(np.abs(b.coeffs))


def _common_denominator(dens):
    D = dens[0]
    for d in dens[1:]:
        if _divides(d, D):
            continue
        if _divides(D, d):
            D = d
        else:
            D = D * d
    return D


def _siso_density(G: RationalMatrix):
    """Column density as n'/(D~ D) with D a stable common denominator."""
    ents = [G.entries[i][0] for i in range(G.rows) if not G.entries[i][0][0].is_zero()]
    if not ents:
        raise SpectralFactorizationSingular("stack vanishes identically")
    D = _common_denominator([d for _, d in ents])
    acc = Polynomial([0.0])
    for n, d in ents:
        m = n * D.divmod(d)[0]
        acc = acc + m.reflect() * m
    return acc, D


def _inner_outer_siso(G: RationalMatrix, variant):
    n, d = _siso_density(G)
    qn, cn = _spectral_poly(n, "spectral density numerator")
    qd, cd = d, 1.0
    if cn * cd <= 0:
        raise SpectralFactorizationSingular("spectral density is not positive on the axis")
    outer = RationalMatrix.scalar(qn, qd)
    outer_inv = RationalMatrix.scalar(qd, qn)
    inner = G @ outer_inv
    return InnerOuterPair(inner=inner, outer=outer, outer_inverse=outer_inv, variant=variant)


def _column_weights(G: RationalMatrix):
    r = []
    for j in range(G.cols):
        degs = [d.degree - n.degree for n, d in (G.entries[i][j] for i in range(G.rows)) if not n.is_zero()]
        if not degs:
            raise SpectralFactorizationSingular(f"column {j} of the stack vanishes")
        r.append(max(0, min(degs)))
    return r


def _weight_columns(ss: StateSpace, r) -> StateSpace:
    """Realization of ss * diag((s+1)^r_j); column j must have relative degree >= r_j."""
    A, B, C, E = ss.A, ss.B.copy(), ss.C, ss.E.copy()
    scale = max(1.0, np.linalg.norm(C) * np.linalg.norm(B))
    for j, k in enumerate(r):
        for _ in range(k):
            if np.linalg.norm(E[:, j]) > 1e-9 * scale:
                raise SpectralFactorizationSingular(f"column {j} is not strictly proper enough to weight")
            E[:, j] = C @ B[:, j]
            B[:, j] = (A + np.eye(A.shape[0])) @ B[:, j]
    return StateSpace(A, B, C, E)


def _inner_outer_mimo(G: RationalMatrix, variant, realization: Optional[StateSpace] = None):
    r = _column_weights(G)
    W = RationalMatrix.diag([RationalMatrix.scalar(Polynomial([1.0, 1.0]) ** k, ONE) for k in r])
    Winv = RationalMatrix.diag([RationalMatrix.scalar(ONE, Polynomial([1.0, 1.0]) ** k) for k in r])
    if realization is not None:
        ss = _weight_columns(realization, r)
    else:
        ss = ss_minimal((G @ W).to_state_space())
    A, B, C, D = ss.A, ss.B, ss.C, ss.E
    Rm = D.conj().T @ D
    if np.linalg.cond(Rm) > 1e12:
        raise SpectralFactorizationSingular("weighted stack loses column rank at infinity")
    try:
        X = linalg.solve_continuous_are(A, B, C.conj().T @ C, Rm, s=C.conj().T @ D)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoStabilizingSolution(str(exc)) from exc
    K = np.linalg.solve(Rm, B.conj().T @ X + D.conj().T @ C)
    if A.shape[0] and np.max(np.linalg.eigvals(A - B @ K).real) >= 0:
        raise NoStabilizingSolution("Riccati solution is not stabilizing")
    Rh = linalg.sqrtm(Rm)
    Rh = np.real_if_close(Rh)
    outer_w = StateSpace(A, B, Rh @ K, Rh)
    outer_w_inv = ss_inv(outer_w)
    outer = RationalMatrix.from_state_space(*_real(outer_w)) @ Winv
    outer_inv = W @ RationalMatrix.from_state_space(*_real(outer_w_inv))
    inner_ss = ss_series(outer_w_inv, StateSpace(A, B, C, D))
    inner = RationalMatrix.from_state_space(*_real(ss_minimal(inner_ss)))
    return InnerOuterPair(inner=inner, outer=outer, outer_inverse=outer_inv, variant=variant,
                          weights=tuple(r), core=outer_w, core_inverse=outer_w_inv)


def _real(ss: StateSpace):
    return tuple(np.real(x) for x in (ss.A, ss.B, ss.C, ss.E))


def inner_outer(G_stack: RationalMatrix, variant: str = "Theta", realization: Optional[StateSpace] = None) -> InnerOuterPair:
    """G_stack = inner * outer with inner^H inner = I on the axis and outer stably invertible.

    A stable realization of G_stack, when the caller has one, is used directly
    by the matrix path instead of re-deriving it from the rational entries.
    """
    if G_stack.rows < G_stack.cols:
        raise DegenerateInput("inner-outer needs a tall or square stack")
    if not G_stack.is_proper():
        raise DegenerateInput("stack must be proper")
    if G_stack.cols == 1:
        return _inner_outer_siso(G_stack, variant)
    return _inner_outer_mimo(G_stack, variant, realization)


# --------------------------------------------------------------------------
# partial fractions


def _cancel_at(G: RationalMatrix, points):
    rows = []
    for row in G.entries:
        r = []
        for n, d in row:
            for z in points:
                while d.degree > 0 and abs(d(z)) <= 1e-8 * d.scale_norm(z):
                    if not n.is_zero() and abs(n(z)) > 1e-6 * max(n.scale_norm(z), 1e-300):
                        raise ExpansionSingular(f"pole at {z} survives the residue subtraction")
                    d = d.divmod(Polynomial([-z, 1.0]))[0]
                    if not n.is_zero():
                        n = n.divmod(Polynomial([-z, 1.0]))[0]
            r.append(simplify(n, d))
        rows.append(tuple(r))
    return _realify(RationalMatrix(tuple(rows)))


def lemma3_expand(X: RationalMatrix, L: AllpassChain):
    """X L^{-1} = S + sum_i c_i/(s - z_i) with S stable; returns (S, [c_i])."""
    if not L.factors:
        return X, []
    terms = []
    active = [f for f in L.factors if not f.trivial]
    for i, f in enumerate(L.factors):
        if f.trivial:
            terms.append(np.zeros((X.rows, L.size), dtype=complex))
            continue
        try:
            Xz = X(f.location)
        except PoleEvaluation as exc:
            raise ExpansionSingular(f"chain zero {f.location} is a pole of X") from exc
        terms.append(Xz @ L.inverse_residue(i))
    Linv = RationalMatrix.identity(L.size)
    seq = L.factors[::-1] if L.side == "left" else L.factors
    for f in seq:
        if not f.trivial:
            Linv = Linv @ _factor_inverse(f)
    total = X @ Linv
    for f, c in zip(L.factors, terms):
        if f.trivial:
            continue
        pole = Polynomial([-f.location, 1.0])
        corr = RationalMatrix(tuple(tuple((Polynomial([-c[i, j]]), pole) for j in range(c.shape[1]))
                                    for i in range(c.shape[0])))
        total = total + corr
    S = _cancel_at(total, [f.location for f in active])
    return S, terms


def _factor_inverse(f: AllpassFactor) -> RationalMatrix:
    n, d = _blaschke(f.variant, f.location)
    e = f.direction
    k = e.size
    rows = []
    for i in range(k):
        row = []
        for j in range(k):
            w = e[i] * np.conj(e[j])
            num = (d - n) * w + (n if i == j else Polynomial([0.0]))
            row.append(simplify(num, n))
        rows.append(tuple(row))
    return RationalMatrix(tuple(rows))


def residue_at(G: RationalMatrix, s0) -> np.ndarray:
    """lim (s - s0) G(s) at a simple pole."""
    s0 = complex(s0)
    R, order = laurent_leading(G, s0)
    if order == 0:
        raise NotAPole(f"{s0} is not a pole")
    if order > 1:
        raise NotSimplePole(f"pole at {s0} has order {order}")
    return R
