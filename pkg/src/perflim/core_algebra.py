"""Real-rational arithmetic: polynomials, transfer matrices, realizations, H2 norms.

Polynomials store coefficients in ascending degree.  Complex coefficients are
allowed because allpass factors built around complex zeros are not
real-rational one factor at a time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate, linalg

from .errors import (
    DegenerateInput,
    NotInH2,
    NotRightInvertible,
    NumericalInconsistency,
    PoleEvaluation,
    RepeatedNMPZeros,
)

log = logging.getLogger(__name__)

ADD_TRIM = 1e-13
CANCEL_RTOL = 1e-8
AXIS_TOL = 1e-9


def _clean(c):
    c = np.atleast_1d(np.asarray(c))
    if np.iscomplexobj(c):
        if np.all(c.imag == 0):
            c = c.real.astype(float)
        else:
            c = c.astype(complex)
    else:
        c = c.astype(float)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1, dtype=c.dtype)
    return c[: nz[-1] + 1].copy()


def _trim(c, rtol=ADD_TRIM):
    c = _clean(c)
    scale = np.max(np.abs(c))
    if scale == 0:
        return c
    keep = np.flatnonzero(np.abs(c) > rtol * scale)
    return c[: keep[-1] + 1] if keep.size else np.zeros(1, dtype=c.dtype)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial with ascending coefficients ``coeffs[k]`` of ``s**k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _clean(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        roots = list(roots)
        if not roots:
            return cls([lead])
        c = npoly.polyfromroots(roots) * lead
        if np.all(np.abs(np.imag(c)) <= 1e-12 * np.max(np.abs(c))):
            c = np.real(c)
        return cls(c)

    @classmethod
    def from_descending(cls, coeffs):
        return cls(np.asarray(coeffs)[::-1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lead(self):
        return self.coeffs[-1]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coeffs)

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, s):
        return npoly.polyval(s, self.coeffs)

    def __add__(self, other):
        other = _as_poly(other)
        return Polynomial(_trim(npoly.polyadd(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * other)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial([1.0])
        for _ in range(k):
            out = out * self
        return out

    def divmod(self, other):
        q, r = npoly.polydiv(self.coeffs, _as_poly(other).coeffs)
        return Polynomial(q), Polynomial(r)

    def deriv(self):
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(npoly.polyder(self.coeffs))

    def reflect(self):
        """conj(p(-conj(s))), the polynomial part of a para-adjoint."""
        k = np.arange(len(self.coeffs))
        return Polynomial(np.conj(self.coeffs) * (-1.0) ** k)

    def conj(self):
        return Polynomial(np.conj(self.coeffs))

    def scale_norm(self, s):
        """Sum |c_k||s|^k, the natural magnitude for testing p(s) ~ 0."""
        return npoly.polyval(abs(s), np.abs(self.coeffs))

    def roots(self):
        return poly_roots(self)

    def allclose(self, other, rtol=1e-12):
        a, b = self.coeffs, _as_poly(other).coeffs
        if len(a) != len(b):
            return False
        return np.allclose(a, b, rtol=rtol, atol=rtol * max(np.max(np.abs(a)), 1e-300))

    def __repr__(self):
        return f"Polynomial({np.array2string(self.coeffs, precision=6)})"


def _as_poly(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    if np.ndim(x) == 0:
        return Polynomial([x])
    return Polynomial(np.asarray(x))


S = Polynomial([0.0, 1.0])


def _newton_polish(p: Polynomial, dp: Polynomial, r, steps=20):
    best, fbest = r, abs(p(r))
    for _ in range(steps):
        d = dp(r)
        if d == 0:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            r = r - p(r) / d
            fr = abs(p(r))
        if np.isfinite(fr) and fr < fbest:
            best, fbest = r, fr
        else:
            break
    return best


def _cluster(p: Polynomial, roots):
    """Replace clusters of a numerically split multiple root by their centroid."""
    roots = list(roots)
    out, used = [], [False] * len(roots)
    for i, r in enumerate(roots):
        if used[i]:
            continue
        grp = [i]
        for j in range(i + 1, len(roots)):
            if not used[j] and abs(roots[j] - r) <= 1e-4 * max(1.0, abs(r)):
                grp.append(j)
        if len(grp) > 1:
            m = np.mean([roots[j] for j in grp])
            q, ok = p, True
            for _ in range(len(grp)):
                if abs(q(m)) > 1e-7 * max(q.scale_norm(m), 1e-300):
                    ok = False
                    break
                q = q.deriv()
            if ok:
                for j in grp:
                    used[j] = True
                    out.append(m)
                continue
        used[i] = True
        out.append(r)
    return out


def poly_roots(p: Polynomial) -> np.ndarray:
    """Roots with multiplicity: companion eigenvalues, Newton polish, conjugate symmetrization."""
    p = _as_poly(p)
    if p.is_zero():
        raise DegenerateInput("roots of the zero polynomial")
    c = p.coeffs
    nz = 0
    while nz < len(c) - 1 and c[nz] == 0:
        nz += 1
    core = Polynomial(c[nz:])
    est = np.roots(core.coeffs[::-1]) if core.degree > 0 else np.array([])
    dp = core.deriv()
    pol = [_newton_polish(core, dp, complex(r)) for r in est]
    pol = _cluster(core, pol)
    pol = np.array([0.0] * nz + pol, dtype=complex)
    if p.is_real:
        pol = _symmetrize(pol)
    return pol


def _symmetrize(roots):
    roots = list(roots)
    out = []
    taken = [False] * len(roots)
    for i, r in enumerate(roots):
        if taken[i]:
            continue
        taken[i] = True
        tol = 1e-7 * max(1.0, abs(r))
        if abs(r.imag) <= tol:
            # a near-real root might still pair with a near-real partner
            out.append(complex(r.real, 0.0))
            continue
        best, bd = None, np.inf
        for j in range(i + 1, len(roots)):
            if not taken[j]:
                d = abs(roots[j] - np.conj(r))
                if d < bd:
                    best, bd = j, d
        if best is None or bd > 1e-4 * max(1.0, abs(r)):
            out.append(r)
            continue
        taken[best] = True
        m = 0.5 * (r + np.conj(roots[best]))
        out.extend([m, np.conj(m)])
    return np.array(out, dtype=complex)


# --------------------------------------------------------------------------
# scalar rational helpers


def _divide_root(num: Polynomial, den: Polynomial, r):
    if num.is_real and den.is_real and abs(r.imag) > AXIS_TOL * max(1, abs(r)):
        f = Polynomial([abs(r) ** 2, -2 * r.real, 1.0])
    elif num.is_real and den.is_real:
        f = Polynomial([-r.real, 1.0])
    else:
        f = Polynomial([-r, 1.0])
    return num.divmod(f)[0], den.divmod(f)[0]


def simplify(num: Polynomial, den: Polynomial):
    """Cancel common roots within CANCEL_RTOL relative distance; normalize den monic."""
    if den.is_zero():
        raise DegenerateInput("zero denominator")
    if num.is_zero():
        return Polynomial([0.0]), Polynomial([1.0])
    changed = True
    while changed and num.degree > 0 and den.degree > 0:
        changed = False
        rn, rd = poly_roots(num), poly_roots(den)
        for r in rd:
            d = np.abs(rn - r)
            k = int(np.argmin(d))
            if d[k] <= CANCEL_RTOL * max(1.0, abs(r)):
                m = 0.5 * (r + rn[k])
                if num.is_real and den.is_real and abs(m.imag) <= AXIS_TOL * max(1, abs(m)):
                    m = complex(m.real, 0.0)
                log.debug("cancel common root %s", m)
                num, den = _divide_root(num, den, m)
                changed = True
                break
    lead = den.lead
    return Polynomial(num.coeffs / lead), Polynomial(den.coeffs / lead)


def _radd(a, b):
    (n1, d1), (n2, d2) = a, b
    if n1.is_zero():
        return n2, d2
    if n2.is_zero():
        return n1, d1
    if d1.allclose(d2):
        return n1 + n2, d1
    g = _common_factor(d1, d2)
    if g is not None:
        q1, q2 = _exact_quotient(d1, g), _exact_quotient(d2, g)
        if q1 is not None and q2 is not None:
            return n1 * q2 + n2 * q1, d1 * q2
    return n1 * d2 + n2 * d1, d1 * d2


def _common_factor(d1: Polynomial, d2: Polynomial):
    """Monic polynomial of the roots d1 and d2 share (within CANCEL_RTOL), or None."""
    if d1.degree == 0 or d2.degree == 0:
        return None
    r2 = list(poly_roots(d2))
    shared = []
    for r in poly_roots(d1):
        if not r2:
            break
        d = np.abs(np.asarray(r2) - r)
        k = int(np.argmin(d))
        if d[k] <= CANCEL_RTOL * max(1.0, abs(r)):
            shared.append(r)
            r2.pop(k)
    if not shared:
        return None
    c = np.poly(shared)[::-1]
    if d1.is_real and d2.is_real:
        if np.max(np.abs(c.imag)) > 1e-9 * np.max(np.abs(c)):
            return None
        c = c.real
    return Polynomial(c)


def _exact_quotient(a: Polynomial, g: Polynomial):
    q, r = a.divmod(g)
    if not r.is_zero() and np.max(np.abs(r.coeffs)) > 1e-9 * np.max(np.abs(a.coeffs)):
        return None
    return q


def _static_or_realization(G):
    if G.realization is not None:
        return G.realization
    if all(n.degree == 0 and d.degree == 0 for row in G.entries for n, d in row):
        K = G(0.0)
        return StateSpace(np.zeros((0, 0)), np.zeros((0, K.shape[1])), np.zeros((K.shape[0], 0)), K)
    return None


def _series(G1, G2):
    """Realization of G1 G2 when both factors carry one (constants count as static)."""
    r1, r2 = _static_or_realization(G1), _static_or_realization(G2)
    if r1 is None and r2 is None:
        return None
    try:
        r1 = G1.to_state_space() if r1 is None else r1
        r2 = G2.to_state_space() if r2 is None else r2
    except DegenerateInput:
        return None
    if r1.A.size == 0 and r2.A.size == 0:
        return None
    n1, n2 = r1.A.shape[0], r2.A.shape[0]
    dt = _dt(r1.A, r1.B, r1.C, r1.E, r2.A, r2.B, r2.C, r2.E)
    A = np.zeros((n1 + n2, n1 + n2), dtype=dt)
    A[:n1, :n1], A[:n1, n1:], A[n1:, n1:] = r1.A, r1.B @ r2.C, r2.A
    B = np.vstack([r1.B @ r2.E, r2.B]).astype(dt)
    C = np.hstack([r1.C, r1.E @ r2.C]).astype(dt)
    return StateSpace(A, B, C, (r1.E @ r2.E).astype(dt))


def _rmul(a, b):
    (n1, d1), (n2, d2) = a, b
    if n1.is_zero() or n2.is_zero():
        return Polynomial([0.0]), Polynomial([1.0])
    return n1 * n2, d1 * d2


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray

    def __call__(self, s):
        n = self.A.shape[0]
        if n == 0:
            return self.E.astype(complex)
        return self.C @ np.linalg.solve(s * np.eye(n) - self.A, self.B) + self.E


@dataclass(frozen=True, eq=False)
class RationalMatrix:
    """Transfer matrix stored entrywise as (numerator, denominator) pairs."""

    entries: tuple
    realization: Optional[StateSpace] = field(default=None, compare=False)

    def __post_init__(self):
        ents = tuple(tuple((_as_poly(n), _as_poly(d)) for n, d in row) for row in self.entries)
        if not ents or not ents[0]:
            raise DegenerateInput("empty transfer matrix")
        for row in ents:
            if len(row) != len(ents[0]):
                raise DegenerateInput("ragged transfer matrix")
            for _, d in row:
                if d.is_zero():
                    raise DegenerateInput("identically zero denominator")
        object.__setattr__(self, "entries", ents)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_entries(cls, entries, simplify_entries=True):
        rows = []
        for row in entries:
            r = []
            for n, d in row:
                n, d = _as_poly(n), _as_poly(d)
                r.append(simplify(n, d) if simplify_entries else (n, d))
            rows.append(tuple(r))
        return cls(tuple(rows))

    @classmethod
    def scalar(cls, num, den=1.0):
        return cls.from_entries([[(_poly_arg(num), _poly_arg(den))]])

    @classmethod
    def constant(cls, K):
        K = np.atleast_2d(np.asarray(K))
        return cls(tuple(tuple((Polynomial([v]), Polynomial([1.0])) for v in row) for row in K))

    @classmethod
    def identity(cls, n):
        return cls.constant(np.eye(n))

    @classmethod
    def diag(cls, items):
        items = [x if isinstance(x, RationalMatrix) else RationalMatrix.constant(x) for x in items]
        n = len(items)
        zero = (Polynomial([0.0]), Polynomial([1.0]))
        return cls(tuple(tuple(items[i].entries[0][0] if i == j else zero for j in range(n)) for i in range(n)))

    @classmethod
    def from_state_space(cls, A, B, C, E):
        from scipy import signal

        A, B, C, E = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, C, E))
        p, q = E.shape
        rows = [[None] * q for _ in range(p)]
        if A.size == 0:
            return cls.constant(E)
        for j in range(q):
            for i in range(p):
                # reduce each entry first; cancelling shared poles by root matching is ill-conditioned
                sub = ss_minimal(StateSpace(A, B[:, [j]], C[[i]], E[[i]][:, [j]]))
                num, den = signal.ss2tf(sub.A, sub.B, sub.C, sub.E) if sub.A.size else ([[E[i, j]]], [1.0])
                nd = np.array(num[0], dtype=float)
                # ss2tf leaves rounding noise in the leading numerator slots
                big = np.max(np.abs(nd)) if nd.size else 0.0
                k = 0
                while k < nd.size - 1 and abs(nd[k]) <= 1e-10 * big:
                    k += 1
                nd = nd[k:]
                rows[i][j] = simplify(Polynomial.from_descending(nd), Polynomial.from_descending(den))
        return cls(tuple(tuple(r) for r in rows), realization=StateSpace(A, B, C, E))

    # -- shape / access ----------------------------------------------------
    @property
    def rows(self):
        return len(self.entries)

    @property
    def cols(self):
        return len(self.entries[0])

    @property
    def shape(self):
        return self.rows, self.cols

    def entry(self, i, j):
        return self.entries[i][j]

    @property
    def num(self):
        return self.entries[0][0][0]

    @property
    def den(self):
        return self.entries[0][0][1]

    def _map(self, fn):
        return RationalMatrix(tuple(tuple(fn(e) for e in row) for row in self.entries))

    def simplified(self):
        return self._map(lambda e: simplify(*e))

    # -- evaluation --------------------------------------------------------
    def __call__(self, s):
        s = complex(s)
        out = np.empty(self.shape, dtype=complex)
        for i, row in enumerate(self.entries):
            for j, (n, d) in enumerate(row):
                dv = d(s)
                if abs(dv) <= 1e-12 * max(d.scale_norm(s), 1e-300):
                    raise PoleEvaluation(f"entry ({i},{j}) has a pole at {s}", (i, j))
                out[i, j] = n(s) / dv
        return out

    def eval_many(self, svals):
        svals = np.asarray(svals, dtype=complex)
        out = np.empty((svals.size,) + self.shape, dtype=complex)
        for i, row in enumerate(self.entries):
            for j, (n, d) in enumerate(row):
                out[:, i, j] = n(svals) / d(svals)
        return out

    # -- algebra -----------------------------------------------------------
    def __add__(self, other):
        other = _as_rm(other, self.shape)
        _check_shape(self.shape == other.shape, "add", self, other)
        return RationalMatrix(tuple(
            tuple(simplify(*_radd(a, b)) for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)
        ))

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda e: (-e[0], e[1]))

    def __sub__(self, other):
        return self + (-_as_rm(other, self.shape))

    def __rsub__(self, other):
        return _as_rm(other, self.shape) - self

    def __mul__(self, c):
        if isinstance(c, RationalMatrix):
            return self @ c
        return self._map(lambda e: (e[0] * c, e[1]) if c != 0 else (Polynomial([0.0]), Polynomial([1.0])))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, RationalMatrix):
            other = RationalMatrix.constant(other)
        _check_shape(self.cols == other.rows, "matmul", self, other)
        rows = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = (Polynomial([0.0]), Polynomial([1.0]))
                for k in range(self.cols):
                    acc = _radd(acc, _rmul(self.entries[i][k], other.entries[k][j]))
                row.append(simplify(*acc))
            rows.append(tuple(row))
        return RationalMatrix(tuple(rows), realization=_series(self, other))

    def __rmatmul__(self, other):
        return RationalMatrix.constant(other) @ self

    def transpose(self):
        return RationalMatrix(tuple(zip(*self.entries)))

    @property
    def T(self):
        return self.transpose()

    def conj(self):
        return self._map(lambda e: (e[0].conj(), e[1].conj()))

    def block(self, rows=None, cols=None):
        rows = range(self.rows) if rows is None else rows
        cols = range(self.cols) if cols is None else cols
        return RationalMatrix(tuple(tuple(self.entries[i][j] for j in cols) for i in rows))

    @staticmethod
    def vstack(items):
        return RationalMatrix(tuple(row for it in items for row in it.entries))

    @staticmethod
    def hstack(items):
        return RationalMatrix.vstack([it.T for it in items]).T

    def det(self):
        """Determinant as a 1x1 RationalMatrix (Laplace expansion; sizes here are small)."""
        if self.rows != self.cols:
            raise DegenerateInput("determinant of a non-square matrix")
        return RationalMatrix(((simplify(*_det(self.entries)),),))

    def inv(self):
        n = self.rows
        if n != self.cols:
            raise NotRightInvertible("inverse of a non-square matrix")
        if n == 1:
            nu, de = self.entries[0][0]
            if nu.is_zero():
                raise NotRightInvertible("inverse of zero")
            return RationalMatrix(((simplify(de, nu),),))
        dn, dd = simplify(*_det(self.entries))
        if dn.is_zero():
            raise NotRightInvertible("singular transfer matrix")
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                minor = [[self.entries[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
                cn, cd = _det(minor)
                if (i + j) % 2:
                    cn = -cn
                row.append(simplify(cn * dd, cd * dn))
            rows.append(tuple(row))
        return RationalMatrix(tuple(rows))

    # -- structure ---------------------------------------------------------
    def poles(self):
        ps = []
        for row in self.entries:
            for n, d in row:
                if not n.is_zero() and d.degree > 0:
                    ps.extend(poly_roots(d))
        return np.array(ps, dtype=complex)

    def is_stable(self, strict=True):
        ps = self.poles()
        if ps.size == 0:
            return True
        return bool(np.all(ps.real < -AXIS_TOL * np.maximum(1, np.abs(ps)))) if strict else bool(np.all(ps.real <= 0))

    def relative_degree(self):
        degs = [d.degree - n.degree for row in self.entries for n, d in row if not n.is_zero()]
        return min(degs) if degs else np.inf

    def is_proper(self):
        return self.relative_degree() >= 0

    def is_strictly_proper(self):
        return self.relative_degree() >= 1

    def at_infinity(self):
        out = np.zeros(self.shape, dtype=complex)
        for i, row in enumerate(self.entries):
            for j, (n, d) in enumerate(row):
                if n.degree > d.degree and not n.is_zero():
                    raise DegenerateInput("improper entry has no value at infinity")
                if n.degree == d.degree and not n.is_zero():
                    out[i, j] = n.lead / d.lead
        return out

    def is_real(self):
        return all(n.is_real and d.is_real for row in self.entries for n, d in row)

    def to_state_space(self) -> StateSpace:
        """Entrywise controllable-canonical realization (minimal per entry once entries are coprime)."""
        if self.realization is not None:
            return self.realization
        if not self.is_proper():
            raise DegenerateInput("improper transfer matrix has no state-space realization")
        p, q = self.shape
        dtype = float if self.is_real() else complex
        blocks = []
        E = np.zeros((p, q), dtype=dtype)
        for i, row in enumerate(self.entries):
            for j, (n, d) in enumerate(row):
                if n.is_zero():
                    continue
                a = d.coeffs / d.lead
                b = n.coeffs / d.lead
                k = d.degree
                bb = np.zeros(k + 1, dtype=np.result_type(a, b))
                bb[: len(b)] = b
                D = bb[k]
                E[i, j] = D
                if k == 0:
                    continue
                r = bb[:k] - D * a[:k]
                Ak = np.zeros((k, k), dtype=dtype)
                Ak[:-1, 1:] = np.eye(k - 1)
                Ak[-1, :] = -a[:k]
                blocks.append((i, j, Ak, r))
        nx = sum(b[2].shape[0] for b in blocks)
        A = np.zeros((nx, nx), dtype=dtype)
        B = np.zeros((nx, q), dtype=dtype)
        C = np.zeros((p, nx), dtype=dtype)
        o = 0
        for i, j, Ak, r in blocks:
            k = Ak.shape[0]
            A[o:o + k, o:o + k] = Ak
            B[o + k - 1, j] = 1.0
            C[i, o:o + k] = r
            o += k
        return StateSpace(A, B, C, E)

    def check_realization(self, rng=None, points=16, rtol=1e-8):
        if self.realization is None:
            return True
        rng = np.random.default_rng(0) if rng is None else rng
        for s in rng.normal(size=points) + 1j * rng.normal(size=points):
            a, b = self(s), self.realization(s)
            if np.linalg.norm(a - b) > rtol * max(np.linalg.norm(a), 1.0):
                return False
        return True

    def __repr__(self):
        return f"RationalMatrix({self.rows}x{self.cols})"


def _poly_arg(x):
    if isinstance(x, Polynomial):
        return x
    return Polynomial(np.atleast_1d(np.asarray(x)))


def _as_rm(x, shape):
    if isinstance(x, RationalMatrix):
        return x
    x = np.asarray(x)
    if x.ndim == 0:
        x = np.full(shape, x) if shape != (1, 1) else x.reshape(1, 1)
    return RationalMatrix.constant(x)


def _check_shape(ok, op, a, b):
    if not ok:
        raise DegenerateInput(f"shape mismatch in {op}: {a.shape} vs {b.shape}")


def _det(ents):
    n = len(ents)
    if n == 1:
        return ents[0][0]
    if n == 2:
        return _radd(_rmul(ents[0][0], ents[1][1]), _neg(_rmul(ents[0][1], ents[1][0])))
    acc = (Polynomial([0.0]), Polynomial([1.0]))
    for j in range(n):
        minor = [[ents[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = _rmul(ents[0][j], simplify(*_det(minor)))
        acc = _radd(acc, term if j % 2 == 0 else _neg(term))
    return acc


def _neg(e):
    return -e[0], e[1]


# --------------------------------------------------------------------------
# public operations


def rf_eval(G: RationalMatrix, s) -> np.ndarray:
    return G(s)


def para_adjoint(G: RationalMatrix) -> RationalMatrix:
    """G~(s) = G(-conj s)^H, which is G^T(-s) for real-rational G."""
    return RationalMatrix(tuple(zip(*[[(n.reflect(), d.reflect()) for n, d in row] for row in G.entries])))


def classify(z, tol=AXIS_TOL):
    if z.real > tol * max(1.0, abs(z)):
        return "rhp"
    if z.real < -tol * max(1.0, abs(z)):
        return "lhp"
    return "imag"


@dataclass(frozen=True)
class ZeroPoleData:
    zeros: list  # (location, eta or None)
    poles: list  # (location, omega)
    zero_class: list
    pole_class: list

    def rhp_zeros(self):
        return [(z, e) for (z, e), c in zip(self.zeros, self.zero_class) if c == "rhp"]

    def unstable_poles(self):
        return [(p, w) for (p, w), c in zip(self.poles, self.pole_class) if c != "lhp"]


def _unique(vals, tol=1e-6):
    out = []
    for v in vals:
        if all(abs(v - u) > tol * max(1.0, abs(u)) for u in out):
            out.append(v)
    return out


def left_null_direction(Gz: np.ndarray, strict=True, zero_tol=1e-7):
    """Unit eta with eta^H Gz = 0; rejects null spaces of dimension > 1."""
    U, sv, _ = np.linalg.svd(Gz)
    scale = max(sv[0], 1e-300) if sv.size else 1.0
    p = Gz.shape[0]
    small = [k for k in range(p) if (sv[k] if k < sv.size else 0.0) <= zero_tol * scale]
    if strict and len(small) > 1:
        raise RepeatedNMPZeros("left null space of dimension > 1 at a zero")
    return U[:, -1]


def right_null_direction(Gz: np.ndarray, strict=True, zero_tol=1e-7):
    _, sv, Vh = np.linalg.svd(Gz)
    scale = max(sv[0], 1e-300) if sv.size else 1.0
    q = Gz.shape[1]
    small = [k for k in range(q) if (sv[k] if k < sv.size else 0.0) <= zero_tol * scale]
    if strict and len(small) > 1:
        raise RepeatedNMPZeros("right null space of dimension > 1 at a zero")
    return Vh[-1].conj()


def transmission_zeros(G: RationalMatrix) -> np.ndarray:
    p, q = G.shape
    if p == q == 1:
        dn, _ = G.det().entries[0][0]
        if dn.is_zero():
            raise NotRightInvertible("determinant vanishes identically")
        if dn.degree == 0:
            return np.array([], dtype=complex)
        return poly_roots(dn)
    if p > q:
        raise NotRightInvertible("tall transfer matrix is not right invertible")
    # matrices: finite eigenvalues of the system pencil of a minimal realization.  The
    # cofactor determinant squares shared denominators and splits repeated roots.
    ss = ss_minimal(G.to_state_space())
    n = ss.A.shape[0]
    Mpen = np.block([[ss.A, ss.B], [ss.C, ss.E]])
    Npen = np.block([[np.eye(n), np.zeros((n, q))], [np.zeros((p, n + q))]])
    w = linalg.eigvals(Mpen, Npen)
    w = w[np.isfinite(w)]
    rank = np.linalg.matrix_rank(G(1.2345 + 0.321j))
    if rank < p:
        raise NotRightInvertible("normal row rank deficient")
    out = []
    for z in w:
        try:
            sv = np.linalg.svd(G(z), compute_uv=False)
        except PoleEvaluation:
            continue
        if sv[-1] <= 1e-7 * max(sv[0], 1e-300):
            if abs(z.imag) <= 1e-10 * max(1.0, abs(z)):
                z = complex(z.real, 0.0)
            out.append(z)
    return np.array(out, dtype=complex)


def laurent_leading(G: RationalMatrix, p):
    """Leading Laurent coefficient matrix of G at p and its order."""
    orders = np.zeros(G.shape, dtype=int)
    coef = np.zeros(G.shape, dtype=complex)
    for i, row in enumerate(G.entries):
        for j, (n, d) in enumerate(row):
            if n.is_zero():
                continue
            k, dd = 0, d
            while dd.degree > 0 and abs(dd(p)) <= 1e-8 * max(dd.scale_norm(p), 1e-300):
                dd = dd.divmod(Polynomial([-p, 1.0]))[0]
                k += 1
            orders[i, j] = k
            coef[i, j] = n(p) / dd(p)
    kmax = int(orders.max())
    return np.where(orders == kmax, coef, 0.0), kmax


def zeros_poles(G: RationalMatrix) -> ZeroPoleData:
    """Transmission zeros with output directions and poles with input directions."""
    zs = transmission_zeros(G)
    rhp = [z for z in zs if classify(z) == "rhp"]
    for a in range(len(rhp)):
        for b in range(a + 1, len(rhp)):
            if abs(rhp[a] - rhp[b]) <= 1e-6 * max(1.0, abs(rhp[a])):
                raise RepeatedNMPZeros(f"repeated right-half-plane zeros near {rhp[a]}")
    zeros = []
    for z in zs:
        try:
            Gz = G(z)
        except PoleEvaluation:
            zeros.append((z, None))
            continue
        eta = left_null_direction(Gz, strict=classify(z) == "rhp")
        zeros.append((z, eta))
    poles = []
    for p in _unique(list(G.poles())):
        R, _ = laurent_leading(G, p)
        U, _, _ = np.linalg.svd(R)
        poles.append((p, U[:, 0]))
    return ZeroPoleData(
        zeros=zeros,
        poles=poles,
        zero_class=[classify(z) for z, _ in zeros],
        pole_class=[classify(p) for p, _ in poles],
    )


# --------------------------------------------------------------------------
# H2 norms


def h2_norm_ss(ss: StateSpace) -> float:
    if ss.A.shape[0] == 0:
        return 0.0
    Wo = linalg.solve_continuous_lyapunov(ss.A.conj().T, -ss.C.conj().T @ ss.C)
    val = np.real(np.trace(ss.B.conj().T @ Wo @ ss.B))
    return float(np.sqrt(max(val, 0.0)))


def h2_norm_quad(G: RationalMatrix) -> float:
    """Frequency-domain H2 norm over the whole axis with omega = tan(theta)."""
    def dens(w):
        return np.sum(np.abs(G(1j * w)) ** 2)

    poles = G.poles()
    breaks = sorted({float(np.arctan(abs(p.imag))) for p in poles if abs(p.imag) > 0} |
                    {float(np.arctan(abs(p))) for p in poles})

    def half(sign):
        f = lambda th: dens(sign * np.tan(th)) / np.cos(th) ** 2
        pts = [b for b in breaks if 0 < b < np.pi / 2]
        val, _ = integrate.quad(f, 0.0, np.pi / 2, points=pts or None, limit=500, epsabs=1e-14, epsrel=1e-11)
        return val

    val = (half(1.0) + half(-1.0)) / (2 * np.pi)
    return float(np.sqrt(max(val, 0.0)))


def h2_norm(G: RationalMatrix, check=True) -> float:
    """H2 norm by the observability-Gramian route, cross-checked by quadrature."""
    if all(n.is_zero() for row in G.entries for n, _ in row):
        return 0.0
    rd = G.relative_degree()
    if rd < 1:
        raise NotInH2("transfer matrix is not strictly proper", relative_degree=rd)
    if not G.is_stable():
        raise NotInH2("transfer matrix has poles in the closed right half-plane", relative_degree=rd)
    val = h2_norm_ss(G.to_state_space())
    if check:
        q = h2_norm_quad(G)
        if abs(val - q) > 1e-6 * (1 + val):
            raise NumericalInconsistency(f"H2 norm routes disagree: lyapunov {val!r} quadrature {q!r}")
    return val


# --------------------------------------------------------------------------
# state-space plumbing


def ss_from(G) -> StateSpace:
    if isinstance(G, StateSpace):
        return G
    return G.to_state_space()


def _dt(*arrs):
    return complex if any(np.iscomplexobj(a) for a in arrs) else float


def ss_series(first, second) -> StateSpace:
    """y = second(first(u))."""
    a, b = ss_from(first), ss_from(second)
    dt = _dt(a.A, a.B, a.C, a.E, b.A, b.B, b.C, b.E)
    n1, n2 = a.A.shape[0], b.A.shape[0]
    A = np.zeros((n1 + n2, n1 + n2), dtype=dt)
    A[:n1, :n1] = a.A
    A[n1:, :n1] = b.B @ a.C
    A[n1:, n1:] = b.A
    B = np.vstack([a.B, b.B @ a.E]).astype(dt)
    C = np.hstack([b.E @ a.C, b.C]).astype(dt)
    return StateSpace(A, B, C, (b.E @ a.E).astype(dt))


def ss_append(*systems) -> StateSpace:
    """Block-diagonal: independent inputs and outputs."""
    ss = [ss_from(s) for s in systems]
    dt = _dt(*[x for s in ss for x in (s.A, s.B, s.C, s.E)])
    return StateSpace(
        linalg.block_diag(*[s.A for s in ss]).astype(dt) if any(s.A.size for s in ss) else np.zeros((0, 0)),
        _bd([s.B for s in ss], dt),
        _bd([s.C for s in ss], dt),
        _bd([s.E for s in ss], dt),
    )


def _bd(mats, dt):
    r = sum(m.shape[0] for m in mats)
    c = sum(m.shape[1] for m in mats)
    out = np.zeros((r, c), dtype=dt)
    i = j = 0
    for m in mats:
        out[i:i + m.shape[0], j:j + m.shape[1]] = m
        i += m.shape[0]
        j += m.shape[1]
    return out


def ss_vstack(*systems) -> StateSpace:
    """Shared input, stacked outputs."""
    ss = ss_append(*systems)
    q = ss_from(systems[0]).E.shape[1]
    k = len(systems)
    J = np.vstack([np.eye(q)] * k)
    return StateSpace(ss.A, ss.B @ J, ss.C, ss.E @ J)


def ss_hstack(*systems) -> StateSpace:
    """Separate inputs, summed outputs."""
    ss = ss_append(*systems)
    p = ss_from(systems[0]).E.shape[0]
    k = len(systems)
    J = np.hstack([np.eye(p)] * k)
    return StateSpace(ss.A, ss.B, J @ ss.C, J @ ss.E)


def ss_gain(ss, left=None, right=None) -> StateSpace:
    ss = ss_from(ss)
    A, B, C, E = ss.A, ss.B, ss.C, ss.E
    if left is not None:
        left = np.atleast_2d(left)
        C, E = left @ C, left @ E
    if right is not None:
        right = np.atleast_2d(right)
        B, E = B @ right, E @ right
    return StateSpace(A, B, C, E)


def ss_add(a, b) -> StateSpace:
    a, b = ss_from(a), ss_from(b)
    p, q = a.E.shape
    return ss_gain(ss_append(a, b), left=np.hstack([np.eye(p)] * 2), right=np.vstack([np.eye(q)] * 2))


def ss_inv(ss) -> StateSpace:
    """Inverse of a biproper system (E invertible)."""
    ss = ss_from(ss)
    Ei = np.linalg.inv(ss.E)
    return StateSpace(ss.A - ss.B @ Ei @ ss.C, ss.B @ Ei, -Ei @ ss.C, Ei)


def ss_kron_eye(ss, k) -> StateSpace:
    return ss_append(*([ss_from(ss)] * k))


def ss_times_s_over(ss) -> StateSpace:
    """Realization of G(s)/s for stable G with G(0) = 0: C (sI-A)^-1 A^-1 B."""
    ss = ss_from(ss)
    if ss.A.shape[0] == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, ss.E.shape[1])), np.zeros((ss.E.shape[0], 0)),
                          np.zeros_like(ss.E))
    return StateSpace(ss.A, np.linalg.solve(ss.A, ss.B), ss.C, np.zeros_like(ss.E))


def ss_dc_gain(ss):
    ss = ss_from(ss)
    if ss.A.shape[0] == 0:
        return ss.E
    return ss.E - ss.C @ np.linalg.solve(ss.A, ss.B)


def _range_basis(M, tol):
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros((M.shape[0], 0))
    r = int(np.sum(sv > tol * sv[0]))
    return U[:, :r]


def ss_minimal(ss, tol=1e-9) -> StateSpace:
    """Remove uncontrollable then unobservable states by orthogonal staircase projections."""
    ss = ss_from(ss)
    A, B, C, E = ss.A, ss.B, ss.C, ss.E
    n = A.shape[0]
    if n == 0:
        return ss
    # controllable subspace by orthonormal Krylov iteration
    V = _range_basis(B, tol)
    for _ in range(n):
        W = _range_basis(np.hstack([V, A @ V]), tol)
        if W.shape[1] == V.shape[1]:
            break
        V = W
    A, B, C = V.conj().T @ A @ V, V.conj().T @ B, C @ V
    n = A.shape[0]
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, B.shape[1])), np.zeros((C.shape[0], 0)), E)
    V = _range_basis(C.conj().T, tol)
    for _ in range(n):
        W = _range_basis(np.hstack([V, A.conj().T @ V]), tol)
        if W.shape[1] == V.shape[1]:
            break
        V = W
    return StateSpace(V.conj().T @ A @ V, V.conj().T @ B, C @ V, E)


def gram_of_outputs(ss) -> np.ndarray:
    """Matrix of H2 inner products <G e_i, G e_j> between the input columns of a stable strictly proper system."""
    ss = ss_from(ss)
    Wo = linalg.solve_continuous_lyapunov(ss.A.conj().T, -ss.C.conj().T @ ss.C)
    return ss.B.conj().T @ Wo @ ss.B
