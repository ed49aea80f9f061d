"""Seeded random plants shared by the test modules."""

import numpy as np

from perflim.core_algebra import Polynomial, RationalMatrix
from perflim.perf_limits import ChannelModel


def tf(num_roots, den_roots, gain=1.0):
    num = np.real(Polynomial.from_roots(list(num_roots)).coeffs) * gain
    den = np.real(Polynomial.from_roots(list(den_roots)).coeffs)
    return RationalMatrix.scalar(num, den)


def integrating_nmp(k):
    """(s - k) / (s (s + 1))."""
    return tf([k], [0.0, -1.0])


def rotation(t):
    c, s = np.cos(t), np.sin(t)
    return RationalMatrix.constant([[c, -s], [s, c]])


def _spread(rng, lo, hi, n, avoid=(), gap=0.3):
    out = []
    while len(out) < n:
        x = float(rng.uniform(lo, hi))
        if all(abs(x - y) > gap for y in list(out) + list(avoid)):
            out.append(round(x, 3))
    return out


def random_siso(rng, nmp=(1, 2), unstable=(0, 1), integrator=None):
    """Strictly proper plant with distinct RHP zeros kept away from its poles."""
    n_nmp = int(rng.integers(nmp[0], nmp[1] + 1))
    n_uns = int(rng.integers(unstable[0], unstable[1] + 1))
    integ = bool(rng.integers(0, 2)) if integrator is None else integrator
    zr = _spread(rng, 0.5, 6.0, n_nmp)
    pu = _spread(rng, 0.3, 4.0, n_uns, avoid=zr)
    zl = _spread(rng, -6.0, -0.5, int(rng.integers(0, 2)))
    pl = _spread(rng, -6.0, -0.5, len(zr) + len(zl) + 1 - n_uns - int(integ), avoid=zl)
    den = pu + pl + ([0.0] if integ else [])
    return tf(zr + zl, den, gain=float(rng.uniform(0.5, 2.0))), zr


def random_mimo(rng):
    """R1 diag(g1, g2) R2 with one RHP zero per channel; coupled through the rotations."""
    g1, z1 = random_siso(rng, nmp=(1, 1), unstable=(0, 1), integrator=True)
    g2, z2 = random_siso(rng, nmp=(1, 1), unstable=(0, 0), integrator=True)
    while abs(z1[0] - z2[0]) < 0.3:
        g2, z2 = random_siso(rng, nmp=(1, 1), unstable=(0, 0), integrator=True)
    D = RationalMatrix.diag([g1, g2])
    P = rotation(float(rng.uniform(0.2, 1.3))) @ D @ rotation(float(rng.uniform(-1.3, -0.2)))
    return P, z1 + z2


def channel(size=1, f=3.0, h=4.0, sigma=1.0, gamma=0.8):
    return ChannelModel.lowpass(f, h, sigma, gamma, size=size)
