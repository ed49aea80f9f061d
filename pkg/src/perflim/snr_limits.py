"""Channel SNR needed to stabilize, and the extra power optimal tracking costs (scalar plants)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_algebra import (
    Polynomial,
    RationalMatrix,
    classify,
    h2_norm,
    para_adjoint,
    poly_roots,
)
from .errors import (
    EvaluationCollision,
    MarginalPole,
    NotInH2,
    NotSISO,
    NumericalInconsistency,
    PoleEvaluation,
)
from .factorization import allpass_extract_poles, allpass_extract_zeros, inner_outer, lemma3_expand
from .perf_limits import ChannelModel, loop_data


@dataclass(frozen=True)
class SNRReport:
    stabilizability_snr: float
    tracking_penalty: float
    j_star_simplified: Optional[float] = None
    power_threshold: Optional[float] = None
    admissible: Optional[bool] = None

    @property
    def total(self) -> float:
        return self.stabilizability_snr + self.tracking_penalty


def _scalar_channel(P: RationalMatrix, channel) -> ChannelModel:
    if P.shape != (1, 1):
        raise NotSISO("SNR bounds are stated for scalar plants")
    if channel is None:
        channel = ChannelModel.lowpass(None, None, 1.0, 1.0)
    elif isinstance(channel, RationalMatrix):
        channel = ChannelModel(RationalMatrix.identity(1), channel, [1.0], [1.0])
    if channel.F.shape != (1, 1):
        raise NotSISO("SNR bounds are stated for scalar channels")
    return channel


def _check_poles(G: RationalMatrix):
    for p in G.poles():
        if classify(p) == "imag" and abs(p) > 1e-9:
            raise MarginalPole(f"pole {p} on the imaginary axis")


def _outer_of(G: RationalMatrix) -> RationalMatrix:
    return inner_outer(G).outer


def _pole_terms(ld, N_om):
    """Residues r_i of N_om N^{-1} H Bt^{-1} at the unstable poles, with the chain."""
    chain = allpass_extract_poles(ld.cf.Mt)
    out = []
    for i, fct in enumerate(chain.factors):
        if fct.trivial:
            continue
        p = fct.location
        try:
            Ninv = 1.0 / ld.cf.N(p)[0, 0]
        except (PoleEvaluation, ZeroDivisionError) as exc:
            raise EvaluationCollision(f"N vanishes or is singular at pole {p}") from exc
        val = N_om(p)[0, 0] * Ninv * ld.channel.H(p)[0, 0]
        out.append((p, val * chain.inverse_residue(i)[0, 0]))
    return out, chain


def _hermitian(pairs) -> float:
    tot = 0j
    for pi, ri in pairs:
        for pj, rj in pairs:
            tot += np.conj(ri) * rj / (np.conj(pi) + pj)
    if abs(tot.imag) > 1e-9 * max(1.0, abs(tot)):
        raise NumericalInconsistency(f"imaginary residue sum {tot.imag}")
    return float(tot.real)


def stabilizability_snr(P: RationalMatrix, H=None, F=None, pole: float = -1.0) -> float:
    """sum_ij conj(r_i) r_j / (conj(p_i) + p_j) over the unstable poles of P F."""
    channel = _scalar_channel(P, H if isinstance(H, (ChannelModel, type(None))) else H)
    if F is not None:
        channel = ChannelModel(F, channel.H, channel.sigma, channel.gamma)
    ld = loop_data(P, channel, pole)
    _check_poles(ld.G)
    N_om = _outer_of(ld.PM)
    pairs, _ = _pole_terms(ld, N_om)
    return max(_hermitian(pairs), 0.0)


def stabilizability_snr_h2(P: RationalMatrix, H=None, F=None, pole: float = -1.0) -> float:
    """Same bound as the squared H2 norm of the antistable part of N_om Yt H Bt^{-1}."""
    channel = _scalar_channel(P, H)
    if F is not None:
        channel = ChannelModel(F, channel.H, channel.sigma, channel.gamma)
    ld = loop_data(P, channel, pole)
    _check_poles(ld.G)
    N_om = _outer_of(ld.PM)
    chain = allpass_extract_poles(ld.cf.Mt)
    if not any(not f.trivial for f in chain.factors):
        return 0.0
    _, terms = lemma3_expand(N_om @ ld.cf.Yt @ channel.H, chain)
    anti = None
    for fct, c in zip(chain.factors, terms):
        if fct.trivial:
            continue
        t = RationalMatrix.scalar(Polynomial([c[0, 0]]), Polynomial([-fct.location, 1.0]))
        anti = t if anti is None else anti + t
    return h2_norm(para_adjoint(anti)) ** 2


def tracking_snr_penalty(P: RationalMatrix, channel=None, pole: float = -1.0) -> float:
    """P_Ad = || S_B - S_L N_m^{-1} Mt_m ||_2^2.

    S_B is the stable remainder of N_om Yt H Bt^{-1}; S_L that of N_om X H Lhat^{-1}.
    """
    channel = _scalar_channel(P, channel)
    ld = loop_data(P, channel, pole)
    _check_poles(ld.G)
    N_om = _outer_of(ld.PM)
    H = channel.H
    bchain = allpass_extract_poles(ld.cf.Mt)
    lchain = allpass_extract_zeros(ld.cf.N, "Lhat")
    S_B, _ = lemma3_expand(N_om @ ld.cf.Yt @ H, bchain)
    S_L, _ = lemma3_expand(N_om @ ld.cf.X @ H, lchain)
    Nm, Mtm = lchain.minimum_phase_part, bchain.minimum_phase_part
    arg = (S_B - S_L @ Nm.inv() @ Mtm).simplified()
    if not arg.is_strictly_proper():
        rd = arg.relative_degree()
        raise NotInH2(f"tracking residual has relative degree {rd}", rd)
    return h2_norm(arg) ** 2


def theorem2_jstar(P: RationalMatrix, channel=None, sigma=None, gamma=None, pole: float = -1.0) -> float:
    """J* of the unweighted index: 2 sigma^2 sum Re z/|z|^2 + gamma^2 sum conj(r_i) r_j/(conj z_i + z_j)."""
    channel = _scalar_channel(P, channel)
    sig = float(channel.sigma[0] if sigma is None else np.atleast_1d(sigma)[0])
    gam = float(channel.gamma[0] if gamma is None else np.atleast_1d(gamma)[0])
    ld = loop_data(P, channel, pole)
    zs = allpass_extract_zeros(ld.cf.N, "L").locations
    j = 2.0 * sig ** 2 * sum(z.real / abs(z) ** 2 for z in zs)
    if gam == 0:
        return float(j)
    N_om = _outer_of(ld.PM)
    K = ld.cf.Nt @ channel.H
    kz = [complex(z) for z in poly_roots(K.num) if classify(z) == "rhp"] if K.num.degree > 0 else []
    pairs = []
    for i, z in enumerate(kz):
        prod = 1.0 + 0j
        for k, w in enumerate(kz):
            if k != i:
                prod *= (z + np.conj(w)) / (z - w)
        try:
            Minv = 1.0 / ld.cf.M(z)[0, 0]
        except (PoleEvaluation, ZeroDivisionError) as exc:
            raise EvaluationCollision(f"zero {z} coincides with a plant pole") from exc
        pairs.append((z, N_om(z)[0, 0] * Minv * channel.H(z)[0, 0] * 2.0 * z.real * prod))
    return float(j + gam ** 2 * max(_hermitian(pairs), 0.0))


def snr_report(P: RationalMatrix, channel=None, power_threshold: Optional[float] = None,
               pole: float = -1.0) -> SNRReport:
    channel = _scalar_channel(P, channel)
    stab = stabilizability_snr(P, channel, pole=pole)
    try:
        pad = tracking_snr_penalty(P, channel, pole)
    except NotInH2:
        pad = float("inf")
    js = theorem2_jstar(P, channel, pole=pole)
    adm = None
    if power_threshold is not None:
        gam2 = float(channel.gamma[0]) ** 2
        adm = bool(gam2 > 0 and power_threshold / gam2 > stab + pad)
    return SNRReport(stab, pad, js, power_threshold, adm)
