"""Conjugate beamforming and the closed-form downlink achievable rate.

All the matrices in the rate expression are diagonal, so every trace is an
O(M) sum. ``RateModel`` precomputes the power-independent parts once and then
evaluates rates for any stack of power matrices ``P[..., M, K]``; the GA uses
it directly as its batched fitness kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LargeScaleParams, draw_channel
from .training import (EstimateSet, PilotAssignment, estimate_statistics,
                       mmse_estimate, receive_and_despread)


@dataclass(frozen=True)
class FrameConfig:
    tau_c: int = 300
    tau_up: int = 30
    tau_ud: int = 0
    tau_dd: int = 270

    def __post_init__(self):
        parts = (self.tau_up, self.tau_ud, self.tau_dd)
        if min(parts) < 0:
            raise ValueError("frame segments must be non-negative")
        if sum(parts) != self.tau_c:
            raise ValueError(f"tau_up + tau_ud + tau_dd = {sum(parts)} != tau_c = {self.tau_c}")

    @property
    def dl_fraction(self) -> float:
        return self.tau_dd / self.tau_c


def noise_power_w(bandwidth_mhz: float = 20.0, noise_figure_db: float = 7.0,
                  nsd_dbm_hz: float = -174.0) -> float:
    dbw = nsd_dbm_hz + 10 * math.log10(bandwidth_mhz * 1e6) + noise_figure_db - 30
    return 10 ** (dbw / 10)


class ModelViolation(ArithmeticError):
    """A rate denominator came out non-positive, which valid inputs cannot produce."""


@dataclass(frozen=True)
class RateReport:
    rate: np.ndarray  # (..., K) bps/Hz
    sinr: np.ndarray
    numerator: np.ndarray
    interference: np.ndarray  # sum_k' tr(P_k' A'_k W_k')
    contamination: np.ndarray  # co-pilot coherent term
    self_correction: np.ndarray  # tr(P_k B_k^2), subtracted


@dataclass(frozen=True)
class RateInputs:
    P: np.ndarray
    ls: LargeScaleParams
    pa: PilotAssignment
    noise_var: float
    frame: FrameConfig
    pilot_noise_var: float | None = None  # defaults to noise_var

    def __post_init__(self):
        if np.any(np.asarray(self.P) < 0):
            raise ValueError("power scaling factors must be non-negative")


class RateModel:
    """Power-independent part of the closed-form rate for one (ls, pa, noise) setting."""

    def __init__(self, ls: LargeScaleParams, pa: PilotAssignment, noise_var: float,
                 frame: FrameConfig, pilot_noise_var: float | None = None):
        self.ls, self.pa, self.frame = ls, pa, frame
        self.noise_var = noise_var
        pn = noise_var if pilot_noise_var is None else pilot_noise_var
        self.pilot_noise_var = pn
        self.stats = estimate_statistics(ls, pa, pn)
        self.W = self.stats.second_moment
        self.live = self.W > 0
        safe_W = np.where(self.live, self.W, 1.0)
        self.sqrt_W = np.sqrt(self.W)
        self.lam = ls.lam
        self.lam_prime = ls.lam + ls.beta
        self.beta_sq_over_W = np.where(self.live, ls.beta ** 2 / safe_W, 0.0)
        # contamination: X[m,k'] = sqrt(p/W) lam_{m,k'} / gamma_{m,k'}
        self.contam_coef = np.where(self.live, ls.lam / (self.stats.gamma * np.sqrt(safe_W)), 0.0)
        self._set_pairs(pa.copilot_mask & ~np.eye(pa.num_uts, dtype=bool), pa.pilot_power, pa.tau_up)

    def _set_pairs(self, mask, q, tau):
        ks, kps = np.nonzero(mask)
        self.pairs = (ks, kps)
        self.pair_weight = q[ks] * q[kps] * tau ** 2
        self._pair_sum = np.zeros((len(ks), mask.shape[0]))
        self._pair_sum[np.arange(len(ks)), ks] = 1.0

    def restrict(self, idx) -> "RateModel":
        """Model over a subset of UT columns, the others carrying zero power.

        Estimation statistics keep the pilots of the dropped UTs.
        """
        idx = np.asarray(idx)
        sub = object.__new__(RateModel)
        sub.__dict__.update(self.__dict__)
        for name in ("W", "live", "sqrt_W", "lam", "lam_prime", "beta_sq_over_W", "contam_coef"):
            setattr(sub, name, getattr(self, name)[:, idx])
        sub._set_pairs(self.pa.copilot_mask[np.ix_(idx, idx)] & ~np.eye(len(idx), dtype=bool),
                       self.pa.pilot_power[idx], self.pa.tau_up)
        return sub

    @classmethod
    def from_inputs(cls, inputs: RateInputs) -> "RateModel":
        return cls(inputs.ls, inputs.pa, inputs.noise_var, inputs.frame, inputs.pilot_noise_var)

    @property
    def shape(self):
        return self.W.shape

    def terms(self, P: np.ndarray):
        """Numerator and denominator pieces for P[..., M, K]."""
        P = np.asarray(P, dtype=float)
        sqrt_P = np.sqrt(P)
        num = np.einsum("...mk,mk->...k", sqrt_P, self.sqrt_W) ** 2
        load = P.sum(axis=-1)  # (..., M) total power per SAP
        interf = load @ self.lam_prime
        selfc = np.einsum("...mk,mk->...k", P, self.beta_sq_over_W)
        ks, kps = self.pairs
        if len(ks):
            X = sqrt_P[..., kps] * self.contam_coef[:, kps]
            t = np.einsum("...mp,mp->...p", X, self.lam[:, ks])
            contam = (self.pair_weight * t ** 2) @ self._pair_sum
        else:
            contam = np.zeros_like(num)
        return num, interf, contam, selfc

    def report(self, P: np.ndarray) -> RateReport:
        num, interf, contam, selfc = self.terms(P)
        denom = interf + contam - selfc + self.noise_var
        if np.any(denom <= 0):
            raise ModelViolation(f"non-positive rate denominator (min {denom.min():.3e})")
        sinr = num / denom
        rate = self.frame.dl_fraction * np.log2(1 + sinr)
        return RateReport(rate, sinr, num, interf, contam, selfc)

    def rates(self, P: np.ndarray) -> np.ndarray:
        return self.report(P).rate

    def single_ut_bound(self, p_max: np.ndarray) -> np.ndarray:
        """Rate upper bound per UT: all SAPs at full power, no interference or self term."""
        num = (np.sqrt(p_max[:, None] * self.W)).sum(axis=0) ** 2
        return self.frame.dl_fraction * np.log2(1 + num / self.noise_var)


def closed_form_rate(inputs: RateInputs) -> RateReport:
    return RateModel.from_inputs(inputs).report(inputs.P)


def precoder(est: EstimateSet, P: np.ndarray) -> np.ndarray:
    """Conjugate-beamforming coefficients v = sqrt(p / E|hhat|^2) * hhat."""
    W = est.second_moment
    P = np.asarray(P, dtype=float)
    if np.any((P > 0) & (W <= 0)):
        raise ValueError("positive power on a link with zero channel statistics")
    scale = np.sqrt(np.divide(P, W, out=np.zeros_like(P), where=W > 0))
    if est.hhat is None:
        raise ValueError("estimate set carries no realizations")
    return scale * est.hhat


@dataclass
class MomentTerm:
    name: str
    closed: float
    empirical: float

    @property
    def rel_error(self) -> float:
        if self.closed == 0:
            return abs(self.empirical)
        return abs(self.empirical - self.closed) / abs(self.closed)


@dataclass
class MomentReport:
    terms: list[MomentTerm]
    n_trials: int

    def worst(self) -> MomentTerm:
        return max(self.terms, key=lambda t: t.rel_error)

    def passed(self, tol: float) -> bool:
        return all(t.rel_error <= tol for t in self.terms)

    def by_prefix(self, prefix: str) -> list[MomentTerm]:
        return [t for t in self.terms if t.name.startswith(prefix)]


def _simulate_chunk(inputs: RateInputs, n: int, rng: np.random.Generator):
    pn = inputs.noise_var if inputs.pilot_noise_var is None else inputs.pilot_noise_var
    ch = draw_channel(inputs.ls, rng, n=n)
    obs = receive_and_despread(ch, inputs.pa, pn, rng)
    est = mmse_estimate(obs, inputs.ls, ch.phase, inputs.pa)
    V = precoder(est, inputs.P)  # (n, M, K)
    # g[n, k', k] = v_{k'}^H h_k
    g = np.einsum("nmj,nmk->njk", V.conj(), ch.h)
    return ch, est, V, g


def mc_moment_check(inputs: RateInputs, n_trials: int, rng: np.random.Generator,
                    chunk: int = 20_000) -> MomentReport:
    """Compare every closed-form trace term against its Monte-Carlo moment.

    Joint draws of channel, pilot noise and estimate; expectations are
    unconditional over the LoS phases.
    """
    if n_trials < 10_000:
        raise ValueError("n_trials must be >= 1e4")
    model = RateModel.from_inputs(inputs)
    M, K = model.shape
    P = np.asarray(inputs.P, dtype=float)
    mask = inputs.pa.copilot_mask

    sum_g = np.zeros((K, K), complex)
    sum_g2 = np.zeros((K, K))
    sum_hh2 = np.zeros((M, K))
    sum_v2 = np.zeros((M, K))
    sum_err2 = np.zeros((M, K))
    sum_cov = np.zeros((M, K, K), complex)
    done = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        ch, est, V, g = _simulate_chunk(inputs, n, rng)
        sum_g += g.sum(axis=0)
        sum_g2 += (np.abs(g) ** 2).sum(axis=0)
        sum_hh2 += (np.abs(est.hhat) ** 2).sum(axis=0)
        sum_v2 += (np.abs(V) ** 2).sum(axis=0)
        # estimation innovation relative to the (known-phase) mean
        e = est.hhat - est.mean
        sum_err2 += (np.abs(e) ** 2).sum(axis=0)
        sum_cov += np.einsum("nmk,nmj->mkj", e, e.conj())
        done += n

    Eg = sum_g / n_trials
    Eg2 = sum_g2 / n_trials
    terms: list[MomentTerm] = []
    num, interf, contam, selfc = model.terms(P)
    live = P > 0
    for m in range(M):
        for k in range(K):
            if model.W[m, k] > 0:
                terms.append(MomentTerm(f"second_moment[{m},{k}]", model.W[m, k], sum_hh2[m, k] / n_trials))
                terms.append(MomentTerm(f"est_variance[{m},{k}]", model.stats.variance[m, k],
                                        sum_err2[m, k] / n_trials))
            if live[m, k]:
                terms.append(MomentTerm(f"precoder_power[{m},{k}]", P[m, k], sum_v2[m, k] / n_trials))
            for j in range(K):
                if j != k and mask[k, j] and model.W[m, k] > 0:
                    q = inputs.pa.pilot_power
                    closed = (inputs.pa.tau_up * math.sqrt(q[k] * q[j]) * inputs.ls.lam[m, k]
                              * inputs.ls.lam[m, j] / model.stats.gamma[m, k])
                    terms.append(MomentTerm(f"copilot_cov[{m},{k},{j}]", closed,
                                            (sum_cov[m, k, j] / n_trials).real))
    for k in range(K):
        if num[k] > 0:
            terms.append(MomentTerm(f"numerator[{k}]", num[k], abs(Eg[k, k]) ** 2))
            self_closed = (P[:, k] * model.lam_prime[:, k]).sum() - selfc[k]
            terms.append(MomentTerm(f"self_variance[{k}]", self_closed, Eg2[k, k] - abs(Eg[k, k]) ** 2))
        for j in range(K):
            if j == k or not live[:, j].any():
                continue
            base = (P[:, j] * model.lam_prime[:, k]).sum()
            if mask[k, j]:
                q = inputs.pa.pilot_power
                coh = q[k] * q[j] * inputs.pa.tau_up ** 2 * (
                    (inputs.ls.lam[:, k] * np.sqrt(P[:, j]) * model.contam_coef[:, j]).sum() ** 2)
                terms.append(MomentTerm(f"contamination[{j}->{k}]", coh, abs(Eg[j, k]) ** 2))
                terms.append(MomentTerm(f"interference[{j}->{k}]", base + coh, Eg2[j, k]))
            else:
                terms.append(MomentTerm(f"interference[{j}->{k}]", base, Eg2[j, k]))
    return MomentReport(terms, n_trials)


def mc_sinr(inputs: RateInputs, n_trials: int, rng: np.random.Generator) -> np.ndarray:
    """Use-and-then-forget SINR estimated end to end from Monte-Carlo moments."""
    K = inputs.P.shape[1]
    sum_g = np.zeros((K, K), complex)
    sum_g2 = np.zeros((K, K))
    done = 0
    while done < n_trials:
        n = min(20_000, n_trials - done)
        *_, g = _simulate_chunk(inputs, n, rng)
        sum_g += g.sum(axis=0)
        sum_g2 += (np.abs(g) ** 2).sum(axis=0)
        done += n
    Eg = np.diag(sum_g) / n_trials
    Eg2 = sum_g2 / n_trials
    signal = np.abs(Eg) ** 2
    total = Eg2.sum(axis=0)
    return signal / (total - signal + inputs.noise_var)
