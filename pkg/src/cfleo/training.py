"""Uplink pilots with reuse and phase-aware MMSE channel estimation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import ChannelRealization, LargeScaleParams, _cn


@dataclass(frozen=True)
class PilotAssignment:
    tau_up: int
    pilot_index: np.ndarray  # (K,) int in [0, tau_up)
    pilot_power: np.ndarray  # (K,) W

    def __post_init__(self):
        if self.tau_up < 1:
            raise ValueError("tau_up must be >= 1")
        idx = np.asarray(self.pilot_index)
        if idx.size and (idx.min() < 0 or idx.max() >= self.tau_up):
            raise ValueError("pilot index out of range")
        if np.any(np.asarray(self.pilot_power) < 0):
            raise ValueError("pilot power must be non-negative")

    @property
    def num_uts(self) -> int:
        return len(self.pilot_index)

    @property
    def copilot_mask(self) -> np.ndarray:
        """(K, K) bool, True where two UTs share a pilot (diagonal included)."""
        return self.pilot_index[:, None] == self.pilot_index[None, :]

    @property
    def copilot_sets(self) -> list[frozenset[int]]:
        mask = self.copilot_mask
        return [frozenset(np.flatnonzero(row).tolist()) for row in mask]

    def copilot_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Ordered pairs (k, k') with k != k' sharing a pilot."""
        mask = self.copilot_mask & ~np.eye(self.num_uts, dtype=bool)
        return np.nonzero(mask)

    def select_uts(self, idx) -> "PilotAssignment":
        return PilotAssignment(self.tau_up, self.pilot_index[idx], self.pilot_power[idx])


def round_robin(num_uts: int, tau_up: int) -> np.ndarray:
    return np.arange(num_uts) % tau_up


def assign_pilots(num_uts: int, tau_up: int, pilot_power: float = 10 ** 0.5,
                  policy: Callable[[int, int], np.ndarray] = round_robin) -> PilotAssignment:
    """Pilot ids from ``policy`` (round-robin by default) and uniform pilot power (W)."""
    if tau_up < 1:
        raise ValueError("tau_up must be >= 1")
    idx = np.asarray(policy(num_uts, tau_up), dtype=int)
    return PilotAssignment(tau_up, idx, np.full(num_uts, float(pilot_power)))


def pilot_book(tau_up: int) -> np.ndarray:
    """DFT pilot book; column a is pilot a, psi_a^H psi_b = tau_up * delta_ab."""
    if tau_up < 1:
        raise ValueError("tau_up must be >= 1")
    n = np.arange(tau_up)
    return np.exp(-2j * np.pi * np.outer(n, n) / tau_up)


@dataclass(frozen=True)
class PilotObservation:
    y: np.ndarray  # (..., M, tau_up)
    despread: np.ndarray  # (..., M, K)
    noise_var: float


def receive_and_despread(channels: ChannelRealization, pa: PilotAssignment,
                         noise_var: float, rng: np.random.Generator) -> PilotObservation:
    """Received pilot block at every SAP and its projection onto each UT's pilot."""
    book = pilot_book(pa.tau_up)
    psi = book[:, pa.pilot_index]  # (tau, K)
    h = channels.h
    tx = h * np.sqrt(pa.pilot_power)  # (..., M, K)
    y = tx @ psi.T  # (..., M, tau)
    if noise_var > 0:
        y = y + _cn(rng, noise_var, y.shape)
    despread = y @ psi.conj()  # psi_k^H y_m
    return PilotObservation(y=y, despread=despread, noise_var=noise_var)


class DegenerateEstimate(ArithmeticError):
    pass


def innovation_variance(ls: LargeScaleParams, pa: PilotAssignment, noise_var: float) -> np.ndarray:
    """gamma_{m,k} = sum over co-pilot UTs of q tau lambda, plus pilot noise."""
    w = pa.pilot_power * pa.tau_up * ls.lam  # (M, K)
    gamma = w @ pa.copilot_mask.astype(float) + noise_var
    return gamma


@dataclass(frozen=True)
class EstimateSet:
    hhat: np.ndarray | None  # (..., M, K); None for statistics-only sets
    gamma: np.ndarray  # (M, K)
    mean: np.ndarray | None  # (..., M, K)
    variance: np.ndarray  # (M, K)
    beta: np.ndarray  # (M, K)

    @property
    def second_moment(self) -> np.ndarray:
        """E|hhat|^2 = beta + variance, the diagonal of W_k."""
        return self.beta + self.variance


def estimate_statistics(ls: LargeScaleParams, pa: PilotAssignment, noise_var: float) -> EstimateSet:
    gamma = innovation_variance(ls, pa, noise_var)
    if np.any(gamma <= 0):
        raise DegenerateEstimate("innovation variance is zero; need noise or NLoS power")
    variance = pa.pilot_power * pa.tau_up * ls.lam ** 2 / gamma
    return EstimateSet(hhat=None, gamma=gamma, mean=None, variance=variance, beta=ls.beta)


def mmse_estimate(obs: PilotObservation, ls: LargeScaleParams, phases: np.ndarray,
                  pa: PilotAssignment) -> EstimateSet:
    """Phase-aware MMSE estimate given the true LoS phases."""
    stats = estimate_statistics(ls, pa, obs.noise_var)
    sq = np.sqrt(pa.pilot_power)
    mean = np.sqrt(ls.beta) * np.exp(1j * phases)  # (..., M, K)
    # expected despread output: co-pilot LoS sum, same for every member of a pilot group
    ybar = (mean * sq * pa.tau_up) @ pa.copilot_mask.astype(float)
    hhat = mean + sq * ls.lam * (obs.despread - ybar) / stats.gamma
    return EstimateSet(hhat=hhat, gamma=stats.gamma, mean=mean,
                       variance=stats.variance, beta=ls.beta)


def estimator_moment_check(ls: LargeScaleParams, pa: PilotAssignment, noise_var: float,
                           phases: np.ndarray, n_trials: int, rng: np.random.Generator,
                           chunk: int = 20_000) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Monte-Carlo moments of the estimate with the LoS phases held fixed.

    Returns ``name -> (closed_form, empirical)`` for the conditional mean,
    conditional variance, second moment and co-pilot innovation covariance
    (entries off the co-pilot pattern are zero in the closed form).
    """
    M, K = ls.shape
    stats = estimate_statistics(ls, pa, noise_var)
    mean = np.sqrt(ls.beta) * np.exp(1j * phases)
    s1 = np.zeros((M, K), complex)
    s2 = np.zeros((M, K))
    scov = np.zeros((M, K, K), complex)
    done = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        nlos = _cn(rng, ls.lam, (n, M, K))
        h = mean + nlos
        obs = receive_and_despread(ChannelRealization(h, np.broadcast_to(phases, h.shape), nlos),
                                   pa, noise_var, rng)
        hhat = mmse_estimate(obs, ls, phases, pa).hhat
        s1 += hhat.sum(axis=0)
        s2 += (np.abs(hhat) ** 2).sum(axis=0)
        e = hhat - mean
        scov += np.einsum("nmk,nmj->mkj", e, e.conj())
        done += n
    emp_mean = s1 / n_trials
    emp_second = s2 / n_trials
    emp_var = emp_second - np.abs(emp_mean) ** 2
    q = pa.pilot_power
    mask = pa.copilot_mask & ~np.eye(K, dtype=bool)
    closed_cov = (pa.tau_up * np.sqrt(q[:, None] * q[None, :])[None]
                  * ls.lam[:, :, None] * ls.lam[:, None, :] / stats.gamma[:, :, None]) * mask
    return {
        "mean": (mean, emp_mean),
        "variance": (stats.variance, emp_var),
        "second_moment": (stats.second_moment, emp_second),
        "copilot_cov": (closed_cov, (scov / n_trials).real * mask),
    }
