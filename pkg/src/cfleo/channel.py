"""Large-scale fading and Rician small-scale channel draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ClusterSnapshot

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ChannelConfig:
    carrier_ghz: float = 30.0
    eta: float = 20.0  # antenna roll-off factor
    shadow_std_db: float = 5.0
    rician_k_db: float = 10.0
    sat_gain_db: float = 30.0
    ut_gain_db: float = 5.0

    @property
    def kappa(self) -> float:
        return 10 ** (self.rician_k_db / 10)


def half_power_angle(eta: float) -> float:
    return math.acos(0.5 ** (1.0 / eta))


def angle_loss(theta, eta: float):
    """Boresight-angle loss in dB; negative values are net gain near boresight.

    ``log 2`` of the pattern normalisation is the natural log.
    """
    theta = np.asarray(theta, dtype=float)
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    if np.any(theta >= math.pi / 2) or np.any(theta < 0):
        raise ValueError("boresight angle must lie in [0, pi/2)")
    norm = 32 * math.log(2) / (2 * (2 * half_power_angle(eta)) ** 2)
    out = -10 * (eta * np.log10(np.cos(theta)) + math.log10(norm))
    return out[()] if out.ndim == 0 else out


def distance_loss(slant_km, carrier_ghz: float):
    """Free-space path loss in dB."""
    d = np.asarray(slant_km, dtype=float) * 1e3
    out = 20 * np.log10(4 * math.pi * d * carrier_ghz * 1e9 / SPEED_OF_LIGHT)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class LargeScaleParams:
    L: np.ndarray  # (M, K) linear gain incl. antenna gains
    kappa: np.ndarray  # (M, K) Rician K-factor, linear
    beta: np.ndarray  # LoS power
    lam: np.ndarray  # NLoS variance
    loss_dist: np.ndarray | None = None  # dB diagnostics
    loss_shad: np.ndarray | None = None
    loss_angle: np.ndarray | None = None

    @classmethod
    def from_gain(cls, L, kappa, **diagnostics) -> "LargeScaleParams":
        L = np.asarray(L, dtype=float)
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), L.shape).copy()
        if np.any(L < 0):
            raise ValueError("large-scale gain must be non-negative")
        if np.any(kappa < 0):
            raise ValueError("Rician K-factor must be non-negative")
        inf = np.isinf(kappa)
        with np.errstate(invalid="ignore"):
            beta = np.where(inf, L, kappa * L / (kappa + 1))
            lam = np.where(inf, 0.0, L / (kappa + 1))
        return cls(L=L, kappa=kappa, beta=beta, lam=lam, **diagnostics)

    @property
    def shape(self):
        return self.L.shape

    def select_uts(self, idx) -> "LargeScaleParams":
        """Restrict to a subset of UT columns."""
        pick = lambda a: None if a is None else a[:, idx]
        return LargeScaleParams(
            L=self.L[:, idx], kappa=self.kappa[:, idx], beta=self.beta[:, idx],
            lam=self.lam[:, idx], loss_dist=pick(self.loss_dist),
            loss_shad=pick(self.loss_shad), loss_angle=pick(self.loss_angle),
        )


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # (..., M, K) complex
    phase: np.ndarray  # (..., M, K)
    nlos: np.ndarray  # (..., M, K) complex


def draw_shadowing(shape, std_db: float, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, std_db, size=shape) if std_db > 0 else np.zeros(shape)


def large_scale(snapshot: ClusterSnapshot, config: ChannelConfig,
                shadowing: np.ndarray | None = None,
                rng: np.random.Generator | None = None) -> LargeScaleParams:
    """Per-link gains for one snapshot.

    Shadowing (dB, shape (M, K)) is drawn from ``rng`` when not supplied;
    the simulator draws it once per run and passes it in every slot.
    """
    shape = snapshot.boresight.shape
    if shadowing is None:
        if rng is None:
            raise ValueError("need either shadowing or rng")
        shadowing = draw_shadowing(shape, config.shadow_std_db, rng)
    dist = distance_loss(snapshot.slant, config.carrier_ghz)
    ang = angle_loss(snapshot.boresight, config.eta)
    total_db = dist + shadowing + ang - config.sat_gain_db - config.ut_gain_db
    L = np.where(snapshot.visible, 10 ** (-total_db / 10), 0.0)
    return LargeScaleParams.from_gain(
        L, np.full(shape, config.kappa),
        loss_dist=dist, loss_shad=np.asarray(shadowing, dtype=float), loss_angle=ang,
    )


def _cn(rng: np.random.Generator, var, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    s = np.sqrt(np.asarray(var) / 2)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channel(ls: LargeScaleParams, rng: np.random.Generator,
                 n: int | None = None) -> ChannelRealization:
    """Rician draw h = sqrt(beta) e^{j phi} + CN(0, lambda); ``n`` adds a leading trial axis."""
    shape = ls.shape if n is None else (n, *ls.shape)
    phase = rng.uniform(-math.pi, math.pi, size=shape)
    nlos = _cn(rng, ls.lam, shape)
    h = np.sqrt(ls.beta) * np.exp(1j * phase) + nlos
    return ChannelRealization(h=h, phase=phase, nlos=nlos)
