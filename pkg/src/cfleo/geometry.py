"""Cluster layout, rigid-body motion and link geometry.

Everything lives in a flat local tangent frame (km): x is the along-track
axis, y cross-track, z up. SAP antennas point at nadir.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class GeometryConfig:
    altitude: float = 550.0  # km
    area_side: float = 1000.0  # km
    num_saps: int = 8
    sap_grid_spacing: float = 250.0  # km
    num_uts: int = 40
    ground_speed: float = 7.0  # km/s
    max_boresight: float = math.radians(60.0)
    next_cluster_offset: float = 1200.0  # km, trailing distance of the next cluster

    def __post_init__(self):
        if not self.altitude > 0:
            raise ValueError(f"altitude must be > 0, got {self.altitude}")
        if not self.area_side > 0:
            raise ValueError(f"area_side must be > 0, got {self.area_side}")
        if self.num_saps < 1:
            raise ValueError(f"num_saps must be >= 1, got {self.num_saps}")
        if self.num_uts < 1:
            raise ValueError(f"num_uts must be >= 1, got {self.num_uts}")
        if not 0 < self.max_boresight < math.pi / 2:
            raise ValueError(f"max_boresight must lie in (0, pi/2), got {self.max_boresight}")
        if self.sap_grid_spacing < 0:
            raise ValueError(f"sap_grid_spacing must be >= 0, got {self.sap_grid_spacing}")


@dataclass(frozen=True)
class ClusterSnapshot:
    time_slot: int
    sap_positions: np.ndarray  # (M, 3)
    ut_positions: np.ndarray  # (K, 2)
    boresight: np.ndarray  # (M, K) rad
    slant: np.ndarray  # (M, K) km
    visible: np.ndarray  # (M, K) bool
    next_cluster_visible: np.ndarray = field(repr=False)  # (K,) bool

    @property
    def num_saps(self) -> int:
        return self.sap_positions.shape[0]

    @property
    def num_uts(self) -> int:
        return self.ut_positions.shape[0]


def grid_shape(num_saps: int) -> tuple[int, int]:
    """(rows, cols) of the SAP grid: ceil(sqrt(M)) columns, last row may be short."""
    if num_saps < 1:
        raise ValueError(f"cannot lay out {num_saps} SAPs")
    cols = math.ceil(math.sqrt(num_saps))
    return math.ceil(num_saps / cols), cols


def sap_grid(config: GeometryConfig) -> np.ndarray:
    """SAP positions (M, 3), grid bounding box centered over the service area."""
    rows, cols = grid_shape(config.num_saps)
    s = config.sap_grid_spacing
    c = config.area_side / 2
    xs = c + s * (np.arange(cols) - (cols - 1) / 2)
    ys = c + s * (np.arange(rows) - (rows - 1) / 2)
    gx, gy = np.meshgrid(xs, ys)  # row-major: rows along y
    xy = np.column_stack([gx.ravel(), gy.ravel()])[: config.num_saps]
    return np.column_stack([xy, np.full(config.num_saps, config.altitude)])


def boresight_angle(sap, ut) -> float:
    """Off-nadir angle from a nadir-pointing SAP to a ground point."""
    sap = np.asarray(sap, dtype=float)
    ut = np.asarray(ut, dtype=float)
    if not sap[2] > 0:
        raise ValueError("SAP altitude must be positive")
    horizontal = math.hypot(sap[0] - ut[0], sap[1] - ut[1])
    return math.atan2(horizontal, sap[2])


def link_geometry(sap_positions: np.ndarray, ut_positions: np.ndarray):
    """Boresight angle and slant range matrices, both (M, K)."""
    dx = sap_positions[:, None, 0] - ut_positions[None, :, 0]
    dy = sap_positions[:, None, 1] - ut_positions[None, :, 1]
    h = sap_positions[:, None, 2]
    horizontal = np.hypot(dx, dy)
    theta = np.arctan2(horizontal, h)
    slant = np.hypot(horizontal, h)
    return theta, slant


def _next_cluster_visible(sap_positions, ut_positions, config: GeometryConfig) -> np.ndarray:
    x = sap_positions[:, 0]
    edge = sap_positions[np.isclose(x, x.max())].copy()
    edge[:, 0] -= config.next_cluster_offset
    theta, _ = link_geometry(edge, ut_positions)
    return (theta <= config.max_boresight).any(axis=0)


def _snapshot(t, sap_positions, ut_positions, config) -> ClusterSnapshot:
    theta, slant = link_geometry(sap_positions, ut_positions)
    return ClusterSnapshot(
        time_slot=t,
        sap_positions=sap_positions,
        ut_positions=ut_positions,
        boresight=theta,
        slant=slant,
        visible=theta <= config.max_boresight,
        next_cluster_visible=_next_cluster_visible(sap_positions, ut_positions, config),
    )


def build_constellation(config: GeometryConfig, rng: np.random.Generator,
                        ut_positions: np.ndarray | None = None) -> ClusterSnapshot:
    """Initial snapshot: SAP grid at altitude, UTs i.i.d. uniform over the area.

    ``ut_positions`` overrides the random UT drop (tests, hand-built scenarios).
    """
    saps = sap_grid(config)
    if ut_positions is None:
        ut_positions = rng.uniform(0.0, config.area_side, size=(config.num_uts, 2))
    else:
        ut_positions = np.asarray(ut_positions, dtype=float).reshape(-1, 2)
    return _snapshot(0, saps, ut_positions, config)


def propagate(snapshot: ClusterSnapshot, config: GeometryConfig, t: int,
              slot_duration: float = 1.0) -> ClusterSnapshot:
    """Advance the cluster by ``t`` slots of rigid along-track motion; UTs stay put."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return replace(snapshot)
    saps = snapshot.sap_positions.copy()
    saps[:, 0] += config.ground_speed * slot_duration * t
    return _snapshot(snapshot.time_slot + t, saps, snapshot.ut_positions, config)
