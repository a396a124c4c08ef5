"""Flat run configuration: one key per parameter, YAML on disk."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .allocation import GaParams
from .channel import ChannelConfig
from .downlink import FrameConfig, noise_power_w
from .geometry import GeometryConfig

MODES = ("cf_jpahm", "best_channel", "max_serv_time")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    # geometry
    altitude_km: float = 550.0
    area_km: float = 1000.0
    num_saps: int = 8
    num_uts: int = 40
    sap_spacing_km: float = 250.0
    ground_speed_kms: float = 7.0
    max_boresight_deg: float = 60.0
    next_cluster_offset_km: float = 1200.0
    # channel
    carrier_ghz: float = 30.0
    eta: float = 20.0
    shadow_std_db: float = 5.0
    rician_k_db: float = 10.0
    sat_gain_db: float = 30.0
    ut_gain_db: float = 5.0
    # training
    tau_c: int = 300
    tau_up: int = 30
    pilot_power_dbw: float = 5.0
    # downlink
    tau_dd: int = 270
    bandwidth_mhz: float = 20.0
    noise_figure_db: float = 7.0
    nsd_dbm_hz: float = -174.0
    # allocation
    alpha: float = 0.5
    r_min_bps_hz: float = 0.05
    p_max_dbw: float = 15.0
    ga_population: int = 60
    ga_generations: int = 150
    ga_crossover: float = 0.9
    ga_mutation: float = 0.02
    ga_elitism: int = 2
    ga_penalty_weight: float = 0.0
    # handover
    handover_confirm_slots: int = 2
    slot_duration_s: float = 1.0
    # runner
    horizon_slots: int = 120
    num_runs: int = 10
    mode: str = "cf_jpahm"
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        validate(self)

    # component configs

    @property
    def geometry(self) -> GeometryConfig:
        return GeometryConfig(
            altitude=self.altitude_km, area_side=self.area_km, num_saps=self.num_saps,
            sap_grid_spacing=self.sap_spacing_km, num_uts=self.num_uts,
            ground_speed=self.ground_speed_kms, max_boresight=math.radians(self.max_boresight_deg),
            next_cluster_offset=self.next_cluster_offset_km,
        )

    @property
    def channel(self) -> ChannelConfig:
        return ChannelConfig(self.carrier_ghz, self.eta, self.shadow_std_db, self.rician_k_db,
                             self.sat_gain_db, self.ut_gain_db)

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.tau_c, self.tau_up, self.tau_c - self.tau_up - self.tau_dd, self.tau_dd)

    @property
    def noise_var(self) -> float:
        return noise_power_w(self.bandwidth_mhz, self.noise_figure_db, self.nsd_dbm_hz)

    @property
    def pilot_power_w(self) -> float:
        return 10 ** (self.pilot_power_dbw / 10)

    @property
    def p_max_w(self) -> float:
        return 10 ** (self.p_max_dbw / 10)

    def ga_params(self, seed: int) -> GaParams:
        return GaParams(self.ga_population, self.ga_generations, self.ga_crossover,
                        self.ga_mutation, self.ga_elitism, self.ga_penalty_weight, seed)

    def with_overrides(self, **kw) -> "SimConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


_INT_KEYS = {f.name for f in fields(SimConfig) if f.type in ("int", int)}
_STR_KEYS = {"mode", "output_dir"}


def _require(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(c: SimConfig) -> None:
    for f in fields(c):
        v = getattr(c, f.name)
        if f.name in _STR_KEYS:
            _require(isinstance(v, str), f.name, f"expected a string, got {v!r}")
        elif f.name in _INT_KEYS:
            _require(isinstance(v, int) and not isinstance(v, bool), f.name, f"expected an integer, got {v!r}")
        else:
            _require(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
                     f.name, f"expected a finite number, got {v!r}")
    _require(c.altitude_km > 0, "altitude_km", "must be > 0")
    _require(c.area_km > 0, "area_km", "must be > 0")
    _require(c.num_saps >= 1, "num_saps", "must be >= 1")
    _require(c.num_uts >= 1, "num_uts", "must be >= 1")
    _require(c.sap_spacing_km >= 0, "sap_spacing_km", "must be >= 0")
    _require(0 < c.max_boresight_deg < 90, "max_boresight_deg", "must lie in (0, 90)")
    _require(c.carrier_ghz > 0, "carrier_ghz", "must be > 0")
    _require(c.eta > 0, "eta", "must be > 0")
    _require(c.shadow_std_db >= 0, "shadow_std_db", "must be >= 0")
    _require(c.tau_up >= 1, "tau_up", "must be >= 1")
    _require(c.tau_dd >= 0, "tau_dd", "must be >= 0")
    _require(c.tau_up + c.tau_dd <= c.tau_c, "tau_c", "must be >= tau_up + tau_dd")
    _require(c.bandwidth_mhz > 0, "bandwidth_mhz", "must be > 0")
    _require(0 <= c.alpha <= 1, "alpha", "must lie in [0, 1]")
    _require(c.r_min_bps_hz >= 0, "r_min_bps_hz", "must be >= 0")
    _require(c.ga_population >= 2, "ga_population", "must be >= 2")
    _require(c.ga_generations >= 0, "ga_generations", "must be >= 0")
    _require(0 <= c.ga_crossover <= 1, "ga_crossover", "must lie in [0, 1]")
    _require(0 <= c.ga_mutation <= 1, "ga_mutation", "must lie in [0, 1]")
    _require(0 <= c.ga_elitism < c.ga_population, "ga_elitism", "must lie in [0, ga_population)")
    _require(c.ga_penalty_weight >= 0, "ga_penalty_weight", "must be >= 0")
    _require(c.handover_confirm_slots >= 1, "handover_confirm_slots", "must be >= 1")
    _require(c.slot_duration_s > 0, "slot_duration_s", "must be > 0")
    _require(c.horizon_slots >= 1, "horizon_slots", "must be >= 1")
    _require(c.num_runs >= 1, "num_runs", "must be >= 1")
    _require(c.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")


def from_mapping(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a flat mapping of key: value")
    known = {f.name for f in fields(SimConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(map(str, unknown))}")
    clean = {}
    for k, v in data.items():
        if isinstance(v, (dict, list)):
            raise ConfigError(f"{k}: nested values are not allowed")
        # YAML reads "30" as int; widen ints for float keys
        if k not in _INT_KEYS and k not in _STR_KEYS and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        clean[k] = v
    return SimConfig(**clean)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    data = yaml.safe_load(text) or {}
    return from_mapping(data)
