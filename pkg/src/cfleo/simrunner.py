"""Slot loop, cluster-size sweeps and CSV export.

Every run owns an RNG lineage keyed by (seed, run): UT drop and shadowing do
not depend on the mode or the number of SAPs, so cells of a sweep are paired.
The GA seed of a slot is keyed by (seed, run, slot).
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .allocation import (AllocationProblem, PowerSolution, best_channel_allocate, ga_solve,
                         max_serv_time_allocate)
from .channel import draw_shadowing, large_scale
from .config import MODES, SimConfig
from .geometry import build_constellation, propagate
from .handover import (NEXT_CLUSTER, NO_ENTITY, HandoverEvent, HandoverState, reassociate,
                       service_time_stats, update)
from .training import assign_pilots

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("mode", "M", "avg_se", "avg_service_time", "handover_rate")
_GEOMETRY, _SHADOWING, _GA = 0, 1, 2


def _stream(seed: int, run: int, purpose: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, run, purpose, *extra])


def slot_seed(seed: int, run: int, t: int) -> int:
    return int(_stream(seed, run, _GA, t).generate_state(1)[0])


@dataclass
class RunRecord:
    rates: np.ndarray  # (H, K)
    served: np.ndarray  # (H, K) bool
    assoc: np.ndarray  # (H, K) entity ids
    events: list[HandoverEvent] = field(default_factory=list)


@dataclass
class MetricsLog:
    config: SimConfig
    rates: np.ndarray  # (R, H, K)
    served: np.ndarray
    assoc: np.ndarray
    events: list[list[HandoverEvent]]

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def num_saps(self) -> int:
        return self.config.num_saps

    def n_executed(self, run: int | None = None) -> int:
        runs = self.events if run is None else [self.events[run]]
        return sum(e.kind == "executed" for ev in runs for e in ev)

    def run_summary(self, run: int) -> dict:
        c = self.config
        st, hr = service_time_stats(self.assoc[run], self.n_executed(run), c.slot_duration_s)
        return {"avg_se": spectral_efficiency(self.rates[run:run + 1], self.assoc[run:run + 1]),
                "avg_service_time": st, "handover_rate": hr}

    def summary(self) -> dict:
        c = self.config
        st, hr = service_time_stats(self.assoc, self.n_executed(), c.slot_duration_s)
        return {"mode": c.mode, "M": c.num_saps,
                "avg_se": spectral_efficiency(self.rates, self.assoc),
                "avg_service_time": st, "handover_rate": hr}


def spectral_efficiency(rates: np.ndarray, assoc: np.ndarray) -> float:
    """Mean over (run, UT) of the UT's time-averaged rate.

    Slots after a UT has moved to the next cluster are outside the simulated
    cluster and do not enter its average.
    """
    own = assoc != NEXT_CLUSTER
    per_ut = (rates * own).sum(axis=-2) / own.sum(axis=-2)
    return float(per_ut.mean())


def _warm_start(prev: PowerSolution | None, prev_idx: np.ndarray | None, idx: np.ndarray):
    if prev is None:
        return None
    pos = np.searchsorted(prev_idx, idx)
    return [replace(prev, P=prev.P[:, pos], admitted=prev.admitted[pos], rates=prev.rates[pos])]


def run_single(config: SimConfig, run: int) -> RunRecord:
    c = config
    geo, ch = c.geometry, c.channel
    M, K, H = c.num_saps, c.num_uts, c.horizon_slots
    snap0 = build_constellation(geo, np.random.default_rng(_stream(c.seed, run, _GEOMETRY)))
    shadow = draw_shadowing((M, K), ch.shadow_std_db,
                            np.random.default_rng(_stream(c.seed, run, _SHADOWING)))
    noise, frame = c.noise_var, c.frame
    rates = np.zeros((H, K))
    served = np.zeros((H, K), dtype=bool)
    assoc = np.empty((H, K), dtype="<U8")
    events: list[HandoverEvent] = []
    cf = c.mode == "cf_jpahm"
    state = HandoverState.initial(K, "C0" if cf else NO_ENTITY)
    prev_sol, prev_idx = None, None
    for t in range(H):
        snap = propagate(snap0, geo, t, c.slot_duration_s)
        ls = large_scale(snap, ch, shadow)
        if cf:
            idx = np.flatnonzero(state.in_cluster())
            if idx.size:
                problem = AllocationProblem(
                    ls.select_uts(idx), assign_pilots(idx.size, c.tau_up, c.pilot_power_w),
                    noise, frame, c.r_min_bps_hz, c.p_max_w, c.alpha)
                sol = ga_solve(problem, c.ga_params(slot_seed(c.seed, run, t)),
                               init=_warm_start(prev_sol, prev_idx, idx))
                rates[t, idx] = sol.rates
                served[t, idx] = sol.admitted
                state, ev = update(state, sol.admitted, snap.next_cluster_visible, t,
                                   c.handover_confirm_slots, uts=idx)
                events += ev
                prev_sol, prev_idx = sol, idx
        else:
            problem = AllocationProblem(ls, assign_pilots(K, c.tau_up, c.pilot_power_w),
                                        noise, frame, c.r_min_bps_hz, c.p_max_w, c.alpha)
            if c.mode == "best_channel":
                sol = best_channel_allocate(problem, snap)
            else:
                prev = None if t == 0 else prev_sol.association
                sol = max_serv_time_allocate(problem, snap, prev)
            rates[t] = sol.rates
            served[t] = sol.admitted
            state, ev = reassociate(state, sol.association, t)
            events += ev
            prev_sol = sol
        assoc[t] = state.serving
    return RunRecord(rates, served, assoc, events)


def _run_job(args):
    config, r = args
    return run_single(config, r)


def run(config: SimConfig, jobs: int = 1) -> MetricsLog:
    """All runs of one configuration; ``jobs > 1`` spreads runs over processes."""
    tasks = [(config, r) for r in range(config.num_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            records = list(pool.map(_run_job, tasks))
    else:
        records = [_run_job(t) for t in tasks]
    return MetricsLog(
        config=config,
        rates=np.stack([r.rates for r in records]),
        served=np.stack([r.served for r in records]),
        assoc=np.stack([r.assoc for r in records]),
        events=[r.events for r in records],
    )


@dataclass
class SweepResult:
    cells: dict  # (M, mode) -> MetricsLog summary dict
    runs: list[dict]  # one row per (mode, M, run)

    def table(self, metric: str) -> list[dict]:
        out = []
        for M in sorted({m for m, _ in self.cells}):
            row = {"M": M}
            for mode in MODES:
                if (M, mode) in self.cells:
                    row[mode] = self.cells[M, mode][metric]
            out.append(row)
        return out


def sweep(config: SimConfig, sap_counts, modes=MODES, out_dir: str | Path | None = None,
          jobs: int = 1) -> SweepResult:
    """Run every (M, mode) cell on the same per-run seeds."""
    sap_counts = list(sap_counts)
    if not sap_counts:
        raise ValueError("sap_counts must be non-empty")
    cells, runs = {}, []
    for M in sap_counts:
        for mode in modes:
            cfg = replace(config, num_saps=int(M), mode=mode)
            log.info("sweep cell M=%d mode=%s", M, mode)
            metrics = run(cfg, jobs=jobs)
            cells[M, mode] = metrics.summary()
            for r in range(cfg.num_runs):
                runs.append({"mode": mode, "M": int(M), "run": r, **metrics.run_summary(r)})
            if out_dir is not None:
                export(metrics, Path(out_dir) / f"M{M}_{mode}")
    result = SweepResult(cells, runs)
    if out_dir is not None:
        export_sweep(result, config, out_dir)
    return result


# CSV output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    try:
        path.write_text(buf.getvalue())
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def export(log_: MetricsLog, directory: str | Path) -> list[Path]:
    """rates.csv, events.csv, summary.csv and config.echo for one configuration."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {d}: {e}") from e
    R, H, K = log_.rates.shape
    paths = [d / "rates.csv", d / "events.csv", d / "summary.csv", d / "config.echo"]

    def rate_rows():
        for r in range(R):
            for t in range(H):
                for k in range(K):
                    yield r, t, k, log_.rates[r, t, k], log_.served[r, t, k], log_.assoc[r, t, k]

    _write_csv(paths[0], ("run", "slot", "ut", "rate", "served", "assoc"), rate_rows())
    _write_csv(paths[1], ("run", "slot", "ut", "kind", "from", "to"),
               ((r, e.slot, e.ut, e.kind, e.src, e.dst) for r, ev in enumerate(log_.events) for e in ev))
    s = log_.summary()
    _write_csv(paths[2], SUMMARY_COLUMNS, [[s[c] for c in SUMMARY_COLUMNS]])
    paths[3].write_text(log_.config.dump())
    return paths


def export_sweep(result: SweepResult, config: SimConfig, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = [[result.cells[key][c] for c in SUMMARY_COLUMNS]
            for key in sorted(result.cells, key=lambda k: (k[0], MODES.index(k[1])))]
    _write_csv(d / "summary.csv", SUMMARY_COLUMNS, rows)
    run_cols = ("mode", "M", "run", "avg_se", "avg_service_time", "handover_rate")
    _write_csv(d / "runs.csv", run_cols, [[r[c] for c in run_cols] for r in result.runs])
    for name, metric in (("fig2_service_time.csv", "avg_service_time"),
                         ("fig3_spectral_efficiency.csv", "avg_se")):
        table = result.table(metric)
        cols = ["M"] + [m for m in MODES if any(m in row for row in table)]
        _write_csv(d / name, cols, [[row.get(c, "") for c in cols] for row in table])
    (d / "config.echo").write_text(config.dump())
