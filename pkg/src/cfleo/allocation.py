"""Joint power allocation / admission: GA solver, grid oracle and single-SAP baselines.

A candidate is a pair (fractions, admitted): ``fractions[m, k]`` in [0, 1] is
the share of SAP m's budget offered to UT k, ``admitted[k]`` the admission
bit. Decoding zeroes non-admitted columns and rescales any SAP whose total
exceeds its budget. Repair then drops every admitted UT that misses its
minimum rate (and its power), repeating until the admitted set is stable;
dropping a UT only removes interference, so this terminates in at most K
rounds and the result always satisfies every constraint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .channel import LargeScaleParams
from .downlink import FrameConfig, RateModel
from .geometry import ClusterSnapshot
from .training import PilotAssignment

BUDGET_SLACK = 1e-9  # W
MUTATION_SIGMA = 0.2


@dataclass(frozen=True)
class AllocationProblem:
    ls: LargeScaleParams
    pa: PilotAssignment
    noise_var: float
    frame: FrameConfig
    r_min: np.ndarray  # (K,) bps/Hz
    p_max: np.ndarray  # (M,) W
    alpha: float = 0.5
    pilot_noise_var: float | None = None

    def __post_init__(self):
        M, K = self.ls.shape
        r_min = np.broadcast_to(np.asarray(self.r_min, dtype=float), (K,)).copy()
        p_max = np.broadcast_to(np.asarray(self.p_max, dtype=float), (M,)).copy()
        if np.any(r_min < 0):
            raise ValueError("r_min must be non-negative")
        if np.any(p_max <= 0):
            raise ValueError("p_max must be positive")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        object.__setattr__(self, "r_min", r_min)
        object.__setattr__(self, "p_max", p_max)

    @property
    def num_saps(self) -> int:
        return self.ls.shape[0]

    @property
    def num_uts(self) -> int:
        return self.ls.shape[1]

    @cached_property
    def model(self) -> RateModel:
        return RateModel(self.ls, self.pa, self.noise_var, self.frame, self.pilot_noise_var)

    def restrict(self, idx) -> "AllocationProblem":
        """Sub-problem over a subset of UTs; the others are held at zero power."""
        idx = np.asarray(idx)
        sub = replace(self, ls=self.ls.select_uts(idx), pa=self.pa.select_uts(idx),
                      r_min=self.r_min[idx])
        # estimation statistics must still see every pilot, so inject the restricted model
        sub.__dict__["model"] = self.model.restrict(idx)
        return sub

    @cached_property
    def power_cap(self) -> np.ndarray:
        """Per-link power ceiling: the SAP budget on usable links, zero elsewhere."""
        return self.p_max[:, None] * self.model.live

    @cached_property
    def admissible(self) -> np.ndarray:
        """UTs with a usable link whose interference-free full-power rate can reach r_min."""
        bound = self.model.single_ut_bound(self.p_max)
        return (bound >= self.r_min) & (bound > 0)


@dataclass(frozen=True)
class PowerSolution:
    P: np.ndarray  # (M, K) W
    admitted: np.ndarray  # (K,) bool
    objective: float
    rates: np.ndarray  # (K,) bps/Hz
    feasible: bool
    association: np.ndarray | None = None  # (K,) serving SAP, -1 for none (baselines only)


@dataclass(frozen=True)
class GaParams:
    population: int = 60
    generations: int = 150
    crossover_rate: float = 0.9
    mutation_rate: float = 0.02
    elitism: int = 2
    penalty_weight: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must lie in [0, population)")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


def objective_value(rates, admitted, alpha: float):
    """(1 - alpha) * sum of admitted rates + alpha * number admitted; batched over leading axes."""
    admitted = np.asarray(admitted, dtype=float)
    return (1 - alpha) * (rates * admitted).sum(axis=-1) + alpha * admitted.sum(axis=-1)


def objective(problem: AllocationProblem, solution: PowerSolution) -> float:
    return float(objective_value(solution.rates, solution.admitted, problem.alpha))


def decode(problem: AllocationProblem, fractions: np.ndarray, admitted: np.ndarray) -> np.ndarray:
    """Power matrices from (B, M, K) fractions and (B, K) admission bits."""
    adm = admitted & problem.admissible
    P = np.clip(fractions, 0.0, 1.0) * problem.power_cap
    P *= adm[..., None, :]
    load = P.sum(axis=-1)
    over = load > problem.p_max
    if over.any():
        P *= np.where(over, problem.p_max / np.where(over, load, 1.0), 1.0)[..., None]
    return P


def repair(problem: AllocationProblem, P: np.ndarray, admitted: np.ndarray):
    """Drop admitted UTs below r_min until stable. Returns (P, admitted, rates, n_dropped).

    ``P`` and ``admitted`` may be batched over leading axes.
    """
    P = np.array(P, dtype=float)
    adm = np.array(admitted, dtype=bool) & problem.admissible
    P *= adm[..., None, :]
    dropped = np.zeros(adm.shape[:-1], dtype=int)
    rates = problem.model.rates(P)
    fail = adm & (rates < problem.r_min)
    while fail.any():
        rows = fail.any(axis=-1)
        dropped += fail.sum(axis=-1)
        adm &= ~fail
        P[rows] *= ~fail[rows][..., None, :]
        rates[rows] = problem.model.rates(P[rows])
        fail = np.zeros_like(fail)
        fail[rows] = adm[rows] & (rates[rows] < problem.r_min)
    return P, adm, rates, dropped


def _solution(problem, P, adm, rates, association=None) -> PowerSolution:
    return PowerSolution(P=P, admitted=adm, rates=rates,
                         objective=float(objective_value(rates, adm, problem.alpha)),
                         feasible=True, association=association)


def evaluate(problem: AllocationProblem, fractions, admitted):
    """Decode and repair a batch of candidates; returns (P, admitted, rates, objective, dropped)."""
    P = decode(problem, fractions, admitted)
    P, adm, rates, dropped = repair(problem, P, admitted)
    return P, adm, rates, objective_value(rates, adm, problem.alpha), dropped


def check_solution(problem: AllocationProblem, sol: PowerSolution, tol: float = BUDGET_SLACK) -> list[str]:
    """Constraint violations of a solution (empty when it is valid)."""
    out = []
    if np.any(sol.P < 0):
        out.append("negative power")
    load = sol.P.sum(axis=1)
    if np.any(load > problem.p_max + tol):
        out.append(f"budget exceeded by {np.max(load - problem.p_max):.3e} W")
    if sol.admitted.dtype != bool:
        out.append("admission not boolean")
    rates = problem.model.rates(sol.P)
    if not np.allclose(rates, sol.rates, rtol=1e-9, atol=1e-12):
        out.append("reported rates do not match the power matrix")
    if sol.feasible and np.any(sol.admitted & (rates < problem.r_min)):
        out.append("admitted UT below minimum rate")
    return out


def _heuristic_seeds(problem: AllocationProblem):
    M, K = problem.num_saps, problem.num_uts
    L = problem.ls.L
    seeds = []
    onehot = np.zeros((M, K))
    has = L.max(axis=0) > 0
    onehot[L.argmax(axis=0)[has], np.flatnonzero(has)] = 1.0
    seeds.append(onehot)
    peak = L.max(axis=1, keepdims=True)
    rel = np.divide(L, peak, out=np.zeros_like(L), where=peak > 0)
    seeds.append(rel)
    seeds.append(np.sqrt(rel))
    seeds.append(np.ones((M, K)))
    return seeds


def _bits(rng: np.random.Generator, shape) -> np.ndarray:
    n = int(np.prod(shape))
    raw = rng.integers(0, 256, size=(n + 7) // 8, dtype=np.uint8)
    return np.unpackbits(raw)[:n].reshape(shape).astype(bool)


def _mutate(rng: np.random.Generator, frac: np.ndarray, rate: float) -> np.ndarray:
    flat = frac.reshape(-1)
    count = rng.binomial(flat.size, rate)
    pos = rng.integers(0, flat.size, size=count)
    flat[pos] = np.clip(flat[pos] + rng.normal(0.0, MUTATION_SIGMA, size=count), 0.0, 1.0)
    return frac


def ga_solve(problem: AllocationProblem, ga: GaParams = GaParams(),
             init: list[PowerSolution] | None = None) -> PowerSolution:
    """Genetic search over (fractions, admission) with repair-based feasibility.

    The initial population holds heuristic layouts (best-SAP one-hot, gain
    proportional, uniform), any ``init`` solutions (warm start) and random
    individuals. Tournament selection of size 2, uniform crossover, Gaussian
    mutation of fractions and bit-flip mutation of admissions, elitism.
    The best repaired candidate ever evaluated is returned.

    UTs that cannot reach r_min even alone at full power are left out of the
    search; repair would drop them from any candidate anyway.
    """
    M, K = problem.num_saps, problem.num_uts
    keep = np.flatnonzero(problem.admissible)
    if len(keep) == 0:
        P = np.zeros((M, K))
        return _solution(problem, P, np.zeros(K, bool), problem.model.rates(P))
    if len(keep) < K:
        sub_init = None if init is None else [
            replace(s, P=s.P[:, keep], admitted=s.admitted[keep], rates=s.rates[keep]) for s in init]
        sub = _ga_search(problem.restrict(keep), ga, sub_init)
        P = np.zeros((M, K))
        P[:, keep] = sub.P
        adm = np.zeros(K, bool)
        adm[keep] = sub.admitted
        return _solution(problem, P, adm, problem.model.rates(P))
    return _ga_search(problem, ga, init)


def _ga_search(problem: AllocationProblem, ga: GaParams, init) -> PowerSolution:
    rng = np.random.default_rng(ga.seed)
    M, K = problem.num_saps, problem.num_uts
    n = ga.population
    frac = rng.random((n, M, K))
    adm = rng.random((n, K)) < 0.5
    seeded = _heuristic_seeds(problem)
    seeded_adm = [np.ones(K, bool)] * len(seeded)
    for sol in init or ():
        seeded.append(sol.P / problem.p_max[:, None])
        seeded_adm.append(sol.admitted.copy())
    for i, (f, a) in enumerate(list(zip(seeded, seeded_adm))[:n]):
        frac[i], adm[i] = f, a

    P, radm, rates, obj, dropped = evaluate(problem, frac, adm)
    fit = obj - ga.penalty_weight * dropped
    b = int(np.argmax(obj))
    best = (P[b], radm[b], rates[b], obj[b])

    n_child = n - ga.elitism
    for _ in range(ga.generations):
        elite = np.argsort(-fit, kind="stable")[: ga.elitism]
        # tournament of size 2 for each parent slot
        a, c = rng.integers(0, n, size=(2, 2 * n_child))
        parents = np.where(fit[a] >= fit[c], a, c).reshape(2, n_child)
        do_cross = rng.random(n_child) < ga.crossover_rate
        mf = _bits(rng, (n_child, M, K)) & do_cross[:, None, None]
        ma = _bits(rng, (n_child, K)) & do_cross[:, None]
        cf = np.where(mf, frac[parents[1]], frac[parents[0]])
        ca = np.where(ma, adm[parents[1]], adm[parents[0]])
        cf = _mutate(rng, cf, ga.mutation_rate)
        ca ^= rng.random((n_child, K)) < ga.mutation_rate

        cP, cadm, crates, cobj, cdrop = evaluate(problem, cf, ca)
        frac = np.concatenate([frac[elite], cf])
        adm = np.concatenate([adm[elite], ca])
        obj = np.concatenate([obj[elite], cobj])
        fit = np.concatenate([fit[elite], cobj - ga.penalty_weight * cdrop])
        j = int(np.argmax(cobj))
        if cobj[j] > best[3]:
            best = (cP[j], cadm[j], crates[j], cobj[j])

    return _solution(problem, best[0], best[1], best[2])


def brute_force_solve(problem: AllocationProblem, grid_levels: int,
                      batch: int = 8192) -> PowerSolution:
    """Exhaustive search over a uniform fraction grid and all admission vectors."""
    M, K = problem.num_saps, problem.num_uts
    n_genes = M * K
    n_grid = grid_levels ** n_genes
    if grid_levels < 2:
        raise ValueError("grid_levels must be >= 2")
    if n_grid * 2 ** K > 10 ** 7:
        raise ValueError(f"{n_grid * 2 ** K} candidates exceed the 1e7 limit")
    levels = np.linspace(0.0, 1.0, grid_levels)
    best = None
    for bits in itertools.product((False, True), repeat=K):
        a = np.array(bits)
        for start in range(0, n_grid, batch):
            idx = np.arange(start, min(start + batch, n_grid))
            digits = np.stack(np.unravel_index(idx, (grid_levels,) * n_genes), axis=-1)
            frac = levels[digits].reshape(-1, M, K)
            adm = np.broadcast_to(a, (len(idx), K))
            P, radm, rates, obj, _ = evaluate(problem, frac, adm)
            j = int(np.argmax(obj))
            if best is None or obj[j] > best[3]:
                best = (P[j], radm[j], rates[j], obj[j])
    return _solution(problem, *best[:3])


# single-SAP baselines

def best_channel_association(ls: LargeScaleParams, visible: np.ndarray | None = None) -> np.ndarray:
    """Strongest SAP per UT (lowest index on ties); -1 when no SAP has a usable link."""
    L = ls.L if visible is None else np.where(visible, ls.L, 0.0)
    assoc = L.argmax(axis=0)
    return np.where(L.max(axis=0) > 0, assoc, -1)


def single_sap_powers(problem: AllocationProblem, association: np.ndarray) -> np.ndarray:
    """Each SAP splits its budget equally among the UTs associated with it."""
    M, K = problem.num_saps, problem.num_uts
    P = np.zeros((M, K))
    served = association >= 0
    cols = np.flatnonzero(served)
    counts = np.bincount(association[served], minlength=M)
    P[association[served], cols] = problem.p_max[association[served]] / counts[association[served]]
    return P


def _single_sap_solution(problem, association) -> PowerSolution:
    P = single_sap_powers(problem, association)
    rates = problem.model.rates(P)
    adm = (rates >= problem.r_min) & (association >= 0)
    return _solution(problem, P, adm, rates, association=association)


def best_channel_allocate(problem: AllocationProblem,
                          snapshot: ClusterSnapshot | None = None) -> PowerSolution:
    visible = None if snapshot is None else snapshot.visible
    return _single_sap_solution(problem, best_channel_association(problem.ls, visible))


def max_serv_time_allocate(problem: AllocationProblem, snapshot: ClusterSnapshot | None,
                           prev_association: np.ndarray | None) -> PowerSolution:
    """Hold the previous SAP while it is visible and meets r_min, else take the best one.

    All UTs first tentatively keep their previous SAP (if still usable); the
    rates of that layout decide who must move; movers go to their best SAP
    and the final rates are evaluated once more.
    """
    visible = problem.ls.L > 0 if snapshot is None else snapshot.visible & (problem.ls.L > 0)
    best = best_channel_association(problem.ls, visible)
    K = problem.num_uts
    if prev_association is None:
        prev_association = np.full(K, -1)
    prev = np.asarray(prev_association)
    usable = prev >= 0
    usable[usable] = visible[prev[usable], np.flatnonzero(usable)]
    tentative = np.where(usable, prev, best)
    rates = problem.model.rates(single_sap_powers(problem, tentative))
    move = usable & (rates < problem.r_min)
    return _single_sap_solution(problem, np.where(move, best, tentative))
