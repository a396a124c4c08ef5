"""Reference instances and numerical self-checks.

The checks compare closed forms with Monte-Carlo moments, the GA with an
exhaustive grid search, and solver outputs with the problem constraints.
They back both the ``verify`` command and the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import (AllocationProblem, GaParams, best_channel_allocate, brute_force_solve,
                         check_solution, ga_solve, max_serv_time_allocate)
from .channel import LargeScaleParams
from .downlink import FrameConfig, ModelViolation, MomentReport, RateInputs, RateModel, mc_moment_check
from .training import assign_pilots, estimator_moment_check

# 3 SAPs, 4 UTs, 2 pilots (UTs 0/2 and 1/3 share a pilot)
CANONICAL_GAIN = np.array([[1.0, 0.6, 0.3, 0.8],
                           [0.5, 1.2, 0.7, 0.4],
                           [0.3, 0.5, 1.1, 0.9]])
CANONICAL_POWER = np.array([[0.4, 0.3, 0.2, 0.1],
                            [0.2, 0.3, 0.25, 0.25],
                            [0.1, 0.2, 0.3, 0.4]])
CANONICAL_KAPPA = 1.0
CANONICAL_PILOT_NOISE = 0.5
CANONICAL_DATA_NOISE = 0.2

# small instance for the GA-vs-grid comparison
ORACLE_GAIN = np.array([[1.0, 0.3],
                        [0.4, 0.8]])
ORACLE_KAPPA = 1.0
ORACLE_NOISE = 0.05
ORACLE_R_MIN = 0.5
ORACLE_P_MAX = 1.0
ORACLE_GRID = 8


def canonical_inputs(P: np.ndarray | None = None) -> RateInputs:
    ls = LargeScaleParams.from_gain(CANONICAL_GAIN, CANONICAL_KAPPA)
    pa = assign_pilots(4, 2, pilot_power=1.0)
    return RateInputs(CANONICAL_POWER if P is None else P, ls, pa, CANONICAL_DATA_NOISE,
                      FrameConfig(), pilot_noise_var=CANONICAL_PILOT_NOISE)


def oracle_problem(tau_up: int = 2) -> AllocationProblem:
    ls = LargeScaleParams.from_gain(ORACLE_GAIN, ORACLE_KAPPA)
    return AllocationProblem(ls, assign_pilots(2, tau_up, pilot_power=1.0), ORACLE_NOISE,
                             FrameConfig(), ORACLE_R_MIN, ORACLE_P_MAX, alpha=0.5)


def _rel(closed: np.ndarray, emp: np.ndarray) -> np.ndarray:
    nz = np.abs(closed) > 0
    return np.abs(emp - closed)[nz] / np.abs(closed)[nz]


def estimator_errors(n_trials: int = 100_000, seed: int = 0) -> dict[str, float]:
    """Worst relative error per estimator moment on the canonical instance."""
    inp = canonical_inputs()
    rng = np.random.default_rng(seed)
    phases = rng.uniform(-np.pi, np.pi, CANONICAL_GAIN.shape)
    res = estimator_moment_check(inp.ls, inp.pa, CANONICAL_PILOT_NOISE, phases, n_trials, rng)
    out = {}
    for name, (closed, emp) in res.items():
        if name == "mean":
            out[name] = float(np.max(np.abs(emp - closed) / np.abs(closed)))
        else:
            out[name] = float(np.max(_rel(closed, emp)))
    return out


def rate_term_report(n_trials: int = 100_000, seed: int = 0) -> MomentReport:
    return mc_moment_check(canonical_inputs(), n_trials, np.random.default_rng(seed))


def random_rate_inputs(rng: np.random.Generator) -> RateInputs:
    """A random valid instance: gains, K-factor, pilots, powers within budget."""
    M, K = rng.integers(1, 6), rng.integers(1, 9)
    tau = int(rng.integers(1, K + 1))
    L = 10 ** rng.uniform(-3, 1, (M, K)) * (rng.random((M, K)) > 0.2)
    kappa = 10 ** rng.uniform(-1, 2)
    ls = LargeScaleParams.from_gain(L, kappa)
    pa = assign_pilots(K, tau, pilot_power=10 ** rng.uniform(-1, 1))
    P = rng.random((M, K)) * (rng.random((M, K)) > 0.3)
    P *= 10 ** rng.uniform(-1, 1) / max(P.sum(axis=1).max(), 1e-12)
    noise = 10 ** rng.uniform(-3, 0)
    return RateInputs(P, ls, pa, noise, FrameConfig(), pilot_noise_var=10 ** rng.uniform(-3, 0))


def denominator_violations(n: int = 10_000, seed: int = 0) -> int:
    """Random valid inputs whose SINR denominator is not strictly positive."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        inp = random_rate_inputs(rng)
        try:
            RateModel.from_inputs(inp).report(inp.P)
        except ModelViolation:
            bad += 1
    return bad


@dataclass(frozen=True)
class OracleResult:
    seed: int
    ga_objective: float
    grid_objective: float

    @property
    def ratio(self) -> float:
        if self.grid_objective == 0:
            return 1.0 if self.ga_objective >= 0 else 0.0
        return self.ga_objective / self.grid_objective


def ga_vs_grid(seeds=range(10), ga: GaParams | None = None, grid_levels: int = ORACLE_GRID):
    problem = oracle_problem()
    grid = brute_force_solve(problem, grid_levels)
    ga = ga or GaParams()
    out = []
    for s in seeds:
        sol = ga_solve(problem, GaParams(**{**ga.__dict__, "seed": int(s)}))
        out.append(OracleResult(int(s), sol.objective, grid.objective))
    return out


def random_problem(rng: np.random.Generator) -> AllocationProblem:
    inp = random_rate_inputs(rng)
    M, K = inp.ls.shape
    return AllocationProblem(inp.ls, inp.pa, inp.noise_var, inp.frame,
                             r_min=rng.uniform(0, 2, K) * (rng.random(K) > 0.1),
                             p_max=10 ** rng.uniform(-1, 1, M), alpha=float(rng.random()),
                             pilot_noise_var=inp.pilot_noise_var)


def constraint_violations(n: int = 1000, seed: int = 0,
                          ga: GaParams = GaParams(population=16, generations=15)) -> list[str]:
    """Solve random problems with every allocator and collect constraint breaches."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        problem = random_problem(rng)
        K = problem.num_uts
        prev = rng.integers(-1, problem.num_saps, K)
        sols = {
            "ga": ga_solve(problem, GaParams(**{**ga.__dict__, "seed": i})),
            "best_channel": best_channel_allocate(problem),
            "max_serv_time": max_serv_time_allocate(problem, None, prev),
        }
        for name, sol in sols.items():
            out += [f"problem {i} {name}: {v}" for v in check_solution(problem, sol)]
            if not sol.feasible:
                out.append(f"problem {i} {name}: reported infeasible")
    return out
