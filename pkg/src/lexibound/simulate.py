"""Monte Carlo runtime estimation and exact small-instance oracles.

Estimates live alongside two ground-truth routes: an exhaustive case-order
enumeration for winner distributions on small instances, and the per-step
drift table that checks the pool-shrinkage inequality
E[X_{t+1} | X_t = x] <= x (1 - eps/4) for x >= 2k behind the runtime bound.

All stochastic assertions in this package use a 3-standard-error one-sided
margin; with seeded streams a failure is reproducible, and the false-failure
rate per check is about 0.1%.
"""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import DedupProfile, RngStream
from .engine import lexicase_select

__all__ = [
    "RunStats",
    "DriftEntry",
    "estimate_runtime",
    "selection_distribution",
    "oracle_distribution",
    "drift_check",
    "run_stats_to_json",
    "run_stats_to_csv",
    "drift_table_to_json",
    "drift_table_to_csv",
]

_ORACLE_MAX_CASES = 8
_ORACLE_MAX_UNIQUE = 12


@dataclass(frozen=True)
class RunStats:
    """Aggregate of repeated selection events on one profile.

    ``pool_size_profile[t]`` is the mean pool size before draw t+1, averaged
    over all trials with trajectories shorter than t treated as absorbed at
    pool size 1.
    """

    trials: int
    mean_evaluations: float
    std_error: float
    min_evaluations: int
    max_evaluations: int
    mean_iterations: float
    pool_size_profile: tuple[float, ...]


def estimate_runtime(profile: DedupProfile, trials: int, rng: RngStream) -> RunStats:
    """Run ``trials`` independent selections (substreams 0..trials-1) and
    aggregate evaluation counts and the pool-size trajectory."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    total = 0
    total_sq = 0
    lo = None
    hi = None
    iterations = 0
    step_sums: list[int] = []
    step_counts: list[int] = []
    for i in range(trials):
        trace = lexicase_select(profile, rng.substream(i))
        m = trace.evaluations
        total += m
        total_sq += m * m
        lo = m if lo is None or m < lo else lo
        hi = m if hi is None or m > hi else hi
        iterations += len(trace.case_order)
        sizes = trace.pool_sizes
        if len(sizes) > len(step_sums):
            grow = len(sizes) - len(step_sums)
            step_sums.extend([0] * grow)
            step_counts.extend([0] * grow)
        for t, x in enumerate(sizes):
            step_sums[t] += x
            step_counts[t] += 1

    mean = total / trials
    if trials > 1:
        variance = (total_sq - trials * mean * mean) / (trials - 1)
        std_error = math.sqrt(max(variance, 0.0)) / math.sqrt(trials)
    else:
        std_error = 0.0
    profile_means = tuple(
        (step_sums[t] + (trials - step_counts[t])) / trials for t in range(len(step_sums))
    )
    return RunStats(
        trials=trials,
        mean_evaluations=mean,
        std_error=std_error,
        min_evaluations=int(lo),
        max_evaluations=int(hi),
        mean_iterations=iterations / trials,
        pool_size_profile=profile_means,
    )


def selection_distribution(profile: DedupProfile, trials: int, rng: RngStream) -> np.ndarray:
    """Empirical winner frequency per original individual (sums to 1)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    counts = np.zeros(profile.n_original, dtype=np.int64)
    for i in range(trials):
        trace = lexicase_select(profile, rng.substream(i))
        counts[trace.winner_original_index] += 1
    return counts / trials


def oracle_distribution(profile: DedupProfile) -> np.ndarray:
    """Exact winner probability per original individual.

    Replays the filter chain for every permutation of the cases (all orders
    are equally likely under without-replacement draws) and averages, then
    splits each behavior's mass uniformly over its clones. Enumeration only:
    C <= 8 and N_unique <= 12.
    """
    n_cases = profile.n_cases
    n_unique = profile.n_unique
    if n_cases > _ORACLE_MAX_CASES:
        raise ValueError(f"oracle enumeration limited to {_ORACLE_MAX_CASES} cases, got {n_cases}")
    if n_unique > _ORACLE_MAX_UNIQUE:
        raise ValueError(f"oracle enumeration limited to {_ORACLE_MAX_UNIQUE} unique rows, got {n_unique}")

    rows = [tuple(row) for row in profile.unique.losses.tolist()]
    weight_per_perm = 1.0 / math.factorial(n_cases)
    prob_unique = [0.0] * n_unique
    for perm in itertools.permutations(range(n_cases)):
        pool = list(range(n_unique))
        for case in perm:
            if len(pool) == 1:
                break
            best = min(rows[i][case] for i in pool)
            pool = [i for i in pool if rows[i][case] == best]
        share = weight_per_perm / len(pool)
        for i in pool:
            prob_unique[i] += share

    out = np.zeros(profile.n_original, dtype=np.float64)
    for u, group in enumerate(profile.groups):
        split = prob_unique[u] / len(group)
        for original in group:
            out[original] = split
    return out


@dataclass(frozen=True)
class DriftEntry:
    """Empirical one-step pool shrinkage at a single pool size x >= 2k."""

    pool_size: int
    transitions: int
    mean_next: float
    std_error: float
    bound: float  # x * (1 - eps/4)
    flagged: bool  # mean_next - 3 SE exceeds the bound


def drift_check(
    profile: DedupProfile,
    epsilon: float,
    k: int,
    trials: int,
    rng: RngStream,
) -> list[DriftEntry]:
    """Check E[X_{t+1} | X_t = x] <= x (1 - eps/4) for every observed x >= 2k.

    Buckets transitions by exact pool size (the inequality is per-x), pooled
    across steps and trials. An entry is flagged when its empirical mean
    minus 3 standard errors still exceeds the bound. Requires trials >= 1000
    so the per-x means are meaningful.
    """
    if trials < 1000:
        raise ValueError(f"drift_check needs trials >= 1000, got {trials}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    eps = float(epsilon)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {eps}")
    floor = 2 * k
    acc: dict[int, list[int]] = {}
    for i in range(trials):
        trace = lexicase_select(profile, rng.substream(i))
        sizes = trace.pool_sizes
        for t in range(len(sizes) - 1):
            x = sizes[t]
            if x >= floor:
                stats = acc.get(x)
                if stats is None:
                    stats = [0, 0, 0]
                    acc[x] = stats
                y = sizes[t + 1]
                stats[0] += 1
                stats[1] += y
                stats[2] += y * y

    factor = 1.0 - eps / 4.0
    table = []
    for x in sorted(acc):
        count, total, total_sq = acc[x]
        mean = total / count
        if count > 1:
            variance = (total_sq - count * mean * mean) / (count - 1)
            se = math.sqrt(max(variance, 0.0)) / math.sqrt(count)
        else:
            se = 0.0
        bound = x * factor
        table.append(
            DriftEntry(
                pool_size=x,
                transitions=count,
                mean_next=mean,
                std_error=se,
                bound=bound,
                flagged=mean - 3.0 * se > bound,
            )
        )
    return table


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def run_stats_to_json(stats: RunStats) -> str:
    payload = {
        "trials": stats.trials,
        "mean_evaluations": stats.mean_evaluations,
        "std_error": stats.std_error,
        "min_evaluations": stats.min_evaluations,
        "max_evaluations": stats.max_evaluations,
        "mean_iterations": stats.mean_iterations,
        "pool_size_profile": list(stats.pool_size_profile),
    }
    return json.dumps(payload, indent=2) + "\n"


def run_stats_to_csv(stats: RunStats) -> str:
    """Scalar summary row; the pool profile serializes via JSON."""
    out = io.StringIO()
    out.write("trials,mean_evaluations,std_error,min_evaluations,max_evaluations,mean_iterations\n")
    out.write(
        f"{stats.trials},{stats.mean_evaluations!r},{stats.std_error!r},"
        f"{stats.min_evaluations},{stats.max_evaluations},{stats.mean_iterations!r}\n"
    )
    return out.getvalue()


def drift_table_to_json(table: list[DriftEntry]) -> str:
    payload = [
        {
            "pool_size": e.pool_size,
            "transitions": e.transitions,
            "mean_next": e.mean_next,
            "std_error": e.std_error,
            "bound": e.bound,
            "flagged": e.flagged,
        }
        for e in table
    ]
    return json.dumps(payload, indent=2) + "\n"


def drift_table_to_csv(table: list[DriftEntry]) -> str:
    out = io.StringIO()
    out.write("pool_size,transitions,mean_next,std_error,bound,flagged\n")
    for e in table:
        flag = "true" if e.flagged else "false"
        out.write(
            f"{e.pool_size},{e.transitions},{e.mean_next!r},{e.std_error!r},{e.bound!r},{flag}\n"
        )
    return out.getvalue()
