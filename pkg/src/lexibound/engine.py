"""Lexicase parent selection with exact evaluation counting.

Selection operates on a deduplicated profile: cases are drawn uniformly at
random without replacement, the candidate pool is filtered to the per-case
elites (minimum loss within the current pool), and the loop ends when a
single behavior remains. The winner is then drawn uniformly from that
behavior's clone group. One evaluation is counted per (pool member, drawn
case) pair, including the iteration that reduces the pool to one.

Also houses the static-epsilon binarization and case down-sampling variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DedupProfile, ErrorMatrix, LossKind, RngStream

__all__ = [
    "SelectionTrace",
    "lexicase_select",
    "select_parents",
    "static_epsilon_binarize",
    "mad_thresholds",
    "downsample_cases",
]

# Mutation-testing hook: the elite filter keeps losses <= best + _elite_slack.
# Zero (the only correct value) makes it an exact minimum test; the verify
# command's fault injection sets it to 1 to prove the self-checks can fail.
_elite_slack = 0


@dataclass(frozen=True)
class SelectionTrace:
    """Full record of one selection event.

    ``pool_sizes`` is the pool-size trajectory X_0, X_1, ..., X_T (X_0 = number
    of unique behaviors, final entry 1 unless the singleton started there);
    ``case_order`` is the consumed prefix of a case permutation;
    ``evaluations`` = sum of pool_sizes excluding the final entry.
    """

    winner_unique_index: int
    winner_original_index: int
    case_order: tuple[int, ...]
    pool_sizes: tuple[int, ...]
    evaluations: int


def lexicase_select(profile: DedupProfile, rng: RngStream) -> SelectionTrace:
    """Select one parent; returns the trace including the evaluation count M.

    Requires a DISCRETE profile. If every case is exhausted while the pool
    still holds several behaviors (impossible for a validated profile, whose
    unique rows differ somewhere; kept as a guard for down-sampled inputs
    that bypass re-deduplication) the winner is drawn uniformly from the
    remaining pool.
    """
    profile.unique.require_kind(LossKind.DISCRETE, "lexicase_select")
    rows = profile._rows
    n_cases = profile.n_cases
    src = rng.source()
    slack = _elite_slack

    pool = list(range(len(rows)))
    pool_sizes = [len(pool)]
    case_order: list[int] = []
    remaining = list(range(n_cases))
    evaluations = 0

    while len(pool) > 1 and remaining:
        j = src.randbelow(len(remaining))
        case = remaining[j]
        remaining[j] = remaining[-1]
        remaining.pop()
        case_order.append(case)

        best = rows[pool[0]][case]
        for i in pool:
            v = rows[i][case]
            if v < best:
                best = v
        cutoff = best + slack
        evaluations += len(pool)
        pool = [i for i in pool if rows[i][case] <= cutoff]
        pool_sizes.append(len(pool))

    if len(pool) == 1:
        winner_unique = pool[0]
    else:
        winner_unique = pool[src.randbelow(len(pool))]
    group = profile.groups[winner_unique]
    winner_original = group[0] if len(group) == 1 else group[src.randbelow(len(group))]

    return SelectionTrace(
        winner_unique_index=winner_unique,
        winner_original_index=winner_original,
        case_order=tuple(case_order),
        pool_sizes=tuple(pool_sizes),
        evaluations=evaluations,
    )


def select_parents(profile: DedupProfile, count: int, rng: RngStream) -> list[SelectionTrace]:
    """Run ``count`` independent selection events on substreams 0..count-1.

    Deduplication is not repeated; the profile is shared across all events.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [lexicase_select(profile, rng.substream(i)) for i in range(count)]


def static_epsilon_binarize(matrix: ErrorMatrix, thresholds) -> ErrorMatrix:
    """Binarize real losses against per-case elite thresholds.

    Output entry is 0 when the loss is within ``thresholds[c]`` of the
    population-wide minimum on case c, else 1; the result is DISCRETE and
    ready for deduplication and selection.
    """
    matrix.require_kind(LossKind.REAL, "static_epsilon_binarize")
    thr = np.asarray(thresholds, dtype=np.float64)
    if thr.shape != (matrix.n_cases,):
        raise ValueError(f"expected {matrix.n_cases} thresholds, got shape {thr.shape}")
    if (thr < 0).any():
        raise ValueError("thresholds must be non-negative")
    col_min = matrix.losses.min(axis=0)
    binary = np.where(matrix.losses <= col_min + thr, 0.0, 1.0)
    return ErrorMatrix(
        binary,
        kind=LossKind.DISCRETE,
        individual_labels=matrix.individual_labels,
        case_labels=matrix.case_labels,
    )


def mad_thresholds(matrix: ErrorMatrix) -> np.ndarray:
    """Per-case median absolute deviation, the usual static-epsilon threshold."""
    matrix.require_kind(LossKind.REAL, "mad_thresholds")
    med = np.median(matrix.losses, axis=0)
    return np.median(np.abs(matrix.losses - med), axis=0)


def downsample_cases(matrix: ErrorMatrix, fraction: float, rng: RngStream) -> ErrorMatrix:
    """Restrict the matrix to ceil(fraction * C) uniformly chosen cases.

    The subset keeps the original case order (and labels); fraction 1.0
    returns the matrix unchanged. Note the result may contain duplicate rows
    even if the input did not; re-deduplicate before selection.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    c = matrix.n_cases
    size = math.ceil(fraction * c)
    if size >= c:
        return matrix
    src = rng.source()
    # Partial Fisher-Yates: the first `size` slots are a uniform subset.
    indices = list(range(c))
    for i in range(size):
        j = i + src.randbelow(c - i)
        indices[i], indices[j] = indices[j], indices[i]
    chosen = sorted(indices[:size])
    case_labels = None
    if matrix.case_labels is not None:
        case_labels = tuple(matrix.case_labels[j] for j in chosen)
    return ErrorMatrix(
        matrix.losses[:, chosen],
        kind=matrix.kind,
        individual_labels=matrix.individual_labels,
        case_labels=case_labels,
    )
