"""Empirical moments, joint cumulants, and shuffle-null significance scores.

For binary symptom indicators the empirical moment of a set of columns is the
fraction of patients carrying all of them (powers collapse, x^2 = x on 0/1
data). Joint cumulants are recovered by Moebius inversion over set partitions:

    cumulant(S) = sum over partitions P of S of
                  (-1)^(|P|-1) * (|P|-1)! * product over blocks B of moment(B)

Cumulants vanish across independent column groups, so they isolate genuine
higher-order co-occurrence from the product of lower-order effects. A pattern
is scored by comparing its observed cumulant against a null distribution
built by independently permuting each of its columns: marginals survive the
shuffle exactly, correlations do not.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .ingest import AssociationMatrix
from .patterns import Cluster, Pattern

log = logging.getLogger(__name__)

MAX_ORDER = 4


def set_partitions(items: Sequence) -> Iterator[list[tuple]]:
    """All partitions of ``items`` into non-empty blocks (order-insensitive)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in set_partitions(rest):
        for k in range(len(partial)):
            yield partial[:k] + [(first,) + partial[k]] + partial[k + 1 :]
        yield [(first,)] + partial


def empirical_moment(matrix: AssociationMatrix, indices: Sequence[int]) -> float:
    """Mean over patients of the product of the indicated columns.

    ``indices`` is a multiset of column indices of order 1 to 4; repeated
    indices collapse on binary data.
    """
    if not 1 <= len(indices) <= MAX_ORDER:
        raise ValueError(f"moment order must be 1..{MAX_ORDER}, got {len(indices)}")
    if matrix.n_patients == 0:
        raise ValueError("cannot take moments of an empty matrix")
    distinct = sorted(set(indices))
    for j in distinct:
        if not 0 <= j < matrix.n_codes:
            raise IndexError(f"column index {j} out of range")
    mask = -1
    for j in distinct:
        mask &= matrix.column_mask(j)
    # mask of patients with every indicated code; exact integer count
    count = (mask & ((1 << matrix.n_patients) - 1)).bit_count()
    return count / matrix.n_patients


def cumulant(moment: Callable[[tuple], float], indices: Sequence) -> float:
    """Joint cumulant over the index positions via set-partition inversion.

    ``moment`` maps a tuple of index labels to the corresponding empirical
    moment. Positions are treated as distinct even when labels repeat; the
    moment callable is responsible for any collapse on binary data.
    """
    order = len(indices)
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"cumulant order must be 1..{MAX_ORDER}, got {order}")
    labels = tuple(indices)
    total = 0.0
    for partition in set_partitions(range(order)):
        coeff = (-1.0) ** (len(partition) - 1) * math.factorial(len(partition) - 1)
        term = coeff
        for block in partition:
            term *= moment(tuple(labels[i] for i in block))
        total += term
    return total


def matrix_cumulant(matrix: AssociationMatrix, indices: Sequence[int]) -> float:
    return cumulant(lambda block: empirical_moment(matrix, block), indices)


def moment_table(matrix: AssociationMatrix, max_order: int = MAX_ORDER) -> dict[tuple[int, ...], float]:
    """Empirical moments for every sorted column combination up to max_order."""
    table = {}
    for order in range(1, max_order + 1):
        for combo in combinations(range(matrix.n_codes), order):
            table[combo] = empirical_moment(matrix, combo)
    return table


def cumulant_table(matrix: AssociationMatrix, max_order: int = MAX_ORDER) -> dict[tuple[int, ...], float]:
    table = {}
    for order in range(1, max_order + 1):
        for combo in combinations(range(matrix.n_codes), order):
            table[combo] = matrix_cumulant(matrix, combo)
    return table


@dataclass(frozen=True)
class SignificanceScore:
    """Observed pattern cumulant against its shuffle-null distribution.

    ``z`` is None (undefined) when the null has zero spread and the observed
    value deviates from it; a zero-spread null that exactly matches the
    observation scores z = 0.
    """

    pattern: Pattern
    observed: float
    null_mean: float
    null_std: float
    z: float | None
    n_shuffles: int
    seed: int


def _permuted_subset_counts(
    rng: np.random.Generator,
    matrix: AssociationMatrix,
    cols: Sequence[int],
    n_shuffles: int,
) -> dict[tuple[int, ...], np.ndarray]:
    """Per-trial intersection counts by materializing permuted columns."""
    permuted = []
    for j in cols:
        tiled = np.tile(matrix.incidence[:, j], (n_shuffles, 1))
        permuted.append(rng.permuted(tiled, axis=1, out=tiled))
    counts: dict[tuple[int, ...], np.ndarray] = {}
    for r in range(1, len(cols) + 1):
        for block in combinations(range(len(cols)), r):
            prod = permuted[block[0]]
            for p in block[1:]:
                prod = prod * permuted[p]
            counts[block] = prod.sum(axis=1, dtype=np.int64)
    return counts


def _cell_subset_counts(
    rng: np.random.Generator,
    matrix: AssociationMatrix,
    cols: Sequence[int],
    n_shuffles: int,
) -> dict[tuple[int, ...], np.ndarray]:
    """Per-trial intersection counts sampled without materializing columns.

    Independently permuting each binary column induces a joint law on the
    2^m inclusion-cell counts: each column drops its ones into the existing
    cells by a multivariate hypergeometric split. Sampling those splits
    directly (as chained vectorized hypergeometric draws) reproduces the
    permutation null exactly while staying O(n_shuffles) per column.
    """
    n = matrix.n_patients
    supports = [int(matrix.incidence[:, j].sum()) for j in cols]
    cells: dict[int, np.ndarray] = {
        0: np.full(n_shuffles, n - supports[0], dtype=np.int64),
        1: np.full(n_shuffles, supports[0], dtype=np.int64),
    }
    for pos in range(1, len(cols)):
        keys = sorted(cells)
        remaining = np.full(n_shuffles, supports[pos], dtype=np.int64)
        capacity = np.full(n_shuffles, n, dtype=np.int64)
        new_cells: dict[int, np.ndarray] = {}
        for i, key in enumerate(keys):
            size = cells[key]
            if i == len(keys) - 1:
                hits = remaining
            else:
                capacity = capacity - size
                hits = rng.hypergeometric(size, capacity, remaining)
                remaining = remaining - hits
            new_cells[key | (1 << pos)] = hits
            new_cells[key] = size - hits
        cells = new_cells
    counts: dict[tuple[int, ...], np.ndarray] = {}
    for r in range(1, len(cols) + 1):
        for block in combinations(range(len(cols)), r):
            mask = sum(1 << p for p in block)
            total = np.zeros(n_shuffles, dtype=np.int64)
            for key, size in cells.items():
                if key & mask == mask:
                    total = total + size
            counts[block] = total
    return counts


def shuffle_null(
    matrix: AssociationMatrix,
    pattern: Pattern,
    n_shuffles: int,
    seed: int,
    method: str = "cells",
) -> SignificanceScore:
    """Score a pattern's cumulant against column-shuffle null trials.

    Each trial independently permutes every pattern column over patients,
    preserving column supports exactly while destroying correlations, then
    recomputes the pattern-order cumulant. Deterministic given ``seed``.

    ``method`` selects how trials are realized: ``"cells"`` samples the
    permuted columns' intersection-cell counts exactly (fast, identical in
    law), ``"permute"`` materializes the permuted columns.
    """
    if n_shuffles < 2:
        raise ValueError("n_shuffles must be >= 2")
    cols = [matrix.code_index(code) for code in pattern.codes]
    order = len(cols)
    if order > MAX_ORDER:
        raise ValueError(f"patterns above order {MAX_ORDER} cannot be scored")
    n = matrix.n_patients
    if n == 0:
        raise ValueError("cannot score patterns on an empty matrix")

    observed = matrix_cumulant(matrix, cols)

    rng = np.random.default_rng(seed)
    if method == "cells":
        sub_counts = _cell_subset_counts(rng, matrix, cols, n_shuffles)
    elif method == "permute":
        sub_counts = _permuted_subset_counts(rng, matrix, cols, n_shuffles)
    else:
        raise ValueError(f"unknown shuffle method {method!r}")

    # integer counts keep the order-1 case exactly shuffle-invariant
    sub_moment = {block: counts / n for block, counts in sub_counts.items()}

    null = np.zeros(n_shuffles, dtype=np.float64)
    for partition in set_partitions(range(order)):
        coeff = (-1.0) ** (len(partition) - 1) * math.factorial(len(partition) - 1)
        term = np.full(n_shuffles, coeff)
        for block in partition:
            term = term * sub_moment[tuple(sorted(block))]
        null += term

    if np.all(null == null[0]):
        # exactly degenerate null (e.g. order 1: permutation preserves the
        # marginal); float mean/std would report summation noise instead
        null_mean = float(null[0])
        null_std = 0.0
    else:
        null_mean = float(null.mean())
        null_std = float(null.std(ddof=1))
    if null_std > 0.0:
        z: float | None = (observed - null_mean) / null_std
    elif observed == null_mean:
        z = 0.0
    else:
        z = None
    return SignificanceScore(
        pattern=pattern,
        observed=observed,
        null_mean=null_mean,
        null_std=null_std,
        z=z,
        n_shuffles=n_shuffles,
        seed=seed,
    )


def filter_significant(
    clusters: Sequence[Cluster],
    scores: Mapping[Pattern, SignificanceScore],
    z_threshold: float,
) -> list[Cluster]:
    """Keep order-1 clusters unconditionally and higher orders with z >= threshold.

    Clusters whose score has an undefined z (degenerate null) are excluded
    and reported via logging.
    """
    kept = []
    for cluster in clusters:
        score = scores.get(cluster.pattern)
        if score is None:
            raise ValueError(f"no significance score for pattern {cluster.pattern}")
        if cluster.pattern.order == 1:
            kept.append(cluster)
        elif score.z is None:
            log.warning("excluding %s: undefined z (degenerate null)", cluster.pattern)
        elif score.z >= z_threshold:
            kept.append(cluster)
    return kept


def scores_to_json(scores: Sequence[SignificanceScore]) -> list[dict]:
    return [
        {
            "pattern": list(s.pattern.codes),
            "observed": s.observed,
            "null_mean": s.null_mean,
            "null_std": s.null_std,
            "z": s.z,
            "n_shuffles": s.n_shuffles,
            "seed": s.seed,
        }
        for s in scores
    ]


def scores_from_json(payload: Sequence[Mapping]) -> list[SignificanceScore]:
    scores = []
    for pos, entry in enumerate(payload):
        try:
            scores.append(
                SignificanceScore(
                    pattern=Pattern.of(entry["pattern"]),
                    observed=float(entry["observed"]),
                    null_mean=float(entry["null_mean"]),
                    null_std=float(entry["null_std"]),
                    z=None if entry["z"] is None else float(entry["z"]),
                    n_shuffles=int(entry["n_shuffles"]),
                    seed=int(entry["seed"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(
                f"scores entry {pos}: expected score format v1: {exc}"
            ) from exc
    return scores
