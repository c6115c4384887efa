"""Jaccard distances between patient clusters and the pairwise distance matrix.

The Jaccard distance 1 - |A n B| / |A u B| is the probability that a subject
drawn from the union of two clusters is not shared by both. It is a true
metric on sets, which is what lets it parameterize a filtration downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .patterns import Cluster, Pattern


def jaccard(a, b) -> float:
    """Jaccard distance between two patient sets.

    Accepts either integer bitmasks or set-like collections. The value is the
    exact rational (|union| - |intersection|) / |union| rounded once to float.
    """
    if isinstance(a, int) and isinstance(b, int):
        inter = (a & b).bit_count()
        union = (a | b).bit_count()
    else:
        a, b = set(a), set(b)
        inter = len(a & b)
        union = len(a | b)
    if union == 0:
        raise ValueError("Jaccard distance is undefined for two empty sets")
    return (union - inter) / union


@dataclass(eq=False)
class DistanceMatrix:
    """Symmetric distance matrix with zero diagonal over labeled points."""

    values: np.ndarray
    labels: tuple["Pattern", ...] | None = None

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("distance matrix must be square")
        if self.labels is not None and len(self.labels) != arr.shape[0]:
            raise ValueError("label count does not match matrix size")
        if (arr < 0).any():
            raise ValueError("distances must be non-negative")
        if (np.diagonal(arr) != 0).any():
            raise ValueError("distance matrix diagonal must be zero")
        if not np.array_equal(arr, arr.T):
            raise ValueError("distance matrix must be symmetric")
        arr.setflags(write=False)
        self.values = arr

    @property
    def n(self) -> int:
        return self.values.shape[0]


def distance_matrix(clusters: Sequence["Cluster"]) -> DistanceMatrix:
    """All pairwise Jaccard distances between the clusters' patient sets."""
    if not clusters:
        raise ValueError("distance_matrix needs at least one cluster")
    n = len(clusters)
    values = np.zeros((n, n), dtype=np.float64)
    masks = [c.mask for c in clusters]
    for i in range(n):
        for j in range(i + 1, n):
            d = jaccard(masks[i], masks[j])
            values[i, j] = d
            values[j, i] = d
    return DistanceMatrix(values=values, labels=tuple(c.pattern for c in clusters))


def distances_to_tsv(dist: DistanceMatrix) -> str:
    """TSV export: header row of pattern labels, then the lower triangle."""
    if dist.labels is None:
        raise ValueError("cannot export an unlabeled distance matrix")
    lines = ["\t".join(str(p) for p in dist.labels)]
    for i in range(1, dist.n):
        lines.append("\t".join(repr(float(dist.values[i, j])) for j in range(i)))
    return "\n".join(lines) + "\n"


def distances_from_tsv(text: str) -> DistanceMatrix:
    from .patterns import Pattern  # local import to avoid a cycle

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty distances TSV")
    labels = tuple(Pattern.of(tok.split("&")) for tok in lines[0].split("\t"))
    n = len(labels)
    if len(lines) != n:
        raise ValueError(
            f"distances TSV (format v1): expected {n - 1} triangle rows, got {len(lines) - 1}"
        )
    values = np.zeros((n, n), dtype=np.float64)
    for i, line in enumerate(lines[1:], start=1):
        row = line.split("\t")
        if len(row) != i:
            raise ValueError(f"distances TSV row {i}: expected {i} entries, got {len(row)}")
        for j, tok in enumerate(row):
            values[i, j] = values[j, i] = float(tok)
    return DistanceMatrix(values=values, labels=labels)
