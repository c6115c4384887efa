"""Enumerate symptom patterns and materialize their patient clusters.

A pattern is a conjunction of condition codes; its cluster is the set of
patients carrying every code of the pattern. Patient sets are stored as
integer bitmasks over the patient index space, so intersection, union and
support counting are word-wise operations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .ingest import AssociationMatrix
from .metric import jaccard

log = logging.getLogger(__name__)


def bit_indices(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


@dataclass(frozen=True, order=True)
class Pattern:
    """Canonical conjunction of condition codes: sorted, unique, non-empty."""

    codes: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.codes:
            raise ValueError("a pattern needs at least one code")
        if list(self.codes) != sorted(set(self.codes)):
            raise ValueError(f"pattern codes must be sorted and unique: {self.codes}")

    @classmethod
    def of(cls, codes: Iterable[str]) -> "Pattern":
        return cls(tuple(sorted(set(codes))))

    @property
    def order(self) -> int:
        return len(self.codes)

    def __str__(self) -> str:
        return "&".join(self.codes)


@dataclass(frozen=True)
class Cluster:
    """A pattern together with its supporting patient set (as a bitmask)."""

    pattern: Pattern
    mask: int
    support: int

    def __post_init__(self) -> None:
        if self.support != self.mask.bit_count():
            raise ValueError("cluster support does not match its patient mask")
        if self.support == 0:
            raise ValueError("empty-support clusters are never materialized")

    @classmethod
    def from_mask(cls, pattern: Pattern, mask: int) -> "Cluster":
        return cls(pattern=pattern, mask=mask, support=mask.bit_count())

    def patients(self) -> frozenset[int]:
        return frozenset(bit_indices(self.mask))


@dataclass(frozen=True)
class ClusterSummary:
    """Pattern plus support, for annotation when patient sets are not needed."""

    pattern: Pattern
    support: int


@dataclass(frozen=True)
class RedescriptionPair:
    """Two distinct patterns whose patient sets (nearly) coincide."""

    left: Cluster
    right: Cluster
    distance: float

    def __post_init__(self) -> None:
        if self.left.pattern == self.right.pattern:
            raise ValueError("a redescription needs two distinct patterns")


def enumerate_clusters(
    matrix: AssociationMatrix, max_order: int, min_support: int
) -> list[Cluster]:
    """All clusters with 1 <= pattern order <= max_order and support >= min_support.

    Apriori-pruned depth-first enumeration: a pattern is extended only while
    its support stays at or above ``min_support`` (support is anti-monotone
    under conjunction). Output is sorted by (order, lexicographic codes).
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if min_support < 1:
        raise ValueError("min_support must be >= 1")

    n = matrix.n_codes
    masks = [matrix.column_mask(j) for j in range(n)]
    names = [c.code for c in matrix.codes]
    found: list[tuple[tuple[int, ...], int, int]] = []

    def extend(base: tuple[int, ...], base_mask: int) -> None:
        for j in range(base[-1] + 1 if base else 0, n):
            mask = base_mask & masks[j] if base else masks[j]
            support = mask.bit_count()
            if support < min_support:
                continue
            cols = base + (j,)
            found.append((cols, mask, support))
            if len(cols) < max_order:
                extend(cols, mask)

    extend((), 0)
    clusters = [
        Cluster(pattern=Pattern.of(names[j] for j in cols), mask=mask, support=support)
        for cols, mask, support in found
    ]
    clusters.sort(key=lambda c: (c.pattern.order, c.pattern.codes))
    return clusters


def find_redescriptions(
    clusters: Sequence[Cluster], epsilon: float
) -> list[RedescriptionPair]:
    """All unordered cluster pairs within Jaccard distance ``epsilon``.

    Each pair is reported once, sorted ascending by distance (ties broken by
    pattern order for reproducibility).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    pairs = []
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            d = jaccard(clusters[i].mask, clusters[j].mask)
            if d <= epsilon:
                pairs.append(RedescriptionPair(clusters[i], clusters[j], d))
    pairs.sort(key=lambda p: (p.distance, p.left.pattern, p.right.pattern))
    return pairs


def clusters_to_json(
    clusters: Sequence[Cluster],
    matrix: AssociationMatrix | None = None,
    include_patients: bool = True,
) -> list[dict]:
    """Cluster list export; patient ids can be suppressed for privacy."""
    out = []
    for c in clusters:
        entry: dict = {"pattern": list(c.pattern.codes), "support": c.support}
        if include_patients and matrix is not None:
            entry["patients"] = [matrix.patients[i] for i in bit_indices(c.mask)]
        out.append(entry)
    return out


def clusters_from_json(
    payload: Sequence[Mapping], matrix: AssociationMatrix
) -> list[Cluster]:
    """Rebuild clusters from their JSON export against the given matrix.

    Patient sets are recomputed from the matrix columns (the export may have
    suppressed them); a support mismatch means the file does not belong to
    this matrix.
    """
    clusters = []
    for pos, entry in enumerate(payload):
        try:
            pattern = Pattern.of(entry["pattern"])
            support = int(entry["support"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(
                f"clusters entry {pos}: expected cluster format v1 "
                f"({{'pattern': [codes], 'support': int}}): {exc}"
            ) from exc
        mask = -1
        for code in pattern.codes:
            mask &= matrix.column_mask(matrix.code_index(code))
        cluster = Cluster.from_mask(pattern, mask)
        if cluster.support != support:
            raise ValueError(
                f"clusters entry {pos}: support {support} does not match matrix "
                f"({cluster.support}); stale or mismatched stage files"
            )
        clusters.append(cluster)
    return clusters


def write_clusters(path: str | Path, clusters: Sequence[Cluster],
                   matrix: AssociationMatrix | None = None,
                   include_patients: bool = True) -> None:
    payload = clusters_to_json(clusters, matrix, include_patients)
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_clusters(path: str | Path, matrix: AssociationMatrix) -> list[Cluster]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, list):
        raise ValueError(f"{path}: expected a JSON array (cluster format v1)")
    return clusters_from_json(payload, matrix)
