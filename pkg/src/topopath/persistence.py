"""Persistent homology over Z/2 by boundary-matrix reduction.

Columns are stored as integer bitmasks of face positions, so adding one
column into another mod 2 is a single XOR and the pivot (lowest row, i.e.
the largest set index) is ``bit_length() - 1``. The standard left-to-right
reduction pairs each negative simplex with the positive simplex it kills;
unpaired positive simplexes carry infinite bars. The twist/clearing variant
processes dimensions downward and zeroes known-paired columns; it must and
does produce identical pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .filtration import Filtration, FiltrationError


@dataclass
class BoundaryMatrix:
    """Per-simplex boundary columns as bitmasks over filtration positions."""

    columns: list[int]
    dims: tuple[int, ...]

    @classmethod
    def from_filtration(cls, filtration: Filtration) -> "BoundaryMatrix":
        columns = []
        for j, simplex in enumerate(filtration):
            mask = 0
            for face in simplex.faces():
                i = filtration.position(face)
                if i >= j:
                    raise FiltrationError(
                        f"face {face} does not precede coface {simplex.vertices}"
                    )
                mask |= 1 << i
            if mask.bit_count() != simplex.dim + 1 and simplex.dim > 0:
                raise FiltrationError(f"simplex {simplex.vertices} has a repeated face")
            columns.append(mask)
        return cls(columns=columns, dims=tuple(s.dim for s in filtration))

    def rows(self, j: int) -> list[int]:
        """Sorted row indices of column ``j``."""
        mask = self.columns[j]
        out = []
        while mask:
            low = mask & -mask
            out.append(low.bit_length() - 1)
            mask ^= low
        return out


@dataclass(frozen=True)
class PersistencePair:
    """A feature's (birth, death) interval; death is inf for open-ended bars."""

    dim: int
    birth: float
    death: float
    birth_index: int | None = field(default=None, compare=False)
    death_index: int | None = field(default=None, compare=False)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.death)

    @property
    def length(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class Barcode:
    """Persistence pairs sorted by (dim, birth, death)."""

    pairs: tuple[PersistencePair, ...]

    def by_dim(self, dim: int) -> tuple[PersistencePair, ...]:
        return tuple(p for p in self.pairs if p.dim == dim)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(sorted({p.dim for p in self.pairs}))


def reduce(
    filtration: Filtration, clearing: bool = True
) -> tuple[BoundaryMatrix, list[PersistencePair]]:
    """Reduce the boundary matrix and emit persistence pairs.

    With ``clearing`` the reduction runs one dimension at a time from the top,
    zeroing columns already known to be positive; the output is identical to
    the plain left-to-right reduction either way.
    """
    filtration.validate()
    matrix = BoundaryMatrix.from_filtration(filtration)
    cols = matrix.columns
    m = len(cols)
    pivot: dict[int, int] = {}

    def reduce_column(j: int) -> None:
        col = cols[j]
        while col:
            low = col.bit_length() - 1
            k = pivot.get(low)
            if k is None:
                break
            col ^= cols[k]
        cols[j] = col
        if col:
            pivot[col.bit_length() - 1] = j

    if clearing:
        for dim in sorted(set(matrix.dims), reverse=True):
            for j in range(m):
                if matrix.dims[j] != dim or cols[j] == 0:
                    continue
                reduce_column(j)
                if cols[j]:
                    cols[cols[j].bit_length() - 1] = 0
    else:
        for j in range(m):
            reduce_column(j)

    values = [s.value for s in filtration]
    pairs = []
    for low, j in pivot.items():
        pairs.append(
            PersistencePair(
                dim=matrix.dims[low],
                birth=values[low],
                death=values[j],
                birth_index=low,
                death_index=j,
            )
        )
    paired_births = set(pivot)
    negatives = set(pivot.values())
    for j in range(m):
        if cols[j] == 0 and j not in paired_births and j not in negatives:
            pairs.append(
                PersistencePair(
                    dim=matrix.dims[j],
                    birth=values[j],
                    death=math.inf,
                    birth_index=j,
                    death_index=None,
                )
            )
    pairs.sort(key=lambda p: (p.dim, p.birth, p.death, p.birth_index))
    return matrix, pairs


def barcode(pairs: Iterable[PersistencePair], min_persistence: float = 0.0) -> Barcode:
    """Drop finite pairs with length <= min_persistence and group by dimension.

    Zero-length pairs are filtration-order artifacts and never appear in a
    barcode.
    """
    if min_persistence < 0:
        raise ValueError("min_persistence must be non-negative")
    kept = [p for p in pairs if not p.finite or p.length > min_persistence]
    kept.sort(key=lambda p: (p.dim, p.birth, p.death))
    return Barcode(pairs=tuple(kept))


def betti_at(
    filtration: Filtration, pairs: Sequence[PersistencePair], t: float
) -> dict[int, int]:
    """Betti numbers at scale ``t``: features with birth <= t < death."""
    if t < 0:
        raise ValueError("filtration scale must be non-negative")
    counts = {dim: 0 for dim in range(filtration.max_dim + 1)}
    for p in pairs:
        if p.birth <= t < p.death:
            counts[p.dim] = counts.get(p.dim, 0) + 1
    return counts
