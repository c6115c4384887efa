"""Vietoris-Rips filtration over cluster points from a distance matrix.

A k-simplex enters the filtration at its diameter (the largest pairwise
distance among its vertices), so the filtration axis is the distance itself.
Ordering is (value, dimension, lexicographic vertices), which guarantees that
every face precedes its cofaces, including through ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .metric import DistanceMatrix


class FiltrationError(ValueError):
    """Structural problem: bad ordering or a missing face."""


@dataclass(frozen=True)
class Simplex:
    """Sorted vertex tuple plus the filtration value at which it enters."""

    vertices: tuple[int, ...]
    value: float

    def __post_init__(self) -> None:
        if not self.vertices:
            raise FiltrationError("a simplex needs at least one vertex")
        if any(b <= a for a, b in zip(self.vertices, self.vertices[1:])):
            raise FiltrationError(f"vertices must be strictly increasing: {self.vertices}")

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def faces(self) -> Iterator[tuple[int, ...]]:
        """Codimension-1 faces (empty for vertices)."""
        if self.dim == 0:
            return
        for skip in range(len(self.vertices)):
            yield self.vertices[:skip] + self.vertices[skip + 1 :]


def simplex_sort_key(s: Simplex) -> tuple:
    return (s.value, s.dim, s.vertices)


@dataclass
class Filtration:
    """Simplexes in filtration order with their threshold and dimension cap."""

    simplexes: tuple[Simplex, ...]
    threshold: float
    max_dim: int
    _position: dict[tuple[int, ...], int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.simplexes = tuple(self.simplexes)
        self._position = {s.vertices: i for i, s in enumerate(self.simplexes)}
        if len(self._position) != len(self.simplexes):
            raise FiltrationError("duplicate simplex in filtration")

    def __len__(self) -> int:
        return len(self.simplexes)

    def __iter__(self) -> Iterator[Simplex]:
        return iter(self.simplexes)

    def __getitem__(self, i: int) -> Simplex:
        return self.simplexes[i]

    def position(self, vertices: Sequence[int]) -> int:
        key = tuple(vertices)
        if key not in self._position:
            raise FiltrationError(f"simplex {key} not present in filtration")
        return self._position[key]

    def validate(self) -> None:
        """Raise FiltrationError unless ordering and face closure hold."""
        prev_key = None
        for i, s in enumerate(self.simplexes):
            key = simplex_sort_key(s)
            if prev_key is not None and key < prev_key:
                raise FiltrationError(f"filtration order violated at position {i}")
            prev_key = key
            if s.value > self.threshold:
                raise FiltrationError(f"simplex {s.vertices} exceeds threshold")
            for face in s.faces():
                j = self._position.get(face)
                if j is None:
                    raise FiltrationError(f"missing face {face} of {s.vertices}")
                if j >= i:
                    raise FiltrationError(
                        f"face {face} does not precede coface {s.vertices}"
                    )
                if self.simplexes[j].value > s.value:
                    raise FiltrationError(
                        f"face {face} enters after its coface {s.vertices}"
                    )

    def to_text(self) -> str:
        """Debug export: one simplex per line, ``value <TAB> v0,v1,...``."""
        return "".join(
            f"{s.value!r}\t{','.join(map(str, s.vertices))}\n" for s in self.simplexes
        )

    def write_text(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def build_vr(
    dist: DistanceMatrix | np.ndarray, threshold: float, max_dim: int
) -> Filtration:
    """Vietoris-Rips filtration up to ``threshold`` and dimension ``max_dim``.

    Contains every vertex at value 0, every edge whose distance is at most
    the threshold at value = distance, and every k-simplex (k <= max_dim)
    whose vertices are pairwise within the threshold, at value = diameter.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if not 1 <= max_dim <= 3:
        raise ValueError("max_dim must be between 1 and 3")
    d = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=np.float64)
    n = d.shape[0]

    simplexes = [Simplex((i,), 0.0) for i in range(n)]
    adjacency: list[set[int]] = [set() for _ in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] <= threshold:
                edges.append((i, j))
                adjacency[i].add(j)
                adjacency[j].add(i)
                simplexes.append(Simplex((i, j), float(d[i, j])))

    triangles = []
    if max_dim >= 2:
        for i, j in edges:
            for k in sorted(adjacency[i] & adjacency[j]):
                if k <= j:
                    continue
                value = max(d[i, j], d[i, k], d[j, k])
                triangles.append((i, j, k))
                simplexes.append(Simplex((i, j, k), float(value)))

    if max_dim >= 3:
        for i, j, k in triangles:
            common = adjacency[i] & adjacency[j] & adjacency[k]
            for l in sorted(common):
                if l <= k:
                    continue
                value = max(
                    d[i, j], d[i, k], d[i, l], d[j, k], d[j, l], d[k, l]
                )
                simplexes.append(Simplex((i, j, k, l), float(value)))

    simplexes.sort(key=simplex_sort_key)
    return Filtration(simplexes=tuple(simplexes), threshold=threshold, max_dim=max_dim)
