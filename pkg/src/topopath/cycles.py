"""Representative 1-cycles for finite dim-1 persistence pairs.

When a 2-simplex kills a 1-dimensional class, its reduced boundary column is
a Z/2 1-cycle born with the pair. That kernel element may be a sum of
edge-disjoint simple loops; the loop containing the birth edge is returned
and the rest are kept as diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .filtration import Filtration, Simplex
from .metric import DistanceMatrix
from .patterns import Cluster, Pattern
from .persistence import BoundaryMatrix, PersistencePair


@dataclass(frozen=True)
class RepresentativeCycle:
    """A closed edge loop generating a finite dim-1 persistence pair."""

    pair: PersistencePair
    edges: tuple[Simplex, ...]
    vertices: tuple[int, ...]
    extra_loops: tuple[tuple[int, ...], ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class AnnotatedLoop:
    """A representative cycle labeled with patterns, supports and distances."""

    pair: PersistencePair
    vertices: tuple[tuple[int, str, Pattern, int], ...]
    edges: tuple[tuple[int, int, float, str], ...]


def _decompose_simple_loops(edge_pairs: set[tuple[int, int]]) -> list[list[int]]:
    """Split an even-degree Z/2 edge set into edge-disjoint simple loops.

    Deterministic: walks always leave the smallest available vertex along the
    smallest available neighbor.
    """
    adjacency: dict[int, list[int]] = {}
    for u, v in edge_pairs:
        adjacency.setdefault(u, []).append(v)
        adjacency.setdefault(v, []).append(u)
    for nbrs in adjacency.values():
        nbrs.sort()
    remaining = set(edge_pairs)
    loops: list[list[int]] = []
    while remaining:
        start = min(u for edge in remaining for u in edge)
        stack = [start]
        position = {start: 0}
        while stack:
            cur = stack[-1]
            nxt = None
            for w in adjacency[cur]:
                if (min(cur, w), max(cur, w)) in remaining:
                    nxt = w
                    break
            if nxt is None:
                position.pop(stack.pop(), None)
                continue
            remaining.remove((min(cur, nxt), max(cur, nxt)))
            if nxt in position:
                cut = position[nxt]
                loops.append(stack[cut:])
                for v in stack[cut + 1 :]:
                    del position[v]
                del stack[cut + 1 :]
            else:
                position[nxt] = len(stack)
                stack.append(nxt)
    return loops


def _canonical_rotation(loop: Sequence[int]) -> tuple[int, ...]:
    """Rotate to start at the smallest vertex; orient toward its smaller neighbor."""
    k = loop.index(min(loop))
    rotated = list(loop[k:]) + list(loop[:k])
    if len(rotated) > 2 and rotated[-1] < rotated[1]:
        rotated = [rotated[0]] + rotated[:0:-1]
    return tuple(rotated)


def representative(
    reduced: BoundaryMatrix, filtration: Filtration, pair: PersistencePair
) -> RepresentativeCycle:
    """Extract the simple loop generating ``pair`` from the reduced matrix."""
    if pair.dim != 1:
        raise ValueError(f"representative cycles are defined for dim 1, got dim {pair.dim}")
    if not pair.finite or pair.death_index is None:
        raise ValueError(
            "open-ended dim-1 pairs have no death column and no defined representative"
        )
    if pair.birth_index is None:
        raise ValueError("pair not found: no birth column recorded")
    edge_positions = reduced.rows(pair.death_index)
    if not edge_positions:
        raise ValueError(f"death column {pair.death_index} is empty; pair not found")

    edge_pairs = set()
    for pos in edge_positions:
        simplex = filtration[pos]
        if simplex.dim != 1:
            raise ValueError("death column of a dim-1 pair must hold edges")
        edge_pairs.add(simplex.vertices)

    incidence: dict[int, int] = {}
    for u, v in edge_pairs:
        incidence[u] = incidence.get(u, 0) + 1
        incidence[v] = incidence.get(v, 0) + 1
    odd = [v for v, deg in incidence.items() if deg % 2]
    if odd:
        raise ValueError(f"kernel element has non-zero boundary at vertices {odd}")

    loops = _decompose_simple_loops(edge_pairs)
    birth_edge = filtration[pair.birth_index].vertices
    chosen = None
    extras = []
    for loop in loops:
        loop_edges = _loop_edge_pairs(loop)
        if birth_edge in loop_edges:
            chosen = loop
        else:
            extras.append(_canonical_rotation(loop))
    if chosen is None:
        raise ValueError("no simple loop contains the birth edge; pair not found")

    vertices = _canonical_rotation(chosen)
    edges = tuple(
        filtration[filtration.position(edge)] for edge in _loop_edge_list(vertices)
    )
    return RepresentativeCycle(
        pair=pair, edges=edges, vertices=vertices, extra_loops=tuple(extras)
    )


def _loop_edge_list(loop: Sequence[int]) -> list[tuple[int, int]]:
    out = []
    for i in range(len(loop)):
        u, v = loop[i], loop[(i + 1) % len(loop)]
        out.append((min(u, v), max(u, v)))
    return out


def _loop_edge_pairs(loop: Sequence[int]) -> set[tuple[int, int]]:
    return set(_loop_edge_list(loop))


def pattern_label(pattern: Pattern, support: int) -> str:
    return f"({' ∩ '.join(pattern.codes)}): {support}"


def annotate(
    cycle: RepresentativeCycle,
    clusters: Sequence[Cluster],
    dist: DistanceMatrix,
) -> AnnotatedLoop:
    """Label loop vertices with their patterns and edges with Jaccard distances."""
    for v in cycle.vertices:
        if not 0 <= v < len(clusters):
            raise IndexError(f"cycle vertex {v} has no cluster")
    vertices = tuple(
        (v, pattern_label(clusters[v].pattern, clusters[v].support),
         clusters[v].pattern, clusters[v].support)
        for v in cycle.vertices
    )
    edges = []
    n = len(cycle.vertices)
    for i in range(n):
        u, v = cycle.vertices[i], cycle.vertices[(i + 1) % n]
        d = float(dist.values[u, v])
        edges.append((u, v, d, f"{d:.2f}"))
    return AnnotatedLoop(pair=cycle.pair, vertices=vertices, edges=tuple(edges))


def loop_to_json(loop: AnnotatedLoop) -> dict:
    """Cycle report payload (dim, interval, labeled vertices and edges)."""
    return {
        "dim": 1,
        "birth": loop.pair.birth,
        "death": loop.pair.death if math.isfinite(loop.pair.death) else None,
        "vertices": [
            {"pattern": list(pattern.codes), "support": support}
            for _, _, pattern, support in loop.vertices
        ],
        "edges": [
            {"from": u, "to": v, "jaccard": d} for u, v, d, _ in loop.edges
        ],
    }


def loop_from_json(payload: Mapping) -> AnnotatedLoop:
    """Rebuild an annotated loop from its cycle report payload."""
    try:
        birth = float(payload["birth"])
        death = math.inf if payload["death"] is None else float(payload["death"])
        raw_vertices = payload["vertices"]
        raw_edges = payload["edges"]
        if int(payload["dim"]) != 1:
            raise ValueError("only dim-1 cycle reports are supported")
        if len(raw_vertices) != len(raw_edges):
            raise ValueError("vertex and edge counts must match around a loop")
        pair = PersistencePair(dim=1, birth=birth, death=death)
        vertices = []
        for entry, edge in zip(raw_vertices, raw_edges):
            pattern = Pattern.of(entry["pattern"])
            support = int(entry["support"])
            vertices.append(
                (int(edge["from"]), pattern_label(pattern, support), pattern, support)
            )
        edges = tuple(
            (int(e["from"]), int(e["to"]), float(e["jaccard"]),
             f"{float(e['jaccard']):.2f}")
            for e in raw_edges
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"cycle report: expected cycle format v1: {exc}") from exc
    return AnnotatedLoop(pair=pair, vertices=tuple(vertices), edges=edges)
