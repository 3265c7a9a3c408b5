"""Directed acyclic graphs over integer-indexed vertices.

Vertices are the integers ``0..d-1``; edges are ordered ``(parent, child)``
pairs.  The same type is used for ground-truth graphs and predictions.
Besides the usual structural queries (parents, ancestors, roots, ...) this
module provides d-separation via the Bayes-ball reachability algorithm and
the partition of non-root vertices by the number of their root ancestors,
which drives the first pruning stage of the ordering algorithm.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Dag",
    "GraphError",
    "er_random_dag",
    "fully_connected_dag",
    "is_valid_order",
    "topological_sort",
]


class GraphError(ValueError):
    """Invalid graph structure or graph parameters."""


@dataclass(frozen=True)
class Dag:
    """Immutable DAG on ``num_vertices`` labelled vertices.

    Raises :class:`GraphError` on self-loops, out-of-range indices, or
    directed cycles.  Labels default to ``x0..x{d-1}``.
    """

    num_vertices: int
    edges: frozenset[tuple[int, int]]
    labels: tuple[str, ...] = field(default=())

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[tuple[int, int]] = (),
        labels: Sequence[str] | None = None,
    ):
        if num_vertices < 1:
            raise GraphError(f"num_vertices must be >= 1, got {num_vertices}")
        edge_set = frozenset((int(p), int(c)) for p, c in edges)
        for p, c in edge_set:
            if p == c:
                raise GraphError(f"self-loop at vertex {p}")
            if not (0 <= p < num_vertices and 0 <= c < num_vertices):
                raise GraphError(f"edge ({p},{c}) out of range for d={num_vertices}")
        if labels is None:
            labels = tuple(f"x{i}" for i in range(num_vertices))
        else:
            labels = tuple(str(s) for s in labels)
            if len(labels) != num_vertices:
                raise GraphError("label count does not match num_vertices")
        object.__setattr__(self, "num_vertices", int(num_vertices))
        object.__setattr__(self, "edges", edge_set)
        object.__setattr__(self, "labels", labels)
        if topological_sort(self) is None:
            raise GraphError("edge set contains a directed cycle")

    # -- structural queries -------------------------------------------------

    def _check_vertex(self, v: int) -> int:
        if not (0 <= v < self.num_vertices):
            raise GraphError(f"vertex {v} out of range for d={self.num_vertices}")
        return int(v)

    def parents(self, v: int) -> set[int]:
        v = self._check_vertex(v)
        return {p for p, c in self.edges if c == v}

    def children(self, v: int) -> set[int]:
        v = self._check_vertex(v)
        return {c for p, c in self.edges if p == v}

    def ancestors(self, v: int) -> set[int]:
        """All vertices with a directed path into ``v`` (excluding ``v``)."""
        v = self._check_vertex(v)
        seen: set[int] = set()
        stack = list(self.parents(v))
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(self.parents(u))
        return seen

    def descendants(self, v: int) -> set[int]:
        """All vertices reachable from ``v`` by a directed path (excluding ``v``)."""
        v = self._check_vertex(v)
        seen: set[int] = set()
        stack = list(self.children(v))
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(self.children(u))
        return seen

    def roots(self) -> set[int]:
        non_roots = {c for _, c in self.edges}
        return set(range(self.num_vertices)) - non_roots

    def leaves(self) -> set[int]:
        non_leaves = {p for p, _ in self.edges}
        return set(range(self.num_vertices)) - non_leaves

    def root_ancestors(self, v: int) -> set[int]:
        roots = self.roots()
        return {a for a in self.ancestors(v) if a in roots}

    def srd_set(self) -> set[int]:
        """Non-roots descending from exactly one root."""
        roots = self.roots()
        return {
            v
            for v in range(self.num_vertices)
            if v not in roots and len(self.root_ancestors(v)) == 1
        }

    def mrd_set(self) -> set[int]:
        """Non-roots descending from at least two roots."""
        roots = self.roots()
        return {
            v
            for v in range(self.num_vertices)
            if v not in roots and len(self.root_ancestors(v)) >= 2
        }

    # -- d-separation -------------------------------------------------------

    def d_separated(self, a: int, b: int, z: Iterable[int] = ()) -> bool:
        """True iff every path between ``a`` and ``b`` is inactive given ``z``.

        Bayes-ball reachability: walk active trails out of ``a`` tracking the
        direction of entry into each vertex; colliders pass only when they or
        a descendant are conditioned on, non-colliders only when they are not.
        """
        a = self._check_vertex(a)
        b = self._check_vertex(b)
        zset = {self._check_vertex(v) for v in z}
        if a == b:
            raise GraphError("d-separation requires distinct endpoints")
        if a in zset or b in zset:
            raise GraphError("endpoints may not appear in the conditioning set")

        # ancestors of the conditioning set, including the set itself
        anc_z: set[int] = set()
        stack = list(zset)
        while stack:
            u = stack.pop()
            if u not in anc_z:
                anc_z.add(u)
                stack.extend(self.parents(u))

        parents = {v: self.parents(v) for v in range(self.num_vertices)}
        children = {v: self.children(v) for v in range(self.num_vertices)}

        # (vertex, arrived-from-child?) states
        visited: set[tuple[int, bool]] = set()
        queue: list[tuple[int, bool]] = [(a, True)]
        while queue:
            v, from_child = queue.pop()
            if (v, from_child) in visited:
                continue
            visited.add((v, from_child))
            if v == b:
                return False
            if from_child:
                # trail entered v against edge direction: v acts as a
                # non-collider upward and downward when unobserved
                if v not in zset:
                    queue.extend((p, True) for p in parents[v])
                    queue.extend((c, False) for c in children[v])
            else:
                # trail entered v along edge direction: v is a collider on
                # paths continuing upward, a chain node continuing downward
                if v not in zset:
                    queue.extend((c, False) for c in children[v])
                if v in anc_z:
                    queue.extend((p, True) for p in parents[v])
        return True

    def d_separated_bruteforce(self, a: int, b: int, z: Iterable[int] = ()) -> bool:
        """Path-enumeration oracle for d-separation; only sensible for small d."""
        a = self._check_vertex(a)
        b = self._check_vertex(b)
        zset = {self._check_vertex(v) for v in z}
        adj: dict[int, set[int]] = {v: set() for v in range(self.num_vertices)}
        for p, c in self.edges:
            adj[p].add(c)
            adj[c].add(p)

        def paths(path: list[int]) -> Iterable[list[int]]:
            last = path[-1]
            if last == b:
                yield list(path)
                return
            for nxt in adj[last]:
                if nxt not in path:
                    path.append(nxt)
                    yield from paths(path)
                    path.pop()

        def active(path: list[int]) -> bool:
            for i in range(1, len(path) - 1):
                prev, v, nxt = path[i - 1], path[i], path[i + 1]
                collider = (prev, v) in self.edges and (nxt, v) in self.edges
                if collider:
                    if v not in zset and not (self.descendants(v) & zset):
                        return False
                elif v in zset:
                    return False
            return True

        return not any(active(p) for p in paths([a]))

    # -- serialization ------------------------------------------------------

    def to_adjacency(self) -> np.ndarray:
        """Adjacency matrix with rows as parents: ``A[p, c] = 1`` iff p -> c."""
        a = np.zeros((self.num_vertices, self.num_vertices), dtype=int)
        for p, c in self.edges:
            a[p, c] = 1
        return a

    @classmethod
    def from_adjacency(cls, a: np.ndarray, labels: Sequence[str] | None = None) -> "Dag":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency matrix must be square")
        edges = [(int(p), int(c)) for p, c in zip(*np.nonzero(a))]
        return cls(a.shape[0], edges, labels)

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.num_vertices,
                "edges": sorted([list(e) for e in self.edges]),
                "labels": list(self.labels),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Dag":
        obj = json.loads(text)
        return cls(obj["d"], [tuple(e) for e in obj["edges"]], obj.get("labels"))

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.labels)
            for row in self.to_adjacency():
                writer.writerow(row.tolist())

    @classmethod
    def from_csv(cls, path: str) -> "Dag":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise GraphError(f"empty adjacency CSV: {path}")
        labels = rows[0]
        a = np.array([[int(x) for x in row] for row in rows[1:]], dtype=int)
        return cls.from_adjacency(a, labels)


def topological_sort(dag: Dag) -> list[int] | None:
    """Kahn's algorithm; returns None if the edge set is cyclic."""
    indeg = [0] * dag.num_vertices
    children: dict[int, list[int]] = {v: [] for v in range(dag.num_vertices)}
    for p, c in dag.edges:
        indeg[c] += 1
        children[p].append(c)
    frontier = sorted(v for v in range(dag.num_vertices) if indeg[v] == 0)
    order: list[int] = []
    while frontier:
        v = frontier.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                frontier.append(c)
    return order if len(order) == dag.num_vertices else None


def is_valid_order(dag: Dag, order: Sequence[int]) -> bool:
    """True iff every edge's parent precedes its child in ``order``."""
    order = [int(v) for v in order]
    if sorted(order) != list(range(dag.num_vertices)):
        raise GraphError("order must be a permutation of the vertex indices")
    rank = {v: i for i, v in enumerate(order)}
    return all(rank[p] < rank[c] for p, c in dag.edges)


def er_random_dag(d: int, avg_edges: float, rng_seed: int) -> Dag:
    """Erdos-Renyi style random DAG with a given expected edge count.

    Draws a uniform vertex permutation, then keeps each of the d(d-1)/2
    forward pairs independently with probability avg_edges / C(d, 2), so the
    expected number of edges equals ``avg_edges`` and the result is acyclic
    by construction.  Deterministic in ``rng_seed``.
    """
    if d < 1:
        raise GraphError(f"d must be >= 1, got {d}")
    max_edges = d * (d - 1) / 2
    if avg_edges < 0 or avg_edges > max_edges:
        raise GraphError(
            f"avg_edges must be in [0, {max_edges:g}] for d={d}, got {avg_edges}"
        )
    rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(d)
    edges = []
    if max_edges > 0:
        p = avg_edges / max_edges
        for i, j in combinations(range(d), 2):
            if rng.random() < p:
                edges.append((int(perm[i]), int(perm[j])))
    return Dag(d, edges)


def fully_connected_dag(d: int) -> Dag:
    """DAG with every forward edge under the identity ordering."""
    return Dag(d, [(i, j) for i, j in combinations(range(d), 2)])


def all_orders(d: int) -> Iterable[tuple[int, ...]]:
    """All d! vertex permutations; intended for exhaustive checks at small d."""
    if math.factorial(d) > 50_000:
        raise GraphError("exhaustive order enumeration restricted to small d")
    return permutations(range(d))
