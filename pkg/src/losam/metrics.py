"""Evaluation of orderings and graphs, plus the trivial baselines.

An ordering is scored by the fraction of true edges it can recover (an edge
is lost when the child is ranked before its parent).  Predicted graphs are
scored by structural Hamming distance and F1 over directed edges, with
reversed edges counted once in the distance and as both a false positive
and a false negative for precision/recall.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import Dag, GraphError
from .stats import Regressor, cond_independence_test

__all__ = [
    "GraphScore",
    "OrderingScore",
    "a_top",
    "prune_edges",
    "rand_sort",
    "shd_f1",
    "var_sort",
]


@dataclass
class OrderingScore:
    d_top: int
    a_top: float
    edge_count: int

    def to_json_dict(self) -> dict:
        return {"d_top": self.d_top, "a_top": self.a_top, "edge_count": self.edge_count}


@dataclass
class GraphScore:
    shd: int
    f1: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    reversed: int

    def to_json_dict(self) -> dict:
        return {
            "shd": self.shd,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "reversed": self.reversed,
        }


def a_top(order: Sequence[int], dag: Dag) -> OrderingScore | None:
    """Fraction of edges recoverable under ``order``.

    ``d_top`` counts edges whose parent is ranked after its child and the
    score is ``1 - d_top / |E|``, so any valid order scores exactly one.
    Returns None for edgeless graphs, where the score is undefined.
    """
    order = [int(v) for v in order]
    if sorted(order) != list(range(dag.num_vertices)):
        raise GraphError("order must be a permutation of the vertex indices")
    if not dag.edges:
        return None
    rank = {v: i for i, v in enumerate(order)}
    d_top = sum(1 for p, c in dag.edges if rank[p] > rank[c])
    return OrderingScore(
        d_top=d_top,
        a_top=1.0 - d_top / len(dag.edges),
        edge_count=len(dag.edges),
    )


def shd_f1(pred: Dag, truth: Dag, double_count_reversed: bool = False) -> GraphScore:
    """Structural Hamming distance and edge F1 between two DAGs.

    An edge present in both with matching orientation is a true positive;
    present with flipped orientation it is reversed, contributing once to
    the distance (twice with ``double_count_reversed``) and counting as a
    false positive and a false negative for precision and recall.
    """
    if pred.num_vertices != truth.num_vertices:
        raise GraphError("graphs must share the vertex count")
    tp = fp = fn = rev = 0
    pairs = {frozenset(e) for e in truth.edges | pred.edges}
    for pair in pairs:
        a, b = tuple(pair)
        fwd, bwd = (a, b), (b, a)
        in_truth = fwd in truth.edges or bwd in truth.edges
        in_pred = fwd in pred.edges or bwd in pred.edges
        if in_truth and in_pred:
            # acyclicity rules out both orientations within one graph
            if (fwd in truth.edges) == (fwd in pred.edges):
                tp += 1
            else:
                rev += 1
        elif in_truth:
            fn += 1
        elif in_pred:
            fp += 1
    shd = fp + fn + rev * (2 if double_count_reversed else 1)
    prec_den = tp + fp + rev
    rec_den = tp + fn + rev
    precision = tp / prec_den if prec_den else 0.0
    recall = tp / rec_den if rec_den else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return GraphScore(
        shd=shd,
        f1=f1,
        precision=precision,
        recall=recall,
        tp=tp,
        fp=fp,
        fn=fn,
        reversed=rev,
    )


def prune_edges(
    values: np.ndarray,
    order: Sequence[int],
    level: float = 0.01,
    rng_seed: int = 0,
    regressor: Regressor | None = None,
) -> Dag:
    """Leave-one-out pruning of the dense graph implied by an ordering.

    Candidate parents of each vertex are all its predecessors in ``order``.
    An edge p -> c survives when c remains dependent on p after conditioning
    on the remaining predecessors (conditional independence at ``level``).
    The output respects the ordering and is therefore acyclic.
    """
    values = np.asarray(values, dtype=float)
    order = [int(v) for v in order]
    d = values.shape[1]
    if sorted(order) != list(range(d)):
        raise GraphError("order must be a permutation of the column indices")
    edges = []
    for pos, child in enumerate(order):
        predecessors = order[:pos]
        for p in predecessors:
            others = [q for q in predecessors if q != p]
            seed = np.random.SeedSequence(rng_seed, spawn_key=(p, child))
            res = cond_independence_test(
                values[:, child],
                values[:, p],
                values[:, others] if others else np.empty((values.shape[0], 0)),
                level=level,
                rng_seed=seed,
                regressor=regressor,
            )
            if not res.independent:
                edges.append((p, child))
    return Dag(d, edges)


def var_sort(values: np.ndarray) -> list[int]:
    """Order columns by increasing sample variance, ties by column index."""
    values = np.asarray(values, dtype=float)
    variances = values.var(axis=0)
    return sorted(range(values.shape[1]), key=lambda i: (variances[i], i))


def rand_sort(d: int, rng_seed: int) -> list[int]:
    """Seeded uniformly random permutation of the vertex indices."""
    rng = np.random.default_rng(rng_seed)
    return [int(v) for v in rng.permutation(d)]
