"""Top-down topological ordering by local search.

The procedure has two phases.  The root finder prunes non-roots from the
vertex set using marginal independence structure: vertices dependent on two
mutually independent vertices descend from multiple roots and are removed
first; vertices independent of everything remaining are isolated roots;
the survivors are screened with pairwise regressions (the
regression-identification test) and a bivariate-regression confirmation
step that separates roots from single-root descendants.  The sort finder
then grows the ordering one vertex per iteration: every unsorted vertex is
regressed on the sorted prefix, linear descendants (whose residuals mimic
valid leaf candidates) are pruned via pairwise linear regressions between
residuals, and the vertex minimizing the summed mutual information between
its residual and the sorted columns is appended.

Both phases run against either backend from :mod:`losam.backends`; with the
graph-truth backend the output provably matches the true roots and a valid
order, which is how the combinatorial logic is tested in isolation.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .backends import EmpiricalBackend, GraphTruthBackend, LosamConfig
from .stats import IndependenceResult, RegressionCounter, mutual_information

__all__ = [
    "LosamResult",
    "RootFinderTrace",
    "SortFinderError",
    "SortState",
    "find_vp_inducers",
    "isolated_roots",
    "ld_prune",
    "losam",
    "regression_identification",
    "root_confirmation",
    "root_finder",
    "sort_finder",
    "t_star",
]

Backend = EmpiricalBackend | GraphTruthBackend


@dataclass
class RootFinderTrace:
    """Everything the root finder decided, for auditing and tests."""

    pairwise_decisions: list[list[IndependenceResult | None]]
    vp_inducers: set[int] = field(default_factory=set)
    isolated_roots: set[int] = field(default_factory=set)
    v_prime: set[int] = field(default_factory=set)
    v_double_prime: set[int] = field(default_factory=set)
    candidate_superset: set[int] = field(default_factory=set)
    identified: dict[int, set[int]] = field(default_factory=dict)
    confirmed_roots: set[int] = field(default_factory=set)
    fallback_used: bool = False
    cross_check_roots: set[int] | None = None
    cross_check_disagreement: set[int] | None = None

    def to_json_dict(self) -> dict:
        return {
            "vp_inducers": sorted(self.vp_inducers),
            "isolated_roots": sorted(self.isolated_roots),
            "v_prime": sorted(self.v_prime),
            "v_double_prime": sorted(self.v_double_prime),
            "candidate_superset": sorted(self.candidate_superset),
            "identified": {str(k): sorted(v) for k, v in self.identified.items()},
            "confirmed_roots": sorted(self.confirmed_roots),
            "fallback_used": self.fallback_used,
            "cross_check_roots": (
                sorted(self.cross_check_roots)
                if self.cross_check_roots is not None
                else None
            ),
            "cross_check_disagreement": (
                sorted(self.cross_check_disagreement)
                if self.cross_check_disagreement is not None
                else None
            ),
            "pairwise_p_values": [
                [r.p_value if r is not None else None for r in row]
                for row in self.pairwise_decisions
            ],
        }


@dataclass
class SortState:
    """Snapshot of one sort-finder iteration."""

    iteration: int
    ordered: list[int]
    unsorted: set[int]
    residuals: Mapping[int, object]
    ld_pruned: set[int]
    t_star_values: dict[int, float]
    selected: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "ordered": list(self.ordered),
            "unsorted": sorted(self.unsorted),
            "ld_pruned": sorted(self.ld_pruned),
            "t_star_values": {str(k): v for k, v in self.t_star_values.items()},
            "selected": self.selected,
        }


class SortFinderError(RuntimeError):
    """Raised when pruning leaves no candidate vertex; carries the state."""

    def __init__(self, message: str, state: SortState):
        super().__init__(message)
        self.state = state


@dataclass
class LosamResult:
    order: list[int]
    root_trace: RootFinderTrace
    sort_states: list[SortState]
    counter: RegressionCounter
    runtime_s: float

    def to_json_dict(self) -> dict:
        return {
            "order": list(self.order),
            "root_trace": self.root_trace.to_json_dict(),
            "sort_states": [s.to_json_dict() for s in self.sort_states],
            "regression_counts": {
                f"{stage}:{k}": c for (stage, k), c in self.counter.counts.items()
            },
            "max_covariates": dict(self.counter.max_covariates),
            "runtime_s": self.runtime_s,
        }


# ---------------------------------------------------------------------------
# root finder
# ---------------------------------------------------------------------------


def find_vp_inducers(pairwise: Sequence[Sequence[IndependenceResult | None]]) -> set[int]:
    """Vertices dependent on two mutually independent vertices.

    ``pairwise`` is a symmetric d x d matrix of independence decisions.
    A triple scan suffices; such vertices are exactly the multi-root
    descendants under faithfulness.
    """
    d = len(pairwise)

    def dep(a: int, b: int) -> bool:
        res = pairwise[a][b]
        return res is not None and not res.independent

    def indep(a: int, b: int) -> bool:
        res = pairwise[a][b]
        return res is not None and res.independent

    inducers = set()
    for i in range(d):
        partners = [j for j in range(d) if j != i and dep(i, j)]
        if any(
            indep(j, k)
            for a, j in enumerate(partners)
            for k in partners[a + 1 :]
        ):
            inducers.add(i)
    return inducers


def isolated_roots(
    v_prime: set[int], pairwise: Sequence[Sequence[IndependenceResult | None]]
) -> set[int]:
    """Members of ``v_prime`` independent of every other member."""
    out = set()
    for i in v_prime:
        if all(
            pairwise[i][j].independent
            for j in v_prime
            if j != i and pairwise[i][j] is not None
        ):
            out.add(i)
    return out


def regression_identification(i: int, j: int, backend: Backend) -> bool:
    """True iff x_i is identified as an ancestor of x_j.

    Requires the residual of x_j on x_i to be independent of x_i while the
    reverse regression leaves a dependent residual.
    """
    if i == j:
        raise ValueError("regression identification needs distinct vertices")
    return backend.identified_ancestor(i, j)


def root_confirmation(
    w: set[int],
    identified: dict[int, set[int]],
    pairwise: Sequence[Sequence[IndependenceResult | None]],
    backend: Backend,
) -> set[int]:
    """Separate true roots from the candidate superset ``w``.

    A candidate x_i is confirmed when, for every dependent co-member x_j and
    every vertex x_k that x_j was identified as an ancestor of, the residual
    of x_k regressed on the pair (x_i, x_j) stays independent: a root adds
    no information to the pair regression, a single-root descendant leaks
    its own noise into it.
    """
    confirmed = set()
    for i in sorted(w):
        ok = True
        for j in sorted(w - {i}):
            res = pairwise[i][j]
            if res is None or res.independent:
                continue
            for k in sorted(identified.get(j, ())):
                if k == i:
                    continue
                if not backend.confirmation_indep(i, j, k):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            confirmed.add(i)
    return confirmed


def _cross_check_roots(
    w: set[int],
    identified: dict[int, set[int]],
    pairwise: Sequence[Sequence[IndependenceResult | None]],
    backend: Backend,
) -> set[int]:
    """Conditional-independence variant of the confirmation step.

    A candidate x_i passes when each dependent co-member x_j stays dependent
    on at least one identified descendant of x_i after conditioning on x_i
    (a root fails to separate some descendant from x_j; a non-root separates
    all of its identified descendants).
    """
    out = set()
    for i in sorted(w):
        ok = True
        for j in sorted(w - {i}):
            res = pairwise[i][j]
            if res is None or res.independent:
                continue
            witnesses = [k for k in sorted(identified.get(i, ())) if k != j]
            if not any(not backend.cond_indep(k, j, i) for k in witnesses):
                ok = False
                break
        if ok:
            out.add(i)
    return out


def _cycle_edges(edges: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """Edges lying on a directed cycle of the relation.

    True identified-ancestor pairs are a subset of ancestry, which is a
    partial order, so an edge on a cycle is self-contradictory evidence: at
    least one edge of the cycle is spurious and there is no way to tell
    which.  An edge is on a cycle exactly when both endpoints share a
    strongly connected component (Tarjan's algorithm, iterative).
    """
    vertices = sorted({a for a, _ in edges} | {b for _, b in edges})
    children: dict[int, list[int]] = {v: [] for v in vertices}
    for a, b in edges:
        children[a].append(b)
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    component: dict[int, int] = {}
    counter = [0]
    comp_counter = [0]

    def strongconnect(root: int) -> None:
        work = [(root, iter(sorted(children[root])))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for c in it:
                if c not in index:
                    index[c] = low[c] = counter[0]
                    counter[0] += 1
                    stack.append(c)
                    on_stack.add(c)
                    work.append((c, iter(sorted(children[c]))))
                    advanced = True
                    break
                if c in on_stack:
                    low[v] = min(low[v], index[c])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    component[w] = comp_counter[0]
                    if w == v:
                        break
                comp_counter[0] += 1

    for v in vertices:
        if v not in index:
            strongconnect(v)
    return {
        (a, b) for a, b in edges if component[a] == component[b]
    }


def _demote_inconsistent_roots(
    roots: set[int],
    identified: dict[int, set[int]],
    identified_into: dict[int, set[int]],
    pairwise: Sequence[Sequence[IndependenceResult | None]],
    backend: Backend,
) -> set[int]:
    """Precision guards over the recovered root set.

    True roots have no identified ancestors and are mutually independent,
    so both guards are no-ops under exact decisions; under estimator noise
    they demote the most suspicious vertices.  A demoted true root is cheap
    to lose: with no unsorted ancestors its sort-stage residual is the
    column itself, which the selection statistic sends to the front anyway.

    The identified-ancestor demotion requires the claimed ancestor to be
    identified into at least two vertices, so a single spurious pair cannot
    demote a genuine root.  For candidates screened in stage 2 the repaired
    identified relation is consulted; isolated roots are scanned afresh.
    """
    d = backend.d
    kept = set(roots)
    claims: dict[int, list[int]] = {}
    for r in sorted(roots):
        if r in identified_into:
            claims[r] = sorted(identified_into[r])
        else:
            claims[r] = [
                v for v in range(d) if v != r and backend.identified_ancestor(v, r)
            ]
    out_degree: dict[int, int] = {
        v: len(targets) for v, targets in identified.items()
    }
    for r, claimants in claims.items():
        for v in claimants:
            if r not in identified.get(v, ()):
                out_degree[v] = out_degree.get(v, 0) + 1
    for r, claimants in claims.items():
        if any(out_degree.get(v, 0) >= 2 for v in claimants):
            kept.discard(r)

    def dep(a: int, b: int) -> bool:
        res = pairwise[a][b]
        return res is not None and not res.independent

    while True:
        entangled = {r: sum(dep(r, s) for s in kept if s != r) for r in kept}
        worst = [r for r, c in entangled.items() if c > 0]
        if not worst:
            return kept
        kept.discard(
            max(
                worst,
                key=lambda r: (
                    entangled[r],
                    -len(identified.get(r, ())),
                    backend.canon(r),
                ),
            )
        )


def root_finder(backend: Backend, cross_check: bool = False) -> tuple[set[int], RootFinderTrace]:
    """Recover the root vertices; see the module docstring for the stages.

    With the graph-truth backend the result equals the true root set.  In
    empirical mode the result is screened by consistency guards (roots must
    be mutually independent and have no identified ancestors), and an empty
    outcome is repaired by falling back to the candidate with the most
    identified descendants, with a warning.
    """
    d = backend.d
    pairwise: list[list[IndependenceResult | None]] = [
        [None] * d for _ in range(d)
    ]
    for i in range(d):
        for j in range(i + 1, d):
            res = backend.marginal_indep(i, j)
            pairwise[i][j] = res
            pairwise[j][i] = res

    trace = RootFinderTrace(pairwise_decisions=pairwise)

    # Stage 1: prune multi-root descendants, collect isolated roots.
    trace.vp_inducers = find_vp_inducers(pairwise)
    trace.v_prime = set(range(d)) - trace.vp_inducers
    trace.isolated_roots = isolated_roots(trace.v_prime, pairwise)
    trace.v_double_prime = trace.v_prime - trace.isolated_roots
    roots = set(trace.isolated_roots)

    # Stage 2: pairwise regression identification.  Candidates live in the
    # survivor set, but their identified descendants and ancestors range
    # over all vertices: a root's only witness may itself have been pruned
    # in stage 1.  Edges of the relation that lie on a directed cycle are
    # self-contradictory (ancestry is a partial order), so they do not
    # expel candidates; the confirmation step and the root-set consistency
    # guards adjudicate the vertices involved.
    vdd = sorted(trace.v_double_prime)
    raw_edges: set[tuple[int, int]] = set()
    for i in vdd:
        for j in range(d):
            if i == j:
                continue
            if regression_identification(i, j, backend):
                raw_edges.add((i, j))
            if regression_identification(j, i, backend):
                raw_edges.add((j, i))
    cyclic = _cycle_edges(raw_edges)
    identified: dict[int, set[int]] = {v: set() for v in vdd}
    identified_into: dict[int, set[int]] = {v: set() for v in vdd}
    for a, b in raw_edges:
        identified.setdefault(a, set()).add(b)
        if b in identified_into and (a, b) not in cyclic:
            identified_into[b].add(a)
    trace.identified = {v: identified.get(v, set()) for v in vdd}

    w = {v for v in vdd if identified.get(v) and not identified_into[v]}
    trace.candidate_superset = w

    confirmed = root_confirmation(w, identified, pairwise, backend)
    trace.confirmed_roots = confirmed
    if cross_check:
        alt = _cross_check_roots(w, identified, pairwise, backend)
        trace.cross_check_roots = alt
        trace.cross_check_disagreement = alt ^ confirmed
        if trace.cross_check_disagreement:
            warnings.warn(
                "root-confirmation criteria disagree on vertices "
                f"{sorted(trace.cross_check_disagreement)}",
                stacklevel=2,
            )
    roots |= confirmed
    roots = _demote_inconsistent_roots(
        roots, identified, identified_into, pairwise, backend
    )

    if not roots and d > 0:
        # estimator failure: no vertex survived the screens
        if w:
            best = max(
                sorted(w),
                key=lambda v: (len(identified.get(v, ())), -backend.canon(v)),
            )
        else:
            # no candidates at all: rank every vertex by how many others it
            # is identified as an ancestor of
            out_degree = {
                i: sum(
                    1
                    for j in range(d)
                    if j != i and backend.identified_ancestor(i, j)
                )
                for i in range(d)
            }
            best = max(
                range(d), key=lambda v: (out_degree[v], -backend.canon(v))
            )
        roots = {best}
        trace.fallback_used = True
        warnings.warn(
            f"no roots confirmed; falling back to vertex {best}", stacklevel=2
        )
    return roots, trace


# ---------------------------------------------------------------------------
# sort finder
# ---------------------------------------------------------------------------


def ld_prune(
    unsorted: Sequence[int],
    residuals: Mapping[int, np.ndarray],
    backend: EmpiricalBackend,
    iteration: int,
    t_star_values: Mapping[int, float] | None = None,
    prefix_size: int = 1,
) -> set[int]:
    """Vertices whose residuals betray a linear dependence on another residual.

    x_i is pruned when some witness x_j exists with e_i linearly regressed
    on e_j leaving a residual independent of e_j, while the reverse linear
    regression leaves a residual still dependent on e_i.  This removes all
    linear descendants and never a valid leaf candidate.

    Finite-sample guards, both vanishing in the limit where the pruning
    conditions are exact:

    * the two tests' evidence must be ordered (accepting p-value above the
      rejecting one);
    * a legitimate witness is an exposed leaf candidate, whose own residual
      is independent of the sorted prefix and whose summed mutual
      information with it is therefore a null draw; when the candidates'
      statistics are supplied, a witness must sit within the statistic's
      null band of the iteration minimum.  The band follows the sampling
      noise of the clamped mutual-information sum, roughly 0.75/sqrt(n) per
      estimate.
    """
    pruned = set()
    members = sorted(unsorted)
    decisions: dict[tuple[int, int], IndependenceResult] = {}

    def p(a: int, b: int) -> IndependenceResult:
        # e_a vs the residual of e_b linearly regressed on e_a
        if (a, b) not in decisions:
            decisions[(a, b)] = backend.lin_residual_indep(a, b, residuals, iteration)
        return decisions[(a, b)]

    witness_cap = np.inf
    if t_star_values:
        sigma = 0.75 / np.sqrt(max(backend.n, 1))
        witness_cap = min(t_star_values.values()) + 1.5 * sigma * (prefix_size + 1)
    for i in members:
        for j in members:
            if i == j:
                continue
            if t_star_values is not None and t_star_values[j] > witness_cap:
                continue
            accept, reject = p(j, i), p(i, j)
            if (
                accept.independent
                and not reject.independent
                and accept.p_value > reject.p_value
            ):
                pruned.add(i)
                break
    return pruned


def t_star(
    residual: np.ndarray,
    sorted_columns: np.ndarray,
    k: int = 3,
    rng_seed: int | np.random.SeedSequence = 0,
) -> float:
    """Summed nonnegative mutual information between a residual and each sorted column."""
    sorted_columns = np.atleast_2d(np.asarray(sorted_columns, float).T).T
    if sorted_columns.shape[1] < 1:
        raise ValueError("t* requires at least one sorted column")
    seq = (
        rng_seed
        if isinstance(rng_seed, np.random.SeedSequence)
        else np.random.SeedSequence(rng_seed)
    )
    total = 0.0
    for idx, child in enumerate(seq.spawn(sorted_columns.shape[1])):
        total += max(
            0.0, mutual_information(sorted_columns[:, idx], residual, k=k, rng_seed=child)
        )
    return total


def _backend_t_star(
    backend: Backend, u: int, ordered: list[int], residuals: Mapping[int, object],
    iteration: int,
) -> float:
    if isinstance(backend, GraphTruthBackend):
        return backend.t_star(u, ordered)
    total = 0.0
    # accumulate in canonical column order so the float sum is invariant
    # under relabelling of the data columns
    for p in sorted(ordered, key=backend.canon):
        total += max(0.0, backend.mi_with_sorted(u, p, residuals[u], iteration))
    return total


def sort_finder(
    backend: Backend, roots: set[int]
) -> tuple[list[int], list[SortState]]:
    """Grow a full ordering from the recovered roots.

    Each iteration regresses every unsorted vertex on the sorted prefix,
    prunes linear descendants, and appends the unsorted vertex whose
    residual carries the least summed mutual information with the prefix.
    Ties break on the canonical vertex index.  Raises
    :class:`SortFinderError` when pruning leaves no candidate.
    """
    if not roots:
        raise ValueError("sort finder requires a nonempty root set")
    ordered = sorted(roots, key=backend.canon)
    unsorted = set(range(backend.d)) - roots
    states: list[SortState] = []
    iteration = 0
    while unsorted:
        iteration += 1
        members = sorted(unsorted)
        residuals = backend.sort_residuals(members, ordered)
        tvals = {
            u: _backend_t_star(backend, u, ordered, residuals, iteration)
            for u in members
        }
        if isinstance(backend, GraphTruthBackend):
            pruned = backend.ld_prune_set(members, ordered)
        else:
            pruned = ld_prune(
                members, residuals, backend, iteration, tvals, len(ordered)
            )
        survivors = [u for u in members if u not in pruned]
        state = SortState(
            iteration=iteration,
            ordered=list(ordered),
            unsorted=set(unsorted),
            residuals=residuals,
            ld_pruned=pruned,
            t_star_values=tvals,
        )
        if not survivors:
            raise SortFinderError(
                f"all candidates pruned at iteration {iteration}", state
            )
        best = min(survivors, key=lambda u: (tvals[u], backend.canon(u)))
        state.selected = best
        states.append(state)
        ordered.append(best)
        unsorted.remove(best)
    return ordered, states


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def losam(
    data: np.ndarray | "Dataset",  # noqa: F821 - synth.Dataset accepted structurally
    config: LosamConfig | None = None,
    backend: Backend | None = None,
) -> LosamResult:
    """Run root finding then sort finding and return the order with traces.

    ``data`` is a standardized (n, d) matrix or Dataset.  Passing a
    :class:`GraphTruthBackend` ignores the data values entirely and executes
    the pipeline against the ground-truth graph.
    """
    config = config or LosamConfig()
    if backend is None:
        values = getattr(data, "values", data)
        labels = getattr(data, "column_labels", None)
        backend = EmpiricalBackend(np.asarray(values, float), labels, config)
    start = time.perf_counter()
    roots, trace = root_finder(backend, cross_check=config.cross_check)
    order, states = sort_finder(backend, roots)
    return LosamResult(order, trace, states, backend.counter, time.perf_counter() - start)
