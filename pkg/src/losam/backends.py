"""Decision backends for the ordering algorithm.

The root-finder and sort-finder are pure combinatorial procedures over a
small set of statistical questions (is this pair independent, does this
regression leave an independent residual, ...).  Those questions are
answered by one of two interchangeable backends:

* :class:`EmpiricalBackend` answers them from data, using the kernel
  estimators in :mod:`losam.stats`.
* :class:`GraphTruthBackend` answers them from a known ground-truth DAG,
  with independence given by d-separation and regression outcomes given by
  their population-level behaviour in a generic additive model.  It never
  touches observation values, which isolates the combinatorial logic of the
  algorithm from estimator noise in tests.

Every stochastic decision in the empirical backend is seeded from the
canonical identity of the question being asked (stage code plus canonical
vertex indices), not from call order.  Relabelling the data columns by a
permutation therefore permutes the answers exactly, which is what makes the
pipeline permutation-equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .graphs import Dag
from .stats import (
    DEFAULT_LEVEL,
    DEFAULT_PERMUTATIONS,
    DEFAULT_SUBSAMPLE_CAP,
    GramFactor,
    IndependenceResult,
    KernelRidgeRegressor,
    RegressionCounter,
    Regressor,
    cond_independence_test,
    independence_test,
    linear_regress,
    mutual_information,
    nonparam_regress,
)

__all__ = ["EmpiricalBackend", "GraphTruthBackend", "LosamConfig"]

# seed-derivation site codes
_SITE_PAIRWISE = 1
_SITE_RESIDUAL = 2
_SITE_CONFIRM = 3
_SITE_CONDTEST = 4
_SITE_LDPAIR = 5
_SITE_TSTAR = 6
_SITE_SUBSAMPLE = 7

ROOT_STAGE = "root"
SORT_STAGE = "sort"
ROOT_COVARIATE_BOUND = 2


@dataclass
class LosamConfig:
    """Tuning knobs for the full discovery pipeline.

    ``confirmation_side`` selects which variable the root-confirmation
    residual is tested against: the candidate root itself (the operative
    check), the dependent partner, or both.  ``canonical_labels`` supplies a
    reference column naming; tie-breaks and seeds then follow the reference
    positions so that permuting data columns permutes the output.
    """

    level: float = DEFAULT_LEVEL
    seed: int = 0
    permutations: int = DEFAULT_PERMUTATIONS
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP
    mi_neighbors: int = 3
    regressor: Regressor | None = None
    confirmation_side: Literal["candidate", "partner", "both"] = "both"
    cross_check: bool = False
    canonical_labels: list[str] | None = None


class EmpiricalBackend:
    """Answers the algorithm's statistical questions from an (n, d) matrix.

    Columns are expected to be standardized.  Gram factors of the raw
    columns are cached (they recur across the quadratic pairwise stages);
    residual vectors are always fresh.  When the sample exceeds
    ``config.subsample_cap`` a single seeded row subsample is drawn up front
    and the whole pipeline runs on it, bounding the quadratic kernel cost.
    """

    def __init__(
        self,
        values: np.ndarray,
        labels: list[str] | None = None,
        config: LosamConfig | None = None,
    ):
        self.config = config or LosamConfig()
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("backend expects an (n, d) matrix")
        self.labels = labels or [f"x{i}" for i in range(values.shape[1])]
        cap = self.config.subsample_cap
        if cap is not None and values.shape[0] > cap:
            rng = np.random.default_rng(self._seed(_SITE_SUBSAMPLE))
            rows = np.sort(rng.choice(values.shape[0], size=cap, replace=False))
            values = values[rows]
        self.X = values
        self.n, self.d = values.shape
        self.counter = RegressionCounter(bounds={ROOT_STAGE: ROOT_COVARIATE_BOUND})
        self._canon = self._canonical_ranks()
        self._col_factors: dict[int, GramFactor] = {}
        self._resid_indep_cache: dict[tuple[int, int], IndependenceResult] = {}
        self._regressor = self.config.regressor or KernelRidgeRegressor()

    # -- identity & seeding ---------------------------------------------------

    def _canonical_ranks(self) -> list[int]:
        ref = self.config.canonical_labels
        if ref is None:
            return list(range(self.d))
        if sorted(ref) != sorted(self.labels):
            raise ValueError("canonical_labels must be a permutation of the labels")
        return [ref.index(lab) for lab in self.labels]

    def canon(self, i: int) -> int:
        return self._canon[i]

    def _seed(self, site: int, *ids: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.config.seed, spawn_key=(site, *ids))

    # -- primitives -----------------------------------------------------------

    def _factor(self, i: int) -> GramFactor:
        if i not in self._col_factors:
            self._col_factors[i] = GramFactor(self.X[:, i])
        return self._col_factors[i]

    def _test(
        self, a: np.ndarray, b: np.ndarray, seed: np.random.SeedSequence,
        factors=(None, None),
    ) -> IndependenceResult:
        return independence_test(
            a,
            b,
            level=self.config.level,
            rng_seed=seed,
            permutations=self.config.permutations,
            subsample_cap=None,  # rows already capped once, uniformly
            _factors=factors,
        )

    def marginal_indep(self, i: int, j: int) -> IndependenceResult:
        a, b = sorted((self.canon(i), self.canon(j)))
        return self._test(
            self.X[:, i],
            self.X[:, j],
            self._seed(_SITE_PAIRWISE, a, b),
            factors=(self._factor(i), self._factor(j)),
        )

    def residual_test(self, i: int, j: int) -> IndependenceResult:
        """Test of the residual of x_j regressed on x_i against x_i."""
        key = (i, j)
        if key not in self._resid_indep_cache:
            fit = nonparam_regress(
                self.X[:, j],
                self.X[:, i],
                self._regressor,
                counter=self.counter,
                stage=ROOT_STAGE,
            )
            self._resid_indep_cache[key] = self._test(
                self.X[:, i],
                fit.residuals,
                self._seed(_SITE_RESIDUAL, self.canon(i), self.canon(j)),
                factors=(self._factor(i), None),
            )
        return self._resid_indep_cache[key]

    def residual_indep_univ(self, i: int, j: int) -> bool:
        """True iff the residual of x_j regressed on x_i is independent of x_i."""
        return self.residual_test(i, j).independent

    def identified_ancestor(self, i: int, j: int) -> bool:
        """Regression-identification: x_i flagged as an ancestor of x_j."""
        return self.residual_indep_univ(i, j) and not self.residual_indep_univ(j, i)

    def confirmation_indep(self, i: int, j: int, k: int) -> bool:
        """Root-confirmation check on the bivariate regression of x_k on (x_i, x_j).

        Tests the residual against the candidate x_i, the partner x_j, or
        both, per ``config.confirmation_side``.
        """
        fit = nonparam_regress(
            self.X[:, k],
            self.X[:, [i, j]],
            self._regressor,
            counter=self.counter,
            stage=ROOT_STAGE,
        )
        sides = {"candidate": (i,), "partner": (j,), "both": (i, j)}[
            self.config.confirmation_side
        ]
        for v in sides:
            res = self._test(
                self.X[:, v],
                fit.residuals,
                self._seed(
                    _SITE_CONFIRM, self.canon(i), self.canon(j), self.canon(k),
                    self.canon(v),
                ),
                factors=(self._factor(v), None),
            )
            if not res.independent:
                return False
        return True

    def cond_indep(self, a: int, b: int, given: int) -> bool:
        res = cond_independence_test(
            self.X[:, a],
            self.X[:, b],
            self.X[:, given],
            level=self.config.level,
            rng_seed=self._seed(
                _SITE_CONDTEST, self.canon(a), self.canon(b), self.canon(given)
            ),
            regressor=self._regressor,
            permutations=self.config.permutations,
            subsample_cap=None,
        )
        return res.independent

    # -- sort-finder stage ----------------------------------------------------

    def sort_residuals(
        self, unsorted: list[int], ordered: list[int]
    ) -> dict[int, np.ndarray]:
        """Residual of every unsorted column regressed on the sorted columns."""
        out = {}
        for u in unsorted:
            fit = nonparam_regress(
                self.X[:, u],
                self.X[:, ordered],
                self._regressor,
                counter=self.counter,
                stage=SORT_STAGE,
            )
            out[u] = fit.residuals
        return out

    def lin_residual_indep(
        self, a: int, b: int, residuals: dict[int, np.ndarray], iteration: int
    ) -> IndependenceResult:
        """Test of e_a against the residual of e_b linearly regressed on e_a."""
        e_a, e_b = residuals[a], residuals[b]
        degenerate = e_a.std() < 1e-12 or e_b.std() < 1e-12
        q = e_b if degenerate else linear_regress(e_b, e_a).residuals
        if degenerate or q.std() < 1e-12:
            # degenerate residuals carry no dependence evidence
            return IndependenceResult(0.0, 1.0, self.config.level, True)
        return self._test(
            e_a, q, self._seed(_SITE_LDPAIR, iteration, self.canon(a), self.canon(b))
        )

    def mi_with_sorted(
        self, u: int, p: int, residual: np.ndarray, iteration: int
    ) -> float:
        return mutual_information(
            self.X[:, p],
            residual,
            k=self.config.mi_neighbors,
            rng_seed=self._seed(_SITE_TSTAR, iteration, self.canon(u), self.canon(p)),
            subsample_cap=None,
        )


class GraphTruthBackend:
    """Oracle backend driven by a ground-truth DAG.

    Marginal and conditional independence are answered by d-separation.
    Regression outcomes follow their population behaviour in a generic ANM
    whose mechanisms are nonlinear unless ``mechanism_kinds`` marks a vertex
    as ``"linear"``:

    * The residual of x_j regressed on x_i is independent of x_i exactly
      when x_j decomposes as f(x_i) plus noise independent of x_i.  In graph
      terms: x_i is an ancestor of x_j, no ancestor of x_i reaches x_j
      around x_i, and the influence of x_i is transmitted additively --
      through the direct edge, or through mediators whose mechanisms are
      linear.
    * The residual of x_k regressed on a pair (x_i, x_j) with x_j an
      identified ancestor of x_k equals x_k's noise mix unless x_i is one of
      (or descends from) the vertices contributing noise to that mix, in
      which case conditioning leaks and the residual is dependent.

    Regression counts are recorded exactly as the empirical backend would
    record them, so instrumentation invariants can be checked in oracle runs.
    """

    def __init__(self, dag: Dag, mechanism_kinds: dict[int, str] | None = None):
        self.dag = dag
        self.d = dag.num_vertices
        self.kinds = mechanism_kinds or {}
        self.counter = RegressionCounter(bounds={ROOT_STAGE: ROOT_COVARIATE_BOUND})
        self._resid_indep_cache: dict[tuple[int, int], bool] = {}

    def canon(self, i: int) -> int:
        return i

    def _kind(self, v: int) -> str:
        return self.kinds.get(v, "nonlinear")

    # -- independence ----------------------------------------------------------

    def marginal_indep(self, i: int, j: int) -> IndependenceResult:
        sep = self.dag.d_separated(i, j)
        return IndependenceResult(
            statistic=0.0 if sep else 1.0,
            p_value=1.0 if sep else 0.0,
            level=DEFAULT_LEVEL,
            independent=sep,
        )

    def cond_indep(self, a: int, b: int, given: int) -> bool:
        return self.dag.d_separated(a, b, {given})

    # -- regression-identification ----------------------------------------------

    def _reaches_avoiding(self, src: int, dst: int, avoid: int) -> bool:
        stack = [src]
        seen = {avoid}
        while stack:
            v = stack.pop()
            if v == dst:
                return True
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self.dag.children(v) - seen)
        return False

    def _additive_transmission(self, i: int, w: int) -> bool:
        """x_w = f(x_i) + independent noise, assuming no bypass paths exist."""
        if w == i:
            return True
        parents = self.dag.parents(w)
        if self._kind(w) == "nonlinear":
            return parents == {i}
        dep_parents = parents & (self.dag.descendants(i) | {i})
        return all(self._additive_transmission(i, q) for q in dep_parents)

    def _additively_recoverable(self, i: int, j: int) -> bool:
        if i not in self.dag.ancestors(j):
            return False
        for a in self.dag.ancestors(i):
            if self._reaches_avoiding(a, j, avoid=i):
                return False
        return self._additive_transmission(i, j)

    def residual_indep_univ(self, i: int, j: int) -> bool:
        key = (i, j)
        if key not in self._resid_indep_cache:
            self.counter.record(ROOT_STAGE, 1)
            if self.dag.d_separated(i, j):
                result = True  # flat regression, residual is x_j itself
            else:
                result = self._additively_recoverable(i, j)
            self._resid_indep_cache[key] = result
        return self._resid_indep_cache[key]

    def residual_test(self, i: int, j: int) -> IndependenceResult:
        indep = self.residual_indep_univ(i, j)
        return IndependenceResult(
            statistic=0.0 if indep else 1.0,
            p_value=1.0 if indep else 0.0,
            level=DEFAULT_LEVEL,
            independent=indep,
        )

    def identified_ancestor(self, i: int, j: int) -> bool:
        return self.residual_indep_univ(i, j) and not self.residual_indep_univ(j, i)

    def confirmation_indep(self, i: int, j: int, k: int) -> bool:
        self.counter.record(ROOT_STAGE, 2)
        mediators = (self.dag.descendants(j) & self.dag.ancestors(k)) | {k}
        if i in mediators:
            return False
        return all(i not in self.dag.descendants(m) for m in mediators)

    # -- sort-finder stage -------------------------------------------------------

    def _nonlinear_in(self, m: int, u: int) -> bool:
        """True iff some vertex on a directed path m -> ... -> u is nonlinear."""
        on_path = (self.dag.descendants(m) & self.dag.ancestors(u)) | {u}
        return any(self._kind(w) == "nonlinear" for w in on_path)

    def sort_residuals(self, unsorted: list[int], ordered: list[int]) -> dict[int, int]:
        for _ in unsorted:
            self.counter.record(SORT_STAGE, len(ordered))
        return {u: u for u in unsorted}

    def ld_prune_set(self, unsorted: list[int], ordered: list[int]) -> set[int]:
        """Exactly the linear descendants of the current unsorted set."""
        u_set = set(unsorted)
        pruned = set()
        for u in unsorted:
            unsorted_anc = self.dag.ancestors(u) & u_set
            if unsorted_anc and not any(
                self._nonlinear_in(m, u) for m in unsorted_anc
            ):
                pruned.add(u)
        return pruned

    def t_star(self, u: int, ordered: list[int]) -> float:
        u_anc = self.dag.ancestors(u)
        nonlinear_mediators = {
            m for m in u_anc if m not in ordered and self._nonlinear_in(m, u)
        }
        dependent: set[int] = set()
        for m in nonlinear_mediators:
            dependent |= self.dag.ancestors(m) & set(ordered)
        return float(len(dependent))
