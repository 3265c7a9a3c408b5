"""Statistical primitives: regression, independence testing, mutual information.

The ordering algorithm treats these as black boxes, so every estimator here
is deterministic given its seed and exposes a small, uniform surface:

* :func:`nonparam_regress` -- kernel ridge regression with an RBF kernel and
  median-heuristic bandwidth (pluggable; a random-forest backend is provided
  for sensitivity studies).
* :func:`linear_regress`   -- univariate least squares with intercept.
* :func:`independence_test` -- HSIC with a seeded permutation null.
* :func:`cond_independence_test` -- residualization: regress both arguments
  on the conditioning set nonparametrically, then test the residuals.
* :func:`mutual_information` -- the Kraskov k-nearest-neighbour estimator
  (first variant) with seeded tie-breaking jitter.

HSIC internals: the test statistic is the biased V-statistic
``sum(Kc * Lc) / n^2`` for centered RBF Gram matrices Kc, Lc.  Gram matrices
are stored in low-rank pivoted-Cholesky form ``G ~= F F^T`` (tolerance 1e-10,
so the factorization is exact to floating-point noise); the permuted
statistic ``||F_x[perm]^T F_y||_F^2 / n^2`` then costs O(n r^2) per
permutation instead of O(n^2), which is what makes a 200-permutation null
affordable inside the discovery loops.

For sample sizes above ``subsample_cap`` (default 2000) independence and
mutual-information computations run on a seeded row subsample to bound the
quadratic kernel cost; the cap is configurable at every call site.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial import cKDTree
from scipy.special import digamma

__all__ = [
    "EstimatorError",
    "IndependenceResult",
    "RegressionFit",
    "RegressionCounter",
    "cond_independence_test",
    "independence_test",
    "linear_regress",
    "mutual_information",
    "nonparam_regress",
]

DEFAULT_LEVEL = 0.01
DEFAULT_PERMUTATIONS = 200
DEFAULT_SUBSAMPLE_CAP = 2000
MIN_RECOMMENDED_N = 50


class EstimatorError(ValueError):
    """Degenerate input or irrecoverable numerical failure in an estimator."""


@dataclass
class RegressionFit:
    """Fitted values and residuals of one regression."""

    covariate_indices: list[int]
    fitted_values: np.ndarray
    residuals: np.ndarray
    estimator_tag: str


@dataclass
class IndependenceResult:
    """Outcome of an independence test at a fixed level.

    ``independent`` is True exactly when ``p_value > level``.
    """

    statistic: float
    p_value: float
    level: float
    independent: bool
    small_sample_warning: bool = False

    @classmethod
    def from_p_value(
        cls, statistic: float, p_value: float, level: float, warning: bool = False
    ) -> "IndependenceResult":
        return cls(
            statistic=float(statistic),
            p_value=float(p_value),
            level=float(level),
            independent=bool(p_value > level),
            small_sample_warning=warning,
        )


@dataclass
class RegressionCounter:
    """Instrumentation shared by the discovery pipeline.

    Tracks, per stage label, how many nonparametric regressions ran at each
    covariate-set size.  The root-finding stage additionally enforces its
    theoretical bound of at most two covariates.
    """

    counts: dict[tuple[str, int], int] = field(default_factory=dict)
    max_covariates: dict[str, int] = field(default_factory=dict)
    bounds: dict[str, int] = field(default_factory=dict)

    def record(self, stage: str, k: int) -> None:
        self.counts[(stage, k)] = self.counts.get((stage, k), 0) + 1
        self.max_covariates[stage] = max(self.max_covariates.get(stage, 0), k)
        bound = self.bounds.get(stage)
        if bound is not None and k > bound:
            raise AssertionError(
                f"stage {stage!r} ran a regression with {k} covariates "
                f"(bound {bound})"
            )

    def stage_counts(self, stage: str) -> dict[int, int]:
        return {k: c for (s, k), c in self.counts.items() if s == stage}


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------


def _median_heuristic(x: np.ndarray, cap: int = 500) -> float:
    """Median pairwise Euclidean distance, on a strided subset above ``cap``."""
    x = np.atleast_2d(x.T).T if x.ndim == 1 else x
    n = x.shape[0]
    if n > cap:
        step = int(np.ceil(n / cap))
        x = x[::step]
        n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    dists = np.sqrt((diff**2).sum(axis=-1))
    iu = np.triu_indices(n, 1)
    med = float(np.median(dists[iu])) if iu[0].size else 0.0
    return med if med > 0 else 1.0


def _rbf_gram(x: np.ndarray, z: np.ndarray, bandwidth: float) -> np.ndarray:
    sq = ((x[:, None, :] - z[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-sq / (2.0 * bandwidth * bandwidth))


class KernelRidgeRegressor:
    """RBF kernel ridge regression with median-heuristic bandwidth selection.

    The bandwidth is the median pairwise distance scaled by whichever factor
    in ``bandwidth_scales`` wins a deterministic two-fold cross-validation
    (first half vs second half), and the ridge is chosen the same way from
    ``alphas``.  Pass explicit ``bandwidth``/``alpha`` to pin either.  The
    adaptivity matters because the regression targets range from noiseless
    linear maps (wanting a wide kernel and a vanishing ridge) to sharp
    tanh-network mechanisms under noise (wanting a narrow kernel and real
    regularization); 0.1 stays the conservative top of the ridge grid.

    The target is centered before the dual solve and fitted values are
    re-centered to the target mean, so residuals have exactly zero sample
    mean.  On a failed Cholesky factorization the ridge is increased once
    by a factor of ten before giving up.
    """

    tag = "KernelRidge"

    def __init__(
        self,
        alpha: float | None = None,
        bandwidth: float | None = None,
        bandwidth_scales: tuple[float, ...] = (2.0, 1.0, 0.5, 0.25, 0.125),
        alphas: tuple[float, ...] = (0.1, 0.01, 0.001),
    ):
        self.alpha = alpha
        self.bandwidth = bandwidth
        self.bandwidth_scales = tuple(bandwidth_scales)
        self.alphas = (float(alpha),) if alpha is not None else tuple(alphas)

    def _solve(self, K: np.ndarray, yc: np.ndarray, alpha: float) -> np.ndarray:
        for attempt in range(2):
            try:
                factor = cho_factor(K + alpha * np.eye(K.shape[0]), lower=True)
                return cho_solve(factor, yc)
            except LinAlgError:
                if attempt == 1:
                    raise EstimatorError(
                        "kernel system is singular even after increasing the ridge"
                    )
                alpha = alpha * 10.0 if alpha > 0 else 1e-8
        raise AssertionError("unreachable")

    def _pick_parameters(self, y: np.ndarray, X: np.ndarray) -> tuple[float, float]:
        base = self.bandwidth if self.bandwidth is not None else _median_heuristic(X)
        scales = (1.0,) if self.bandwidth is not None else self.bandwidth_scales
        if len(scales) == 1 and len(self.alphas) == 1:
            return base * scales[0], self.alphas[0]
        n = X.shape[0]
        half = n // 2
        folds = ((slice(0, half), slice(half, n)), (slice(half, n), slice(0, half)))
        best = (base * scales[0], self.alphas[0])
        best_err = np.inf
        for scale in scales:
            bw = base * scale
            grams = [
                (
                    _rbf_gram(X[train], X[train], bw),
                    _rbf_gram(X[test], X[train], bw),
                    train,
                    test,
                )
                for train, test in folds
            ]
            for alpha in self.alphas:
                err = 0.0
                for Kt, Kx, train, test in grams:
                    coef = self._solve(Kt, y[train] - y[train].mean(), alpha)
                    pred = Kx @ coef + y[train].mean()
                    err += float(((y[test] - pred) ** 2).sum())
                if err < best_err:
                    best, best_err = (bw, alpha), err
        return best

    def fit_residuals(self, y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        bw, alpha = self._pick_parameters(y, X)
        K = _rbf_gram(X, X, bw)
        y_mean = float(y.mean())
        coef = self._solve(K, y - y_mean, alpha)
        fitted = K @ coef
        fitted = fitted - fitted.mean() + y_mean
        return fitted, y - fitted


class RandomForestBackend:
    """Random-forest regression backend mirroring the kernel-ridge surface.

    Mirrors common forest settings for this task family (100 trees, depth 10,
    min split 10, min leaf 5, sqrt features).  Residuals are re-centered the
    same way as in the default backend.
    """

    tag = "RandomForest"

    def __init__(self, rng_seed: int = 0):
        self.rng_seed = int(rng_seed)

    def fit_residuals(self, y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        from sklearn.ensemble import RandomForestRegressor

        model = RandomForestRegressor(
            n_estimators=100,
            max_depth=10,
            min_samples_split=10,
            min_samples_leaf=5,
            max_features="sqrt",
            random_state=self.rng_seed,
        )
        model.fit(X, y)
        fitted = model.predict(X)
        fitted = fitted - fitted.mean() + y.mean()
        return fitted, y - fitted


Regressor = KernelRidgeRegressor | RandomForestBackend


def nonparam_regress(
    y: np.ndarray,
    X: np.ndarray,
    regressor: Regressor | None = None,
    counter: RegressionCounter | None = None,
    stage: str = "adhoc",
) -> RegressionFit:
    """Nonparametric regression of ``y`` on the columns of ``X``.

    ``X`` may be a vector (one covariate) or an (n, k) matrix.  Residuals
    satisfy ``residuals = y - fitted_values`` elementwise and have zero
    sample mean.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if k < 1:
        raise EstimatorError("regression requires at least one covariate")
    if n <= k:
        raise EstimatorError(f"need n > k, got n={n}, k={k}")
    if y.shape[0] != n:
        raise EstimatorError("y and X disagree on the sample count")
    if counter is not None:
        counter.record(stage, k)
    regressor = regressor or KernelRidgeRegressor()
    fitted, resid = regressor.fit_residuals(y, X)
    return RegressionFit(
        covariate_indices=list(range(k)),
        fitted_values=fitted,
        residuals=resid,
        estimator_tag=regressor.tag,
    )


def linear_regress(y: np.ndarray, x: np.ndarray) -> RegressionFit:
    """Univariate least squares with intercept; residuals orthogonal to x."""
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if x.var() == 0:
        raise EstimatorError("linear regression requires a non-constant regressor")
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean())) / float(xc @ xc)
    intercept = float(y.mean() - slope * x.mean())
    fitted = intercept + slope * x
    return RegressionFit(
        covariate_indices=[0],
        fitted_values=fitted,
        residuals=y - fitted,
        estimator_tag="OLS",
    )


# ---------------------------------------------------------------------------
# HSIC independence test
# ---------------------------------------------------------------------------


def _pivoted_cholesky_rbf(
    x: np.ndarray, tol: float = 1e-10, max_rank: int = 256
) -> np.ndarray:
    """Low-rank factor F with F F^T equal to the RBF Gram matrix of ``x``.

    Greedy pivoting on the largest remaining diagonal entry; the RBF diagonal
    is identically one, so ``tol`` is an absolute trace-error bound per entry.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.shape[0]
    bw = _median_heuristic(x[:, None])
    gamma = 1.0 / (2.0 * bw * bw)
    diag = np.ones(n)
    rmax = min(max_rank, n)
    F = np.zeros((n, rmax))
    for r in range(rmax):
        i = int(np.argmax(diag))
        if diag[i] <= tol:
            return F[:, :r]
        col = np.exp(-gamma * (x - x[i]) ** 2)
        if r > 0:
            col = col - F[:, :r] @ F[i, :r]
        F[:, r] = col / np.sqrt(diag[i])
        diag = np.maximum(diag - F[:, r] ** 2, 0.0)
    return F


class GramFactor:
    """Centered low-rank factor of one variable's RBF Gram matrix."""

    __slots__ = ("factor", "n")

    def __init__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float).ravel()
        if x.std() == 0:
            raise EstimatorError("independence test requires non-constant input")
        F = _pivoted_cholesky_rbf(x)
        self.factor = F - F.mean(axis=0)
        self.n = x.shape[0]


def _hsic_statistic(a: GramFactor, b: GramFactor) -> float:
    m = a.factor.T @ b.factor
    return float((m * m).sum()) / a.n**2


def _subsample_rows(
    n: int, cap: int | None, rng: np.random.Generator
) -> np.ndarray | None:
    if cap is None or n <= cap:
        return None
    return np.sort(rng.choice(n, size=cap, replace=False))


def independence_test(
    a: np.ndarray,
    b: np.ndarray,
    level: float = DEFAULT_LEVEL,
    rng_seed: int | np.random.SeedSequence = 0,
    permutations: int = DEFAULT_PERMUTATIONS,
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP,
    _factors: tuple[GramFactor | None, GramFactor | None] = (None, None),
) -> IndependenceResult:
    """HSIC permutation test of marginal independence.

    The p-value is ``(1 + #{permuted >= observed}) / (permutations + 1)``
    with the permutations drawn from ``rng_seed``; the statistic itself is
    symmetric in the two arguments.  Samples beyond ``subsample_cap`` rows
    are reduced by a seeded subsample before the kernels are formed.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise EstimatorError("independence test requires equal-length inputs")
    if a.std() == 0 or b.std() == 0:
        raise EstimatorError("independence test requires non-constant inputs")
    rng = np.random.default_rng(rng_seed)
    warn_small = a.shape[0] < MIN_RECOMMENDED_N
    if warn_small:
        warnings.warn(
            f"independence test on n={a.shape[0]} < {MIN_RECOMMENDED_N} samples",
            stacklevel=2,
        )
    rows = _subsample_rows(a.shape[0], subsample_cap, rng)
    fa, fb = _factors
    if rows is not None:
        a, b = a[rows], b[rows]
        fa = fb = None
    fa = fa if fa is not None else GramFactor(a)
    fb = fb if fb is not None else GramFactor(b)
    observed = _hsic_statistic(fa, fb)
    n = fa.n
    exceed = 0
    for _ in range(permutations):
        perm = rng.permutation(n)
        m = fa.factor[perm].T @ fb.factor
        if float((m * m).sum()) / n**2 >= observed:
            exceed += 1
    p_value = (1 + exceed) / (permutations + 1)
    return IndependenceResult.from_p_value(observed, p_value, level, warn_small)


def cond_independence_test(
    a: np.ndarray,
    b: np.ndarray,
    given: np.ndarray,
    level: float = DEFAULT_LEVEL,
    rng_seed: int | np.random.SeedSequence = 0,
    regressor: Regressor | None = None,
    permutations: int = DEFAULT_PERMUTATIONS,
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP,
) -> IndependenceResult:
    """Residualization-based conditional independence test.

    Both arguments are nonparametrically regressed on the conditioning
    columns and the two residual vectors are handed to the marginal test.
    An empty conditioning set degrades to the marginal test.
    """
    given = np.asarray(given, dtype=float)
    if given.size == 0:
        return independence_test(
            a, b, level, rng_seed, permutations=permutations, subsample_cap=subsample_cap
        )
    if given.ndim == 1:
        given = given[:, None]
    ra = nonparam_regress(np.asarray(a, float).ravel(), given, regressor).residuals
    rb = nonparam_regress(np.asarray(b, float).ravel(), given, regressor).residuals
    return independence_test(
        ra, rb, level, rng_seed, permutations=permutations, subsample_cap=subsample_cap
    )


# ---------------------------------------------------------------------------
# mutual information
# ---------------------------------------------------------------------------


def mutual_information(
    a: np.ndarray,
    b: np.ndarray,
    k: int = 3,
    rng_seed: int | np.random.SeedSequence = 0,
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP,
) -> float:
    """Kraskov k-nearest-neighbour estimate of I(a; b) in nats.

    First-variant estimator: for each point take the distance eps_i to its
    k-th neighbour under the max-norm on the joint space, count the marginal
    neighbours strictly inside eps_i, and return
    ``psi(k) + psi(n) - mean[psi(n_a + 1) + psi(n_b + 1)]``.
    A seeded jitter at 1e-10 of each scale breaks distance ties.  The raw
    (possibly slightly negative) value is returned; callers that need a
    nonnegative dependence score clamp at zero.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise EstimatorError("mutual information requires equal-length inputs")
    n = a.shape[0]
    if n <= k + 1:
        raise EstimatorError(f"need n > k+1 = {k + 1}, got n={n}")
    rng = np.random.default_rng(rng_seed)
    rows = _subsample_rows(n, subsample_cap, rng)
    if rows is not None:
        a, b = a[rows], b[rows]
        n = a.shape[0]
    a = a + 1e-10 * max(a.std(), 1.0) * rng.standard_normal(n)
    b = b + 1e-10 * max(b.std(), 1.0) * rng.standard_normal(n)
    joint = np.column_stack([a, b])
    dists, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    eps = dists[:, k]
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    # counts of points with |a_j - a_i| < eps_i (the point itself included,
    # so the raw count equals n_a + 1 from the estimator's formula)
    na = np.searchsorted(a_sorted, a + eps, side="left") - np.searchsorted(
        a_sorted, a - eps, side="right"
    )
    nb = np.searchsorted(b_sorted, b + eps, side="left") - np.searchsorted(
        b_sorted, b - eps, side="right"
    )
    return float(digamma(k) + digamma(n) - np.mean(digamma(na) + digamma(nb)))
