"""Synthetic additive-noise-model data generation and processing.

Mechanisms are linear with probability ``linear_prob`` (coefficients of
magnitude 0.5..1.5 with random sign) and otherwise single-hidden-layer
tanh networks with 10 units and all weights uniform on [-5, 5], no bias
terms.  Noise is Uniform, Laplace, or Gaussian with mean zero and variance
1/12.  Generated data is standardized and screened by R^2-sortability so
that variance- and goodness-of-fit-ordering heuristics cannot trivially
recover the sort.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import Dag, er_random_dag, topological_sort

__all__ = [
    "AnmSpec",
    "Dataset",
    "GenerationError",
    "LinearMech",
    "MlpMech",
    "NOISE_FAMILIES",
    "generate_filtered",
    "load_bundle",
    "r2_sortability",
    "sample_anm_spec",
    "sample_dataset",
    "standardize",
    "var_sortability",
    "write_bundle",
]

NOISE_FAMILIES = ("uniform", "laplace", "gaussian")
DEFAULT_NOISE_VARIANCE = 1.0 / 12.0
HIDDEN_UNITS = 10


class GenerationError(ValueError):
    """Invalid generation parameters or non-finite simulated values."""


@dataclass(frozen=True)
class LinearMech:
    """Linear mechanism: child = coeffs . parents + noise."""

    coeffs: tuple[float, ...]

    @property
    def arity(self) -> int:
        return len(self.coeffs)

    def __call__(self, parents: np.ndarray) -> np.ndarray:
        return parents @ np.asarray(self.coeffs)


@dataclass(frozen=True)
class MlpMech:
    """One-hidden-layer tanh network without biases: out = tanh(P W1) W2."""

    input_weights: tuple[tuple[float, ...], ...]  # (arity, hidden)
    output_weights: tuple[float, ...]  # (hidden,)

    @property
    def arity(self) -> int:
        return len(self.input_weights)

    def __call__(self, parents: np.ndarray) -> np.ndarray:
        w1 = np.asarray(self.input_weights)
        w2 = np.asarray(self.output_weights)
        return np.tanh(parents @ w1) @ w2


Mechanism = LinearMech | MlpMech


@dataclass(frozen=True)
class AnmSpec:
    """Full description of a data-generating process over a DAG.

    Every non-root vertex carries exactly one mechanism whose arity matches
    its parent count; roots carry none.  Linear coefficients must have
    magnitude in [0.5, 1.5].
    """

    dag: Dag
    mechanisms: dict[int, Mechanism]
    noise_family: str = "uniform"
    noise_variance: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self):
        if self.noise_family not in NOISE_FAMILIES:
            raise GenerationError(f"unknown noise family {self.noise_family!r}")
        roots = self.dag.roots()
        for v in range(self.dag.num_vertices):
            if v in roots:
                if v in self.mechanisms:
                    raise GenerationError(f"root vertex {v} must not have a mechanism")
                continue
            mech = self.mechanisms.get(v)
            if mech is None:
                raise GenerationError(f"non-root vertex {v} is missing a mechanism")
            if mech.arity != len(self.dag.parents(v)):
                raise GenerationError(f"mechanism arity mismatch at vertex {v}")
            if isinstance(mech, LinearMech) and any(
                not (0.5 <= abs(c) <= 1.5) for c in mech.coeffs
            ):
                raise GenerationError(f"linear coefficient out of range at vertex {v}")

    def mechanism_kinds(self) -> dict[int, str]:
        """Per-vertex 'linear'/'nonlinear' map for non-roots."""
        return {
            v: ("linear" if isinstance(m, LinearMech) else "nonlinear")
            for v, m in self.mechanisms.items()
        }

    def to_json(self) -> str:
        mechs = {}
        for v, m in self.mechanisms.items():
            if isinstance(m, LinearMech):
                mechs[str(v)] = {"kind": "linear", "coeffs": list(m.coeffs)}
            else:
                mechs[str(v)] = {
                    "kind": "mlp",
                    "input_weights": [list(r) for r in m.input_weights],
                    "output_weights": list(m.output_weights),
                }
        return json.dumps(
            {
                "dag": json.loads(self.dag.to_json()),
                "mechanisms": mechs,
                "noise_family": self.noise_family,
                "noise_variance": self.noise_variance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "AnmSpec":
        obj = json.loads(text)
        dag = Dag(
            obj["dag"]["d"],
            [tuple(e) for e in obj["dag"]["edges"]],
            obj["dag"].get("labels"),
        )
        mechanisms: dict[int, Mechanism] = {}
        for key, m in obj["mechanisms"].items():
            if m["kind"] == "linear":
                mechanisms[int(key)] = LinearMech(tuple(m["coeffs"]))
            else:
                mechanisms[int(key)] = MlpMech(
                    tuple(tuple(r) for r in m["input_weights"]),
                    tuple(m["output_weights"]),
                )
        return cls(dag, mechanisms, obj["noise_family"], obj["noise_variance"])


@dataclass
class Dataset:
    """Column-labelled n x d observation matrix."""

    values: np.ndarray
    column_labels: list[str]
    provenance: dict | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise GenerationError("dataset values must be a non-empty 2-D matrix")
        if len(self.column_labels) != self.values.shape[1]:
            raise GenerationError("column label count does not match data width")
        if not np.all(np.isfinite(self.values)):
            raise GenerationError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_labels)
            for row in self.values:
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise GenerationError(f"CSV must contain a header and data rows: {path}")
        header = rows[0]
        values = np.empty((len(rows) - 1, len(header)))
        for r, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise GenerationError(
                    f"row {r} has {len(row)} fields, expected {len(header)}: {path}"
                )
            for c, cell in enumerate(row):
                try:
                    values[r - 2, c] = float(cell)
                except ValueError:
                    raise GenerationError(
                        f"non-numeric value {cell!r} at row {r}, column "
                        f"{header[c]!r}: {path}"
                    ) from None
        return cls(values, header)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_anm_spec(
    dag: Dag,
    linear_prob: float,
    rng_seed: int,
    noise_family: str = "uniform",
    noise_variance: float = DEFAULT_NOISE_VARIANCE,
) -> AnmSpec:
    """Draw a random mechanism for every non-root vertex.

    Each mechanism is independently linear with probability ``linear_prob``.
    Linear coefficients are uniform on [-1.5, -0.5] or [0.5, 1.5] with equal
    probability; nonlinear mechanisms are 10-unit tanh networks with all
    weights uniform on [-5, 5].
    """
    if not (0.0 <= linear_prob <= 1.0):
        raise GenerationError(f"linear_prob must be in [0, 1], got {linear_prob}")
    rng = np.random.default_rng(rng_seed)
    mechanisms: dict[int, Mechanism] = {}
    roots = dag.roots()
    for v in range(dag.num_vertices):
        if v in roots:
            continue
        arity = len(dag.parents(v))
        if rng.random() < linear_prob:
            signs = rng.choice([-1.0, 1.0], size=arity)
            mags = rng.uniform(0.5, 1.5, size=arity)
            mechanisms[v] = LinearMech(tuple(signs * mags))
        else:
            w1 = rng.uniform(-5.0, 5.0, size=(arity, HIDDEN_UNITS))
            w2 = rng.uniform(-5.0, 5.0, size=HIDDEN_UNITS)
            mechanisms[v] = MlpMech(
                tuple(tuple(row) for row in w1), tuple(w2)
            )
    return AnmSpec(dag, mechanisms, noise_family, noise_variance)


def _sample_noise(
    family: str, variance: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    if variance == 0.0:
        return np.zeros(n)
    if family == "uniform":
        half = np.sqrt(3.0 * variance)  # Uniform[-h, h] has variance h^2/3
        return rng.uniform(-half, half, size=n)
    if family == "laplace":
        return rng.laplace(0.0, np.sqrt(variance / 2.0), size=n)
    if family == "gaussian":
        return rng.normal(0.0, np.sqrt(variance), size=n)
    raise GenerationError(f"unknown noise family {family!r}")


def sample_dataset(
    spec: AnmSpec,
    n: int,
    rng_seed: int,
    allow_zero_noise: bool = False,
) -> Dataset:
    """Simulate ``n`` joint samples from the process described by ``spec``.

    Vertices are generated in topological order: roots are pure noise,
    children are mechanism(parent values) plus noise.  ``allow_zero_noise``
    unlocks degenerate zero-variance noise for test fixtures only.
    """
    if n < 1:
        raise GenerationError(f"n must be >= 1, got {n}")
    if spec.noise_variance == 0.0 and not allow_zero_noise:
        raise GenerationError("zero-variance noise requires allow_zero_noise=True")
    rng = np.random.default_rng(rng_seed)
    order = topological_sort(spec.dag)
    assert order is not None
    values = np.zeros((n, spec.dag.num_vertices))
    for v in order:
        noise = _sample_noise(spec.noise_family, spec.noise_variance, n, rng)
        parents = sorted(spec.dag.parents(v))
        if parents:
            values[:, v] = spec.mechanisms[v](values[:, parents]) + noise
        else:
            values[:, v] = noise
        if not np.all(np.isfinite(values[:, v])):
            raise GenerationError(f"non-finite mechanism output at vertex {v}")
    return Dataset(
        values,
        list(spec.dag.labels),
        provenance={"seed": int(rng_seed), "n": int(n)},
    )


# ---------------------------------------------------------------------------
# processing
# ---------------------------------------------------------------------------


def standardize(data: Dataset) -> Dataset:
    """Rescale every column to zero mean and unit variance (1/n convention)."""
    values = data.values
    means = values.mean(axis=0)
    stds = values.std(axis=0)
    for i, s in enumerate(stds):
        if s == 0:
            raise GenerationError(
                f"cannot standardize constant column {data.column_labels[i]!r}"
            )
    out = (values - means) / stds
    prov = dict(data.provenance or {})
    prov["standardized"] = True
    return Dataset(out, list(data.column_labels), prov)


def _pathwise_pairs(dag: Dag) -> list[tuple[int, int]]:
    return [
        (i, j)
        for i in range(dag.num_vertices)
        for j in dag.descendants(i)
    ]


def _sortability(metric: np.ndarray, dag: Dag) -> float | None:
    pairs = _pathwise_pairs(dag)
    if not pairs:
        return None
    score = 0.0
    for i, j in pairs:
        if metric[i] < metric[j]:
            score += 1.0
        elif metric[i] == metric[j]:
            score += 0.5
    return score / len(pairs)


def var_sortability(data: Dataset, dag: Dag) -> float | None:
    """Fraction of directed-path pairs ordered by increasing variance.

    Returns None on edgeless graphs, where the score is undefined.
    """
    return _sortability(data.values.var(axis=0), dag)


def r2_sortability(data: Dataset, dag: Dag) -> float | None:
    """Fraction of directed-path pairs ordered by increasing R^2.

    The per-column statistic is the coefficient of determination of the
    least-squares regression of that column on all remaining columns.
    Requires n > d; returns None on edgeless graphs.
    """
    n, d = data.values.shape
    if dag.edges and n <= d:
        raise GenerationError(f"R^2-sortability requires n > d, got n={n}, d={d}")
    values = data.values
    r2 = np.zeros(d)
    for j in range(d):
        y = values[:, j]
        X = np.delete(values, j, axis=1)
        X1 = np.column_stack([np.ones(n), X])
        coef, *_ = np.linalg.lstsq(X1, y, rcond=None)
        resid = y - X1 @ coef
        total = float(((y - y.mean()) ** 2).sum())
        r2[j] = 1.0 - float((resid**2).sum()) / total if total > 0 else 0.0
    return _sortability(r2, dag)


def generate_filtered(
    d: int,
    avg_edges: float,
    linear_prob: float,
    n: int,
    rng_seed: int,
    noise_family: str = "uniform",
    max_retries: int = 100,
    threshold: float = 0.75,
) -> tuple[Dag, AnmSpec, Dataset, dict]:
    """Resample (DAG, mechanisms, data) until the data is hard enough.

    Each attempt draws a fresh DAG and mechanism set, simulates, standardizes,
    and accepts when R^2-sortability falls below ``threshold``.  After
    ``max_retries`` failed attempts the final attempt is returned with
    ``meta["sortability_warning"] = True`` rather than raising; edgeless
    draws (undefined sortability) are accepted as trivially unsortable.
    Deterministic in ``rng_seed``.
    """
    seed_seq = np.random.SeedSequence(rng_seed)
    meta: dict = {}
    for attempt in range(max_retries):
        child = np.random.SeedSequence(rng_seed, spawn_key=(attempt,))
        dag_seed, mech_seed, data_seed = [
            int(s.generate_state(1)[0]) for s in child.spawn(3)
        ]
        dag = er_random_dag(d, avg_edges, dag_seed)
        spec = sample_anm_spec(dag, linear_prob, mech_seed, noise_family)
        data = standardize(sample_dataset(spec, n, data_seed))
        r2 = r2_sortability(data, dag)
        meta = {
            "seed": int(rng_seed),
            "attempt": attempt,
            "r2_sortability": r2,
            "var_sortability": var_sortability(data, dag),
            "sortability_warning": False,
        }
        if r2 is None or r2 < threshold:
            return dag, spec, data, meta
    meta["sortability_warning"] = True
    warnings.warn(
        f"sortability threshold {threshold} not reached in {max_retries} attempts",
        stacklevel=2,
    )
    return dag, spec, data, meta


# ---------------------------------------------------------------------------
# bundle layout: dag.json, spec.json, data.csv, meta.json
# ---------------------------------------------------------------------------


def write_bundle(
    directory: str | Path, dag: Dag, spec: AnmSpec, data: Dataset, meta: dict
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "dag.json").write_text(dag.to_json())
    (directory / "spec.json").write_text(spec.to_json())
    data.to_csv(directory / "data.csv")
    (directory / "meta.json").write_text(json.dumps(meta, indent=2))
    return directory


def load_bundle(directory: str | Path) -> tuple[Dag, AnmSpec, Dataset, dict]:
    directory = Path(directory)
    dag = Dag.from_json((directory / "dag.json").read_text())
    spec = AnmSpec.from_json((directory / "spec.json").read_text())
    data = Dataset.from_csv(directory / "data.csv")
    meta = json.loads((directory / "meta.json").read_text())
    return dag, spec, data, meta
