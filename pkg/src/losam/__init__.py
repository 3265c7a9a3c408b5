"""Local-search topological ordering for additive noise models.

The package bundles the discovery algorithm itself, the synthetic
benchmark generator used to evaluate it, the statistical estimators both
rely on, ordering/graph metrics, and a command-line front end
(``losam generate|discover|benchmark|metrics``).
"""

from .backends import EmpiricalBackend, GraphTruthBackend, LosamConfig
from .graphs import Dag, er_random_dag, fully_connected_dag, is_valid_order
from .metrics import a_top, prune_edges, rand_sort, shd_f1, var_sort
from .ordering import (
    LosamResult,
    SortFinderError,
    losam,
    root_finder,
    sort_finder,
)
from .stats import (
    IndependenceResult,
    RegressionFit,
    cond_independence_test,
    independence_test,
    linear_regress,
    mutual_information,
    nonparam_regress,
)
from .synth import (
    AnmSpec,
    Dataset,
    generate_filtered,
    r2_sortability,
    sample_anm_spec,
    sample_dataset,
    standardize,
    var_sortability,
)

__version__ = "0.1.0"

__all__ = [
    "AnmSpec",
    "Dag",
    "Dataset",
    "EmpiricalBackend",
    "GraphTruthBackend",
    "IndependenceResult",
    "LosamConfig",
    "LosamResult",
    "RegressionFit",
    "SortFinderError",
    "a_top",
    "cond_independence_test",
    "er_random_dag",
    "fully_connected_dag",
    "generate_filtered",
    "independence_test",
    "is_valid_order",
    "linear_regress",
    "losam",
    "mutual_information",
    "nonparam_regress",
    "prune_edges",
    "r2_sortability",
    "rand_sort",
    "root_finder",
    "sample_anm_spec",
    "sample_dataset",
    "shd_f1",
    "sort_finder",
    "standardize",
    "var_sort",
    "var_sortability",
]
