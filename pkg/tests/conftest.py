import warnings

import numpy as np
import pytest

from losam import Dag, LosamConfig, sample_anm_spec, sample_dataset, standardize
from losam.synth import AnmSpec, LinearMech

# estimator-noise warnings are expected in the statistical tests
warnings.filterwarnings("ignore", message="no roots confirmed")
warnings.filterwarnings("ignore", message="independence test on n=")
warnings.filterwarnings("ignore", message="sortability threshold")


@pytest.fixture(scope="session")
def chain3():
    return Dag(3, [(0, 1), (1, 2)])


@pytest.fixture(scope="session")
def collider3():
    return Dag(3, [(0, 2), (1, 2)])


@pytest.fixture(scope="session")
def star_dag():
    """Three roots, one single-root descendant, two multi-root descendants.

    Vertices (i, j, k, m, n, h) = 0..5 with i->m, i->n<-j, n->h<-k.
    """
    return Dag(
        6,
        [(0, 3), (0, 4), (1, 4), (4, 5), (2, 5)],
        labels=["xi", "xj", "xk", "xm", "xn", "xh"],
    )


@pytest.fixture(scope="session")
def two_root_chain_dag():
    """x1->x3<-x2, x1->x4->x5 (0-indexed); roots are 0 and 1."""
    return Dag(5, [(0, 2), (1, 2), (0, 3), (3, 4)])


@pytest.fixture(scope="session")
def mixed_walkthrough():
    """Seven-vertex DAG exercising every sort-stage vertex class.

    Vertices (i, j, k, m, n, p, h) = 0..6.  After the roots {0, 1, 2} are
    sorted, m and n are valid leaf candidates, p is a linear descendant
    (linear in its unsorted ancestor m), and h is a nonlinear descendant.
    """
    dag = Dag(
        7,
        [(0, 4), (1, 4), (2, 3), (2, 5), (3, 5), (4, 6), (2, 6)],
        labels=["xi", "xj", "xk", "xm", "xn", "xp", "xh"],
    )
    kinds = {3: "nonlinear", 4: "nonlinear", 5: "linear", 6: "nonlinear"}
    return dag, kinds


@pytest.fixture(scope="session")
def chain3_data(chain3):
    spec = sample_anm_spec(chain3, 0.0, 77)
    return chain3, standardize(sample_dataset(spec, 1000, 78))


@pytest.fixture(scope="session")
def linear_chain_data(chain3):
    spec = AnmSpec(
        chain3, {1: LinearMech((1.0,)), 2: LinearMech((1.0,))}, "uniform"
    )
    return chain3, standardize(sample_dataset(spec, 800, 5))


@pytest.fixture(scope="session")
def collider_data(collider3):
    spec = sample_anm_spec(collider3, 0.0, 31)
    return collider3, standardize(sample_dataset(spec, 1000, 32))


@pytest.fixture
def quiet_config():
    return LosamConfig(seed=0)


def rng_columns(seed: int, n: int, d: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, d))
