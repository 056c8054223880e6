# Pin BLAS pools before numpy loads: timing-sensitive tests (scaling slopes)
# need stable single-thread kernels, and results must not depend on thread
# count. Must run before any module imports numpy.
import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

from gsmreg import Dataset, GroupStructure


@pytest.fixture
def small_dataset() -> Dataset:
    """n=30, d=5 (two genes of 2 and 3), c=2, one strong SNP."""
    rng = np.random.default_rng(12345)
    groups = GroupStructure.from_sizes([2, 3], labels=["geneA", "geneB"])
    X = rng.integers(0, 3, size=(30, 5)).astype(float)
    W = np.zeros((5, 2))
    W[0] = [0.9, -0.6]
    W[3] = [0.0, 0.4]
    Y = X @ W + 0.5 * rng.standard_normal((30, 2))
    return Dataset(
        X=X, Y=Y, groups=groups,
        snp_names=("rs1", "rs2", "rs3", "rs4", "rs5"),
        phenotype_names=("roi_a", "roi_b"),
    )
