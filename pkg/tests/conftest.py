import sys
from pathlib import Path

import numpy as np
import pytest

from sdrain.derain import correlation_matrix, patch_shrinkage_value, shrink_codes
from sdrain.omp import OmpStop, omp_batch, reconstruct, split_code
from sdrain.patches import Accumulator, PatchGrid, extract_patches, patch_average
from sdrain.shrinkmap import adaptive_epsilon

sys.path.insert(0, str(Path(__file__).parent))


def unit_columns(rng, n, P):
    D = rng.standard_normal((n, P))
    return D / np.linalg.norm(D, axis=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_dicts():
    """Small dictionary pair trained on the generated corpus (m=8, K=64)."""
    from sdrain.harness import HarnessConfig, train_dictionaries
    return train_dictionaries(HarnessConfig(K=64, n_patches=1500, iters=10))


def manual_derain(img, dicts, cfg, s):
    """Algorithm chained from the public ops of the other modules."""
    eps = adaptive_epsilon(img, s, cfg.th_s) if cfg.eps is None else cfg.eps
    grid = PatchGrid.for_image(img, dicts.m)
    D = dicts.joint()
    C = correlation_matrix(dicts.nonrain, dicts.rain)
    P = extract_patches(img, grid, remove_mean=True)
    codes = omp_batch(P.data, D, OmpStop.error(eps, max_atoms=dicts.m ** 2 // 4))
    acc = Accumulator.for_grid(grid)
    rain_parts = []
    for i, code in enumerate(codes):
        shrunk = shrink_codes(code, patch_shrinkage_value(s, grid, i), C, cfg.th_s, cfg.th_c)
        rain_parts.append(split_code(shrunk, dicts.K)[1])
        acc.add(grid, i, reconstruct(D, shrunk) + P.means[i])
    return np.clip(patch_average(acc), 0, 1), codes, rain_parts
