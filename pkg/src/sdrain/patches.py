"""Overlapping patch extraction, training-patch sampling and patch averaging.

Patches are vectorized column-major (the first m entries are the first
column of the window), and windows are enumerated row-major over their
top-left offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .images import Image, RainMask


class SamplingError(Exception):
    """Not enough qualifying patch locations."""


def _offsets(dim: int, m: int, stride: int) -> np.ndarray:
    if dim < m:
        raise ValueError(f"image dimension {dim} smaller than patch size {m}")
    offs = np.arange(0, dim - m + 1, stride)
    # keep the last window so a coarse stride still covers every pixel
    if offs[-1] != dim - m:
        offs = np.append(offs, dim - m)
    return offs


@dataclass(frozen=True)
class PatchGrid:
    height: int
    width: int
    m: int = 16
    stride: int = 1

    def __post_init__(self):
        if self.m < 1 or self.stride < 1:
            raise ValueError("patch size and stride must be positive")
        if self.stride > self.m:
            raise ValueError(f"stride {self.stride} > patch size {self.m} leaves gaps")
        if self.height < self.m or self.width < self.m:
            raise ValueError(
                f"image {self.width}x{self.height} smaller than patch {self.m}")

    @classmethod
    def for_image(cls, img: Image | np.ndarray, m: int = 16, stride: int = 1):
        shape = img.shape
        return cls(shape[0], shape[1], m, stride)

    @property
    def row_offsets(self) -> np.ndarray:
        return _offsets(self.height, self.m, self.stride)

    @property
    def col_offsets(self) -> np.ndarray:
        return _offsets(self.width, self.m, self.stride)

    @property
    def n_patches(self) -> int:
        return len(self.row_offsets) * len(self.col_offsets)

    def position(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.n_patches:
            raise IndexError(f"patch index {i} out of range [0, {self.n_patches})")
        cols = self.col_offsets
        r, c = divmod(i, len(cols))
        return int(self.row_offsets[r]), int(cols[c])

    def positions(self) -> np.ndarray:
        """(N, 2) array of top-left (row, col) offsets in index order."""
        rr, cc = np.meshgrid(self.row_offsets, self.col_offsets, indexing="ij")
        return np.stack([rr.ravel(), cc.ravel()], axis=1)


@dataclass
class PatchMatrix:
    data: np.ndarray                     # (m*m, n), one patch per column
    means: np.ndarray | None = None      # (n,) removed means, if any
    positions: np.ndarray | None = None  # (n, 2) sources, when known

    @property
    def n(self) -> int:
        return self.data.shape[1]


def _luma(img) -> np.ndarray:
    return img.luma if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def vectorize(window: np.ndarray) -> np.ndarray:
    return window.reshape(-1, order="F")


def unvectorize(vec: np.ndarray, m: int) -> np.ndarray:
    return vec.reshape(m, m, order="F")


def extract_patch(img, grid: PatchGrid, i: int, remove_mean: bool = False):
    """Return ``(vector, mean)`` for window `i`; mean is 0.0 when not removed."""
    r, c = grid.position(i)
    m = grid.m
    vec = vectorize(_luma(img)[r:r + m, c:c + m]).copy()
    mean = 0.0
    if remove_mean:
        mean = float(vec.mean())
        vec -= mean
    return vec, mean


def extract_patches(img, grid: PatchGrid, remove_mean: bool = False,
                    indices=None) -> PatchMatrix:
    """All (or the selected) windows of `grid` as a PatchMatrix."""
    luma = _luma(img)
    pos = grid.positions()
    if indices is not None:
        pos = pos[np.asarray(indices)]
    m = grid.m
    windows = sliding_window_view(luma, (m, m))[pos[:, 0], pos[:, 1]]
    # column-major vectorization of each window
    data = windows.transpose(2, 1, 0).reshape(m * m, -1).copy()
    means = None
    if remove_mean:
        means = data.mean(axis=0)
        data -= means
    return PatchMatrix(data, means, pos)


class Accumulator:
    """Running sums p and coverage counts diag(Q) for patch averaging."""

    def __init__(self, height: int, width: int):
        self.p = np.zeros((height, width))
        self.q = np.zeros((height, width), dtype=np.int64)

    @classmethod
    def for_grid(cls, grid: PatchGrid) -> "Accumulator":
        return cls(grid.height, grid.width)

    def add(self, grid: PatchGrid, i: int, patch: np.ndarray) -> "Accumulator":
        m = grid.m
        patch = np.asarray(patch, dtype=np.float64)
        if patch.size != m * m:
            raise ValueError(f"patch has {patch.size} values, expected {m * m}")
        r, c = grid.position(i)
        self.p[r:r + m, c:c + m] += unvectorize(patch.ravel(), m)
        self.q[r:r + m, c:c + m] += 1
        return self

    def merge(self, other: "Accumulator") -> "Accumulator":
        self.p += other.p
        self.q += other.q
        return self


def accumulate(acc: Accumulator, grid: PatchGrid, i: int,
               patch: np.ndarray) -> Accumulator:
    return acc.add(grid, i, patch)


def patch_average(acc: Accumulator) -> np.ndarray:
    """Per-pixel p / diag(Q); every pixel must be covered."""
    if np.any(acc.q <= 0):
        n = int(np.count_nonzero(acc.q <= 0))
        raise ValueError(f"{n} pixels have zero patch coverage")
    return acc.p / acc.q


def average_patches(patches: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Accumulate the columns of `patches` (index order) and average them."""
    acc = Accumulator.for_grid(grid)
    for i in range(patches.shape[1]):
        acc.add(grid, i, patches[:, i])
    return patch_average(acc)


def coverage_fraction(mask: RainMask | np.ndarray, m: int) -> np.ndarray:
    """Masked-pixel fraction of every stride-1 window, shape (H-m+1, W-m+1)."""
    flags = mask.flags if isinstance(mask, RainMask) else np.asarray(mask, bool)
    integral = np.zeros((flags.shape[0] + 1, flags.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = flags.cumsum(0).cumsum(1)
    counts = (integral[m:, m:] - integral[:-m, m:]
              - integral[m:, :-m] + integral[:-m, :-m])
    return counts / float(m * m)


def sample_training_patches(images, m: int, count: int, rain_coverage: float = 0.5,
                            seed: int = 0, remove_mean: bool = True) -> PatchMatrix:
    """Draw `count` distinct random patch locations from a corpus.

    `images` is a list of ``(Image, RainMask | None)``.  With a mask a window
    qualifies when its masked fraction is at least `rain_coverage`; without
    one every window qualifies.  Locations are drawn uniformly without
    replacement from all qualifying windows of all images.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    candidates = []
    for k, (img, mask) in enumerate(images):
        h, w = img.shape
        if h < m or w < m:
            continue
        if mask is None:
            rr, cc = np.mgrid[0:h - m + 1, 0:w - m + 1]
            rr, cc = rr.ravel(), cc.ravel()
        else:
            if mask.shape != img.shape:
                raise ValueError(f"mask {k} dims {mask.shape} != image dims {img.shape}")
            # small slack so exact fractions such as 0.5 are not lost to rounding
            rr, cc = np.nonzero(coverage_fraction(mask, m) >= rain_coverage - 1e-12)
        candidates.append(np.stack([np.full(rr.size, k), rr, cc], axis=1))
    pool = np.concatenate(candidates) if candidates else np.zeros((0, 3), int)
    if len(pool) < count:
        raise SamplingError(
            f"only {len(pool)} qualifying patch locations, {count} requested")
    rng = np.random.default_rng(seed)
    chosen = pool[np.sort(rng.choice(len(pool), size=count, replace=False))]
    data = np.empty((m * m, count))
    for j, (k, r, c) in enumerate(chosen):
        data[:, j] = vectorize(_luma(images[k][0])[r:r + m, c:c + m])
    means = None
    if remove_mean:
        means = data.mean(axis=0)
        data -= means
    return PatchMatrix(data, means, chosen)
