"""Shrinkage-map construction and the adaptive bounded error.

The map is 0 where the rain dictionary alone explains the image well
(rain) and 1 where it does not (object structure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dictionary import Dictionary
from .images import Image
from .omp import OmpStop, omp_batch, reconstruct_batch
from .patches import PatchGrid, average_patches, extract_patches

# linear fit from mean rain-region gradient to eps (8-bit units)
EPS_SLOPE = 90.7441
EPS_KNEE = 0.1107
EPS_FLOOR = 3.0


@dataclass(frozen=True)
class MapParams:
    L: int = 3
    tau_h: float = 0.10
    rho: float = 2.0
    dilation_radius: int = 2
    mean_removal: bool = True
    stride: int = 1


def _luma(img) -> np.ndarray:
    return img.luma if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def build_error_map(img, rain_dict: Dictionary, L: int = 3, mean_removal: bool = True,
                    stride: int = 1) -> np.ndarray:
    """Squared difference between the image and its rain-only reconstruction."""
    x = _luma(img)
    grid = PatchGrid.for_image(x, rain_dict.m, stride)
    P = extract_patches(x, grid, remove_mean=mean_removal)
    codes = omp_batch(P.data, rain_dict.atoms, OmpStop.sparsity(L))
    rec = reconstruct_batch(rain_dict.atoms, codes)
    if mean_removal:
        rec = rec + P.means
    x_star = average_patches(rec, grid)
    return (x_star - x) ** 2


def kmeans2(values: np.ndarray, max_iter: int = 1000) -> tuple[float, float]:
    """Lloyd's algorithm with two centers on scalar data, initialized at min/max.

    Returns ``(c1, c2)`` with ``c1 <= c2``.  Raises ValueError on constant input.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        raise ValueError("constant data: two clusters are undefined")
    c1, c2 = lo, hi
    labels = None
    for _ in range(max_iter):
        # ties go to the lower center
        new = np.abs(v - c2) < np.abs(v - c1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        c1 = float(v[~labels].mean())
        c2 = float(v[labels].mean())
    return (c1, c2) if c1 <= c2 else (c2, c1)


def distance_ratio_map(e: np.ndarray, centers: tuple[float, float]) -> np.ndarray:
    """s_j = |e_j - c| / (|e_j - c1| + |e_j - c2|), c the smaller (rain) center."""
    c1, c2 = centers
    if c1 == c2:
        raise ValueError("cluster centers coincide")
    c = min(c1, c2)
    d1 = np.abs(e - c1)
    d2 = np.abs(e - c2)
    return np.abs(e - c) / (d1 + d2)


def prewitt_gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized Prewitt responses ``(gx, gy)`` with replicated borders.

    gx is the horizontal derivative (responds to vertical edges), gy the
    vertical derivative (responds to horizontal edges).
    """
    x = _luma(img)
    gx = ndimage.prewitt(x, axis=1, mode="nearest")
    gy = ndimage.prewitt(x, axis=0, mode="nearest")
    return gx, gy


def horizontal_line_mask(img, tau_h: float = 0.10, rho: float = 2.0) -> np.ndarray:
    gx, gy = prewitt_gradients(img)
    agx, agy = np.abs(gx), np.abs(gy)
    return (agy >= tau_h) & (agy >= rho * agx)


def finalize_map(s: np.ndarray, hmask: np.ndarray, dilation_radius: int = 2) -> np.ndarray:
    """Force horizontal-line pixels to 1, then gray-dilate with a square element."""
    out = np.array(s, dtype=np.float64)
    out[hmask] = 1.0
    if dilation_radius > 0:
        out = ndimage.grey_dilation(out, size=(2 * dilation_radius + 1,) * 2,
                                    mode="nearest")
    return out


def shrinkage_map(img, rain_dict: Dictionary, params: MapParams = MapParams()) -> np.ndarray:
    """The full map: error map, 2-means, distance ratio, line protection, dilation."""
    e = build_error_map(img, rain_dict, params.L, params.mean_removal, params.stride)
    if e.min() == e.max():
        # no contrast in the error map: treat everything as non-rain
        return np.ones_like(e)
    s = distance_ratio_map(e, kmeans2(e))
    hmask = horizontal_line_mask(img, params.tau_h, params.rho)
    return finalize_map(s, hmask, params.dilation_radius)


def epsilon_from_gradient(g: float) -> float:
    """Bounded error in 8-bit units for a mean absolute gradient `g`."""
    return max(EPS_FLOOR, EPS_SLOPE * (g - EPS_KNEE) + EPS_FLOOR)


def adaptive_epsilon(img, s: np.ndarray, th_s: float = 0.25) -> float:
    """Bounded error for a [0, 1] image, from its gradients in the rain region."""
    rain = np.asarray(s) <= th_s
    if not rain.any():
        return EPS_FLOOR / 255.0
    gx, gy = prewitt_gradients(img)
    g = float(np.mean((np.abs(gx) + np.abs(gy))[rain]))
    return epsilon_from_gradient(g) / 255.0
