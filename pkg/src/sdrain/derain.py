"""Shrinkage-based sparse coding for rain removal.

Every overlapping patch is coded over the joint dictionary ``[Dn Dr]`` with
error-bounded OMP.  Its rain coefficients are then scaled by the patch's
mean shrinkage value s_i, and when the patch lies in a rain region
(s_i <= TH_s) so are the non-rain coefficients whose atom correlates with
an active rain atom at TH_c or more.  The shrunk patches are averaged back
into the image.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary, DictionarySet
from .images import Image
from .omp import OmpStop, SparseCode, omp_batch, reconstruct
from .patches import Accumulator, PatchGrid, extract_patches, patch_average
from .shrinkmap import MapParams, adaptive_epsilon, shrinkage_map

log = logging.getLogger(__name__)

# patches per work unit; fixed so results never depend on the worker count
CHUNK = 1024


@dataclass(frozen=True)
class DerainConfig:
    L: int = 3
    eps: float | None = None          # None: adaptive, else fixed ([0,1] units)
    th_s: float = 0.25
    th_c: float = 0.8
    max_atoms: int | None = None      # None: m*m // 4
    mean_removal: bool = True
    dilation_radius: int = 2
    tau_h: float = 0.10
    rho: float = 2.0
    stride: int = 1

    def __post_init__(self):
        if not 0 < self.th_s < 1:
            raise ValueError("TH_s must lie in (0, 1)")
        if not 0 < self.th_c <= 1:
            raise ValueError("TH_c must lie in (0, 1]")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be non-negative")

    def map_params(self) -> MapParams:
        return MapParams(L=self.L, tau_h=self.tau_h, rho=self.rho,
                         dilation_radius=self.dilation_radius,
                         mean_removal=self.mean_removal, stride=self.stride)


def correlation_matrix(Dn, Dr) -> np.ndarray:
    """C[k, l]: normalized inner product of non-rain atom k and rain atom l."""
    A = Dn.atoms if isinstance(Dn, Dictionary) else np.asarray(Dn, dtype=np.float64)
    B = Dr.atoms if isinstance(Dr, Dictionary) else np.asarray(Dr, dtype=np.float64)
    if A.shape[0] != B.shape[0]:
        raise ValueError("dictionaries have different atom lengths")
    na = np.linalg.norm(A, axis=0)
    nb = np.linalg.norm(B, axis=0)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("zero atom in correlation input")
    C = (A.T @ B) / np.outer(na, nb)
    return np.clip(C, -1.0, 1.0)


def patch_shrinkage_value(s: np.ndarray, grid: PatchGrid, i: int) -> float:
    r, c = grid.position(i)
    return float(np.mean(s[r:r + grid.m, c:c + grid.m]))


def shrink_codes(code: SparseCode, s_i: float, C: np.ndarray,
                 th_s: float = 0.25, th_c: float = 0.8) -> SparseCode:
    """Shrink a code over ``[Dn Dr]``.

    Rain coefficients are always scaled by `s_i`.  When ``s_i <= th_s`` a
    non-rain coefficient k is scaled once if some rain atom l that was
    active before shrinking has ``C[k, l] >= th_c``.
    """
    K = C.shape[0]
    if code.dict_width != 2 * K:
        raise ValueError(f"code width {code.dict_width} does not match 2*K = {2 * K}")
    coeffs = code.coeffs.copy()
    is_rain = code.support >= K
    coeffs[is_rain] = s_i * coeffs[is_rain]
    if s_i <= th_s:
        active = code.support[is_rain & (code.coeffs != 0)] - K
        if active.size:
            nonrain = np.nonzero(~is_rain)[0]
            hit = (C[code.support[nonrain]][:, active] >= th_c).any(axis=1)
            coeffs[nonrain[hit]] = s_i * coeffs[nonrain[hit]]
    return SparseCode(code.support, coeffs, code.dict_width)


def _derain_chunk(data, means, shrink, D, G, C, stop, cfg):
    codes = omp_batch(data, D, stop, gram=G, check=False)
    out = np.empty_like(data)
    for j, code in enumerate(codes):
        shrunk = shrink_codes(code, shrink[j], C, cfg.th_s, cfg.th_c)
        out[:, j] = reconstruct(D, shrunk)
        if means is not None:
            out[:, j] += means[j]
    return out


def derain_with_map(img: Image, dicts: DictionarySet, s: np.ndarray,
                    cfg: DerainConfig = DerainConfig(), threads: int = 1,
                    eps: float | None = None) -> np.ndarray:
    """Run the per-patch shrinkage loop for a given map; returns the luma plane.

    The result is not clamped.  `eps` overrides ``cfg.eps``; one of them
    must be set.
    """
    eps = cfg.eps if eps is None else eps
    if eps is None:
        raise ValueError("a bounded error is required")
    x = img.luma
    m = dicts.m
    grid = PatchGrid.for_image(x, m, cfg.stride)
    D = dicts.joint()
    G = D.T @ D
    C = correlation_matrix(dicts.nonrain, dicts.rain)
    max_atoms = cfg.max_atoms if cfg.max_atoms is not None else m * m // 4
    stop = OmpStop.error(eps, max_atoms=max_atoms)
    P = extract_patches(x, grid, remove_mean=cfg.mean_removal)
    shrink = np.array([patch_shrinkage_value(s, grid, i) for i in range(grid.n_patches)])

    starts = range(0, grid.n_patches, CHUNK)

    def work(start):
        sl = slice(start, start + CHUNK)
        means = P.means[sl] if P.means is not None else None
        return _derain_chunk(P.data[:, sl], means, shrink[sl], D, G, C, stop, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(start) for start in starts]

    # accumulate strictly in patch-index order
    acc = Accumulator.for_grid(grid)
    for start, rec in zip(starts, parts):
        for j in range(rec.shape[1]):
            acc.add(grid, start + j, rec[:, j])
    return patch_average(acc)


@dataclass
class DerainResult:
    image: Image
    shrinkage: np.ndarray
    eps: float


def derain(img: Image, dicts: DictionarySet, cfg: DerainConfig = DerainConfig(),
           threads: int = 1, forced_map: np.ndarray | None = None) -> DerainResult:
    """Remove rain streaks from `img`; returns the clamped output and its map."""
    if forced_map is not None:
        s = np.asarray(forced_map, dtype=np.float64)
        if s.shape != img.shape:
            raise ValueError("forced map dims differ from the image")
    else:
        s = shrinkage_map(img, dicts.rain, cfg.map_params())
    eps = cfg.eps if cfg.eps is not None else adaptive_epsilon(img, s, cfg.th_s)
    log.info("derain: %dx%d, eps=%.5f (%.3f in 8-bit units), rain fraction %.3f",
             img.width, img.height, eps, eps * 255, float(np.mean(s <= cfg.th_s)))
    y = derain_with_map(img, dicts, s, cfg, threads, eps)
    return DerainResult(img.with_luma(np.clip(y, 0.0, 1.0)), s, eps)
