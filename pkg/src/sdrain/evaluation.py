"""Synthetic rain composition and full-reference quality metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .images import Image, RainMask
from .patches import SamplingError, coverage_fraction

PSNR_CAP = 99.0


@dataclass
class RainOverlay:
    """Additive streak deltas at top-left positions within a frame."""
    frame: tuple[int, int]
    positions: list[tuple[int, int]] = field(default_factory=list)
    deltas: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.positions) != len(self.deltas):
            raise ValueError("positions and deltas differ in length")
        for d in self.deltas:
            if not np.all(np.isfinite(d)):
                raise ValueError("overlay deltas must be finite")

    def rotated(self) -> "RainOverlay":
        """The same overlay after a 90-degree counter-clockwise frame rotation."""
        h, w = self.frame
        pos, deltas = [], []
        for (r, c), d in zip(self.positions, self.deltas):
            ph, pw = d.shape
            pos.append((w - pw - c, r))
            deltas.append(np.rot90(d))
        return RainOverlay((w, h), pos, deltas)

    def field(self) -> np.ndarray:
        """All deltas summed into one frame-sized layer."""
        out = np.zeros(self.frame)
        for (r, c), d in zip(self.positions, self.deltas):
            ph, pw = d.shape
            if r < 0 or c < 0 or r + ph > self.frame[0] or c + pw > self.frame[1]:
                raise ValueError(f"overlay patch at ({r}, {c}) leaves the frame")
            out[r:r + ph, c:c + pw] += d
        return out


def extract_rain_overlay(rain_img: Image, mask: RainMask, m: int, count: int,
                         seed: int = 0, rain_coverage: float = 0.5) -> RainOverlay:
    """Sample `count` non-overlapping rain windows and isolate their streaks.

    Each delta is the positive part of the window minus its box-blurred
    background (radius m/2); streaks are brighter than what they cover.
    """
    if mask.shape != rain_img.shape:
        raise ValueError("mask dims differ from the rain image")
    ok = coverage_fraction(mask, m) >= rain_coverage - 1e-12
    cand = np.argwhere(ok)
    rng = np.random.default_rng(seed)
    cand = cand[rng.permutation(len(cand))]
    taken = np.zeros(rain_img.shape, dtype=bool)
    chosen = []
    for r, c in cand:
        if len(chosen) == count:
            break
        if taken[r:r + m, c:c + m].any():
            continue
        taken[r:r + m, c:c + m] = True
        chosen.append((int(r), int(c)))
    if len(chosen) < count:
        raise SamplingError(
            f"only {len(chosen)} non-overlapping rain windows, {count} requested")
    background = ndimage.uniform_filter(rain_img.luma, size=2 * (m // 2) + 1,
                                        mode="nearest")
    delta = np.maximum(rain_img.luma - background, 0.0)
    chosen.sort()
    deltas = [delta[r:r + m, c:c + m].copy() for r, c in chosen]
    return RainOverlay(rain_img.shape, chosen, deltas)


def synthesize_rain(clean: Image, overlay: RainOverlay, rotate90: bool = False) -> Image:
    """Add the overlay to `clean`; with `rotate90` the overlay frame is rotated first."""
    if rotate90:
        overlay = overlay.rotated()
    if tuple(overlay.frame) != clean.shape:
        raise ValueError(f"overlay frame {overlay.frame} does not match image {clean.shape}")
    if not overlay.deltas:
        return clean.with_luma(clean.luma.copy())
    return clean.with_luma(np.clip(clean.luma + overlay.field(), 0.0, 1.0))


def _planes(a, b):
    x = a.luma if isinstance(a, Image) else np.asarray(a, dtype=np.float64)
    y = b.luma if isinstance(b, Image) else np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def psnr(a, b) -> float:
    x, y = _planes(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10 * np.log10(1.0 / mse))


def _gaussian_window(size=11, sigma=1.5):
    g = signal.windows.gaussian(size, sigma)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, k1=0.01, k2=0.03, data_range=1.0) -> float:
    """Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows."""
    x, y = _planes(a, b)
    if min(x.shape) < 11:
        raise ValueError("SSIM needs images of at least 11x11")
    w = _gaussian_window()
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def filt(z):
        return signal.correlate2d(z, w, mode="valid")

    mx, my = filt(x), filt(y)
    vx = filt(x * x) - mx * mx
    vy = filt(y * y) - my * my
    cov = filt(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))
