"""Procedurally generated stand-in corpus.

Rain images carry oriented bright streaks inside masked regions over smooth
backgrounds; clean images are brick-like, straw-like and line-drawing
textures.  Everything is a deterministic function of its seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .images import Image, RainMask, save_image, save_mask

TEXTURES = ("brick", "straw", "sketch")


def smooth_background(shape, rng, lo=0.25, hi=0.6, sigma=None) -> np.ndarray:
    h, w = shape
    sigma = sigma or max(h, w) / 6
    field = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    field -= field.min()
    field /= max(field.max(), 1e-12)
    return lo + (hi - lo) * field


def draw_segment(canvas, p0, p1, amplitude, width=0.6):
    """Add an anti-aliased line segment with a Gaussian cross-section."""
    h, w = canvas.shape
    pad = int(np.ceil(3 * width)) + 1
    r0 = max(int(np.floor(min(p0[0], p1[0]))) - pad, 0)
    r1 = min(int(np.ceil(max(p0[0], p1[0]))) + pad + 1, h)
    c0 = max(int(np.floor(min(p0[1], p1[1]))) - pad, 0)
    c1 = min(int(np.ceil(max(p0[1], p1[1]))) + pad + 1, w)
    if r0 >= r1 or c0 >= c1:
        return
    rr, cc = np.mgrid[r0:r1, c0:c1].astype(float)
    d = np.subtract(p1, p0, dtype=float)
    length2 = max(d @ d, 1e-12)
    t = np.clip(((rr - p0[0]) * d[0] + (cc - p0[1]) * d[1]) / length2, 0, 1)
    dist2 = (rr - p0[0] - t * d[0]) ** 2 + (cc - p0[1] - t * d[1]) ** 2
    canvas[r0:r1, c0:c1] += amplitude * np.exp(-dist2 / (2 * width ** 2))


def streak_layer(shape, rng, region, count, angle_deg, jitter=5.0,
                 length=(8, 20), amplitude=(0.2, 0.4), width=(0.5, 0.8)) -> np.ndarray:
    """Additive streaks whose centers fall inside the boolean `region`."""
    layer = np.zeros(shape)
    rows, cols = np.nonzero(region)
    if rows.size == 0:
        return layer
    for _ in range(count):
        k = rng.integers(rows.size)
        center = np.array([rows[k], cols[k]], float) + rng.uniform(-0.5, 0.5, 2)
        theta = np.deg2rad(angle_deg + rng.uniform(-jitter, jitter))
        # angle measured from vertical
        direction = np.array([np.cos(theta), np.sin(theta)])
        half = rng.uniform(*length) / 2
        draw_segment(layer, center - half * direction, center + half * direction,
                     rng.uniform(*amplitude), rng.uniform(*width))
    return layer


def rain_angle(rng) -> float:
    """Diagonal fall direction, 30-55 degrees either side of vertical."""
    return rng.choice([-1.0, 1.0]) * rng.uniform(30, 55)


def random_region(shape, rng, coverage=0.5) -> np.ndarray:
    """A blobby boolean region covering roughly `coverage` of the frame."""
    field = ndimage.gaussian_filter(rng.standard_normal(shape), max(shape) / 8, mode="wrap")
    return field >= np.quantile(field, 1 - coverage)


def rain_image(shape=(96, 96), seed=0, density=0.008, coverage=0.5, angle=None,
               length=(12, 30), jitter=3.0):
    """A rainy image and its rain mask (the streak region)."""
    rng = np.random.default_rng(seed)
    region = random_region(shape, rng, coverage)
    bg = smooth_background(shape, rng)
    count = int(density * region.sum())
    if angle is None:
        angle = rain_angle(rng)
    streaks = streak_layer(shape, rng, region, count, angle, jitter=jitter, length=length)
    luma = np.clip(bg + streaks, 0, 1)
    return Image(luma), RainMask(region)


def brick(shape=(96, 96), seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    h, w = shape
    bh = int(rng.integers(9, 13))
    bw = int(rng.integers(20, 28))
    off_r = int(rng.integers(bh))
    off_c = int(rng.integers(bw))
    out = np.empty(shape)
    shades = 0.45 + 0.2 * rng.random((h // bh + 3, w // bw + 3))
    for r in range(h):
        row = (r + off_r) // bh
        shift = (bw // 2) * (row % 2)
        for c in range(w):
            col = (c + off_c + shift) // bw
            out[r, c] = shades[row, col]
    rr, cc = np.mgrid[0:h, 0:w]
    row = (rr + off_r) // bh
    mortar_h = (rr + off_r) % bh < 2
    mortar_v = (cc + off_c + (bw // 2) * (row % 2)) % bw < 2
    out[mortar_h | mortar_v] = 0.85
    out += 0.02 * ndimage.gaussian_filter(rng.standard_normal(shape), 1.0)
    return np.clip(ndimage.gaussian_filter(out, 0.5), 0, 1)


def straw(shape=(96, 96), seed=0, width=(1.2, 1.8)) -> np.ndarray:
    """Packed stalks within a few degrees of vertical, dark gaps between them."""
    rng = np.random.default_rng(seed)
    h, w = shape
    out = np.full(shape, 0.25) + 0.05 * smooth_background(shape, rng, 0, 1)
    for _ in range(int(w * 0.6)):
        c = rng.uniform(-4, w + 4)
        theta = np.deg2rad(rng.uniform(-5, 5))
        r0 = rng.uniform(-h / 2, h / 2)
        span = rng.uniform(h * 0.6, h * 1.2)
        d = np.array([np.cos(theta), np.sin(theta)])
        p0 = np.array([r0, c])
        draw_segment(out, p0, p0 + span * d, rng.uniform(0.15, 0.3), rng.uniform(*width))
    return np.clip(out, 0, 1)


def sketch(shape=(96, 96), seed=0) -> np.ndarray:
    """Dark pen strokes, mostly arcs, on a mid-gray page."""
    rng = np.random.default_rng(seed)
    h, w = shape
    ink = np.zeros(shape)
    for _ in range(10):
        p0 = rng.uniform([0, 0], [h, w])
        if rng.random() < 0.3:
            theta = np.deg2rad(rng.uniform(-15, 15) + rng.choice([0, 90]))
            p1 = p0 + rng.uniform(15, 40) * np.array([np.cos(theta), np.sin(theta)])
            draw_segment(ink, p0, p1, 0.45, 1.0)
        else:
            radius = rng.uniform(8, 22)
            a0 = rng.uniform(0, 2 * np.pi)
            angles = a0 + np.linspace(0, rng.uniform(2.0, 5.0), 32)
            pts = p0 + radius * np.stack([np.sin(angles), np.cos(angles)], 1)
            for a, b in zip(pts[:-1], pts[1:]):
                draw_segment(ink, a, b, 0.45, 1.0)
    page = 0.7 - 0.05 * smooth_background(shape, rng, 0, 1)
    return np.clip(page - np.minimum(ink, 0.5), 0, 1)


def texture(name: str, shape=(96, 96), seed=0) -> Image:
    try:
        fn = {"brick": brick, "straw": straw, "sketch": sketch}[name]
    except KeyError:
        raise ValueError(f"unknown texture {name!r}; choose from {TEXTURES}") from None
    return Image(fn(shape, seed))


def rain_corpus(n=6, shape=(96, 96), seed=100, **kw):
    """Rain images with alternating fall direction."""
    out = []
    for k in range(n):
        rng = np.random.default_rng(seed + k + 7919)
        angle = (1 if k % 2 == 0 else -1) * rng.uniform(30, 55)
        out.append(rain_image(shape, seed + k, angle=angle, **kw))
    return out


def clean_corpus(n_per_texture=2, shape=(96, 96), seed=200):
    """Non-rain training images; seeds are disjoint from the evaluation images."""
    images = []
    for k in range(n_per_texture):
        for j, name in enumerate(TEXTURES):
            images.append(texture(name, shape, seed + 10 * k + j))
        rng = np.random.default_rng(seed + 10 * k + 9)
        images.append(Image(smooth_background(shape, rng, 0.1, 0.9, sigma=4)))
    return images


def write_corpus(root, n_rain=6, n_clean=2, shape=(96, 96)) -> None:
    """Materialize the corpus as PNG files under `root`."""
    root = Path(root)
    for sub in ("rain", "masks", "clean", "test"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for k, (img, mask) in enumerate(rain_corpus(n_rain, shape)):
        save_image(img, root / "rain" / f"rain_{k:02d}.png")
        save_mask(mask, root / "masks" / f"rain_{k:02d}.png")
    for k, img in enumerate(clean_corpus(n_clean, shape)):
        save_image(img, root / "clean" / f"clean_{k:02d}.png")
    for name in TEXTURES:
        save_image(texture(name, shape), root / "test" / f"{name}.png")
    img, mask = rain_image(shape, seed=999, coverage=0.9)
    save_image(img, root / "test" / "rain_source.png")
    save_mask(mask, root / "test" / "rain_source_mask.png")
