"""Image and rain-mask I/O.

Images are held as a float64 luminance plane in [0, 1] plus, for colour
inputs, two colour-difference planes (B - Y, R - Y) that are carried
through processing untouched and used only to recompose RGB on save.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

# ITU-R BT.601 luma weights
BT601 = (0.299, 0.587, 0.114)


class ImageIOError(Exception):
    """Unreadable, unsupported or mismatched image file."""


@dataclass
class Image:
    luma: np.ndarray
    chroma: np.ndarray | None = None

    def __post_init__(self):
        self.luma = np.asarray(self.luma, dtype=np.float64)
        if self.luma.ndim != 2:
            raise ValueError(f"luma must be 2-D, got shape {self.luma.shape}")
        if self.chroma is not None:
            self.chroma = np.asarray(self.chroma, dtype=np.float64)
            if self.chroma.shape != self.luma.shape + (2,):
                raise ValueError("chroma must have shape (height, width, 2)")

    @property
    def height(self) -> int:
        return self.luma.shape[0]

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.luma.shape

    def with_luma(self, luma: np.ndarray) -> "Image":
        """Same chroma, new luminance plane."""
        return Image(luma, self.chroma)


@dataclass
class RainMask:
    flags: np.ndarray

    def __post_init__(self):
        self.flags = np.asarray(self.flags, dtype=bool)

    @property
    def shape(self) -> tuple[int, int]:
        return self.flags.shape


def rgb_to_luma_chroma(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = BT601[0] * r + BT601[1] * g + BT601[2] * b
    return y, np.stack([b - y, r - y], axis=-1)


def luma_chroma_to_rgb(y: np.ndarray, chroma: np.ndarray) -> np.ndarray:
    b = y + chroma[..., 0]
    r = y + chroma[..., 1]
    g = (y - BT601[0] * r - BT601[2] * b) / BT601[1]
    return np.stack([r, g, b], axis=-1)


def quantize(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and map to uint8 with round-half-up."""
    v = np.clip(values, 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def _read_pixels(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(f"no such file: {path}")
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            if mode in ("L", "RGB"):
                return np.asarray(im)
            if mode == "LA":
                return np.asarray(im)[..., 0]
            if mode == "RGBA":
                return np.asarray(im)[..., :3]
            if mode == "1":
                return np.asarray(im.convert("L"))
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    raise ImageIOError(f"unsupported bit depth / mode {mode!r} in {path}")


def load_image(path) -> Image:
    """Read an 8-bit gray or RGB PNG/PGM into a normalized Image."""
    pix = _read_pixels(path)
    if pix.dtype != np.uint8:
        raise ImageIOError(f"unsupported bit depth ({pix.dtype}) in {path}")
    data = pix.astype(np.float64) / 255.0
    if data.ndim == 2:
        return Image(data)
    y, chroma = rgb_to_luma_chroma(data)
    return Image(y, chroma)


def save_image(img: Image, path) -> None:
    """Write `img` as 8-bit PNG or PGM (by suffix); luma is clamped first."""
    path = Path(path)
    if img.chroma is None:
        arr = quantize(img.luma)
    else:
        y = np.clip(img.luma, 0.0, 1.0)
        arr = quantize(luma_chroma_to_rgb(y, img.chroma))
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".ppm", ".pnm") else "PNG"
    if fmt == "PPM" and arr.ndim == 3:
        raise ImageIOError("PGM output requires a grayscale image")
    try:
        PILImage.fromarray(arr).save(path, format=fmt)
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def load_mask(path, img: Image | tuple[int, int]) -> RainMask:
    """Any nonzero pixel in any channel marks rain."""
    pix = _read_pixels(path)
    shape = img.shape if isinstance(img, Image) else tuple(img)
    if pix.shape[:2] != shape:
        raise ImageIOError(
            f"mask {path} is {pix.shape[1]}x{pix.shape[0]}, "
            f"image is {shape[1]}x{shape[0]}")
    flags = pix != 0
    if flags.ndim == 3:
        flags = flags.any(axis=-1)
    return RainMask(flags)


def save_mask(mask: RainMask, path) -> None:
    PILImage.fromarray(mask.flags.astype(np.uint8) * 255).save(path)


def save_map(s: np.ndarray, path) -> None:
    """Export a [0, 1] field (shrinkage map) as an 8-bit gray PNG."""
    PILImage.fromarray(quantize(s)).save(path)
