"""Core raster types and conversions.

Images are plain numpy arrays in double precision:

* RGB image   -- (H, W, 3) float64, every channel in [0, 1]
* matte       -- (H, W) float64 in [0, 1] (1 = umbra, 0 = lit)
* binary mask -- (H, W) bool (True = shadow)
* LAB image   -- (H, W, 3) float64, L in [0, 100]

All values are sRGB-encoded intensities normalized by the bit depth;
no linearization is applied before the illumination model, which is
defined directly on encoded pixel values.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

__all__ = [
    "validate_rgb",
    "validate_matte",
    "load_image",
    "load_matte",
    "save_image",
    "binarize_matte",
    "rgb_to_lab",
    "resize_matte",
]

# sRGB -> XYZ (D65). The white point is taken as the exact row sums so
# that gray pixels map to a = b = 0 to machine precision.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = _RGB_TO_XYZ.sum(axis=1)


def validate_rgb(img: np.ndarray) -> np.ndarray:
    """Check shape (H, W, 3) with finite channels in [0, 1]; return the array."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image dimensions must be positive")
    # NaN fails both comparisons, so this also rejects non-finite values.
    if not (img.min() >= 0.0 and img.max() <= 1.0):
        raise ValueError("image channels must lie in [0, 1] and be finite")
    return img


def validate_matte(matte: np.ndarray) -> np.ndarray:
    """Check shape (H, W) with values in [0, 1]; return the array."""
    matte = np.asarray(matte, dtype=np.float64)
    if matte.ndim != 2:
        raise ValueError(f"expected (H, W) matte, got shape {matte.shape}")
    if matte.shape[0] < 1 or matte.shape[1] < 1:
        raise ValueError("matte dimensions must be positive")
    if not (matte.min() >= 0.0 and matte.max() <= 1.0):
        raise ValueError("matte values must lie in [0, 1] and be finite")
    return matte


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG or JPEG as an (H, W, 3) float64 array in [0, 1].

    8-bit inputs are divided by 255, 16-bit PNGs by 65535. Grayscale
    files are replicated across the three channels.
    """
    with Image.open(path) as im:
        if im.width < 1 or im.height < 1:
            raise ValueError(f"zero-dimension image: {path}")
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    return validate_rgb(np.clip(arr, 0.0, 1.0))


def load_matte(path: str | os.PathLike) -> np.ndarray:
    """Load a grayscale PNG as an (H, W) float64 matte in [0, 1]."""
    with Image.open(path) as im:
        if im.width < 1 or im.height < 1:
            raise ValueError(f"zero-dimension image: {path}")
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return validate_matte(np.clip(arr, 0.0, 1.0))


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write an RGB image or matte as an 8-bit PNG.

    Quantization is round-half-up (v -> floor(255*v + 0.5)) so output
    bytes are identical across platforms, and a save/load roundtrip
    differs from the original by at most 1/510 per channel.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        validate_matte(img)
        mode = "L"
    else:
        validate_rgb(img)
        mode = "RGB"
    quantized = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quantized, mode=mode).save(path, format="PNG")


def binarize_matte(matte: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary mask: True where matte >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    matte = validate_matte(matte)
    return matte >= threshold


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Convert an sRGB image in [0, 1] to CIELAB (D65 white point).

    Chain: sRGB decoding curve -> linear RGB -> XYZ -> LAB.
    """
    img = validate_rgb(img)
    linear = np.where(
        img <= 0.04045,
        img / 12.92,
        ((img + 0.055) / 1.055) ** 2.4,
    )
    xyz = linear @ _RGB_TO_XYZ.T
    ratio = xyz / _WHITE

    delta = 6.0 / 29.0
    f = np.where(
        ratio > delta**3,
        np.cbrt(ratio),
        ratio / (3.0 * delta**2) + 4.0 / 29.0,
    )
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.empty_like(img)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab


def resize_matte(matte: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a matte, values re-clamped to [0, 1]."""
    matte = validate_matte(matte)
    if matte.shape == (height, width):
        return matte
    im = Image.fromarray(matte.astype(np.float32), mode="F")
    resized = im.resize((width, height), Image.BILINEAR)
    return np.clip(np.asarray(resized, dtype=np.float64), 0.0, 1.0)
