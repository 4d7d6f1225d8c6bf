"""Raster decoding, cropping and resizing into model input tensors."""

from __future__ import annotations

import numpy as np


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear sampling of an [H,W,C] float image."""
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def to_model_range(img_u8: np.ndarray, dtype=np.float32) -> np.ndarray:
    """[H,W,3] uint8 -> [3,H,W] float in [-1, 1]."""
    x = img_u8.astype(dtype) / dtype(127.5) - dtype(1.0)
    return np.ascontiguousarray(x.transpose(2, 0, 1))


def crop_top_bottom(img: np.ndarray, frac: float) -> np.ndarray:
    """Drop ``frac`` of the rows from each of the top and bottom."""
    if not 0.0 <= frac < 0.5:
        raise ValueError(f"crop fraction must lie in [0, 0.5), got {frac}")
    h = img.shape[0]
    cut = int(round(h * frac))
    return img[cut : h - cut] if cut else img


def preprocess_pair(
    street_u8: np.ndarray,
    sat_u8: np.ndarray,
    height: int,
    crop_frac: float = 0.125,
    dtype=np.float32,
) -> tuple[np.ndarray, np.ndarray]:
    """Crop/resize a raw pair to ([3,H,2H], [3,H,H]) tensors in [-1, 1]."""
    for name, img in (("street", street_u8), ("sat", sat_u8)):
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"{name} raster must be [H,W,3], got shape {img.shape}")
    street = crop_top_bottom(street_u8.astype(np.float64), crop_frac)
    street = bilinear_resize(street, height, 2 * height)
    sat = bilinear_resize(sat_u8.astype(np.float64), height, height)

    def scale(img):
        x = (img / 127.5 - 1.0).astype(dtype)
        return np.ascontiguousarray(x.transpose(2, 0, 1))

    return scale(street), scale(sat)
