"""Training-time augmentations on [3,H,W] tensors, synchronized across views.

Flips and rotations move both views together so augmented pairs look like
renders of a mirrored or re-headed world; dropout and jitter perturb each
image independently. Everything draws from the caller's generator, so a
step's augmentation depends only on (seed, step).
"""

from __future__ import annotations

import numpy as np


def flip_pair(street: np.ndarray, sat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mirror east-west: panorama columns reverse (column 0 stays the
    heading ray), the overhead raster mirrors across its vertical axis."""
    street_f = np.roll(street[..., ::-1], 1, axis=-1)
    sat_f = sat[..., ::-1]
    return np.ascontiguousarray(street_f), np.ascontiguousarray(sat_f)


def aug_sync_flip(street, sat, rng: np.random.Generator, p: float = 0.5):
    """With probability p flip both views; never just one of them."""
    if rng.random() < p:
        return flip_pair(street, sat)
    return street, sat


def rotate_pair(street: np.ndarray, sat: np.ndarray, theta: int) -> tuple[np.ndarray, np.ndarray]:
    """Advance the shared heading by theta in {0, 90, 180, 270} degrees."""
    if theta % 90:
        raise ValueError(f"rotation must be a multiple of 90 degrees, got {theta}")
    width = street.shape[-1]
    if width % 4:
        raise ValueError(f"panorama width {width} must divide into quarter turns")
    k = (theta // 90) % 4
    street_r = np.roll(street, -(theta % 360) * width // 360, axis=-1)
    sat_r = np.rot90(sat, k=k, axes=(-2, -1))
    return np.ascontiguousarray(street_r), np.ascontiguousarray(sat_r)


def aug_sync_rotate(street, sat, rng: np.random.Generator):
    theta = int(rng.integers(0, 4)) * 90
    return rotate_pair(street, sat, theta)


def grid_dropout(img: np.ndarray, rng: np.random.Generator, cell: int = 8, ratio: float = 0.5) -> np.ndarray:
    """Zero a ratio-sized square inside every grid cell."""
    if cell <= 0:
        raise ValueError(f"cell must be positive, got {cell}")
    if ratio <= 0:
        return img
    hole = max(1, int(round(cell * ratio)))
    h, w = img.shape[-2:]
    off_y = int(rng.integers(0, cell))
    off_x = int(rng.integers(0, cell))
    mask = np.ones((h, w), dtype=bool)
    for y in range(off_y - cell, h, cell):
        for x in range(off_x - cell, w, cell):
            mask[max(0, y) : max(0, y + hole), max(0, x) : max(0, x + hole)] = False
    out = img.copy()
    out[..., ~mask] = 0.0
    return out


def coarse_dropout(img: np.ndarray, rng: np.random.Generator, max_holes: int = 4, max_size: int = 8) -> np.ndarray:
    """Zero up to max_holes random rectangles, each up to max_size per side."""
    if max_size <= 0:
        raise ValueError(f"max_size must be positive, got {max_size}")
    if max_holes <= 0:
        return img
    h, w = img.shape[-2:]
    out = img.copy()
    n = int(rng.integers(0, max_holes + 1))
    for _ in range(n):
        hh = int(rng.integers(1, max_size + 1))
        ww = int(rng.integers(1, max_size + 1))
        y = int(rng.integers(0, max(1, h - hh + 1)))
        x = int(rng.integers(0, max(1, w - ww + 1)))
        out[..., y : y + hh, x : x + ww] = 0.0
    return out


def color_jitter(img: np.ndarray, rng: np.random.Generator, strength: float = 0.4) -> np.ndarray:
    """Random brightness/contrast/saturation factors in [1-s, 1+s], clamped."""
    if not 0.0 <= strength < 1.0:
        raise ValueError(f"strength must lie in [0, 1), got {strength}")
    if strength == 0.0:
        return img
    x = (img + 1.0) * 0.5  # work in [0, 1]
    b, c, s = (1.0 + strength * (2.0 * rng.random() - 1.0) for _ in range(3))
    x = x * b
    mean = x.mean()
    x = (x - mean) * c + mean
    gray = x.mean(axis=0, keepdims=True)
    x = gray + (x - gray) * s
    x = np.clip(x, 0.0, 1.0)
    return (x * 2.0 - 1.0).astype(img.dtype)
