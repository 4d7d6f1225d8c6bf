"""Binary PPM (P6) / PGM (P5) raster readers and writers."""

from __future__ import annotations

import os

import numpy as np


def write_ppm(path, img: np.ndarray):
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM wants [H,W,3] uint8, got shape {img.shape}")
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def write_pgm(path, img: np.ndarray):
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError(f"PGM wants [H,W] uint8, got shape {img.shape}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def _read_header(f, magic: bytes, path):
    if f.read(2) != magic:
        raise ValueError(f"{os.fspath(path)}: not a {magic.decode()} raster")
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise ValueError(f"{os.fspath(path)}: truncated header")
        text = line.split(b"#", 1)[0]
        fields.extend(int(tok) for tok in text.split())
    w, h, maxval = fields[:3]
    if maxval != 255:
        raise ValueError(f"{os.fspath(path)}: unsupported maxval {maxval}")
    return w, h


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_header(f, b"P6", path)
        data = f.read(w * h * 3)
        if len(data) != w * h * 3:
            raise ValueError(f"{os.fspath(path)}: truncated pixel data")
        return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_header(f, b"P5", path)
        data = f.read(w * h)
        if len(data) != w * h:
            raise ValueError(f"{os.fspath(path)}: truncated pixel data")
        return np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy()
