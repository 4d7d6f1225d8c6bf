"""Dataset splitting and in-memory sample preparation for training."""

from __future__ import annotations

import numpy as np

from ..synthgen import DatasetManifest
from .config import parse_ratio
from .preprocess import preprocess_pair


def split_dataset(manifest: DatasetManifest, ratio: str, seed: int) -> tuple[list[int], list[int]]:
    """Stratified-by-damage shuffle split; returns (train ids, test ids)."""
    a, b = parse_ratio(ratio)
    frac = a / (a + b)
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {0: [], 1: [], 2: []}
    for rec in manifest.records:
        by_class[rec.damage].append(rec.id)
    train, test = [], []
    for cls in sorted(by_class):
        ids = np.array(by_class[cls])
        if ids.size == 0:
            raise ValueError(f"damage class {cls} has no samples; cannot stratify")
        perm = rng.permutation(ids)
        n_train = int(round(ids.size * frac))
        train.extend(int(i) for i in perm[:n_train])
        test.extend(int(i) for i in perm[n_train:])
    return sorted(train), sorted(test)


class SampleStore:
    """Preprocessed tensors for every manifest record, held in memory."""

    def __init__(self, manifest: DatasetManifest, height: int, crop_frac: float, dtype):
        self.manifest = manifest
        self.height = height
        self.by_id: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.damage: dict[int, int] = {}
        self.coords: dict[int, tuple[float, float]] = {}
        for rec in manifest.records:
            street_u8, sat_u8 = manifest.load_pair(rec)
            self.by_id[rec.id] = preprocess_pair(street_u8, sat_u8, height, crop_frac, dtype)
            self.damage[rec.id] = rec.damage
            self.coords[rec.id] = (rec.lon, rec.lat)

    def streets(self, ids) -> np.ndarray:
        return np.stack([self.by_id[i][0] for i in ids])

    def sats(self, ids) -> np.ndarray:
        return np.stack([self.by_id[i][1] for i in ids])

    def labels(self, ids) -> np.ndarray:
        return np.array([self.damage[i] for i in ids], dtype=np.int64)

    def coord_list(self, ids) -> list[tuple[float, float]]:
        return [self.coords[i] for i in ids]
