"""Contrastive objectives and hard-negative batch construction.

The retrieval loss treats the matching overhead tile as the correct class
among all in-batch candidates, scored by dot product over unit embeddings
and sharpened by a temperature. Batch planners pack geographically or
visually similar samples together so the in-batch negatives are hard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import arraycore as ac
from .arraycore import Array

EARTH_RADIUS_M = 6_371_000.0


@dataclass
class LossConfig:
    temperature: float = 0.07
    label_smoothing: float = 0.1
    margin: float = 0.5
    symmetric: bool = True  # average both retrieval directions

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing must lie in [0,1), got {self.label_smoothing}")
        if self.margin < 0:
            raise ValueError(f"margin must be nonnegative, got {self.margin}")


@dataclass
class EmbeddingBatch:
    """Paired unit-norm embeddings; row i of each side is a positive pair."""

    anchors: Array
    candidates: Array
    pair_ids: Optional[Sequence] = None

    def __post_init__(self):
        a, c = self.anchors.data, self.candidates.data
        if a.ndim != 2 or c.ndim != 2 or a.shape != c.shape:
            raise ValueError(f"embedding sides must be matching [N,D] matrices, got {a.shape} and {c.shape}")
        if a.shape[0] < 1:
            raise ValueError("batch must contain at least one pair")
        for name, m in (("anchors", a), ("candidates", c)):
            norms = np.linalg.norm(m, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-4:
                raise ValueError(f"{name} rows must be unit norm within 1e-4")
        if self.pair_ids is not None:
            if len(self.pair_ids) != a.shape[0]:
                raise ValueError("pair_ids length must equal batch size")
            if len(set(self.pair_ids)) != len(self.pair_ids):
                raise ValueError("duplicate pairing indices in batch")

    def __len__(self):
        return self.anchors.shape[0]


@dataclass
class BatchPlan:
    """Ordered partition of dataset indices into training batches."""

    batches: list[list[int]] = field(default_factory=list)

    def indices(self) -> list[int]:
        return [i for b in self.batches for i in b]

    def validate_partition(self, n: int):
        flat = self.indices()
        if sorted(flat) != list(range(n)):
            raise ValueError("batch plan is not a partition of the index set")


def triplet_loss(e_a: Array, e_p: Array, e_n: Array, margin: float = 0.5) -> Array:
    """Hinge on the anchor-positive vs anchor-negative embedding distances."""
    if not (e_a.shape == e_p.shape == e_n.shape):
        raise ValueError(f"embedding shapes differ: {e_a.shape}, {e_p.shape}, {e_n.shape}")
    dp = ac.sqrt(ac.sum_((e_a - e_p) * (e_a - e_p)))
    dn = ac.sqrt(ac.sum_((e_a - e_n) * (e_a - e_n)))
    return ac.relu(dp - dn + margin)


def label_smoothed_ce(logits: Array, target: int, smoothing: float = 0.0) -> Array:
    """Cross-entropy against a target softened by spreading mass over all classes."""
    n = logits.shape[-1]
    if logits.ndim != 1:
        raise ValueError(f"logits must be 1-D, got shape {logits.shape}")
    if not 0 <= target < n:
        raise ValueError(f"target {target} out of range for {n} logits")
    q = np.full(n, smoothing / n, dtype=logits.dtype)
    q[target] += 1.0 - smoothing
    return ac.neg(ac.sum_(ac.log_softmax(logits, axis=-1) * Array(q)))


def smoothed_ce_rows(logits: Array, targets: np.ndarray, smoothing: float) -> Array:
    """Mean label-smoothed cross-entropy over the rows of a logit matrix."""
    n_rows, n_cols = logits.shape
    q = np.full((n_rows, n_cols), smoothing / n_cols, dtype=logits.dtype)
    q[np.arange(n_rows), targets] += 1.0 - smoothing
    ls = ac.log_softmax(logits, axis=-1)
    return ac.neg(ac.sum_(ls * Array(q))) / float(n_rows)


def infonce_loss(batch: EmbeddingBatch, cfg: LossConfig, log_tau: Optional[Array] = None) -> Array:
    """Symmetric in-batch contrastive loss with diagonal positives.

    ``log_tau``, when given, is a learnable scalar holding log temperature
    and overrides the fixed ``cfg.temperature``.
    """
    n = len(batch)
    sim = ac.matmul(batch.anchors, ac.transpose(batch.candidates, (1, 0)))
    sim = sim / ac.exp(log_tau) if log_tau is not None else sim / cfg.temperature
    targets = np.arange(n)
    loss = smoothed_ce_rows(sim, targets, cfg.label_smoothing)
    if cfg.symmetric:
        loss_t = smoothed_ce_rows(ac.transpose(sim, (1, 0)), targets, cfg.label_smoothing)
        loss = (loss + loss_t) * 0.5
    return loss


def haversine(c1: tuple[float, float], c2: tuple[float, float]) -> float:
    """Great-circle distance in meters between (lon, lat) pairs in degrees."""
    for c in (c1, c2):
        if not -90.0 <= c[1] <= 90.0:
            raise ValueError(f"latitude {c[1]} outside [-90, 90]")
    lon1, lat1 = math.radians(c1[0]), math.radians(c1[1])
    lon2, lat2 = math.radians(c2[0]), math.radians(c2[1])
    s_lat = math.sin(0.5 * (lat2 - lat1))
    s_lon = math.sin(0.5 * (lon2 - lon1))
    a = s_lat * s_lat + math.cos(lat1) * math.cos(lat2) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def pairwise_haversine(coords: Sequence[tuple[float, float]]) -> np.ndarray:
    lonlat = np.radians(np.asarray(coords, dtype=np.float64))
    lon, lat = lonlat[:, 0], lonlat[:, 1]
    s_lat = np.sin(0.5 * (lat[:, None] - lat[None, :]))
    s_lon = np.sin(0.5 * (lon[:, None] - lon[None, :]))
    a = s_lat**2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * s_lon**2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))


def _greedy_plan(order: np.ndarray, closeness: np.ndarray, batch_size: int) -> BatchPlan:
    """Fill batches anchor-first with the closest unassigned companions.

    ``closeness[i, j]``: lower is closer. Ties break toward the lower index.
    """
    n = len(order)
    assigned = np.zeros(n, dtype=bool)
    batches: list[list[int]] = []
    idx_all = np.arange(n)
    for anchor in order:
        if assigned[anchor]:
            continue
        assigned[anchor] = True
        batch = [int(anchor)]
        free = idx_all[~assigned]
        if free.size:
            want = min(batch_size - 1, free.size)
            ranked = free[np.lexsort((free, closeness[anchor, free]))]
            chosen = ranked[:want]
            assigned[chosen] = True
            batch.extend(int(i) for i in chosen)
        batches.append(batch)
    return BatchPlan(batches)


def gps_group_batches(coords: Sequence[tuple[float, float]], batch_size: int, seed: int) -> BatchPlan:
    """Partition indices so each batch clusters geographically near samples."""
    if batch_size < 2:
        raise ValueError(f"batch_size must be at least 2, got {batch_size}")
    n = len(coords)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    dist = pairwise_haversine(coords)
    return _greedy_plan(order, dist, batch_size)


def similarity_mine_batches(e_s, e_a: np.ndarray, batch_size: int, seed: int) -> BatchPlan:
    """Partition indices so each batch clusters visually similar gallery items.

    Mining runs on the overhead/gallery side: companions for an anchor are
    the unassigned rows of ``e_a`` most similar to the anchor's row. The
    street-side embeddings are accepted for interface symmetry and may be
    ``None``.
    """
    if batch_size < 2:
        raise ValueError(f"batch_size must be at least 2, got {batch_size}")
    e_a = np.asarray(e_a)
    for m in (e_s, e_a):
        if m is not None and np.max(np.abs(np.linalg.norm(np.asarray(m), axis=1) - 1.0)) > 1e-3:
            raise ValueError("embedding rows must be unit norm")
    n = e_a.shape[0]
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    sim = e_a @ e_a.T
    return _greedy_plan(order, -sim, batch_size)
