"""Exact embedding retrieval and the evaluation reports built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NUM_CLASSES = 3
CLASS_NAMES = ("light", "medium", "heavy")


@dataclass(frozen=True)
class EmbeddingIndex:
    """Immutable unit-norm gallery with per-row ids and coordinates."""

    gallery: np.ndarray
    ids: tuple
    coords: tuple

    @property
    def size(self) -> int:
        return self.gallery.shape[0]


@dataclass(frozen=True)
class RetrievalReport:
    r_at_1: float
    r_at_5: float
    r_at_10: float
    r_at_top1pct: float
    n_queries: int
    n_gallery: int

    def as_row(self) -> dict:
        return {
            "r_at_1": self.r_at_1,
            "r_at_5": self.r_at_5,
            "r_at_10": self.r_at_10,
            "r_at_top1pct": self.r_at_top1pct,
            "n_queries": self.n_queries,
            "n_gallery": self.n_gallery,
        }


@dataclass(frozen=True)
class ClassificationReport:
    confusion: np.ndarray
    per_class: dict  # name -> {"precision": p, "recall": r, "f1": f}
    macro_precision: float
    macro_recall: float
    macro_f1: float
    overall_accuracy: float


def build_index(embeddings: np.ndarray, ids: Sequence, coords: Sequence) -> EmbeddingIndex:
    """Re-normalize rows defensively and freeze the gallery."""
    emb = np.array(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] < 1:
        raise ValueError(f"gallery must be a nonempty [N,D] matrix, got shape {emb.shape}")
    if len(ids) != emb.shape[0] or len(coords) != emb.shape[0]:
        raise ValueError("ids, coords and gallery rows must have equal lengths")
    seen = set()
    for i in ids:
        if i in seen:
            raise ValueError(f"duplicate id in gallery: {i!r}")
        seen.add(i)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.maximum(norms, np.finfo(np.float64).tiny)
    emb.setflags(write=False)
    return EmbeddingIndex(emb, tuple(ids), tuple(tuple(c) for c in coords))


def query_topk(index: EmbeddingIndex, q: np.ndarray, k: int) -> list[tuple]:
    """Exact top-k gallery entries by dot product, ties broken by ascending id."""
    n = index.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for gallery of {n}")
    scores = index.gallery @ np.asarray(q, dtype=np.float64)
    order = sorted(range(n), key=lambda i: (-scores[i], index.ids[i]))
    return [(index.ids[i], float(scores[i])) for i in order[:k]]


def true_ranks(index: EmbeddingIndex, queries: np.ndarray, pair_ids: Sequence) -> np.ndarray:
    """1-based rank of each query's true id under the exact similarity sort."""
    id_pos = {id_: i for i, id_ in enumerate(index.ids)}
    for id_ in pair_ids:
        if id_ not in id_pos:
            raise ValueError(f"query id {id_!r} missing from the gallery")
    queries = np.asarray(queries, dtype=np.float64)
    scores = queries @ index.gallery.T  # [Q, N]
    ranks = np.empty(len(pair_ids), dtype=np.int64)
    ids = index.ids
    for qi, id_ in enumerate(pair_ids):
        ti = id_pos[id_]
        s = scores[qi]
        st = s[ti]
        better = np.count_nonzero(s > st)
        # ties resolved by ascending id, matching query_topk
        tied_ahead = sum(1 for j in np.nonzero(s == st)[0] if j != ti and ids[j] < ids[ti])
        ranks[qi] = better + tied_ahead + 1
    return ranks


def recall_at_k(ranks: Sequence[int], k: int) -> float:
    """Percent of queries whose true match ranks within the top k."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ValueError("recall over an empty query set is undefined")
    if np.any(ranks < 1):
        raise ValueError("ranks are 1-based and must be positive")
    return 100.0 * float(np.count_nonzero(ranks <= k)) / ranks.size


def top1pct_k(n_gallery: int) -> int:
    """Gallery-relative cutoff: 1% of the gallery, never below one item."""
    if n_gallery < 1:
        raise ValueError("gallery must be nonempty")
    return max(1, math.ceil(n_gallery * 0.01))


def evaluate_retrieval(street_embeddings: np.ndarray, index: EmbeddingIndex, pair_ids: Sequence) -> RetrievalReport:
    ranks = true_ranks(index, street_embeddings, pair_ids)
    return RetrievalReport(
        r_at_1=recall_at_k(ranks, 1),
        r_at_5=recall_at_k(ranks, 5),
        r_at_10=recall_at_k(ranks, 10),
        r_at_top1pct=recall_at_k(ranks, top1pct_k(index.size)),
        n_queries=len(pair_ids),
        n_gallery=index.size,
    )


def geolocalize(street_image, encoder, params, index: EmbeddingIndex):
    """Return (lon, lat, matched id, score) for the top-1 gallery match."""
    if index.size < 1:
        raise ValueError("cannot geolocalize against an empty gallery")
    emb = encoder(street_image, params)
    emb = emb.data if hasattr(emb, "data") else np.asarray(emb)
    (best_id, score), = query_topk(index, emb, 1)
    pos = index.ids.index(best_id)
    lon, lat = index.coords[pos]
    return lon, lat, best_id, score


def confusion_matrix(pred: Sequence[int], gt: Sequence[int]) -> np.ndarray:
    """3x3 counts with rows = ground truth, columns = predicted."""
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"pred and gt lengths differ: {pred.shape} vs {gt.shape}")
    for name, v in (("pred", pred), ("gt", gt)):
        if v.size and (v.min() < 0 or v.max() >= NUM_CLASSES):
            raise ValueError(f"{name} contains a class outside 0..{NUM_CLASSES - 1}")
    cm = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(cm, (gt, pred), 1)
    return cm


def classification_report(confusion: np.ndarray) -> ClassificationReport:
    """Per-class precision/recall/F1 plus unweighted macro means and accuracy."""
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.shape != (NUM_CLASSES, NUM_CLASSES):
        raise ValueError(f"confusion matrix must be {NUM_CLASSES}x{NUM_CLASSES}, got {cm.shape}")
    total = int(cm.sum())
    if total < 1:
        raise ValueError("confusion matrix holds no samples")

    per_class = {}
    ps, rs, fs = [], [], []
    for c, name in enumerate(CLASS_NAMES):
        tp = float(cm[c, c])
        fp = float(cm[:, c].sum() - cm[c, c])
        fn = float(cm[c, :].sum() - cm[c, c])
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per_class[name] = {"precision": p, "recall": r, "f1": f1}
        ps.append(p)
        rs.append(r)
        fs.append(f1)

    return ClassificationReport(
        confusion=cm,
        per_class=per_class,
        macro_precision=float(np.mean(ps)),
        macro_recall=float(np.mean(rs)),
        macro_f1=float(np.mean(fs)),
        overall_accuracy=float(np.trace(cm)) / total,
    )
