"""CSV serialization of evaluation reports and PGM export of similarities."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..metrics import CLASS_NAMES, ClassificationReport, RetrievalReport, classification_report
from ..ppm import write_pgm

RETRIEVAL_COLUMNS = ("r_at_1", "r_at_5", "r_at_10", "r_at_top1pct", "n_queries", "n_gallery")


def write_retrieval_csv(report: RetrievalReport, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(RETRIEVAL_COLUMNS)
        row = report.as_row()
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in RETRIEVAL_COLUMNS])


def read_retrieval_csv(path) -> RetrievalReport:
    with open(Path(path), newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != RETRIEVAL_COLUMNS:
        raise ValueError(f"{path}: unexpected retrieval CSV header {rows[:1]}")
    vals = dict(zip(RETRIEVAL_COLUMNS, rows[1]))
    return RetrievalReport(
        r_at_1=float(vals["r_at_1"]),
        r_at_5=float(vals["r_at_5"]),
        r_at_10=float(vals["r_at_10"]),
        r_at_top1pct=float(vals["r_at_top1pct"]),
        n_queries=int(vals["n_queries"]),
        n_gallery=int(vals["n_gallery"]),
    )


def write_classification_csv(report: ClassificationReport, path):
    """Confusion block first, then per-class and macro metric rows."""
    with open(Path(path), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["confusion"] + [f"pred_{c}" for c in CLASS_NAMES])
        for gi, name in enumerate(CLASS_NAMES):
            w.writerow([f"gt_{name}"] + [int(x) for x in report.confusion[gi]])
        w.writerow(["class", "precision", "recall", "f1"])
        for name in CLASS_NAMES:
            pc = report.per_class[name]
            w.writerow([name, repr(pc["precision"]), repr(pc["recall"]), repr(pc["f1"])])
        w.writerow(["macro", repr(report.macro_precision), repr(report.macro_recall), repr(report.macro_f1)])
        w.writerow(["overall_accuracy", repr(report.overall_accuracy)])


def read_classification_csv(path) -> ClassificationReport:
    with open(Path(path), newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][0] != "confusion":
        raise ValueError(f"{path}: unexpected classification CSV header")
    confusion = np.array([[int(x) for x in rows[1 + i][1:]] for i in range(3)], dtype=np.int64)
    return classification_report(confusion)


def write_ratio_sweep_csv(rows: list[dict], path):
    """One row per (ratio, seed) run, recall columns in report order."""
    cols = ("ratio", "seed", "r_at_1", "r_at_5", "r_at_10", "r_at_top1pct")
    with open(Path(path), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for row in rows:
            w.writerow([row["ratio"], row["seed"]] + [repr(float(row[c])) for c in cols[2:]])


def export_similarity_pgm(sim: np.ndarray, path):
    """Map [-1, 1] similarities onto 8-bit gray and write a P5 raster."""
    sim = np.asarray(sim, dtype=np.float64)
    img = np.clip(np.rint((sim + 1.0) * 127.5), 0, 255).astype(np.uint8)
    write_pgm(path, img)
