"""Dataset emission: rendered pairs on disk plus a JSON-lines manifest."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..ppm import read_ppm, write_ppm
from .render import render_overhead, render_panorama
from .scene import DEFAULT_GENERATOR, GeneratorConfig, generate_scene

MANIFEST_NAME = "manifest.jsonl"
META_NAME = "meta.json"

# record keys, in emission order
_KEYS = ("id", "street", "sat", "lon", "lat", "heading_deg", "damage")


@dataclass(frozen=True)
class SampleRecord:
    id: int
    street: str
    sat: str
    lon: float
    lat: float
    heading_deg: float
    damage: int


@dataclass
class DatasetManifest:
    root: Path
    records: list[SampleRecord]

    def __len__(self):
        return len(self.records)

    def street_path(self, rec: SampleRecord) -> Path:
        return self.root / rec.street

    def sat_path(self, rec: SampleRecord) -> Path:
        return self.root / rec.sat

    def load_pair(self, rec: SampleRecord) -> tuple[np.ndarray, np.ndarray]:
        return read_ppm(self.street_path(rec)), read_ppm(self.sat_path(rec))

    def coords(self) -> list[tuple[float, float]]:
        return [(r.lon, r.lat) for r in self.records]

    def save(self):
        path = self.root / MANIFEST_NAME
        with open(path, "w", encoding="utf-8") as f:
            for rec in self.records:
                row = {k: getattr(rec, k) for k in _KEYS}
                f.write(json.dumps(row) + "\n")

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        path = root / MANIFEST_NAME
        records = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                if set(row) != set(_KEYS):
                    raise ValueError(f"manifest record keys {sorted(row)} differ from {sorted(_KEYS)}")
                records.append(SampleRecord(**row))
        ids = [r.id for r in records]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids are not unique")
        for r in records:
            if r.damage not in (0, 1, 2):
                raise ValueError(f"record {r.id}: damage {r.damage} outside 0..2")
            for p in (root / r.street, root / r.sat):
                if not p.exists():
                    raise FileNotFoundError(f"record {r.id}: missing raster {p}")
        return cls(root, records)


def balanced_labels(n: int) -> list[int]:
    """Class labels with counts n/3 each, off by at most one."""
    return [i % 3 for i in range(n)]


def jittered_grid(n: int, rng: np.random.Generator, lon_range, lat_range) -> list[tuple[float, float]]:
    """Scene centers on a jittered grid, so GPS batching has structure."""
    g = int(np.ceil(np.sqrt(n)))
    cells = [(i, j) for i in range(g) for j in range(g)][:n]
    lon0, lon1 = lon_range
    lat0, lat1 = lat_range
    dl, db = (lon1 - lon0) / g, (lat1 - lat0) / g
    out = []
    for i, j in cells:
        out.append(
            (
                lon0 + (i + 0.5 + float(rng.uniform(-0.35, 0.35))) * dl,
                lat0 + (j + 0.5 + float(rng.uniform(-0.35, 0.35))) * db,
            )
        )
    return out


def emit_dataset(
    n_samples: int,
    seed: int,
    out_dir,
    class_balance=None,
    overhead_px: int = 64,
    pano_size: tuple = (64, 128),
    lon_range: tuple = (10.0, 10.05),
    lat_range: tuple = (50.0, 50.05),
    gen_cfg: GeneratorConfig = DEFAULT_GENERATOR,
) -> DatasetManifest:
    """Render ``n_samples`` paired scenes under ``out_dir`` and write the manifest.

    Per-sample seeds derive as ``seed ^ id`` so records are independent of
    emission order; regenerating with the same arguments is byte-identical.
    """
    if n_samples < 3:
        raise ValueError(f"need at least 3 samples, got {n_samples}")
    out = Path(out_dir)
    try:
        (out / "street").mkdir(parents=True, exist_ok=True)
        (out / "sat").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ValueError(f"cannot create output directory {out}: {e}") from e

    labels = list(class_balance) if class_balance is not None else balanced_labels(n_samples)
    if len(labels) != n_samples:
        raise ValueError("class_balance length must equal n_samples")
    rng = np.random.default_rng(seed)
    centers = jittered_grid(n_samples, rng, lon_range, lat_range)

    pano_h, pano_w = pano_size
    records = []
    for i in range(n_samples):
        scene = generate_scene(seed ^ i, labels[i], center=centers[i], cfg=gen_cfg)
        scene = dataclasses.replace(scene, center=centers[i])
        street_rel = os.path.join("street", f"{i:05d}.ppm")
        sat_rel = os.path.join("sat", f"{i:05d}.ppm")
        write_ppm(out / street_rel, render_panorama(scene, pano_w, pano_h))
        write_ppm(out / sat_rel, render_overhead(scene, overhead_px))
        records.append(
            SampleRecord(
                id=i,
                street=street_rel,
                sat=sat_rel,
                lon=centers[i][0],
                lat=centers[i][1],
                heading_deg=scene.heading_deg,
                damage=labels[i],
            )
        )

    manifest = DatasetManifest(out, records)
    manifest.save()
    meta = {
        "n_samples": n_samples,
        "seed": seed,
        "extent_m": gen_cfg.extent_m,
        "overhead_px": overhead_px,
        "overhead_m_per_px": gen_cfg.extent_m / overhead_px,
        "pano_size": [pano_h, pano_w],
        "lon_range": list(lon_range),
        "lat_range": list(lat_range),
    }
    with open(out / META_NAME, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def water_fraction(img: np.ndarray) -> float:
    """Fraction of pixels in the water palette (blue-dominant)."""
    r = img[..., 0].astype(np.int32)
    g = img[..., 1].astype(np.int32)
    b = img[..., 2].astype(np.int32)
    return float(np.mean((b - np.maximum(r, g) > 25) & (b > 140)))


def trivial_damage_classifier(sat_img: np.ndarray, t_light: float = 0.0005, t_heavy: float = 0.016) -> int:
    """Water-fraction thresholds only; the floor any learned model must beat."""
    f = water_fraction(sat_img)
    if f < t_light:
        return 0
    return 1 if f < t_heavy else 2
