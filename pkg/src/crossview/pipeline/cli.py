"""Command-line entry points tying generation, training and evaluation together.

Every subcommand exits nonzero on error and writes report files only after
its run completed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ..arraycore import Array
from ..encoders import ConvNeXtConfig, GCViTConfig, convnext_encode
from ..metrics import build_index, query_topk
from ..ppm import read_ppm
from ..synthgen import DatasetManifest, emit_dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .config import (
    DAMAGE,
    GEOLOC,
    TrainConfig,
    config_from_dict,
    config_to_dict,
    default_damage_config,
    default_geoloc_config,
    load_config,
)
from .data import SampleStore, split_dataset
from .preprocess import preprocess_pair
from .reports import (
    export_similarity_pgm,
    write_classification_csv,
    write_ratio_sweep_csv,
    write_retrieval_csv,
)
from .train import embed_images, eval_damage, eval_geoloc, run_ratio_sweep, train_damage, train_geoloc


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file mirroring the train config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dtype", choices=("f32", "f64"), help="override the config dtype")


def _resolve_config(args, task: str) -> TrainConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.task != task:
            raise ValueError(f"config task {cfg.task!r} does not match subcommand {task!r}")
    else:
        cfg = default_geoloc_config() if task == GEOLOC else default_damage_config()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.dtype is not None:
        updates["dtype"] = args.dtype
    if getattr(args, "data", None):
        updates["data_dir"] = args.data
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _write_log(log, path: Path):
    with open(path, "w", encoding="utf-8") as f:
        for s in log.steps:
            f.write(json.dumps({"step": s.step, "epoch": s.epoch, "lr": s.lr, "loss": s.loss}) + "\n")
        for e in log.evals:
            f.write(json.dumps({"eval": e}) + "\n")


def cmd_synth(args) -> int:
    emit_dataset(args.n, seed=args.seed if args.seed is not None else 0, out_dir=args.out)
    print(f"wrote {args.n} sample pairs under {args.out}")
    return 0


def cmd_train_geoloc(args) -> int:
    cfg = _resolve_config(args, GEOLOC)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, log, report = train_geoloc(cfg)
    meta = {"task": GEOLOC, "train": config_to_dict(cfg), "model": {"embed_dim": cfg.embed_dim}}
    save_checkpoint(params, out / "geoloc.ckpt", config=meta)
    _write_log(log, out / "train_log.jsonl")
    write_retrieval_csv(report, out / "retrieval.csv")
    print(f"R@1 {report.r_at_1:.2f}  R@5 {report.r_at_5:.2f}  R@10 {report.r_at_10:.2f}  R@1% {report.r_at_top1pct:.2f}")
    return 0


def cmd_train_damage(args) -> int:
    cfg = _resolve_config(args, DAMAGE)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, log, report = train_damage(cfg)
    meta = {"task": DAMAGE, "train": config_to_dict(cfg), "model": {}}
    save_checkpoint(params, out / "damage.ckpt", config=meta)
    _write_log(log, out / "train_log.jsonl")
    write_classification_csv(report, out / "classification.csv")
    print(f"OA {100 * report.overall_accuracy:.2f}  macro F1 {report.macro_f1:.3f}")
    return 0


def _restore_geoloc(ckpt_path):
    paramsets, meta = load_checkpoint(ckpt_path)
    cfg = config_from_dict(meta["train"])
    mcfg = ConvNeXtConfig(embed_dim=meta["model"].get("embed_dim", cfg.embed_dim))
    return paramsets["encoder"], cfg, mcfg


def cmd_eval_geoloc(args) -> int:
    params, cfg, mcfg = _restore_geoloc(args.checkpoint)
    manifest = DatasetManifest.load(args.data or cfg.data_dir)
    store = SampleStore(manifest, cfg.input_height, cfg.crop_frac, cfg.numpy_dtype())
    _, test_ids = split_dataset(manifest, cfg.split_ratio, cfg.seed)
    report = eval_geoloc(store, test_ids, mcfg, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_retrieval_csv(report, out / "retrieval.csv")
    if args.similarity_pgm:
        gallery = embed_images(store.sats(test_ids), mcfg, params)
        queries = embed_images(store.streets(test_ids), mcfg, params)
        export_similarity_pgm(queries @ gallery.T, out / "similarity.pgm")
    print(f"R@1 {report.r_at_1:.2f}  R@5 {report.r_at_5:.2f}  R@10 {report.r_at_10:.2f}  R@1% {report.r_at_top1pct:.2f}")
    return 0


def cmd_eval_damage(args) -> int:
    paramsets, meta = load_checkpoint(args.checkpoint)
    cfg = config_from_dict(meta["train"])
    gcfg = GCViTConfig()
    manifest = DatasetManifest.load(args.data or cfg.data_dir)
    store = SampleStore(manifest, cfg.input_height, cfg.crop_frac, cfg.numpy_dtype())
    _, test_ids = split_dataset(manifest, cfg.split_ratio, cfg.seed)
    branches = (paramsets["branch_street"], paramsets["branch_sat"], paramsets["head"])
    report = eval_damage(store, test_ids, gcfg, branches, cfg.view_mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_classification_csv(report, out / "classification.csv")
    print(f"OA {100 * report.overall_accuracy:.2f}  macro F1 {report.macro_f1:.3f}")
    return 0


def cmd_query(args) -> int:
    params, cfg, mcfg = _restore_geoloc(args.checkpoint)
    manifest = DatasetManifest.load(args.data or cfg.data_dir)
    store = SampleStore(manifest, cfg.input_height, cfg.crop_frac, cfg.numpy_dtype())
    gallery_ids = [r.id for r in manifest.records]
    gallery = embed_images(store.sats(gallery_ids), mcfg, params)
    index = build_index(gallery, gallery_ids, store.coord_list(gallery_ids))

    street_u8 = read_ppm(args.panorama)
    sat_stub = np.zeros((cfg.input_height, cfg.input_height, 3), dtype=np.uint8)
    street, _ = preprocess_pair(street_u8, sat_stub, cfg.input_height, cfg.crop_frac, cfg.numpy_dtype())
    emb = convnext_encode(Array(street), mcfg, params).data

    hits = query_topk(index, emb, min(args.k, index.size))
    best_id = hits[0][0]
    pos = index.ids.index(best_id)
    lon, lat = index.coords[pos]
    print(f"estimated location: lon {lon:.6f} lat {lat:.6f} (gallery id {best_id}, score {hits[0][1]:.4f})")
    print("rank\tid\tscore")
    for rank, (gid, score) in enumerate(hits, start=1):
        print(f"{rank}\t{gid}\t{score:.4f}")
    return 0


def cmd_sweep_ratio(args) -> int:
    cfg = _resolve_config(args, GEOLOC)
    ratios = args.ratios.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = run_ratio_sweep(cfg, ratios, seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ratio_sweep_csv(rows, out / "ratio_sweep.csv")
    for row in rows:
        print(f"{row['ratio']}\tseed {row['seed']}\tR@1 {row['r_at_1']:.2f}\tR@5 {row['r_at_5']:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossview", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic paired dataset")
    s.add_argument("--n", type=int, default=320)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)

    for name, fn in (("train-geoloc", cmd_train_geoloc), ("train-damage", cmd_train_damage)):
        s = sub.add_parser(name, help=f"run {name.replace('-', ' ')}")
        _add_common(s)
        s.add_argument("--data", help="dataset directory (overrides config data_dir)")
        s.set_defaults(fn=fn)

    for name, fn in (("eval-geoloc", cmd_eval_geoloc), ("eval-damage", cmd_eval_damage)):
        s = sub.add_parser(name, help=f"evaluate a checkpoint")
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--data", help="dataset directory (defaults to the training one)")
        s.add_argument("--out", required=True)
        if name == "eval-geoloc":
            s.add_argument("--similarity-pgm", action="store_true", help="also export the similarity matrix")
        s.set_defaults(fn=fn)

    s = sub.add_parser("query", help="geolocalize one panorama against a gallery")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--panorama", required=True, help="PPM panorama to locate")
    s.add_argument("--data", help="gallery dataset directory")
    s.add_argument("--k", type=int, default=5)
    s.set_defaults(fn=cmd_query)

    s = sub.add_parser("sweep-ratio", help="train/test ratio ablation table")
    _add_common(s)
    s.add_argument("--data", help="dataset directory")
    s.add_argument("--ratios", default="1:9,2:8,3:7,4:6,5:5")
    s.add_argument("--seeds", default="0,1,2")
    s.set_defaults(fn=cmd_sweep_ratio)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:  # CLI contract: nonzero exit, message on stderr
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
