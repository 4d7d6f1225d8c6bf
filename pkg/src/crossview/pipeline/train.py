"""Training loops, held-out evaluation, and the train/test ratio sweep."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .. import arraycore as ac
from ..arraycore import Array, Tape, backward
from ..contrastive import (
    EmbeddingBatch,
    LossConfig,
    gps_group_batches,
    infonce_loss,
    similarity_mine_batches,
    smoothed_ce_rows,
)
from ..encoders import (
    ConvNeXtConfig,
    GCViTConfig,
    ParamSet,
    convnext_encode,
    dual_branch_logits,
    init_convnext_params,
    init_dual_branch_params,
)
from ..metrics import RetrievalReport, build_index, classification_report, confusion_matrix, evaluate_retrieval
from ..synthgen import DatasetManifest
from .augment import aug_sync_flip, aug_sync_rotate, coarse_dropout, color_jitter, grid_dropout
from .config import GEOLOC, TrainConfig
from .data import SampleStore, split_dataset
from .optim import AdamWState, adamw_step, lr_schedule


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    loss: float


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    evals: list = field(default_factory=list)

    def losses(self) -> list[float]:
        return [s.loss for s in self.steps]


def _augment_batch(streets: np.ndarray, sats: np.ndarray, cfg: TrainConfig, rng: np.random.Generator):
    """Per-sample augmentation; evaluation batches never pass through here."""
    s_out, a_out = [], []
    for i in range(streets.shape[0]):
        st, sa = streets[i], sats[i]
        if cfg.aug_flip:
            st, sa = aug_sync_flip(st, sa, rng)
        if cfg.aug_rotate:
            st, sa = aug_sync_rotate(st, sa, rng)
        if cfg.aug_grid_dropout:
            st, sa = grid_dropout(st, rng), grid_dropout(sa, rng)
        if cfg.aug_coarse_dropout:
            st, sa = coarse_dropout(st, rng), coarse_dropout(sa, rng)
        if cfg.aug_color_jitter:
            st = color_jitter(st, rng, cfg.color_jitter_strength)
            sa = color_jitter(sa, rng, cfg.color_jitter_strength)
        s_out.append(st)
        a_out.append(sa)
    return np.stack(s_out), np.stack(a_out)


def _chunked(ids: list[int], size: int):
    for i in range(0, len(ids), size):
        yield ids[i : i + size]


def embed_images(images: np.ndarray, mcfg: ConvNeXtConfig, params: ParamSet, batch: int = 32) -> np.ndarray:
    """Eager (untaped) embeddings for evaluation and mining."""
    outs = []
    for i in range(0, images.shape[0], batch):
        outs.append(convnext_encode(Array(images[i : i + batch]), mcfg, params).data)
    return np.concatenate(outs, axis=0)


def _named_grads(paramsets: dict, grad_map: dict) -> dict:
    grads = {}
    for set_name, ps in paramsets.items():
        grads[set_name] = {name: grad_map[arr] for name, arr in ps.items() if arr in grad_map}
    return grads


def eval_geoloc(store: SampleStore, test_ids: list[int], mcfg: ConvNeXtConfig, params: ParamSet) -> RetrievalReport:
    gallery = embed_images(store.sats(test_ids), mcfg, params)
    queries = embed_images(store.streets(test_ids), mcfg, params)
    index = build_index(gallery, test_ids, store.coord_list(test_ids))
    return evaluate_retrieval(queries, index, test_ids)


def train_geoloc(cfg: TrainConfig, model_cfg: ConvNeXtConfig | None = None, manifest: DatasetManifest | None = None):
    """Contrastive training of the shared-weight encoder.

    Epoch 1 groups batches by GPS proximity; later epochs re-embed the
    training gallery and group by feature similarity. Returns
    ({"encoder": params}, TrainLog, final RetrievalReport).
    """
    if cfg.task != GEOLOC:
        raise ValueError(f"config task is {cfg.task!r}, expected geoloc")
    manifest = manifest or DatasetManifest.load(cfg.data_dir)
    dtype = cfg.numpy_dtype()
    store = SampleStore(manifest, cfg.input_height, cfg.crop_frac, dtype)
    train_ids, test_ids = split_dataset(manifest, cfg.split_ratio, cfg.seed)
    if len(train_ids) < cfg.batch_size:
        raise ValueError(f"train split ({len(train_ids)}) smaller than batch size {cfg.batch_size}")

    mcfg = model_cfg or ConvNeXtConfig(embed_dim=cfg.embed_dim)
    params = init_convnext_params(mcfg, cfg.seed, dtype)
    loss_cfg = LossConfig(temperature=cfg.temperature, label_smoothing=cfg.label_smoothing)
    loss_params = None
    if cfg.learnable_temperature:
        loss_params = ParamSet()
        loss_params.add("log_tau", np.asarray(np.log(cfg.temperature), dtype=dtype))

    steps_per_epoch = -(-len(train_ids) // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    warmup_steps = cfg.warmup_epochs * steps_per_epoch
    state = AdamWState()
    tau_state = AdamWState()
    log = TrainLog()
    step = 0

    for epoch in range(cfg.epochs):
        if epoch == 0:
            plan = gps_group_batches(store.coord_list(train_ids), cfg.batch_size, cfg.seed)
        else:
            gallery = embed_images(store.sats(train_ids), mcfg, params)
            plan = similarity_mine_batches(None, gallery, cfg.batch_size, cfg.seed + epoch)
        for bi, group in enumerate(plan.batches):
            ids = [train_ids[j] for j in group]
            rng = np.random.default_rng([cfg.seed, epoch, bi])
            streets, sats = _augment_batch(store.streets(ids), store.sats(ids), cfg, rng)
            step += 1
            lr = lr_schedule(step, warmup_steps, total_steps, cfg.base_lr)
            with Tape() as tape:
                e_s = convnext_encode(Array(streets), mcfg, params)
                e_a = convnext_encode(Array(sats), mcfg, params)
                log_tau = loss_params["log_tau"] if loss_params is not None else None
                loss = infonce_loss(EmbeddingBatch(e_s, e_a), loss_cfg, log_tau=log_tau)
            tape.root = loss.nid
            grad_map = backward(tape)
            grads = _named_grads({"encoder": params}, grad_map)["encoder"]
            adamw_step(params, grads, state, lr, weight_decay=cfg.weight_decay)
            if loss_params is not None:
                tau_grads = _named_grads({"loss": loss_params}, grad_map)["loss"]
                adamw_step(loss_params, tau_grads, tau_state, lr)  # no decay on the scale
            log.steps.append(StepRecord(step, epoch, lr, float(loss.data)))
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            report = eval_geoloc(store, test_ids, mcfg, params)
            log.evals.append({"epoch": epoch, **report.as_row()})

    final = eval_geoloc(store, test_ids, mcfg, params)
    log.evals.append({"epoch": cfg.epochs - 1, **final.as_row()})
    return {"encoder": params}, log, final


def _apply_view_mode(streets: np.ndarray, sats: np.ndarray, view_mode: str):
    """Single-view ablations zero out the other branch's input pathway."""
    if view_mode == "street":
        return streets, np.zeros_like(sats)
    if view_mode == "sat":
        return np.zeros_like(streets), sats
    return streets, sats


def predict_damage(
    store: SampleStore,
    ids: list[int],
    gcfg: GCViTConfig,
    branches: tuple[ParamSet, ParamSet, ParamSet],
    view_mode: str = "cross",
    batch: int = 32,
) -> np.ndarray:
    branch_s, branch_a, head = branches
    preds = []
    for chunk in _chunked(list(ids), batch):
        streets, sats = _apply_view_mode(store.streets(chunk), store.sats(chunk), view_mode)
        logits = dual_branch_logits(Array(streets), Array(sats), gcfg, branch_s, branch_a, head)
        preds.append(np.argmax(logits.data, axis=-1))
    return np.concatenate(preds)


def eval_damage(store, test_ids, gcfg, branches, view_mode="cross"):
    preds = predict_damage(store, test_ids, gcfg, branches, view_mode)
    cm = confusion_matrix(preds, store.labels(test_ids))
    return classification_report(cm)


def train_damage(cfg: TrainConfig, model_cfg: GCViTConfig | None = None, manifest: DatasetManifest | None = None):
    """Label-smoothed cross-entropy training of the dual-branch classifier.

    Returns ({"branch_street", "branch_sat", "head"}, TrainLog, report).
    """
    if cfg.task != "damage":
        raise ValueError(f"config task is {cfg.task!r}, expected damage")
    manifest = manifest or DatasetManifest.load(cfg.data_dir)
    dtype = cfg.numpy_dtype()
    store = SampleStore(manifest, cfg.input_height, cfg.crop_frac, dtype)
    train_ids, test_ids = split_dataset(manifest, cfg.split_ratio, cfg.seed)

    gcfg = model_cfg or GCViTConfig()
    branch_s, branch_a, head = init_dual_branch_params(gcfg, cfg.seed, dtype, side0=cfg.input_height // gcfg.patch_size)
    paramsets = {"branch_street": branch_s, "branch_sat": branch_a, "head": head}
    states = {name: AdamWState() for name in paramsets}

    steps_per_epoch = -(-len(train_ids) // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    warmup_steps = cfg.warmup_epochs * steps_per_epoch
    log = TrainLog()
    step = 0

    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, 101, epoch]).permutation(len(train_ids))
        epoch_ids = [train_ids[j] for j in order]
        for bi, ids in enumerate(_chunked(epoch_ids, cfg.batch_size)):
            rng = np.random.default_rng([cfg.seed, epoch, bi])
            streets, sats = _augment_batch(store.streets(ids), store.sats(ids), cfg, rng)
            streets, sats = _apply_view_mode(streets, sats, cfg.view_mode)
            labels = store.labels(ids)
            step += 1
            lr = lr_schedule(step, warmup_steps, total_steps, cfg.base_lr)
            with Tape() as tape:
                logits = dual_branch_logits(Array(streets), Array(sats), gcfg, branch_s, branch_a, head)
                loss = smoothed_ce_rows(logits, labels, cfg.label_smoothing)
            tape.root = loss.nid
            grad_map = backward(tape)
            grads = _named_grads(paramsets, grad_map)
            for name, ps in paramsets.items():
                adamw_step(ps, grads[name], states[name], lr, weight_decay=cfg.weight_decay)
            log.steps.append(StepRecord(step, epoch, lr, float(loss.data)))
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            report = eval_damage(store, test_ids, gcfg, (branch_s, branch_a, head), cfg.view_mode)
            log.evals.append({"epoch": epoch, "overall_accuracy": report.overall_accuracy})

    final = eval_damage(store, test_ids, gcfg, (branch_s, branch_a, head), cfg.view_mode)
    log.evals.append({"epoch": cfg.epochs - 1, "overall_accuracy": final.overall_accuracy})
    return paramsets, log, final


def run_ratio_sweep(base_cfg: TrainConfig, ratios: list[str], seeds: list[int], manifest=None) -> list[dict]:
    """Train/evaluate per (ratio, seed); rows ordered like the report columns."""
    rows = []
    for ratio in ratios:
        for seed in seeds:
            cfg = dataclasses.replace(base_cfg, split_ratio=ratio, seed=seed)
            _, _, report = train_geoloc(cfg, manifest=manifest)
            rows.append(
                {
                    "ratio": ratio,
                    "seed": seed,
                    "r_at_1": report.r_at_1,
                    "r_at_5": report.r_at_5,
                    "r_at_10": report.r_at_10,
                    "r_at_top1pct": report.r_at_top1pct,
                }
            )
    return rows
