"""Preprocessing, augmentation, optimization, checkpoints, training, CLI."""

from .augment import aug_sync_flip, aug_sync_rotate, coarse_dropout, color_jitter, flip_pair, grid_dropout, rotate_pair
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import (
    DAMAGE,
    GEOLOC,
    TrainConfig,
    config_from_dict,
    config_to_dict,
    default_damage_config,
    default_geoloc_config,
    load_config,
    parse_ratio,
    save_config,
    scaled_damage_lr,
)
from .data import SampleStore, split_dataset
from .optim import AdamWState, adamw_step, lr_schedule
from .preprocess import bilinear_resize, crop_top_bottom, preprocess_pair, to_model_range
from .reports import (
    export_similarity_pgm,
    read_classification_csv,
    read_retrieval_csv,
    write_classification_csv,
    write_ratio_sweep_csv,
    write_retrieval_csv,
)
from .train import (
    TrainLog,
    embed_images,
    eval_damage,
    eval_geoloc,
    predict_damage,
    run_ratio_sweep,
    train_damage,
    train_geoloc,
)

__all__ = [
    "AdamWState",
    "CheckpointError",
    "DAMAGE",
    "GEOLOC",
    "SampleStore",
    "TrainConfig",
    "TrainLog",
    "adamw_step",
    "aug_sync_flip",
    "aug_sync_rotate",
    "bilinear_resize",
    "coarse_dropout",
    "color_jitter",
    "config_from_dict",
    "config_to_dict",
    "crop_top_bottom",
    "default_damage_config",
    "default_geoloc_config",
    "embed_images",
    "eval_damage",
    "eval_geoloc",
    "export_similarity_pgm",
    "flip_pair",
    "grid_dropout",
    "load_checkpoint",
    "load_config",
    "lr_schedule",
    "parse_ratio",
    "predict_damage",
    "preprocess_pair",
    "read_classification_csv",
    "read_retrieval_csv",
    "rotate_pair",
    "run_ratio_sweep",
    "save_checkpoint",
    "save_config",
    "scaled_damage_lr",
    "split_dataset",
    "to_model_range",
    "train_damage",
    "train_geoloc",
    "write_classification_csv",
    "write_ratio_sweep_csv",
    "write_retrieval_csv",
]
