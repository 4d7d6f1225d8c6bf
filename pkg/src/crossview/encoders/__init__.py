"""Retrieval and classification backbones built on the array engine."""

from .convnext import ConvNeXtConfig, convnext_block, convnext_encode, init_convnext_params, patchify_stem
from .gcvit import (
    GCViTConfig,
    RelPosTable,
    dual_branch_classify,
    dual_branch_logits,
    gcvit_encode,
    global_attention,
    global_token_generator,
    init_dual_branch_params,
    init_gcvit_params,
    local_attention,
    window_merge,
    window_partition,
)
from .params import ParamSet, trunc_normal

__all__ = [
    "ConvNeXtConfig",
    "GCViTConfig",
    "ParamSet",
    "RelPosTable",
    "convnext_block",
    "convnext_encode",
    "dual_branch_classify",
    "dual_branch_logits",
    "gcvit_encode",
    "global_attention",
    "global_token_generator",
    "init_convnext_params",
    "init_dual_branch_params",
    "init_gcvit_params",
    "local_attention",
    "patchify_stem",
    "trunc_normal",
    "window_merge",
    "window_partition",
]
