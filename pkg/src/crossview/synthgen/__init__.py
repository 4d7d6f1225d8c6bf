"""Deterministic generator of paired street/overhead scenes with ground truth."""

from .dataset import (
    DatasetManifest,
    SampleRecord,
    balanced_labels,
    emit_dataset,
    trivial_damage_classifier,
    water_fraction,
)
from .render import cross_view_consistency, render_overhead, render_panorama
from .scene import (
    DEFAULT_GENERATOR,
    GeneratorConfig,
    Scene,
    SceneObject,
    generate_scene,
    mirror_scene,
)

__all__ = [
    "DEFAULT_GENERATOR",
    "DatasetManifest",
    "GeneratorConfig",
    "SampleRecord",
    "Scene",
    "SceneObject",
    "balanced_labels",
    "cross_view_consistency",
    "emit_dataset",
    "generate_scene",
    "mirror_scene",
    "render_overhead",
    "render_panorama",
    "trivial_damage_classifier",
    "water_fraction",
]
