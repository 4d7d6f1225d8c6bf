"""Procedural world model for paired street/overhead rendering.

A scene is a square patch of flat ground (meters, x east / y north,
origin at the camera) holding roads, buildings, trees and signs, plus
damage artifacts whose kind and quantity encode the damage class:
debris and isolated fallen trees for light damage, standing water in
the street from medium upward, and broad flooding for heavy damage.
Headings are whole degrees so rotation identities stay exact in floats.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

LIGHT, MEDIUM, HEAVY = 0, 1, 2

SKY_COLOR = (188, 205, 225)


@dataclass(frozen=True)
class SceneObject:
    kind: str  # road | building | tree | sign | debris | fallen_tree | water
    geometry: tuple  # ("rect",cx,cy,hw,hh) | ("disc",cx,cy,r) | ("stroke",x0,y0,x1,y1,width)
    color: tuple
    height_m: float = 0.0

    def __post_init__(self):
        g = self.geometry
        if g[0] == "disc":
            ok = g[3] > 0
        elif g[0] == "rect":
            ok = g[3] > 0 and g[4] > 0
        elif g[0] == "stroke":
            ok = g[5] > 0
        else:
            raise ValueError(f"unknown geometry {g[0]!r}")
        if not ok:
            raise ValueError(f"{g[0]} size parameters must be positive: {g}")
        if not all(0 <= c <= 255 for c in self.color):
            raise ValueError(f"color channels must lie in [0,255], got {self.color}")


@dataclass(frozen=True)
class Scene:
    center: tuple  # (lon, lat)
    heading_deg: float
    extent_m: float
    objects: tuple
    damage: int
    ground_color: tuple

    def with_heading(self, heading_deg: float) -> "Scene":
        return dataclasses.replace(self, heading_deg=float(heading_deg) % 360.0)


@dataclass(frozen=True)
class GeneratorConfig:
    """Scene layout ranges; damage artifact counts quantify the class rules."""

    extent_m: float = 100.0
    roads: tuple = (1, 2)
    buildings: tuple = (2, 6)
    trees: tuple = (6, 14)
    signs: tuple = (0, 3)
    # per class: (debris lo/hi, fallen lo/hi, water patches lo/hi, water radius lo/hi)
    debris_count: tuple = ((0, 2), (3, 6), (8, 12))
    fallen_count: tuple = ((0, 1), (2, 4), (4, 7))
    water_count: tuple = ((0, 0), (1, 2), (2, 3))
    water_radius: tuple = ((0.0, 0.0), (4.5, 6.5), (11.0, 16.0))
    clear_radius_m: float = 8.0  # keep the camera position unobstructed


DEFAULT_GENERATOR = GeneratorConfig()

WATER_HEIGHT = 0.0


def _rand_int(rng, lohi) -> int:
    lo, hi = lohi
    return int(rng.integers(lo, hi + 1))


def _building_color(rng) -> tuple:
    # reject strongly blue-dominant colors; blue stays unique to water
    while True:
        r, g, b = (int(rng.integers(40, 241)) for _ in range(3))
        if b - max(r, g) <= 20:
            return (r, g, b)


def _point_clear(rng, extent: float, clear: float, margin: float = 4.0) -> tuple:
    half = extent / 2.0 - margin
    while True:
        x = float(rng.uniform(-half, half))
        y = float(rng.uniform(-half, half))
        if x * x + y * y >= clear * clear:
            return x, y


def _road_objects(rng, cfg: GeneratorConfig) -> list[SceneObject]:
    roads = []
    n = _rand_int(rng, cfg.roads)
    half = cfg.extent_m / 2.0
    angles = [float(rng.uniform(0, 180.0))]
    if n == 2:
        angles.append((angles[0] + float(rng.uniform(60.0, 120.0))) % 180.0)
    for ang in angles:
        a = np.radians(ang)
        dx, dy = float(np.sin(a)), float(np.cos(a))
        width = float(rng.uniform(6.0, 10.0))
        shade = int(rng.integers(95, 140))
        color = (shade, shade, shade + int(rng.integers(0, 8)))
        roads.append(
            SceneObject("road", ("stroke", -half * dx, -half * dy, half * dx, half * dy, width), color)
        )
    return roads


def _on_road_point(rng, roads: list[SceneObject], max_r: float, extent: float, at_edge: bool) -> tuple:
    """A point on (or, for small patches, at the shoulder of) a road.

    Roads repaint over water, so small patches sit at the road edge where
    they stay visible; large floods straddle the road and poke out anyway.
    """
    road = roads[int(rng.integers(0, len(roads)))]
    _, x0, y0, x1, y1, width = road.geometry
    # stay off the segment ends so patches fall inside the extent
    t = float(rng.uniform(0.15, 0.85))
    if at_edge:
        lateral = (width / 2.0 * 0.7 + float(rng.uniform(0.0, 3.0))) * (1 if rng.integers(0, 2) else -1)
    else:
        lateral = float(rng.uniform(-2.0, 2.0))
    dx, dy = x1 - x0, y1 - y0
    norm = (dx * dx + dy * dy) ** 0.5
    nx, ny = -dy / norm, dx / norm
    x = x0 + t * dx + lateral * nx
    y = y0 + t * dy + lateral * ny
    half = extent / 2.0 - max_r
    return float(np.clip(x, -half, half)), float(np.clip(y, -half, half))


def generate_scene(
    seed: int,
    damage: int,
    center: tuple = (0.0, 0.0),
    cfg: GeneratorConfig = DEFAULT_GENERATOR,
) -> Scene:
    """Deterministic scene for a (seed, damage) pair."""
    if damage not in (LIGHT, MEDIUM, HEAVY):
        raise ValueError(f"damage class must be 0, 1 or 2, got {damage}")
    rng = np.random.default_rng([seed & 0xFFFFFFFF, damage])
    extent = cfg.extent_m
    heading = float(rng.integers(0, 360))

    ground = (int(rng.integers(60, 201)), int(rng.integers(70, 211)), int(rng.integers(40, 141)))

    objects: list[SceneObject] = []
    roads = _road_objects(rng, cfg)
    objects.extend(roads)

    # standing water goes under the later paint layers, so add it early
    n_water = _rand_int(rng, cfg.water_count[damage])
    for _ in range(n_water):
        r = float(rng.uniform(*cfg.water_radius[damage]))
        x, y = _on_road_point(rng, roads, r, extent, at_edge=damage == MEDIUM)
        color = (int(rng.integers(30, 71)), int(rng.integers(80, 131)), int(rng.integers(160, 221)))
        objects.append(SceneObject("water", ("disc", x, y, r), color, WATER_HEIGHT))

    for _ in range(_rand_int(rng, cfg.fallen_count[damage])):
        x, y = _point_clear(rng, extent, cfg.clear_radius_m)
        ang = float(rng.uniform(0, np.pi))
        length = float(rng.uniform(4.0, 8.0))
        dx, dy = np.cos(ang) * length / 2, np.sin(ang) * length / 2
        color = (int(rng.integers(90, 130)), int(rng.integers(60, 95)), int(rng.integers(25, 55)))
        objects.append(
            SceneObject(
                "fallen_tree",
                ("stroke", x - dx, y - dy, x + dx, y + dy, float(rng.uniform(1.0, 1.6))),
                color,
                float(rng.uniform(0.8, 1.5)),
            )
        )

    for _ in range(_rand_int(rng, cfg.debris_count[damage])):
        x, y = _point_clear(rng, extent, cfg.clear_radius_m)
        color = (int(rng.integers(95, 160)), int(rng.integers(70, 120)), int(rng.integers(40, 85)))
        objects.append(
            SceneObject("debris", ("disc", x, y, float(rng.uniform(0.6, 1.6))), color, float(rng.uniform(0.5, 1.2)))
        )

    for _ in range(_rand_int(rng, cfg.signs)):
        x, y = _point_clear(rng, extent, cfg.clear_radius_m)
        color = (int(rng.integers(170, 256)), int(rng.integers(150, 256)), int(rng.integers(40, 120)))
        objects.append(
            SceneObject("sign", ("disc", x, y, float(rng.uniform(0.4, 0.8))), color, float(rng.uniform(2.5, 3.5)))
        )

    for _ in range(_rand_int(rng, cfg.buildings)):
        hw, hh = float(rng.uniform(4.0, 10.0)), float(rng.uniform(4.0, 10.0))
        x, y = _point_clear(rng, extent, cfg.clear_radius_m + max(hw, hh))
        objects.append(
            SceneObject("building", ("rect", x, y, hw, hh), _building_color(rng), float(rng.uniform(6.0, 16.0)))
        )

    # trees carry scene-specific foliage colors, the strongest cue shared
    # between the panorama (tall, wide column spans) and the overhead disc
    for _ in range(_rand_int(rng, cfg.trees)):
        x, y = _point_clear(rng, extent, cfg.clear_radius_m)
        objects.append(
            SceneObject(
                "tree",
                ("disc", x, y, float(rng.uniform(2.0, 4.5))),
                _building_color(rng),
                float(rng.uniform(5.0, 9.0)),
            )
        )

    # a scene-wide cast ties every surface to the ground tint, so both
    # views carry the same color signature; water keeps its absolute
    # palette so the damage cue stays class-pure
    def cast(obj: SceneObject) -> SceneObject:
        if obj.kind == "water":
            return obj
        mixed = tuple(int(round(0.65 * c + 0.35 * g)) for c, g in zip(obj.color, ground))
        return dataclasses.replace(obj, color=mixed)

    return Scene(center, heading, extent, tuple(cast(o) for o in objects), damage, ground)


def mirror_scene(scene: Scene) -> Scene:
    """Reflect the world east-west (x -> -x); headings flip sense."""

    def flip(obj: SceneObject) -> SceneObject:
        g = obj.geometry
        if g[0] == "rect":
            ng = ("rect", -g[1], g[2], g[3], g[4])
        elif g[0] == "disc":
            ng = ("disc", -g[1], g[2], g[3])
        else:
            ng = ("stroke", -g[1], g[2], -g[3], g[4], g[5])
        return dataclasses.replace(obj, geometry=ng)

    return dataclasses.replace(
        scene,
        objects=tuple(flip(o) for o in scene.objects),
        heading_deg=(-scene.heading_deg) % 360.0,
    )
