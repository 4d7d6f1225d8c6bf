"""Overhead and panoramic renderers plus their consistency oracle.

Both renderers sample world space directly, so a quarter-turn heading
change maps to an exact pixel permutation: the heading rotation is
decomposed into an exact 90-degree index swap times a residual rotation,
and panorama columns step the azimuth in dyadic degree increments.
"""

from __future__ import annotations

import numpy as np

from .scene import SKY_COLOR, Scene

CAMERA_HEIGHT_M = 1.6

# overhead paint order, bottom to top
_PAINT_ORDER = ("water", "road", "fallen_tree", "debris", "sign", "building", "tree")


def _heading_rotate(u: np.ndarray, v: np.ndarray, heading_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate image-frame offsets into world east/north for a given heading.

    Quarter turns are applied as index swaps after the residual rotation,
    which keeps heading and heading+90 renders bitwise consistent.
    """
    h = float(heading_deg) % 360.0
    q = int(h // 90.0) % 4
    r = np.radians(h - 90.0 * q)
    cr, sr = np.cos(r), np.sin(r)
    x = u * cr + v * sr
    y = v * cr - u * sr
    for _ in range(q):
        x, y = y, -x
    return x, y


def _contains(obj, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    g = obj.geometry
    if g[0] == "disc":
        _, cx, cy, r = g
        return (x - cx) ** 2 + (y - cy) ** 2 <= r * r
    if g[0] == "rect":
        _, cx, cy, hw, hh = g
        return (np.abs(x - cx) <= hw) & (np.abs(y - cy) <= hh)
    _, x0, y0, x1, y1, width = g
    dx, dy = x1 - x0, y1 - y0
    length2 = dx * dx + dy * dy
    t = ((x - x0) * dx + (y - y0) * dy) / length2
    t = np.clip(t, 0.0, 1.0)
    px, py = x0 + t * dx, y0 + t * dy
    return (x - px) ** 2 + (y - py) ** 2 <= (width / 2.0) ** 2


def render_overhead(scene: Scene, size_px: int) -> np.ndarray:
    """Top-down orthographic RGB raster with image-up along the heading."""
    if size_px < 32:
        raise ValueError(f"overhead raster must be at least 32 px, got {size_px}")
    mpp = scene.extent_m / size_px
    cols = (np.arange(size_px) + 0.5 - size_px / 2.0) * mpp
    rows = (size_px / 2.0 - np.arange(size_px) - 0.5) * mpp
    u, v = np.meshgrid(cols, rows)  # u right, v up, camera at the center
    x, y = _heading_rotate(u, v, scene.heading_deg)

    img = np.empty((size_px, size_px, 3), dtype=np.uint8)
    img[:] = scene.ground_color
    for kind in _PAINT_ORDER:
        for obj in scene.objects:
            if obj.kind != kind:
                continue
            img[_contains(obj, x, y)] = obj.color
    return img


def _ray_disc(dx, dy, cx, cy, r):
    """Entry distance of origin rays into a disc; inf when missed."""
    b = dx * cx + dy * cy
    c2 = cx * cx + cy * cy
    disc = b * b - (c2 - r * r)
    t = np.full_like(dx, np.inf)
    hit = disc >= 0
    root = np.sqrt(np.where(hit, disc, 0.0))
    entry = b - root
    exit_ = b + root
    inside = c2 <= r * r
    t = np.where(hit & (entry >= 0), entry, t)
    t = np.where(hit & inside, 0.0, t)
    t = np.where(hit & (entry < 0) & (exit_ >= 0) & ~inside, 0.0, t)
    return t


def _ray_slab(o, d, lo, hi):
    """Per-axis slab interval for origin o and direction d (scalars per axis)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    parallel = d == 0
    inside = (o >= lo) & (o <= hi)
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    return near, far


def _ray_box(ox, oy, dx, dy, x_lo, x_hi, y_lo, y_hi):
    nx, fx = _ray_slab(ox, dx, x_lo, x_hi)
    ny, fy = _ray_slab(oy, dy, y_lo, y_hi)
    enter = np.maximum(nx, ny)
    leave = np.minimum(fx, fy)
    t = np.maximum(enter, 0.0)
    return np.where((enter <= leave) & (leave >= 0), t, np.inf)


def _ray_object(obj, dx, dy):
    g = obj.geometry
    if g[0] == "disc":
        return _ray_disc(dx, dy, g[1], g[2], g[3])
    if g[0] == "rect":
        return _ray_box(0.0, 0.0, dx, dy, g[1] - g[3], g[1] + g[3], g[2] - g[4], g[2] + g[4])
    _, x0, y0, x1, y1, width = g
    ex, ey = x1 - x0, y1 - y0
    length = float(np.hypot(ex, ey))
    ex, ey = ex / length, ey / length
    nx, ny = -ey, ex
    # ray in the stroke's local frame, then a plain box test
    ox_l = -x0 * ex - y0 * ey
    oy_l = -x0 * nx - y0 * ny
    dx_l = dx * ex + dy * ey
    dy_l = dx * nx + dy * ny
    return _ray_box(ox_l, oy_l, dx_l, dy_l, 0.0, length, -width / 2.0, width / 2.0)


def render_panorama(scene: Scene, width_px: int, height_px: int) -> np.ndarray:
    """Cylindrical panorama: one ray per column, azimuth clockwise from heading."""
    if width_px != 2 * height_px:
        raise ValueError(f"panorama must be 2:1, got {width_px}x{height_px}")
    heading = float(scene.heading_deg) % 360.0
    step = 360.0 / width_px
    az = np.mod(heading + np.arange(width_px) * step, 360.0)
    rad = np.radians(az)
    dx, dy = np.sin(rad), np.cos(rad)

    solid = [o for o in scene.objects if o.height_m > 0]
    water = [o for o in scene.objects if o.kind == "water"]

    t_solid = np.full(width_px, np.inf)
    nearest = np.full(width_px, -1, dtype=np.int64)
    for i, obj in enumerate(solid):
        t = _ray_object(obj, dx, dy)
        closer = t < t_solid
        t_solid = np.where(closer, t, t_solid)
        nearest = np.where(closer, i, nearest)

    water_t = [_ray_object(obj, dx, dy) for obj in water]
    t_water = np.min(water_t, axis=0) if water_t else np.full(width_px, np.inf)

    # horizon sits in the upper quarter: a mostly-ground view keeps the
    # panorama's color statistics close to the overhead raster's
    horizon = height_px // 4
    focal = height_px / 2.0
    img = np.empty((height_px, width_px, 3), dtype=np.uint8)
    img[:horizon] = SKY_COLOR
    # below-horizon fill: water color when the ray reaches water first
    below = np.empty((width_px, 3), dtype=np.uint8)
    below[:] = scene.ground_color
    for obj, t in zip(water, water_t):
        below[(t < t_solid) & (t <= t_water)] = obj.color
    img[horizon:] = below[None, :, :]

    rows = np.arange(height_px)[:, None]
    for i, obj in enumerate(solid):
        cols = np.nonzero(nearest == i)[0]
        if cols.size == 0:
            continue
        t = np.maximum(t_solid[cols], 1e-6)
        top = horizon - focal * (obj.height_m - CAMERA_HEIGHT_M) / t
        base = horizon + focal * CAMERA_HEIGHT_M / t
        span = (rows >= np.ceil(top)[None, :]) & (rows < np.ceil(base)[None, :])
        img[:, cols] = np.where(span[:, :, None], np.array(obj.color, dtype=np.uint8), img[:, cols])
    return img


def cross_view_consistency(
    scene: Scene,
    theta: float,
    overhead_px: int = 64,
    pano_w: int = 128,
    pano_h: int = 64,
) -> dict:
    """Pixel mismatch counts between re-rendered and index-transformed views.

    Heading + theta must equal a panorama column roll of theta/360*width;
    for theta in {0, 90, 180, 270} the overhead raster must equal an exact
    quarter-turn rotation. Returns per-view mismatch counts (0 = exact).
    """
    shift = theta * pano_w / 360.0
    if shift != round(shift):
        raise ValueError(f"theta {theta} is not a multiple of the azimuth quantum {360.0 / pano_w}")
    rotated = scene.with_heading(scene.heading_deg + theta)

    pano = render_panorama(scene, pano_w, pano_h)
    pano_rot = render_panorama(rotated, pano_w, pano_h)
    expected_pano = np.roll(pano, -int(round(shift)), axis=1)
    pano_bad = int(np.count_nonzero(np.any(pano_rot != expected_pano, axis=-1)))

    result = {"panorama_mismatch": pano_bad}
    if theta % 90 == 0:
        over = render_overhead(scene, overhead_px)
        over_rot = render_overhead(rotated, overhead_px)
        expected_over = np.rot90(over, k=int(theta // 90) % 4)
        result["overhead_mismatch"] = int(np.count_nonzero(np.any(over_rot != expected_over, axis=-1)))
    return result
