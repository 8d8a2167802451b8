"""Procedural terrain worlds and the observation model.

A world is a grid of terrain labels (one cell = one rendered pixel) plus a
texture assigned to every label. Worlds regenerate bit-identically from their
recipe, so files only persist the recipe, never pixel data.

Conventions: label grids are indexed ``labels[y, x]``; images are
``(H, W, 3)`` float32 in [0, 1]; world x grows right, y grows down.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import textures
from .textures import TextureSpec


@dataclass(frozen=True)
class Pose:
    """Continuous cell position plus heading in radians."""

    x: float
    y: float
    theta: float = 0.0


@dataclass
class BevImage:
    """Top-down image crop. ``anchor`` is the world point sampled at pixel
    (0, 0); ``valid`` is False wherever the sample fell outside the world."""

    pixels: np.ndarray  # (H, W, 3) float32 in [0, 1]
    anchor: Tuple[float, float]
    valid: np.ndarray  # (H, W) bool

    CELL_PER_PIXEL = 1

    @property
    def shape(self):
        return self.pixels.shape


class TerrainWorld:
    """Immutable label grid + per-label textures, regenerable from a recipe."""

    def __init__(self, seed, width, height, labels, texture_assignment, recipe=None):
        labels = np.asarray(labels, dtype=np.int16)
        if labels.shape != (height, width):
            raise ValueError(f"label grid shape {labels.shape} != {(height, width)}")
        self.seed = int(seed)
        self.width = int(width)
        self.height = int(height)
        self.labels = labels
        self.labels.setflags(write=False)
        self.texture_assignment: Dict[int, TextureSpec] = dict(texture_assignment)
        self.L = len(self.texture_assignment)
        present = np.unique(labels)
        if present.min() < 0 or present.max() >= self.L:
            raise ValueError("label grid contains ids outside [0, L)")
        self.recipe = recipe or {}
        self._window_cache: Dict[Tuple[int, int], np.ndarray] = {}
        self._full_render: Optional[np.ndarray] = None
        self._render_parent: Optional["TerrainWorld"] = None
        self._replaced_labels: Tuple[int, ...] = ()

    def coverage(self) -> np.ndarray:
        """Fraction of cells per label id."""
        counts = np.bincount(self.labels.ravel(), minlength=self.L)
        return counts / float(self.width * self.height)

    def with_textures(self, assignment: Dict[int, TextureSpec]) -> "TerrainWorld":
        """Same terrain layout, different appearance (shares the label grid)."""
        merged = dict(self.texture_assignment)
        merged.update(assignment)
        w = TerrainWorld.__new__(TerrainWorld)
        w.seed = self.seed
        w.width = self.width
        w.height = self.height
        w.labels = self.labels
        w.texture_assignment = merged
        w.L = self.L
        w.recipe = dict(self.recipe)
        w._window_cache = self._window_cache  # layout-derived, safely shared
        w._full_render = None
        w._render_parent = self  # reuse this world's rendered pixels
        w._replaced_labels = tuple(sorted(assignment))
        return w

    def prerender(self) -> np.ndarray:
        """Render (and memoize) the whole world once; speeds up dataset
        generation for worlds observed many times."""
        if self._full_render is None:
            self._full_render = _render_pixels(self, 0, 0, self.width, self.height)
        return self._full_render

    def single_label_windows(self, label: int, size: int) -> np.ndarray:
        """Top-left corners (x0, y0) of all size x size windows made of one label.

        Cached per (label, size); depends only on the label grid.
        """
        key = (int(label), int(size))
        cached = self._window_cache.get(key)
        if cached is not None:
            return cached
        mask = (self.labels == label).astype(np.float64)
        ii = np.zeros((self.height + 1, self.width + 1))
        ii[1:, 1:] = mask.cumsum(0).cumsum(1)
        s = size
        counts = ii[s:, s:] - ii[:-s, s:] - ii[s:, :-s] + ii[:-s, :-s]
        ys, xs = np.nonzero(np.round(counts).astype(np.int64) == s * s)
        corners = np.stack([xs, ys], axis=1)
        self._window_cache[key] = corners
        return corners


def _label_has_window(mask: np.ndarray, size: int) -> bool:
    """Does any size x size window consist purely of this label?"""
    h, w = mask.shape
    if h < size or w < size:
        return False
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = mask.astype(np.float64).cumsum(0).cumsum(1)
    counts = ii[size:, size:] - ii[:-size, size:] - ii[size:, :-size] + ii[:-size, :-size]
    return bool(np.any(np.round(counts).astype(np.int64) == size * size))


def _fillable(labels: np.ndarray, L: int, window: int) -> bool:
    return all(_label_has_window(labels == lab, window) for lab in range(L))


def _voronoi_labels(rng, width, height, site_counts):
    n_sites = int(sum(site_counts))
    sx = rng.uniform(0, width, size=n_sites)
    sy = rng.uniform(0, height, size=n_sites)
    site_labels = np.repeat(np.arange(len(site_counts)), site_counts)
    ys, xs = np.mgrid[0:height, 0:width]
    # distance to every site; worlds are desk-scale so the dense matrix is fine
    d2 = (xs[..., None] - sx) ** 2 + (ys[..., None] - sy) ** 2
    nearest = np.argmin(d2, axis=-1)
    return site_labels[nearest].astype(np.int16)


def generate_world(
    seed: int,
    width: int,
    height: int,
    L: int,
    texture_assignment: Optional[Dict[int, TextureSpec]] = None,
    sites_per_label: int = 8,
    site_allocation: Optional[Sequence[int]] = None,
    min_coverage: float = 0.01,
    min_window: int = 16,
    max_attempts: int = 100,
) -> TerrainWorld:
    """Build a Voronoi-partitioned terrain world.

    ``site_allocation`` overrides the per-label site counts (default:
    ``sites_per_label`` each), which skews the label area shares.
    Regenerates until every label covers at least ``min_coverage`` of the
    cells and owns at least one pure ``min_window`` square, so patch banks
    are always fillable.
    """
    if L < 2:
        raise ValueError("need at least two terrain labels")
    if width < 64 or height < 64:
        raise ValueError("worlds must be at least 64x64 cells")
    if texture_assignment is None:
        base, _ = textures.default_texture_sets()
        if L > len(base):
            raise ValueError(f"default base textures support L <= {len(base)}")
        texture_assignment = {i: base[i] for i in range(L)}
    if len(texture_assignment) != L:
        raise ValueError("texture_assignment must cover every label exactly once")
    if site_allocation is None:
        site_allocation = [sites_per_label] * L
    site_allocation = [int(c) for c in site_allocation]
    if len(site_allocation) != L or min(site_allocation) < 1:
        raise ValueError("site_allocation needs one positive count per label")

    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        labels = _voronoi_labels(rng, width, height, site_allocation)
        counts = np.bincount(labels.ravel(), minlength=L)
        if counts.min() >= min_coverage * width * height and _fillable(labels, L, min_window):
            recipe = {
                "kind": "voronoi",
                "seed": seed,
                "width": width,
                "height": height,
                "L": L,
                "site_allocation": site_allocation,
            }
            return TerrainWorld(seed, width, height, labels, texture_assignment, recipe)
    raise RuntimeError(
        f"could not reach {min_coverage:.0%} coverage per label in {max_attempts} attempts"
    )


def _rasterize_band(labels, waypoints, band_label, radius):
    """Paint a thick polyline of ``band_label`` through the waypoints."""
    h, w = labels.shape
    ys, xs = np.mgrid[0:h, 0:w]
    for (x0, y0), (x1, y1) in zip(waypoints[:-1], waypoints[1:]):
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        if seg2 == 0:
            d2 = (xs - x0) ** 2 + (ys - y0) ** 2
        else:
            t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / seg2, 0.0, 1.0)
            d2 = (xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2
        labels[d2 <= radius * radius] = band_label


def generate_corridor_world(
    seed: int,
    width: int,
    height: int,
    L: int,
    texture_assignment: Optional[Dict[int, TextureSpec]] = None,
    corridor_labels: Sequence[int] = (0,),
    corridor_width: int = 9,
    **kwargs,
) -> Tuple[TerrainWorld, Tuple[int, int], Tuple[int, int]]:
    """Voronoi world with traversable bands carved between two endpoints.

    One band per entry in ``corridor_labels``, all sharing the same start and
    goal so a planner can be scored on whichever terrain a preference favors.
    Returns (world, start, goal).
    """
    base = generate_world(seed, width, height, L, texture_assignment, **kwargs)
    margin = 12
    start = (margin, margin)
    goal = (width - 1 - margin, height - 1 - margin)
    radius = corridor_width / 2.0
    labels = None
    for attempt in range(20):
        rng = np.random.default_rng([seed, 7791, attempt])
        candidate = np.array(base.labels)
        for k, lab in enumerate(corridor_labels):
            n_mid = 3
            mids = []
            for m in range(n_mid):
                fx = (m + 1) / (n_mid + 1)
                # spread the bands apart by biasing waypoints to opposite sides
                side = (-1) ** k
                off = side * (0.14 + 0.10 * rng.random()) * min(width, height)
                mx = start[0] + fx * (goal[0] - start[0]) - off * (fx * (1 - fx)) * 4 * 0.5
                my = start[1] + fx * (goal[1] - start[1]) + off * (fx * (1 - fx)) * 4
                mids.append((float(np.clip(mx, 4, width - 5)), float(np.clip(my, 4, height - 5))))
            _rasterize_band(candidate, [start] + mids + [goal], lab, radius)
        if _fillable(candidate, L, kwargs.get("min_window", 16)):
            labels = candidate
            break
    if labels is None:
        raise RuntimeError("corridor carving kept destroying a label's patch windows")
    recipe = dict(base.recipe)
    recipe.update(
        {
            "kind": "voronoi+corridor",
            "corridor_labels": list(map(int, corridor_labels)),
            "corridor_width": int(corridor_width),
            "start": list(start),
            "goal": list(goal),
        }
    )
    world = TerrainWorld(seed, width, height, labels, base.texture_assignment, recipe)
    return world, start, goal


def _render_pixels(world: TerrainWorld, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    if world._full_render is not None:
        return world._full_render[y0 : y0 + h, x0 : x0 + w].copy()
    labels = world.labels[y0 : y0 + h, x0 : x0 + w]
    if world._render_parent is not None:
        # start from the parent's pixels, re-evaluate only replaced labels
        out = _render_pixels(world._render_parent, x0, y0, w, h)
        relabel = [l for l in world._replaced_labels if np.any(labels == l)]
    else:
        out = np.zeros((h, w, 3), dtype=np.float32)
        relabel = list(np.unique(labels))
    for lab in relabel:
        m = labels == lab
        yy, xx = np.nonzero(m)
        spec = world.texture_assignment[int(lab)]
        out[m] = textures.evaluate(spec, xx + x0, yy + y0)
    return out


def render(world: TerrainWorld, region: Tuple[int, int, int, int]) -> BevImage:
    """Render an axis-aligned rectangle (x0, y0, w, h) of cells to pixels."""
    x0, y0, w, h = region
    if x0 < 0 or y0 < 0 or x0 + w > world.width or y0 + h > world.height:
        raise ValueError(f"region {region} outside world bounds")
    out = _render_pixels(world, int(x0), int(y0), int(w), int(h))
    return BevImage(out, (float(x0), float(y0)), np.ones((h, w), dtype=bool))


def _window_world_coords(pose: Pose, window: Tuple[int, int]):
    """World coordinates sampled by each pixel of the rotated window.

    Pixel offsets are centered ((W-1)/2) so a rotation by pi maps the sample
    set onto itself; theta = 0 reproduces an axis-aligned crop.
    """
    h, w = window
    v, u = np.mgrid[0:h, 0:w]
    u = u - (w - 1) / 2.0
    v = v - (h - 1) / 2.0
    c, s = np.cos(pose.theta), np.sin(pose.theta)
    wx = pose.x + c * u - s * v
    wy = pose.y + s * u + c * v
    return wx, wy


def observe(world: TerrainWorld, pose: Pose, window: Tuple[int, int] = (64, 64)) -> BevImage:
    """Bird's-eye crop centered on the pose and rotated with its heading.

    Bilinear sampling of the rendered world; out-of-bounds samples are
    filled with 0 and flagged invalid.
    """
    if not (0 <= pose.x < world.width - 1e-9 and 0 <= pose.y < world.height - 1e-9):
        raise ValueError(f"pose {pose} outside world bounds")
    wx, wy = _window_world_coords(pose, window)
    valid = (wx >= 0) & (wx <= world.width - 1) & (wy >= 0) & (wy <= world.height - 1)

    # render only the bounding box actually touched, clamped to the world
    bx0 = int(np.clip(np.floor(wx[valid].min()) if valid.any() else 0, 0, world.width - 1))
    by0 = int(np.clip(np.floor(wy[valid].min()) if valid.any() else 0, 0, world.height - 1))
    bx1 = int(np.clip(np.ceil(wx[valid].max()) if valid.any() else 0, 0, world.width - 1))
    by1 = int(np.clip(np.ceil(wy[valid].max()) if valid.any() else 0, 0, world.height - 1))
    patch = render(world, (bx0, by0, bx1 - bx0 + 1, by1 - by0 + 1)).pixels.astype(np.float64)

    lx = np.clip(wx - bx0, 0, bx1 - bx0)
    ly = np.clip(wy - by0, 0, by1 - by0)
    x0 = np.floor(lx).astype(np.int64)
    y0 = np.floor(ly).astype(np.int64)
    x1 = np.minimum(x0 + 1, patch.shape[1] - 1)
    y1 = np.minimum(y0 + 1, patch.shape[0] - 1)
    tx = (lx - x0)[..., None]
    ty = (ly - y0)[..., None]
    top = patch[y0, x0] * (1 - tx) + patch[y0, x1] * tx
    bot = patch[y1, x0] * (1 - tx) + patch[y1, x1] * tx
    pix = top * (1 - ty) + bot * ty
    pix[~valid] = 0.0
    return BevImage(pix.astype(np.float32), (float(wx[0, 0]), float(wy[0, 0])), valid)


def label_window(world: TerrainWorld, pose: Pose, window: Tuple[int, int] = (64, 64)) -> np.ndarray:
    """Ground-truth labels under the same geometry as ``observe``.

    Nearest-neighbor sampling (labels are categorical); out-of-bounds cells
    get the sentinel -1.
    """
    wx, wy = _window_world_coords(pose, window)
    xi = np.round(wx).astype(np.int64)
    yi = np.round(wy).astype(np.int64)
    valid = (xi >= 0) & (xi < world.width) & (yi >= 0) & (yi < world.height)
    out = np.full(wx.shape, -1, dtype=np.int16)
    out[valid] = world.labels[yi[valid], xi[valid]]
    return out


def save_world(world: TerrainWorld, path) -> None:
    """Persist the world recipe + texture assignment as JSON."""
    doc = {
        "seed": world.seed,
        "width": world.width,
        "height": world.height,
        "L": world.L,
        "recipe": world.recipe,
        "texture_assignment": [
            {"label": int(lab), "texture": spec.to_json()}
            for lab, spec in sorted(world.texture_assignment.items())
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)


def load_world(path) -> TerrainWorld:
    """Rebuild a world from its JSON recipe, bit-identically."""
    with open(path) as f:
        doc = json.load(f)
    assignment = {
        int(e["label"]): TextureSpec.from_json(e["texture"]) for e in doc["texture_assignment"]
    }
    recipe = doc.get("recipe", {})
    kind = recipe.get("kind", "voronoi")
    if kind == "voronoi":
        return generate_world(
            doc["seed"],
            doc["width"],
            doc["height"],
            doc["L"],
            assignment,
            site_allocation=recipe.get("site_allocation"),
        )
    if kind == "voronoi+corridor":
        world, _, _ = generate_corridor_world(
            doc["seed"],
            doc["width"],
            doc["height"],
            doc["L"],
            assignment,
            corridor_labels=recipe["corridor_labels"],
            corridor_width=recipe["corridor_width"],
            site_allocation=recipe.get("site_allocation"),
        )
        return world
    raise ValueError(f"unknown world recipe kind {kind!r}")


def image_to_u8(pixels: np.ndarray) -> np.ndarray:
    """Float [0,1] image to 8-bit, the export convention everywhere."""
    return np.clip(np.round(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)


def export_png(image: BevImage | np.ndarray, path) -> None:
    """Write a rendered image (or raw float array) as an 8-bit RGB PNG."""
    from PIL import Image

    pixels = image.pixels if isinstance(image, BevImage) else image
    arr = image_to_u8(pixels)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    Image.fromarray(arr, mode="RGB").save(path)
