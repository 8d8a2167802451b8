"""A* grid planning over terrain cost fields.

A move from one cell to an 8-adjacent destination costs
``step_len * (1 + lambda * cost(dest))`` with step_len 1 or sqrt(2). The
Euclidean heuristic is admissible because every step costs at least its
length, so A* returns exactly Dijkstra's optimum; ties are broken
deterministically by (f, h, cell index).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import data as data_mod
from . import model as model_mod
from . import world as world_mod
from .data import TotalOrdering
from .nn import Tensor
from .world import TerrainWorld


@dataclass
class PlannerConfig:
    terrain_weight: float = 10.0  # lambda: relative weight of terrain vs distance
    connectivity: int = 8
    base_step_cost: float = 1.0

    def __post_init__(self):
        if self.terrain_weight < 0:
            raise ValueError("terrain weight must be >= 0")
        if self.connectivity != 8:
            raise ValueError("only 8-connected planning is supported")


@dataclass
class PlanPath:
    cells: List[Tuple[int, int]]  # (x, y) from start to goal
    total_cost: float


@dataclass
class WorldCostField:
    """Whole-world per-cell cost in [0, 1], assembled from local costmaps."""

    values: np.ndarray  # (H, W) float32


_SQRT2 = math.sqrt(2.0)
_MOVES = [(-1, -1, _SQRT2), (0, -1, 1.0), (1, -1, _SQRT2),
          (-1, 0, 1.0), (1, 0, 1.0),
          (-1, 1, _SQRT2), (0, 1, 1.0), (1, 1, _SQRT2)]


def astar(
    field, start: Tuple[int, int], goal: Tuple[int, int], config: PlannerConfig = None
) -> Optional[PlanPath]:
    """Minimum-cost 8-connected path; None if the goal is unreachable."""
    config = config or PlannerConfig()
    values = field.values if isinstance(field, WorldCostField) else np.asarray(field)
    h, w = values.shape
    sx, sy = start
    gx, gy = goal
    if not (0 <= sx < w and 0 <= sy < h and 0 <= gx < w and 0 <= gy < h):
        raise ValueError(f"start {start} or goal {goal} out of bounds for {w}x{h} field")
    lam = config.terrain_weight
    base = config.base_step_cost

    def heuristic(x, y):
        return base * math.hypot(x - gx, y - gy)

    g_cost = np.full((h, w), np.inf)
    g_cost[sy, sx] = 0.0
    parent = {}
    h0 = heuristic(sx, sy)
    open_heap = [(h0, h0, sy * w + sx, sx, sy)]
    closed = np.zeros((h, w), dtype=bool)
    while open_heap:
        f, _, _, x, y = heapq.heappop(open_heap)
        if closed[y, x]:
            continue
        closed[y, x] = True
        if (x, y) == (gx, gy):
            cells = [(x, y)]
            while (x, y) != (sx, sy):
                x, y = parent[(x, y)]
                cells.append((x, y))
            cells.reverse()
            return PlanPath(cells, float(g_cost[gy, gx]))
        gx0 = g_cost[y, x]
        for dx, dy, step in _MOVES:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h) or closed[ny, nx]:
                continue
            ng = gx0 + step * (base + lam * float(values[ny, nx]))
            if ng < g_cost[ny, nx]:
                g_cost[ny, nx] = ng
                parent[(nx, ny)] = (x, y)
                hh = heuristic(nx, ny)
                heapq.heappush(open_heap, (ng + hh, hh, ny * w + nx, nx, ny))
    return None


def path_cost_under(field_or_ordering, path: PlanPath) -> float:
    """Unit-weighted sum of per-cell costs along a path.

    Accepts a cost field (array or WorldCostField) or an
    (ordering, label grid) pair for ground-truth evaluation.
    """
    cells = path.cells if isinstance(path, PlanPath) else list(path)
    if isinstance(field_or_ordering, tuple) and isinstance(field_or_ordering[0], TotalOrdering):
        ordering, labels = field_or_ordering
        lut = data_mod.cost_lookup(ordering)
        return float(sum(lut[labels[y, x]] for x, y in cells))
    values = (
        field_or_ordering.values
        if isinstance(field_or_ordering, WorldCostField)
        else np.asarray(field_or_ordering)
    )
    return float(sum(float(values[y, x]) for x, y in cells))


def oracle_cost_field(world: TerrainWorld, ordering: TotalOrdering) -> WorldCostField:
    """Ground-truth cost field straight from the label grid."""
    lut = data_mod.cost_lookup(ordering)
    return WorldCostField(lut[world.labels].astype(np.float32))


def build_cost_field(
    world: TerrainWorld,
    params: "model_mod.ModelParams",
    context: "data_mod.PreferenceContext",
    tile_stride: int = None,
) -> WorldCostField:
    """Tile the network over the world at heading 0 and average overlaps."""
    spec = params.spec
    size = spec.image_size
    tile_stride = tile_stride or size
    if tile_stride > size:
        raise ValueError("tile stride must not exceed the window size")
    acc = np.zeros((world.height, world.width), dtype=np.float64)
    cnt = np.zeros((world.height, world.width), dtype=np.float64)
    xs = list(range(0, world.width - size + 1, tile_stride))
    ys = list(range(0, world.height - size + 1, tile_stride))
    if xs[-1] != world.width - size:
        xs.append(world.width - size)
    if ys[-1] != world.height - size:
        ys.append(world.height - size)
    ctx = context.packed[None]
    for y0 in ys:
        for x0 in xs:
            pose = world_mod.Pose(x0 + (size - 1) / 2.0, y0 + (size - 1) / 2.0, 0.0)
            image = world_mod.observe(world, pose, (size, size))
            img = np.ascontiguousarray(image.pixels.transpose(2, 0, 1))[None]
            out = model_mod.forward_batch(params, Tensor(img), Tensor(ctx))
            acc[y0 : y0 + size, x0 : x0 + size] += out.data[0, 0]
            cnt[y0 : y0 + size, x0 : x0 + size] += 1.0
    return WorldCostField((acc / np.maximum(cnt, 1.0)).astype(np.float32))
