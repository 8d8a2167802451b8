"""Preference contexts, patch banks, target costmaps, and dataset generation.

The three training datasets differ only in how each example picks its
ordering and appearance:

    base       one fixed canonical ordering, base textures
    shuffled   a fresh random ordering per example, base textures
    synthetic  random ordering plus k terrain labels re-textured from the
               synthetic pool; the image window must show at least one
               replaced terrain and context patches for replaced labels are
               extracted from the re-textured world

Every example derives its own RNG stream from (dataset seed, index), so
generation order (serial or parallel) never changes the data.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from . import records, world as world_mod
from .textures import TextureSpec
from .world import BevImage, Pose, TerrainWorld

PHASES = ("base", "shuffled", "synthetic")


@dataclass(frozen=True)
class TotalOrdering:
    """Permutation of label ids, most preferred first.

    The cost of a label is (rank - 1) / (L - 1) with 1-based rank, i.e. the
    most preferred terrain costs 0 and the least preferred costs 1.
    """

    order: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"{self.order} is not a permutation of 0..L-1")

    @property
    def L(self) -> int:
        return len(self.order)

    def rank(self, label: int) -> int:
        try:
            return self.order.index(label) + 1
        except ValueError:
            raise KeyError(f"label {label} not in ordering {self.order}") from None

    def inverted(self) -> "TotalOrdering":
        return TotalOrdering(tuple(reversed(self.order)))

    @staticmethod
    def canonical(L: int) -> "TotalOrdering":
        return TotalOrdering(tuple(range(L)))

    @staticmethod
    def random(L: int, rng: np.random.Generator) -> "TotalOrdering":
        return TotalOrdering(tuple(int(x) for x in rng.permutation(L)))


def cost_of(ordering: TotalOrdering, label: int) -> float:
    """Cost of a label under an ordering: (rank - 1) / (L - 1)."""
    if ordering.L < 2:
        raise ValueError("orderings need at least two labels")
    return (ordering.rank(label) - 1) / (ordering.L - 1)


def cost_lookup(ordering: TotalOrdering) -> np.ndarray:
    """Vector v with v[label] = cost_of(ordering, label)."""
    v = np.empty(ordering.L, dtype=np.float32)
    for lab in range(ordering.L):
        v[lab] = cost_of(ordering, lab)
    return v


@dataclass
class Patch:
    """Small single-terrain crop; the building block of preference contexts."""

    pixels: np.ndarray  # (h, w, 3) float32 in [0, 1]
    source_label: int = -1


@dataclass
class PatchBank:
    label: int
    patches: List[Patch]

    def __len__(self):
        return len(self.patches)


class PreferenceContext:
    """n ordered (preferred, dispreferred) patch pairs packed as one tensor.

    Channel block k (size c) holds pair k as a 2h x w image: the preferred
    patch stacked on top of the dispreferred one.
    """

    def __init__(self, pairs: Sequence[Tuple[Patch, Patch]]):
        self.pairs = list(pairs)
        self.packed = self.pack(self.pairs)

    @property
    def n(self) -> int:
        return len(self.pairs)

    @staticmethod
    def pack(pairs: Sequence[Tuple[Patch, Patch]]) -> np.ndarray:
        if not pairs:
            raise ValueError("a preference context needs at least one pair")
        h, w, c = pairs[0][0].pixels.shape
        packed = np.empty((len(pairs) * c, 2 * h, w), dtype=np.float32)
        for k, (pref, disp) in enumerate(pairs):
            if pref.pixels.shape != (h, w, c) or disp.pixels.shape != (h, w, c):
                raise ValueError("all patches in a context must share one shape")
            for ch in range(c):
                packed[k * c + ch, :h, :] = pref.pixels[:, :, ch]
                packed[k * c + ch, h:, :] = disp.pixels[:, :, ch]
        return packed

    @staticmethod
    def unpack(packed: np.ndarray, c: int = 3) -> List[Tuple[Patch, Patch]]:
        nc, hh, w = packed.shape
        if nc % c:
            raise ValueError(f"channel count {nc} not divisible by c={c}")
        h = hh // 2
        pairs = []
        for k in range(nc // c):
            block = packed[k * c : (k + 1) * c]
            pref = np.ascontiguousarray(block[:, :h, :].transpose(1, 2, 0))
            disp = np.ascontiguousarray(block[:, h:, :].transpose(1, 2, 0))
            pairs.append((Patch(pref), Patch(disp)))
        return pairs


@dataclass
class TargetCostmap:
    values: np.ndarray  # (H, W) float32 in [0, 1]
    mask: np.ndarray  # (H, W) bool, False at sentinel cells


@dataclass
class TrainingExample:
    context: PreferenceContext
    image: BevImage
    target: TargetCostmap
    provenance: Dict = field(default_factory=dict)

    def arrays(self):
        """(context CHW, image CHW, target, mask) float32 views for training."""
        img = np.ascontiguousarray(self.image.pixels.transpose(2, 0, 1))
        return self.context.packed, img, self.target.values, self.target.mask


# ---------------------------------------------------------------------------
# combinatorics


def count_contexts(L: int, n: int) -> int:
    """Number of distinct preference contexts at the pair level.

    m = C(L, 2) consistent ordered pairs; choosing n of them and arranging
    them in sequence gives C(m, n) * n! contexts.
    """
    m = math.comb(L, 2)
    if n > m:
        raise ValueError(f"cannot draw {n} distinct pairs from {m}")
    return math.comb(m, n) * math.factorial(n)


def pairs_for_total_order(L: int) -> int:
    """ceil(L * log2 L), the pair budget quoted for pinning a total order."""
    if L <= 1:
        return 0
    return math.ceil(L * math.log2(L))


# ---------------------------------------------------------------------------
# patch extraction


def sample_patch(
    w: TerrainWorld, label: int, patch_size: int, rng: np.random.Generator
) -> Patch:
    """One uniform single-label window of the world, rendered to pixels."""
    corners = w.single_label_windows(label, patch_size)
    if len(corners) == 0:
        raise ValueError(f"world has no single-label {patch_size}x{patch_size} window of label {label}")
    x0, y0 = corners[rng.integers(len(corners))]
    pix = world_mod.render(w, (int(x0), int(y0), patch_size, patch_size)).pixels
    return Patch(pix, int(label))


def build_patch_bank(
    w: TerrainWorld, label: int, count: int = 800, patch_size: int = 16, rng_seed: int = 0
) -> PatchBank:
    """Uniform sample (without replacement) of single-label windows.

    Returns fewer than ``count`` patches when the world has fewer candidate
    windows; zero candidates means the world violates its coverage invariant.
    """
    corners = w.single_label_windows(label, patch_size)
    if len(corners) == 0:
        raise ValueError(f"no single-label windows for label {label}")
    rng = np.random.default_rng([rng_seed, label])
    take = min(count, len(corners))
    picks = rng.choice(len(corners), size=take, replace=False)
    patches = [
        Patch(world_mod.render(w, (int(corners[i][0]), int(corners[i][1]), patch_size, patch_size)).pixels, int(label))
        for i in picks
    ]
    return PatchBank(int(label), patches)


def _choose_pairs(ordering: TotalOrdering, n: int, rng: np.random.Generator):
    """n distinct ordering-consistent (preferred, dispreferred) label pairs,
    in uniformly random sequence order."""
    all_pairs = []
    for a, b in combinations(range(ordering.L), 2):
        if ordering.rank(a) < ordering.rank(b):
            all_pairs.append((a, b))
        else:
            all_pairs.append((b, a))
    if n > len(all_pairs):
        raise ValueError(f"n={n} exceeds the {len(all_pairs)} pairs of L={ordering.L}")
    idx = rng.choice(len(all_pairs), size=n, replace=False)
    return [all_pairs[i] for i in idx]


def sample_context(
    ordering: TotalOrdering,
    banks: Dict[int, PatchBank],
    n: int = 3,
    rng_seed: int = 0,
) -> PreferenceContext:
    """Draw n ordered pairs and one bank patch per slot."""
    rng = np.random.default_rng(rng_seed)
    pairs = _choose_pairs(ordering, n, rng)
    patch_pairs = []
    for pref_lab, disp_lab in pairs:
        pref = banks[pref_lab].patches[rng.integers(len(banks[pref_lab]))]
        disp = banks[disp_lab].patches[rng.integers(len(banks[disp_lab]))]
        patch_pairs.append((pref, disp))
    return PreferenceContext(patch_pairs)


def build_target(labels: np.ndarray, ordering: TotalOrdering) -> TargetCostmap:
    """Per-cell costs from ground-truth labels; sentinel cells are masked out."""
    labels = np.asarray(labels)
    mask = labels >= 0
    values = np.zeros(labels.shape, dtype=np.float32)
    lut = cost_lookup(ordering)
    values[mask] = lut[labels[mask]]
    return TargetCostmap(values, mask)


def make_example(
    w: TerrainWorld,
    pose: Pose,
    ordering: TotalOrdering,
    banks: Dict[int, PatchBank],
    n: int = 3,
    rng_seed: int = 0,
    window: Tuple[int, int] = (64, 64),
) -> TrainingExample:
    """Compose context sampling, observation, and target construction."""
    context = sample_context(ordering, banks, n, rng_seed)
    image = world_mod.observe(w, pose, window)
    labels = world_mod.label_window(w, pose, window)
    target = build_target(labels, ordering)
    provenance = {
        "phase": "adhoc",
        "ordering": list(ordering.order),
        "seed": rng_seed,
        "pose": [pose.x, pose.y, pose.theta],
        "world_seed": w.seed,
    }
    return TrainingExample(context, image, target, provenance)


# ---------------------------------------------------------------------------
# dataset generation

RIGHT_ANGLES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass
class DatasetConfig:
    """Knobs shared by all three dataset phases."""

    worlds: List[TerrainWorld]
    count: int
    n_pairs: int = 3
    patch_size: int = 16
    image_size: int = 64
    synthetic_pool: List[TextureSpec] = field(default_factory=list)
    max_replaced: int = 3
    thetas: Tuple[float, ...] = RIGHT_ANGLES

    def describe(self) -> Dict:
        return {
            "count": self.count,
            "n_pairs": self.n_pairs,
            "patch_size": self.patch_size,
            "image_size": self.image_size,
            "worlds": [w.recipe for w in self.worlds],
            "synthetic_pool": [t.id for t in self.synthetic_pool],
            "max_replaced": self.max_replaced,
        }


def _sample_pose(w: TerrainWorld, image_size: int, rng: np.random.Generator, theta: float) -> Pose:
    # half-integer centers keep right-angle observations exactly grid-aligned
    margin = image_size // 2
    x = float(rng.integers(margin, w.width - margin)) - 0.5
    y = float(rng.integers(margin, w.height - margin)) - 0.5
    return Pose(x, y, theta)


def _pose_with_labels(
    w: TerrainWorld,
    image_size: int,
    rng: np.random.Generator,
    theta: float,
    wanted: Sequence[int],
    attempts: int = 40,
) -> Pose:
    """Pose whose window contains at least one cell of a wanted label.

    Rejection-samples first, then falls back to centering near a random
    cell of a wanted label (coverage guarantees such a cell exists).
    """
    wanted = set(int(v) for v in wanted)
    for _ in range(attempts):
        pose = _sample_pose(w, image_size, rng, theta)
        present = set(np.unique(world_mod.label_window(w, pose, (image_size, image_size))))
        if present & wanted:
            return pose
    lab = int(rng.choice(sorted(wanted)))
    ys, xs = np.nonzero(w.labels == lab)
    i = rng.integers(len(xs))
    margin = image_size // 2
    x = float(np.clip(xs[i], margin, w.width - margin)) - 0.5
    y = float(np.clip(ys[i], margin, w.height - margin)) - 0.5
    return Pose(x, y, theta)


def materialize_example(phase: str, config: DatasetConfig, rng_seed: int, index: int) -> TrainingExample:
    """Build example ``index`` of a dataset; pure function of its arguments."""
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}; expected one of {PHASES}")
    rng = np.random.default_rng([rng_seed, index])
    w = config.worlds[rng.integers(len(config.worlds))]
    L = w.L
    theta = float(config.thetas[rng.integers(len(config.thetas))])

    replaced: Dict[int, TextureSpec] = {}
    if phase == "base":
        ordering = TotalOrdering.canonical(L)
    else:
        ordering = TotalOrdering.random(L, rng)
    if phase == "synthetic":
        if not config.synthetic_pool:
            raise ValueError("synthetic phase requires a non-empty synthetic texture pool")
        k = int(rng.integers(1, min(config.max_replaced, L) + 1))
        labs = rng.choice(L, size=k, replace=False)
        texs = rng.choice(len(config.synthetic_pool), size=k, replace=False)
        replaced = {int(l): config.synthetic_pool[int(t)] for l, t in zip(labs, texs)}
        w_view = w.with_textures(replaced)
        pose = _pose_with_labels(w, config.image_size, rng, theta, list(replaced))
    else:
        w_view = w
        pose = _sample_pose(w, config.image_size, rng, theta)

    pairs = _choose_pairs(ordering, config.n_pairs, rng)
    patch_pairs = []
    for pref_lab, disp_lab in pairs:
        pref = sample_patch(w_view, pref_lab, config.patch_size, rng)
        disp = sample_patch(w_view, disp_lab, config.patch_size, rng)
        patch_pairs.append((pref, disp))
    context = PreferenceContext(patch_pairs)

    image = world_mod.observe(w_view, pose, (config.image_size, config.image_size))
    labels = world_mod.label_window(w_view, pose, (config.image_size, config.image_size))
    target = build_target(labels, ordering)
    provenance = {
        "phase": phase,
        "ordering": list(ordering.order),
        "seed": int(rng_seed),
        "index": int(index),
        "world_seed": w.seed,
        "pose": [pose.x, pose.y, pose.theta],
        "replaced": {str(l): t.id for l, t in replaced.items()},
    }
    return TrainingExample(context, image, target, provenance)


def make_dataset(phase: str, config: DatasetConfig, rng_seed: int) -> Iterator[TrainingExample]:
    """Stream the examples of one dataset phase."""
    for i in range(config.count):
        yield materialize_example(phase, config, rng_seed, i)


# ---------------------------------------------------------------------------
# on-disk datasets


def save_dataset(out_dir, phase: str, config: DatasetConfig, rng_seed: int) -> Dict:
    """Write manifest.json plus one PACX record per example."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, ex in enumerate(make_dataset(phase, config, rng_seed)):
        ctx, img, tgt, mask = ex.arrays()
        fname = f"ex_{i:06d}.pacx"
        records.write_tensor_file(
            os.path.join(out_dir, fname),
            records.DATASET_MAGIC,
            {
                "context": ctx,
                "image": ex.image.pixels,  # (H, W, 3)
                "target": tgt,
                "mask": mask.astype(np.float32),
            },
        )
        entries.append({"file": fname, "provenance": ex.provenance})
    manifest = {
        "format": "PACX",
        "version": records.FORMAT_VERSION,
        "phase": phase,
        "seed": int(rng_seed),
        "config": config.describe(),
        "examples": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest


def load_example_record(path) -> Dict[str, np.ndarray]:
    _, _, tensors = records.read_tensor_file(path, records.DATASET_MAGIC)
    return tensors
