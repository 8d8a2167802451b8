"""Procedural terrain textures.

Every texture is a pure function of (cell coordinates, TextureSpec): the same
spec evaluated at the same cells always yields the same RGB values, which is
what makes worlds, patches, and datasets reproducible from seeds alone.

Two families exist: ``base`` textures stand in for the terrain types a robot
sees during ordinary data collection, and ``synthetic`` textures are the
replacement pool used to augment training with never-seen appearances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

TEXTURE_KINDS = ("speckle", "stripes", "checker", "blotch", "gradient_noise")

# Greedy max-min selection over an RGB lattice; min pairwise mean-abs
# distance 0.133, which keeps every texture pair separable by a wide margin.
_PALETTE = [
    (0.48, 0.48, 0.48),
    (0.08, 0.88, 0.88),
    (0.88, 0.08, 0.88),
    (0.08, 0.08, 0.08),
    (0.88, 0.88, 0.08),
    (0.08, 0.08, 0.88),
    (0.08, 0.68, 0.28),
    (0.68, 0.08, 0.28),
    (0.68, 0.68, 0.88),
    (0.28, 0.28, 0.68),
    (0.28, 0.88, 0.08),
    (0.68, 0.48, 0.08),
    (0.48, 0.88, 0.68),
    (0.88, 0.28, 0.48),
    (0.68, 0.88, 0.48),
    (0.08, 0.28, 0.48),
    (0.08, 0.48, 0.08),
    (0.08, 0.48, 0.68),
    (0.28, 0.08, 0.28),
    (0.28, 0.28, 0.08),
    (0.28, 0.68, 0.48),
    (0.28, 0.68, 0.88),
    (0.48, 0.08, 0.08),
    (0.48, 0.08, 0.68),
    (0.48, 0.48, 0.88),
    (0.48, 0.88, 0.28),
]

MIN_PATCH_SEPARATION = 0.05  # mean abs pixel difference over a 16x16 patch


@dataclass(frozen=True)
class TextureSpec:
    """Deterministic texture generator description.

    ``params`` must stay JSON-serializable; it is persisted verbatim into
    world files so a world can be rebuilt bit-identically elsewhere.
    """

    id: str
    family: str  # "base" | "synthetic"
    kind: str
    seed: int
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in ("base", "synthetic"):
            raise ValueError(f"unknown texture family {self.family!r}")
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}")

    def to_json(self) -> Dict:
        return {
            "id": self.id,
            "family": self.family,
            "kind": self.kind,
            "seed": self.seed,
            "params": dict(self.params),
        }

    @staticmethod
    def from_json(obj: Dict) -> "TextureSpec":
        return TextureSpec(
            id=obj["id"],
            family=obj["family"],
            kind=obj["kind"],
            seed=int(obj["seed"]),
            params=dict(obj.get("params", {})),
        )


def _hash01(xs: np.ndarray, ys: np.ndarray, seed: int) -> np.ndarray:
    """Stateless integer hash of cell coordinates mapped to [0, 1)."""
    h = xs.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    h ^= ys.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    h ^= np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xC4CEB9FE1A85EC53)
    h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise(xs, ys, seed, scale):
    """Smooth lattice noise in [0, 1): hashed corners, smoothstep blend."""
    fx = np.asarray(xs, dtype=np.float64) / scale
    fy = np.asarray(ys, dtype=np.float64) / scale
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = _smoothstep(fx - x0)
    ty = _smoothstep(fy - y0)
    n00 = _hash01(x0, y0, seed)
    n10 = _hash01(x0 + 1, y0, seed)
    n01 = _hash01(x0, y0 + 1, seed)
    n11 = _hash01(x0 + 1, y0 + 1, seed)
    nx0 = n00 + tx * (n10 - n00)
    nx1 = n01 + tx * (n11 - n01)
    return nx0 + ty * (nx1 - nx0)


def evaluate(spec: TextureSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Evaluate a texture at integer or fractional cell coordinates.

    Returns an array of shape xs.shape + (3,), float32 in [0, 1].
    """
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    p = spec.params
    color = np.array(p["color"], dtype=np.float64)
    amp = float(p.get("amp", 0.12))
    kind = spec.kind

    if kind == "speckle":
        n = _hash01(np.floor(xs).astype(np.int64), np.floor(ys).astype(np.int64), spec.seed)
        mod = amp * (n - 0.5)
    elif kind == "stripes":
        period = float(p.get("period", 7.0))
        angle = float(p.get("angle", 0.0))
        t = np.cos(angle) * xs + np.sin(angle) * ys
        mod = amp * 0.5 * np.sin(2.0 * np.pi * t / period)
    elif kind == "checker":
        size = int(p.get("size", 4))
        parity = ((np.floor(xs / size) + np.floor(ys / size)) % 2).astype(np.float64)
        mod = amp * (parity - 0.5)
    elif kind == "blotch":
        scale = float(p.get("scale", 9.0))
        n = _value_noise(xs, ys, spec.seed, scale)
        soft = np.clip((n - 0.5) * 6.0, -1.0, 1.0)  # near two-tone
        mod = amp * 0.5 * soft
    elif kind == "gradient_noise":
        scale = float(p.get("scale", 6.0))
        n = _value_noise(xs, ys, spec.seed, scale)
        n = 0.5 * n + 0.5 * _value_noise(xs, ys, spec.seed + 1, scale * 2.3)
        mod = amp * (n - 0.5)
    else:  # pragma: no cover - guarded by __post_init__
        raise ValueError(kind)

    out = color[(None,) * xs.ndim] + mod[..., None]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def render_patch(spec: TextureSpec, x0: int, y0: int, size: int) -> np.ndarray:
    """Render a size x size crop of the texture anchored at cell (x0, y0)."""
    ys, xs = np.mgrid[y0 : y0 + size, x0 : x0 + size]
    return evaluate(spec, xs, ys)


def validate_texture_set(specs, patch_size: int = 16, min_mad: float = MIN_PATCH_SEPARATION):
    """Require every pair of textures to be tellable apart on a small patch.

    Raises ValueError naming the first offending pair; returns the pairwise
    minimum otherwise. Guards learnability of preference contexts.
    """
    patches = [render_patch(s, 0, 0, patch_size).astype(np.float64) for s in specs]
    worst = np.inf
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            mad = float(np.abs(patches[i] - patches[j]).mean())
            worst = min(worst, mad)
            if mad < min_mad:
                raise ValueError(
                    f"textures {specs[i].id!r} and {specs[j].id!r} are too similar "
                    f"(mean abs diff {mad:.4f} < {min_mad})"
                )
    return worst


def default_base_textures():
    """Five base textures, one per base terrain label."""
    kinds = ["gradient_noise", "speckle", "stripes", "blotch", "checker"]
    out = []
    for i, kind in enumerate(kinds):
        out.append(
            TextureSpec(
                id=f"base{i}",
                family="base",
                kind=kind,
                seed=1000 + i,
                params={"color": list(_PALETTE[i]), "amp": 0.14},
            )
        )
    return out


def default_synthetic_textures():
    """Synthetic replacement pool: 14 training textures plus 6 held out.

    The first 14 are the augmentation pool. Most of them deliberately reuse
    base colors with a different pattern structure: replacement data built
    from them punishes color shortcuts, which is what makes the final
    training phase cost something on the original appearance distribution.
    The tail (ids syn14..syn19) is reserved by the evaluation harness for
    worlds whose appearance the model has never trained on: never seen, but
    statistically adjacent to the training pool the way a new terrain
    resembles familiar ones (colors perturbed off the fresh training
    colors, familiar pattern families).
    """
    collide = [(0, "stripes"), (0, "checker"), (1, "checker"), (1, "blotch"),
               (2, "blotch"), (2, "gradient_noise"), (3, "speckle"), (3, "stripes"),
               (4, "gradient_noise"), (4, "speckle")]
    fresh_colors = [_PALETTE[5 + j] for j in range(4)]
    held_out = [
        (0, "speckle", (0.13, -0.10, 0.11)),
        (1, "gradient_noise", (-0.11, 0.12, -0.10)),
        (2, "stripes", (0.12, 0.11, -0.12)),
        (3, "checker", (-0.10, -0.12, 0.13)),
        (0, "blotch", (-0.12, 0.13, 0.10)),
        (2, "checker", (-0.13, -0.10, 0.12)),
    ]
    out = []
    for i in range(20):
        if i < len(collide):
            base_idx, kind = collide[i]
            params = {"color": list(_PALETTE[base_idx]), "amp": 0.2}
        elif i < SYNTHETIC_TRAIN_COUNT:
            kind = TEXTURE_KINDS[i % len(TEXTURE_KINDS)]
            params = {"color": list(fresh_colors[i - len(collide)]), "amp": 0.16}
        else:
            anchor, kind, delta = held_out[i - SYNTHETIC_TRAIN_COUNT]
            color = [float(np.clip(c + d, 0.02, 0.98)) for c, d in zip(fresh_colors[anchor], delta)]
            params = {"color": color, "amp": 0.16}
        if kind == "stripes":
            params.setdefault("period", 5.0 + (i % 4) * 2.0)
            params.setdefault("angle", 0.35 * i)
        if kind == "checker":
            params.setdefault("size", 3 + (i % 3))
        out.append(
            TextureSpec(
                id=f"syn{i:02d}",
                family="synthetic",
                kind=kind,
                seed=2000 + i,
                params=params,
            )
        )
    return out


SYNTHETIC_TRAIN_COUNT = 14


def default_texture_sets():
    """(base, synthetic) default sets, separability-checked at construction."""
    base = default_base_textures()
    synth = default_synthetic_textures()
    validate_texture_set(base + synth)
    return base, synth


def set_fingerprint() -> str:
    """Stable digest of the default texture sets (cache invalidation)."""
    import hashlib
    import json

    base, synth = default_base_textures(), default_synthetic_textures()
    blob = json.dumps([t.to_json() for t in base + synth], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
