"""The costmap network: two encoders, one decoder, sigmoid output.

The image encoder downsamples the bird's-eye view to an 8x8 feature map; the
context encoder squeezes the packed preference tensor into one embedding
vector, which is broadcast across the bottleneck and concatenated before
decoding back to full resolution.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from typing import Dict, Tuple

import numpy as np

from . import nn, records
from .data import PreferenceContext
from .nn import Tensor
from .world import BevImage


@dataclass(frozen=True)
class NetworkSpec:
    """Static shape plan; hashed into checkpoints to reject mismatched loads."""

    image_size: int = 64
    patch_size: int = 16
    n_pairs: int = 3
    channels: int = 3
    bev_channels: Tuple[int, ...] = (16, 32, 64)
    pref_channels: Tuple[int, ...] = (16, 32)
    pref_embed: int = 64
    decoder_channels: Tuple[int, ...] = (64, 24, 12, 6)
    kernel: int = 3
    out_kernel: int = 1  # channel mixer; dec convs already smooth spatially

    @property
    def context_channels(self) -> int:
        return self.n_pairs * self.channels

    @property
    def bottleneck(self) -> int:
        return self.image_size // (2 ** len(self.bev_channels))

    def spec_hash(self) -> int:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        k = self.kernel
        shapes: Dict[str, Tuple[int, ...]] = {}
        cin = self.channels
        for i, cout in enumerate(self.bev_channels):
            shapes[f"bev{i}.w"] = (cout, cin, k, k)
            shapes[f"bev{i}.b"] = (cout,)
            cin = cout
        cin = self.context_channels
        for i, cout in enumerate(self.pref_channels):
            shapes[f"pref{i}.w"] = (cout, cin, k, k)
            shapes[f"pref{i}.b"] = (cout,)
            cin = cout
        shapes["pref_fc.w"] = (self.pref_embed, self.pref_channels[-1])
        shapes["pref_fc.b"] = (self.pref_embed,)
        cin = self.bev_channels[-1] + self.pref_embed
        for i, cout in enumerate(self.decoder_channels):
            shapes[f"dec{i}.w"] = (cout, cin, k, k)
            shapes[f"dec{i}.b"] = (cout,)
            cin = cout
        ko = self.out_kernel
        shapes["out.w"] = (1, cin, ko, ko)
        shapes["out.b"] = (1,)
        return shapes


@dataclass
class Costmap:
    """Per-pixel traversal cost in (0, 1), aligned to its input image."""

    values: np.ndarray  # (H, W) float32


class ModelParams:
    """Named parameter tensors matching a NetworkSpec."""

    def __init__(self, spec: NetworkSpec, tensors: Dict[str, Tensor], seed: int = -1):
        expected = spec.param_shapes()
        if set(tensors) != set(expected):
            raise ValueError("parameter names do not match the network spec")
        for name, t in tensors.items():
            if tuple(t.data.shape) != expected[name]:
                raise ValueError(
                    f"parameter {name}: shape {t.data.shape} != {expected[name]}"
                )
        self.spec = spec
        self.tensors = tensors
        self.seed = seed

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.spec,
            {k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.tensors.items()},
            self.seed,
        )


def init_params(spec: NetworkSpec, seed: int) -> ModelParams:
    """Kaiming-uniform fan-in init for weights, zeros for biases."""
    rng = np.random.default_rng([seed, 0xC0])
    tensors: Dict[str, Tensor] = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".b"):
            data = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            data = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        tensors[name] = Tensor(data, requires_grad=True)
    return ModelParams(spec, tensors, seed)


def forward_batch(params: ModelParams, images: Tensor, contexts: Tensor) -> Tensor:
    """(N, 3, S, S) images + (N, n*c, 2h, w) contexts -> (N, 1, S, S) costs."""
    spec = params.spec
    n, c, hh, ww = images.data.shape
    if (c, hh, ww) != (spec.channels, spec.image_size, spec.image_size):
        raise ValueError(f"image batch shape {images.data.shape} does not match spec")
    if contexts.data.shape[0] != n or contexts.data.shape[1] != spec.context_channels:
        raise ValueError(f"context batch shape {contexts.data.shape} does not match spec")

    x = images
    for i in range(len(spec.bev_channels)):
        x = nn.relu(nn.conv2d(x, params[f"bev{i}.w"], params[f"bev{i}.b"], stride=2, padding=1))

    p = contexts
    for i in range(len(spec.pref_channels)):
        p = nn.relu(nn.conv2d(p, params[f"pref{i}.w"], params[f"pref{i}.b"], stride=2, padding=1))
    p = nn.global_avg_pool(p)
    p = nn.linear(p, params["pref_fc.w"], params["pref_fc.b"])

    s = spec.bottleneck
    fused = nn.concat_channels(x, nn.tile_spatial(p, s, s))

    d = nn.relu(nn.conv2d(fused, params["dec0.w"], params["dec0.b"], stride=1, padding=1))
    for i in range(1, len(spec.decoder_channels)):
        d = nn.upsample_nearest2x(d)
        d = nn.relu(nn.conv2d(d, params[f"dec{i}.w"], params[f"dec{i}.b"], stride=1, padding=1))
    out = nn.conv2d(d, params["out.w"], params["out.b"], stride=1, padding=spec.out_kernel // 2)
    return nn.sigmoid(out)


def forward(params: ModelParams, image: BevImage, context: PreferenceContext) -> Costmap:
    """Single-example inference on domain types."""
    img = np.ascontiguousarray(image.pixels.transpose(2, 0, 1))[None]
    ctx = context.packed[None]
    out = forward_batch(params, Tensor(img), Tensor(ctx))
    return Costmap(out.data[0, 0].astype(np.float32))


def save_checkpoint(params: ModelParams, path) -> None:
    records.write_tensor_file(
        path,
        records.CHECKPOINT_MAGIC,
        {name: t.data for name, t in params.tensors.items()},
        spec_hash=params.spec.spec_hash(),
    )


def load_checkpoint(path, spec: NetworkSpec = None) -> ModelParams:
    """Load and validate a checkpoint against the compiled network spec."""
    spec = spec or NetworkSpec()
    _, spec_hash, tensors = records.read_tensor_file(path, records.CHECKPOINT_MAGIC)
    if spec_hash != spec.spec_hash():
        raise ValueError(
            f"checkpoint spec hash {spec_hash:#x} does not match compiled spec {spec.spec_hash():#x}"
        )
    wrapped = {k: Tensor(v, requires_grad=True) for k, v in tensors.items()}
    return ModelParams(spec, wrapped)
