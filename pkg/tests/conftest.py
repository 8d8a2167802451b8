import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))  # oracles, golden_values

from pacer import model, textures, train, world
from pacer.train import TrainConfig, staged_train

CACHE_DIR = Path(__file__).resolve().parent.parent / ".pacer_cache"


def run_key(config: TrainConfig) -> str:
    blob = (
        json.dumps(config.to_json(), sort_keys=True)
        + f"|{config.network_spec().spec_hash():x}|{textures.set_fingerprint()}"
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def cached_run(config: TrainConfig) -> Path:
    """Train once per config; later sessions reuse the run directory.

    Training is deterministic, so the cached checkpoints are bit-identical
    to what a fresh run would produce.
    """
    rundir = CACHE_DIR / f"run_{run_key(config)}"
    if not (rundir / "report.json").exists():
        staged_train(config, rundir)
    return rundir


@pytest.fixture(scope="session")
def golden_world():
    """The frozen reference world used by regression checks."""
    return world.generate_world(1, 256, 256, 5)


@pytest.fixture(scope="session")
def striped_world():
    """Hand-built three-band world: deterministic single-label geometry."""
    base, _ = textures.default_texture_sets()
    labels = np.zeros((192, 192), dtype=np.int16)
    labels[:, 88:104] = 1
    labels[:, 104:] = 2
    w = world.TerrainWorld(
        0, 192, 192, labels, {i: base[i] for i in range(3)}, recipe={"kind": "striped"}
    )
    w.prerender()
    return w


@pytest.fixture(scope="session")
def small_world():
    base, _ = textures.default_texture_sets()
    return world.generate_world(5, 96, 96, 3, {i: base[i] for i in range(3)})


@pytest.fixture(scope="session")
def mini_config():
    """Tiny but real staged training; behavior tests run against its trio."""
    return TrainConfig(
        seed=5,
        world_size=128,
        n_worlds=2,
        counts={"base": 260, "shuffled": 130, "synthetic": 130},
        val_count=40,
        epochs={"base": 3, "shuffled": 1, "synthetic": 3},
    )


@pytest.fixture(scope="session")
def mini_run(mini_config):
    return cached_run(mini_config)


@pytest.fixture(scope="session")
def mini_checkpoint(mini_run):
    return str(mini_run / "m_synthetic.pacr")


@pytest.fixture(scope="session")
def desk_config():
    """The acceptance-scale configuration (spec-pinned sizes and epochs)."""
    return TrainConfig()


@pytest.fixture(scope="session")
def desk_run(desk_config):
    return cached_run(desk_config)


@pytest.fixture(scope="session")
def desk_checkpoints(desk_run, desk_config):
    spec = desk_config.network_spec()
    return {
        name: model.load_checkpoint(desk_run / fname, spec)
        for name, fname in train.CHECKPOINT_NAMES.items()
    }


def sha_array(arr) -> str:
    arr = np.asarray(arr)
    payload = repr(arr.shape).encode() + b"|" + arr.astype("<f8").tobytes()
    return hashlib.sha256(payload).hexdigest()[:16]
