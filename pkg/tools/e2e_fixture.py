#!/usr/bin/env python3
"""Build (or reuse) the artifacts the UI integration test serves:
a trained checkpoint and a worlds directory. Prints their paths as JSON.
"""

import json
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "tests"))

from conftest import cached_run  # noqa: E402

from pacer import world as world_mod  # noqa: E402
from pacer.experiments import make_eval_world  # noqa: E402
from pacer.train import TrainConfig  # noqa: E402


def main():
    config = TrainConfig(
        seed=5,
        world_size=128,
        n_worlds=2,
        counts={"base": 260, "shuffled": 130, "synthetic": 130},
        val_count=40,
        epochs={"base": 3, "shuffled": 1, "synthetic": 3},
    )
    rundir = cached_run(config)
    worlds_dir = os.path.join(ROOT, ".pacer_cache", "e2e_worlds")
    os.makedirs(worlds_dir, exist_ok=True)
    path = os.path.join(worlds_dir, "corridor401.json")
    if not os.path.exists(path):
        w, _, _ = make_eval_world(401, unseen=False, size=128)
        world_mod.save_world(w, path)
    print(json.dumps({
        "checkpoint": str(rundir / "m_synthetic.pacr"),
        "worlds_dir": worlds_dir,
    }))


if __name__ == "__main__":
    main()
