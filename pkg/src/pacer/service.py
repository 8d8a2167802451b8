"""HTTP service: world browsing, patch sampling, costmap inference, planning.

Stateless request handling over an immutable loaded model; the only mutation
is the admin checkpoint reload, which swaps the model atomically. Every
response echoes the request parameters and seeds needed to replay it through
the CLI.
"""

from __future__ import annotations

import base64
import io
import json
import os
import threading
from typing import Dict, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image

from . import data as data_mod
from . import evaluation, model as model_mod, plan as plan_mod, world as world_mod
from .data import Patch, PreferenceContext, TotalOrdering
from .evaluation import TierMap
from .model import ModelParams, NetworkSpec
from .world import TerrainWorld

N_PAIRS = 3
PATCH_SIZE = 16


def png_b64(pixels: np.ndarray, mode: str = "RGB") -> str:
    arr = world_mod.image_to_u8(pixels)
    if mode == "L" and arr.ndim == 3:
        arr = arr[..., 0]
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_patch_png(b64: str) -> Patch:
    try:
        raw = base64.b64decode(b64, validate=True)
        img = Image.open(io.BytesIO(raw))
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    except Exception as exc:
        raise HTTPException(400, f"patch is not a decodable PNG: {exc}") from exc
    if arr.shape != (PATCH_SIZE, PATCH_SIZE, 3):
        raise HTTPException(400, f"patch must decode to 16x16x3, got {arr.shape}")
    return Patch(arr)


def context_from_wire(doc: Dict) -> PreferenceContext:
    pairs = doc.get("pairs")
    if not isinstance(pairs, list) or len(pairs) != N_PAIRS:
        raise HTTPException(400, f"context must hold exactly {N_PAIRS} pairs")
    out = []
    for p in pairs:
        if "preferred" not in p or "dispreferred" not in p:
            raise HTTPException(400, "each pair needs 'preferred' and 'dispreferred' patches")
        out.append((decode_patch_png(p["preferred"]), decode_patch_png(p["dispreferred"])))
    return PreferenceContext(out)


def context_to_wire(ctx: PreferenceContext) -> Dict:
    return {
        "pairs": [
            {"preferred": png_b64(a.pixels), "dispreferred": png_b64(b.pixels)}
            for a, b in ctx.pairs
        ]
    }


def path_record(path: plan_mod.PlanPath, tier: evaluation.TierReport) -> Dict:
    return {
        "cells": [[int(x), int(y)] for x, y in path.cells],
        "total_cost": path.total_cost,
        "tier_breakdown": tier.as_dict(),
    }


def canonical_json(obj) -> str:
    """One serializer for every artifact that must replay byte-identically."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class ServiceState:
    def __init__(self, checkpoint: Optional[str], worlds_dir: Optional[str]):
        self.spec = NetworkSpec()
        self.params: Optional[ModelParams] = None
        self.checkpoint_path = checkpoint
        self.worlds: Dict[str, TerrainWorld] = {}
        self.world_files: Dict[str, str] = {}
        self.request_count = 0
        self._swap_lock = threading.Lock()
        if checkpoint:
            self.params = model_mod.load_checkpoint(checkpoint, self.spec)
        if worlds_dir:
            for name in sorted(os.listdir(worlds_dir)):
                if name.endswith(".json"):
                    path = os.path.join(worlds_dir, name)
                    wid = name[: -len(".json")]
                    self.worlds[wid] = world_mod.load_world(path)
                    self.world_files[wid] = path

    def reload(self, checkpoint: str):
        params = model_mod.load_checkpoint(checkpoint, self.spec)
        with self._swap_lock:
            self.params = params
            self.checkpoint_path = checkpoint

    def world(self, world_id: str) -> TerrainWorld:
        w = self.worlds.get(world_id)
        if w is None:
            raise HTTPException(404, f"unknown world {world_id!r}")
        return w

    def require_model(self) -> ModelParams:
        if self.params is None:
            raise HTTPException(409, "no checkpoint loaded")
        return self.params


def _world_doc(state: ServiceState, wid: str) -> Dict:
    with open(state.world_files[wid]) as f:
        return json.load(f)


def create_app(
    checkpoint: Optional[str] = None,
    worlds_dir: Optional[str] = None,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="pacer service")
    state = ServiceState(checkpoint, worlds_dir)
    app.state.service = state

    @app.middleware("http")
    async def count_requests(request, call_next):
        state.request_count += 1
        return await call_next(request)

    @app.get("/api/worlds")
    def list_worlds():
        out = []
        for wid, w in state.worlds.items():
            thumb = w.prerender()[:: max(1, w.height // 96), :: max(1, w.width // 96)]
            out.append(
                {
                    "id": wid,
                    "size": [w.width, w.height],
                    "L": w.L,
                    "thumbnail": png_b64(thumb),
                }
            )
        return out

    @app.get("/api/worlds/{world_id}")
    def world_detail(world_id: str):
        w = state.world(world_id)
        recipe = w.recipe
        return {
            "id": world_id,
            "size": [w.width, w.height],
            "L": w.L,
            "start": recipe.get("start"),
            "goal": recipe.get("goal"),
            "image": png_b64(w.prerender()),
            "recipe": _world_doc(state, world_id),
        }

    @app.get("/api/worlds/{world_id}/patches")
    def world_patches(world_id: str, label: int, count: int = 8, seed: int = 0):
        w = state.world(world_id)
        if not (0 <= label < w.L):
            raise HTTPException(400, f"label must be in [0, {w.L})")
        if count < 0:
            raise HTTPException(400, "count must be >= 0")
        rng = np.random.default_rng([seed, label])
        patches = [
            png_b64(data_mod.sample_patch(w, label, PATCH_SIZE, rng).pixels)
            for _ in range(count)
        ]
        return {"world_id": world_id, "label": label, "seed": seed, "patches": patches}

    @app.post("/api/costmap")
    def costmap(body: Dict):
        params = state.require_model()
        w = state.world(str(body.get("world_id")))
        pose_doc = body.get("pose") or {}
        try:
            pose = world_mod.Pose(
                float(pose_doc["x"]), float(pose_doc["y"]), float(pose_doc.get("theta", 0.0))
            )
        except (KeyError, TypeError, ValueError):
            raise HTTPException(400, "pose must provide numeric x and y")
        if not (0 <= pose.x < w.width and 0 <= pose.y < w.height):
            raise HTTPException(400, "pose outside world bounds")
        ctx = context_from_wire(body.get("context") or {})
        image = world_mod.observe(w, pose, (params.spec.image_size,) * 2)
        cm = model_mod.forward(params, image, ctx)
        return {
            "costmap": png_b64(cm.values, mode="L"),
            "stats": {
                "min": float(cm.values.min()),
                "max": float(cm.values.max()),
                "mean": float(cm.values.mean()),
            },
            "echo": {
                "world_id": body.get("world_id"),
                "pose": [pose.x, pose.y, pose.theta],
                "checkpoint": state.checkpoint_path,
            },
        }

    @app.post("/api/plan")
    def plan_route(body: Dict):
        params = state.require_model()
        w = state.world(str(body.get("world_id")))
        try:
            sx, sy = (int(v) for v in body["start"])
            gx, gy = (int(v) for v in body["goal"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(400, "start and goal must be [x, y] cell pairs")
        if not (0 <= sx < w.width and 0 <= sy < w.height and 0 <= gx < w.width and 0 <= gy < w.height):
            raise HTTPException(400, "start or goal outside world bounds")
        lam = float(body.get("lambda", 10.0))
        ordering_ids = body.get("ordering") or list(range(w.L))
        try:
            ordering = TotalOrdering(tuple(int(i) for i in ordering_ids))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        ctx = context_from_wire(body.get("context") or {})
        field = plan_mod.build_cost_field(w, params, ctx)
        path = plan_mod.astar(field, (sx, sy), (gx, gy), plan_mod.PlannerConfig(lam))
        tier = evaluation.tier_proportions(path, w.labels, TierMap(ordering))
        record = path_record(path, tier)
        return {
            "path": record["cells"],
            "total_cost": record["total_cost"],
            "tier_report": record["tier_breakdown"],
            "path_record_json": canonical_json(record),
            "field_png": png_b64(field.values, mode="L"),
            "echo": {
                "world_id": body.get("world_id"),
                "start": [sx, sy],
                "goal": [gx, gy],
                "lambda": lam,
                "ordering": list(ordering.order),
                "checkpoint": state.checkpoint_path,
            },
        }

    @app.post("/api/admin/reload")
    def reload_checkpoint(body: Dict):
        path = body.get("checkpoint")
        if not path or not os.path.exists(path):
            raise HTTPException(400, f"checkpoint {path!r} not found")
        state.reload(path)
        return {"checkpoint": path}

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
