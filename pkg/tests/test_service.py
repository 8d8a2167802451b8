import base64
import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from pacer import model, service, world
from pacer.data import TotalOrdering
from pacer.experiments import informative_context, make_eval_world
from pacer.service import canonical_json, context_to_wire, create_app


@pytest.fixture(scope="module")
def worlds_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("worlds")
    w, start, goal = make_eval_world(201, unseen=False, size=128)
    world.save_world(w, d / "corridor201.json")
    small = world.generate_world(5, 96, 96, 3)
    world.save_world(small, d / "plain5.json")
    return d


@pytest.fixture(scope="module")
def client(worlds_dir, mini_checkpoint):
    app = create_app(checkpoint=mini_checkpoint, worlds_dir=str(worlds_dir))
    return TestClient(app)


@pytest.fixture(scope="module")
def wire_context(worlds_dir):
    w = world.load_world(worlds_dir / "corridor201.json")
    ctx = informative_context(w, TotalOrdering.canonical(w.L), rng_seed=9)
    return context_to_wire(ctx)


def decode_png_b64(b64, mode="RGB"):
    img = Image.open(io.BytesIO(base64.b64decode(b64)))
    return np.asarray(img.convert(mode))


def test_empty_registry_lists_nothing():
    app = create_app(checkpoint=None, worlds_dir=None)
    assert TestClient(app).get("/api/worlds").json() == []


def test_worlds_listing_and_stable_ids(worlds_dir, mini_checkpoint):
    ids = []
    for _ in range(2):
        app = create_app(checkpoint=None, worlds_dir=str(worlds_dir))
        docs = TestClient(app).get("/api/worlds").json()
        ids.append([d["id"] for d in docs])
        assert {d["id"]: d["L"] for d in docs} == {"corridor201": 5, "plain5": 3}
        assert all(decode_png_b64(d["thumbnail"]).ndim == 3 for d in docs)
    assert ids[0] == ids[1] == sorted(ids[0])


def test_world_detail_exposes_recipe_and_endpoints(client):
    doc = client.get("/api/worlds/corridor201").json()
    assert doc["size"] == [128, 128]
    assert doc["start"] and doc["goal"]
    assert doc["recipe"]["recipe"]["kind"] == "voronoi+corridor"


def test_patches_endpoint(client):
    empty = client.get("/api/worlds/plain5/patches", params={"label": 1, "count": 0})
    assert empty.json()["patches"] == []
    r1 = client.get("/api/worlds/plain5/patches", params={"label": 1, "count": 4, "seed": 3})
    r2 = client.get("/api/worlds/plain5/patches", params={"label": 1, "count": 4, "seed": 3})
    assert r1.json()["patches"] == r2.json()["patches"]
    for b64 in r1.json()["patches"]:
        assert decode_png_b64(b64).shape == (16, 16, 3)


def test_patches_errors(client):
    assert client.get("/api/worlds/nope/patches", params={"label": 0}).status_code == 404
    assert client.get("/api/worlds/plain5/patches", params={"label": 9}).status_code == 400


def test_costmap_requires_checkpoint(worlds_dir, wire_context):
    app = create_app(checkpoint=None, worlds_dir=str(worlds_dir))
    r = TestClient(app).post(
        "/api/costmap",
        json={"world_id": "plain5", "pose": {"x": 48, "y": 48}, "context": wire_context},
    )
    assert r.status_code == 409


def test_costmap_encoding_contract(client, wire_context, worlds_dir, mini_checkpoint):
    body = {"world_id": "corridor201", "pose": {"x": 64.5, "y": 64.5}, "context": wire_context}
    r = client.post("/api/costmap", json=body)
    assert r.status_code == 200
    png = decode_png_b64(r.json()["costmap"], mode="L")
    assert png.shape == (64, 64)
    # recompute server-side inference independently
    params = model.load_checkpoint(mini_checkpoint)
    w = world.load_world(worlds_dir / "corridor201.json")
    ctx = service.context_from_wire(wire_context)
    image = world.observe(w, world.Pose(64.5, 64.5, 0.0), (64, 64))
    cm = model.forward(params, image, ctx)
    assert np.array_equal(png, np.clip(np.round(cm.values * 255), 0, 255).astype(np.uint8))
    # identical request, identical bytes
    again = client.post("/api/costmap", json=body)
    assert again.json()["costmap"] == r.json()["costmap"]


def test_costmap_malformed_context(client):
    r = client.post(
        "/api/costmap",
        json={"world_id": "plain5", "pose": {"x": 10, "y": 10}, "context": {"pairs": []}},
    )
    assert r.status_code == 400
    bad_png = {"pairs": [{"preferred": "notbase64!", "dispreferred": "x"}] * 3}
    r2 = client.post(
        "/api/costmap", json={"world_id": "plain5", "pose": {"x": 10, "y": 10}, "context": bad_png}
    )
    assert r2.status_code == 400


def test_plan_single_cell_and_lambda_zero(client, wire_context):
    r = client.post(
        "/api/plan",
        json={
            "world_id": "corridor201",
            "start": [40, 40],
            "goal": [40, 40],
            "context": wire_context,
        },
    )
    assert r.status_code == 200
    assert r.json()["path"] == [[40, 40]]

    r2 = client.post(
        "/api/plan",
        json={
            "world_id": "corridor201",
            "start": [10, 10],
            "goal": [30, 20],
            "lambda": 0.0,
            "context": wire_context,
        },
    )
    cells = r2.json()["path"]
    assert len(cells) == 21  # octile-optimal cell count for (20, 10)
    assert abs(r2.json()["total_cost"] - (10 + 10 * np.sqrt(2))) < 1e-6


def test_plan_out_of_bounds(client, wire_context):
    r = client.post(
        "/api/plan",
        json={"world_id": "corridor201", "start": [-1, 0], "goal": [5, 5], "context": wire_context},
    )
    assert r.status_code == 400


def test_plan_swapped_context_changes_tiers(client, worlds_dir):
    """Flipping every preference pair must flip which terrain the plan rides."""
    w = world.load_world(worlds_dir / "corridor201.json")
    start, goal = w.recipe["start"], w.recipe["goal"]
    canonical = TotalOrdering.canonical(w.L)
    ctx_fwd = context_to_wire(informative_context(w, canonical, rng_seed=4))
    ctx_rev = context_to_wire(informative_context(w, canonical.inverted(), rng_seed=4))
    reports = []
    for ctx in (ctx_fwd, ctx_rev):
        r = client.post(
            "/api/plan",
            json={
                "world_id": "corridor201",
                "start": start,
                "goal": goal,
                "context": ctx,
                "lambda": 10.0,
            },
        )
        assert r.status_code == 200
        reports.append(r.json()["tier_report"])
    assert reports[0] != reports[1]


def test_plan_echo_supports_replay(client, wire_context):
    r = client.post(
        "/api/plan",
        json={"world_id": "corridor201", "start": [12, 12], "goal": [80, 90], "context": wire_context},
    )
    doc = r.json()
    assert doc["echo"]["world_id"] == "corridor201"
    assert doc["echo"]["lambda"] == 10.0
    assert doc["echo"]["ordering"] == [0, 1, 2, 3, 4]
    record = json.loads(doc["path_record_json"])
    assert record["cells"] == doc["path"]
    assert canonical_json(record) == doc["path_record_json"]


def test_admin_reload_swaps_model(worlds_dir, mini_run, wire_context):
    app = create_app(checkpoint=str(mini_run / "m_base.pacr"), worlds_dir=str(worlds_dir))
    c = TestClient(app)
    body = {"world_id": "corridor201", "pose": {"x": 64.5, "y": 64.5}, "context": wire_context}
    before = c.post("/api/costmap", json=body).json()["costmap"]
    r = c.post("/api/admin/reload", json={"checkpoint": str(mini_run / "m_synthetic.pacr")})
    assert r.status_code == 200
    after = c.post("/api/costmap", json=body).json()["costmap"]
    assert before != after
    assert c.post("/api/admin/reload", json={"checkpoint": "/nope.pacr"}).status_code == 400
