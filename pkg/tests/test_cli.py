import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from pacer import data, service, world
from pacer.cli import main
from pacer.data import TotalOrdering
from pacer.experiments import informative_context


@pytest.fixture()
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_world_gen_and_load(runner, tmp_path):
    out = tmp_path / "w.json"
    png = tmp_path / "w.png"
    run_ok(runner, ["world", "gen", "--seed", "9", "--width", "96", "--height", "96",
                    "--labels", "3", "--out", str(out), "--png", str(png)])
    w = world.load_world(out)
    assert w.width == 96 and w.L == 3
    assert png.exists()


def test_world_gen_corridors(runner, tmp_path):
    out = tmp_path / "c.json"
    result = run_ok(runner, ["world", "gen", "--seed", "9", "--labels", "3",
                             "--corridors", "--out", str(out)])
    assert "corridor endpoints" in result.output
    w = world.load_world(out)
    assert w.recipe["kind"] == "voronoi+corridor"


def test_context_sample_writes_wire_format(runner, tmp_path):
    wpath = tmp_path / "w.json"
    run_ok(runner, ["world", "gen", "--seed", "9", "--width", "96", "--height", "96",
                    "--labels", "3", "--out", str(wpath)])
    ctx_path = tmp_path / "ctx.json"
    run_ok(runner, ["context", "--world", str(wpath), "--ordering", "2,1,0",
                    "--seed", "4", "--out", str(ctx_path)])
    with open(ctx_path) as f:
        doc = json.load(f)
    assert len(doc["pairs"]) == 3
    ctx = service.context_from_wire(doc)
    assert ctx.packed.shape == (9, 32, 16)


def test_data_gen_writes_records(runner, tmp_path):
    wpath = tmp_path / "w.json"
    run_ok(runner, ["world", "gen", "--seed", "9", "--width", "96", "--height", "96",
                    "--labels", "3", "--out", str(wpath)])
    out_dir = tmp_path / "ds"
    run_ok(runner, ["data", "gen", "--phase", "base", "--count", "4", "--seed", "3",
                    "--out", str(out_dir), "--world", str(wpath)])
    with open(out_dir / "manifest.json") as f:
        manifest = json.load(f)
    assert manifest["phase"] == "base"
    assert len(manifest["examples"]) == 4
    rec = data.load_example_record(out_dir / manifest["examples"][0]["file"])
    assert rec["context"].shape == (9, 32, 16)
    assert rec["image"].shape == (64, 64, 3)


def test_eval_theorem_suite(runner, tmp_path):
    out = tmp_path / "theorem.json"
    run_ok(runner, ["eval", "--suite", "theorem", "--out", str(out)])
    with open(out) as f:
        report = json.load(f)
    assert report["instances"] == 20
    assert report["affine_consistent"] == 20
    assert report["witnesses_found"] == 20
    assert (tmp_path / "theorem.csv").exists()


@pytest.fixture(scope="module")
def corridor_world_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cliworld")
    from pacer.experiments import make_eval_world

    w, start, goal = make_eval_world(203, unseen=False, size=128)
    path = d / "c203.json"
    world.save_world(w, path)
    return path, start, goal


def test_plan_cli_and_scenario_replay(runner, tmp_path, corridor_world_file, mini_checkpoint):
    wfile, start, goal = corridor_world_file
    w = world.load_world(wfile)
    ctx = informative_context(w, TotalOrdering.canonical(w.L), rng_seed=2)
    ctx_path = tmp_path / "ctx.json"
    with open(ctx_path, "w") as f:
        json.dump(service.context_to_wire(ctx), f)
    out = tmp_path / "path.json"
    fig = tmp_path / "plan.png"
    run_ok(runner, ["plan", "--world", str(wfile), "--checkpoint", mini_checkpoint,
                    "--context", str(ctx_path), "--start", f"{start[0]},{start[1]}",
                    "--goal", f"{goal[0]},{goal[1]}", "--out", str(out), "--figure", str(fig)])
    with open(out) as f:
        record = json.load(f)
    assert record["cells"][0] == list(start)
    assert record["cells"][-1] == list(goal)
    assert fig.exists() and (tmp_path / "plan_field.png").exists()

    # scenario replay must reproduce the same bytes
    with open(wfile) as f:
        world_doc = json.load(f)
    scenario = {
        "world": world_doc,
        "context": service.context_to_wire(ctx),
        "start": list(start),
        "goal": list(goal),
        "lambda": 10.0,
        "ordering": list(range(w.L)),
        "checkpoint": mini_checkpoint,
    }
    sc_path = tmp_path / "scenario.json"
    with open(sc_path, "w") as f:
        json.dump(scenario, f)
    out2 = tmp_path / "path2.json"
    run_ok(runner, ["plan", "--scenario", str(sc_path), "--out", str(out2)])
    assert out.read_bytes() == out2.read_bytes()


def test_cli_replay_matches_service_bytes(tmp_path, corridor_world_file, mini_checkpoint, runner):
    """The web plan endpoint and the CLI must produce identical path records."""
    wfile, start, goal = corridor_world_file
    worlds_dir = tmp_path / "worlds"
    worlds_dir.mkdir()
    with open(wfile) as f:
        world_doc = json.load(f)
    with open(worlds_dir / "c203.json", "w") as f:
        json.dump(world_doc, f)
    app = service.create_app(checkpoint=mini_checkpoint, worlds_dir=str(worlds_dir))
    client = TestClient(app)
    w = world.load_world(wfile)
    wire = service.context_to_wire(informative_context(w, TotalOrdering.canonical(w.L), rng_seed=6))
    resp = client.post(
        "/api/plan",
        json={"world_id": "c203", "start": list(start), "goal": list(goal),
              "context": wire, "lambda": 10.0},
    ).json()
    scenario = {
        "world": world_doc,
        "context": wire,
        "start": list(start),
        "goal": list(goal),
        "lambda": 10.0,
        "ordering": resp["echo"]["ordering"],
        "checkpoint": mini_checkpoint,
    }
    sc_path = tmp_path / "sc.json"
    with open(sc_path, "w") as f:
        json.dump(scenario, f)
    out = tmp_path / "replayed.json"
    run_ok(runner, ["plan", "--scenario", str(sc_path), "--out", str(out)])
    assert out.read_text() == resp["path_record_json"]


def test_train_cli_micro(runner, tmp_path):
    config = {
        "seed": 23,
        "world_size": 96,
        "n_worlds": 2,
        "counts": {"base": 16, "shuffled": 8, "synthetic": 8},
        "val_count": 4,
        "epochs": {"base": 1, "shuffled": 1, "synthetic": 1},
    }
    cfg_path = tmp_path / "train.json"
    with open(cfg_path, "w") as f:
        json.dump(config, f)
    rundir = tmp_path / "run"
    result = run_ok(runner, ["train", "--config", str(cfg_path), "--out", str(rundir)])
    assert "val bce per phase" in result.output
    for name in ("m_base.pacr", "m_shuffled.pacr", "m_synthetic.pacr",
                 "report.json", "loss_curves.png", "losses.csv", "train_config.json"):
        assert (rundir / name).exists(), name
