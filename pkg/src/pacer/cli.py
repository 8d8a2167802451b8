"""Command-line interface.

    pacer world gen      build a terrain world file (plus optional PNG)
    pacer context sample draw a preference context as a wire-format file
    pacer data gen       write a dataset directory of example records
    pacer train          staged training into a run directory
    pacer plan           plan a path on a world with a trained checkpoint
    pacer eval           evaluation suites: tiers | ranking | nc | theorem
    pacer serve          HTTP service (and static UI, if built)

Report-producing commands write JSON plus a CSV flattening and PNG figures
alongside it.
"""

from __future__ import annotations

import json
import os

import click
import numpy as np

from . import data as data_mod
from . import evaluation, experiments, model as model_mod, plan as plan_mod
from . import service as service_mod
from . import textures, train as train_mod, viz, world as world_mod
from .data import TotalOrdering


@click.group()
def main():
    """Preference-conditioned terrain costmaps: data, training, planning, evaluation."""


def _parse_xy(text: str):
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError:
        raise click.BadParameter(f"expected 'x,y', got {text!r}")


def _parse_ordering(text, L):
    if not text:
        return TotalOrdering.canonical(L)
    return TotalOrdering(tuple(int(t) for t in text.split(",")))


# ---------------------------------------------------------------------------
# world


@main.group()
def world():
    """Terrain world files."""


@world.command("gen")
@click.option("--seed", type=int, required=True)
@click.option("--width", type=int, default=192, show_default=True)
@click.option("--height", type=int, default=192, show_default=True)
@click.option("--labels", "n_labels", type=int, default=3, show_default=True)
@click.option("--corridors/--no-corridors", default=False, show_default=True,
              help="carve low/high corridors between a start and goal")
@click.option("--unseen-textures", is_flag=True, help="use held-out synthetic textures")
@click.option("--out", type=click.Path(), required=True)
@click.option("--png", type=click.Path(), default=None, help="also render to PNG")
def world_gen(seed, width, height, n_labels, corridors, unseen_textures, out, png):
    base, _ = textures.default_texture_sets()
    if unseen_textures:
        pool = experiments.held_out_textures()
        assignment = {i: pool[i % len(pool)] for i in range(n_labels)}
    else:
        assignment = {i: base[i] for i in range(n_labels)}
    if corridors:
        w, start, goal = world_mod.generate_corridor_world(
            seed, width, height, n_labels, assignment, corridor_labels=(n_labels - 1, 0)
        )
        click.echo(f"corridor endpoints: start={start} goal={goal}")
    else:
        w = world_mod.generate_world(seed, width, height, n_labels, assignment)
    world_mod.save_world(w, out)
    click.echo(f"wrote {out} (coverage {np.round(w.coverage(), 3).tolist()})")
    if png:
        world_mod.export_png(w.prerender(), png)
        click.echo(f"wrote {png}")


# ---------------------------------------------------------------------------
# context


@main.command("context")
@click.option("--world", "world_path", type=click.Path(exists=True), required=True)
@click.option("--ordering", default="", help="label ids, most preferred first (e.g. 0,1,2)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def context_sample(world_path, ordering, seed, out):
    """Sample a preference context from a world as a wire-format JSON file."""
    w = world_mod.load_world(world_path)
    order = _parse_ordering(ordering, w.L)
    ctx = experiments.informative_context(w, order, rng_seed=seed)
    doc = service_mod.context_to_wire(ctx)
    doc["meta"] = {"world": os.path.abspath(world_path), "ordering": list(order.order), "seed": seed}
    with open(out, "w") as f:
        json.dump(doc, f, indent=2)
    click.echo(f"wrote {out}")


# ---------------------------------------------------------------------------
# data


@main.group()
def data():
    """Dataset generation."""


@data.command("gen")
@click.option("--phase", type=click.Choice(data_mod.PHASES), required=True)
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--world", "world_paths", type=click.Path(exists=True), multiple=True,
              help="world file(s); defaults to the training worlds")
def data_gen(phase, count, seed, out, world_paths):
    config = train_mod.TrainConfig()
    if world_paths:
        worlds = [world_mod.load_world(p) for p in world_paths]
    else:
        worlds = config.build_worlds()
    for w in worlds:
        w.prerender()
    dconfig = config.dataset_config(worlds, count)
    manifest = data_mod.save_dataset(out, phase, dconfig, seed)
    click.echo(f"wrote {len(manifest['examples'])} examples to {out}")


# ---------------------------------------------------------------------------
# train


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TrainConfig JSON; defaults to the desk-scale configuration")
@click.option("--full-scale", is_flag=True, help="use the 100/5/100 epoch schedule")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def train_cmd(config_path, full_scale, out_dir):
    """Staged training; writes three checkpoints, report.json, CSV, figures."""
    if config_path:
        with open(config_path) as f:
            config = train_mod.TrainConfig.from_json(json.load(f))
    elif full_scale:
        config = train_mod.TrainConfig.full_scale()
    else:
        config = train_mod.TrainConfig()
    report = train_mod.staged_train(config, out_dir, log=click.echo)
    viz.loss_curves_figure(report.phase_losses, os.path.join(out_dir, "loss_curves.png"))
    rows = []
    for phase, losses in report.phase_losses.items():
        rows += [[phase, i, v] for i, v in enumerate(losses)]
    viz.write_csv(os.path.join(out_dir, "losses.csv"), ["phase", "epoch", "mean_bce"], rows)
    click.echo(f"val bce per phase: {report.val_bce}")
    click.echo(f"done in {report.wall_time_s / 60:.1f} min; run dir: {out_dir}")


# ---------------------------------------------------------------------------
# plan


@main.command("plan")
@click.option("--world", "world_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--context", "context_path", type=click.Path(exists=True), default=None,
              help="wire-format context JSON")
@click.option("--start", default=None, help="x,y")
@click.option("--goal", default=None, help="x,y")
@click.option("--lambda", "lam", type=float, default=10.0, show_default=True)
@click.option("--ordering", default="", help="hidden ordering for the tier breakdown")
@click.option("--scenario", type=click.Path(exists=True), default=None,
              help="replay an exported scenario file instead of separate flags")
@click.option("--out", type=click.Path(), required=True)
@click.option("--figure", type=click.Path(), default=None, help="path overlay PNG")
def plan_cmd(world_path, checkpoint, context_path, start, goal, lam, ordering, scenario, out, figure):
    """Plan start -> goal over a model-generated cost field."""
    if scenario:
        with open(scenario) as f:
            sc = json.load(f)
        w = _world_from_doc(sc["world"])
        ctx_doc = sc["context"]
        start_xy = tuple(sc["start"])
        goal_xy = tuple(sc["goal"])
        lam = float(sc.get("lambda", lam))
        order = TotalOrdering(tuple(sc.get("ordering", range(w.L))))
        checkpoint = checkpoint or sc.get("checkpoint")
    else:
        if not (world_path and context_path and start and goal):
            raise click.UsageError("need --world, --context, --start, --goal (or --scenario)")
        w = world_mod.load_world(world_path)
        with open(context_path) as f:
            ctx_doc = json.load(f)
        start_xy = _parse_xy(start)
        goal_xy = _parse_xy(goal)
        order = _parse_ordering(ordering, w.L)
    if not checkpoint:
        raise click.UsageError("a --checkpoint is required")
    params = model_mod.load_checkpoint(checkpoint)
    ctx = service_mod.context_from_wire(ctx_doc)
    field = plan_mod.build_cost_field(w, params, ctx)
    path = plan_mod.astar(field, start_xy, goal_xy, plan_mod.PlannerConfig(lam))
    if path is None:
        raise click.ClickException("no path found")
    tier = evaluation.tier_proportions(path, w.labels, evaluation.TierMap(order))
    record = service_mod.path_record(path, tier)
    with open(out, "w") as f:
        f.write(service_mod.canonical_json(record))
    click.echo(f"wrote {out} (cost {path.total_cost:.2f}, low-tier {tier.low:.2%})")
    if figure:
        viz.plan_figure(w.prerender(), {"plan": record["cells"]}, start_xy, goal_xy, figure)
        viz.costmap_figure(field.values, figure.replace(".png", "_field.png"))
        click.echo(f"wrote {figure}")


def _world_from_doc(doc):
    """Load a world from an inline recipe document (scenario replays)."""
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
        json.dump(doc, f)
        tmp = f.name
    try:
        return world_mod.load_world(tmp)
    finally:
        os.unlink(tmp)


# ---------------------------------------------------------------------------
# eval


@main.command("eval")
@click.option("--suite", type=click.Choice(["tiers", "ranking", "nc", "theorem"]), required=True)
@click.option("--rundir", type=click.Path(exists=True), default=None,
              help="training run directory with the three checkpoints")
@click.option("--checkpoint", type=click.Path(exists=True), default=None,
              help="single checkpoint (nc suite)")
@click.option("--n-worlds", type=int, default=20, show_default=True)
@click.option("--test-count", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def eval_cmd(suite, rundir, checkpoint, n_worlds, test_count, seed, out):
    """Run an evaluation suite; writes JSON + CSV + figures next to --out."""
    out_base = out[:-5] if out.endswith(".json") else out
    report = {"suite": suite, "seed": seed}
    if suite == "theorem":
        study = experiments.theorem_study(log=click.echo)
        report.update(study)
        rows = [
            [i, d["size"], d["affine_consistent"], d["violations_detected"], d["witness_found"]]
            for i, d in enumerate(study["details"])
        ]
        viz.write_csv(out_base + ".csv",
                      ["instance", "size", "affine_consistent", "violations_detected", "witness_found"], rows)
    elif suite == "nc":
        if not checkpoint and rundir:
            checkpoint = os.path.join(rundir, "m_synthetic.pacr")
        if not checkpoint:
            raise click.UsageError("nc suite needs --checkpoint or --rundir")
        params = model_mod.load_checkpoint(checkpoint)
        report["learned"] = experiments.nc_study(params)
        rows = [[k, v] for k, v in report["learned"].items()]
        viz.write_csv(out_base + ".csv", ["metric", "value"], rows)
    else:
        if not rundir:
            raise click.UsageError(f"{suite} suite needs --rundir")
        config = _run_config(rundir)
        checkpoints = {
            name: model_mod.load_checkpoint(os.path.join(rundir, fname))
            for name, fname in train_mod.CHECKPOINT_NAMES.items()
        }
        if suite == "ranking":
            study = experiments.ranking_matrix(checkpoints, config, test_count=test_count, log=click.echo)
            report.update(study)
            report["pattern"] = experiments.ranking_matrix_pattern(study["matrix"])
            viz.ranking_matrix_figure(study["matrix"], out_base + ".png")
            rows = [
                [m, p, study["matrix"][m][p]]
                for m in study["matrix"]
                for p in study["matrix"][m]
            ]
            viz.write_csv(out_base + ".csv", ["model", "test_set", "margin_ranking_error"], rows)
        else:  # tiers
            study = experiments.tier_studies(checkpoints, n_worlds=n_worlds, log=click.echo)
            report.update({"summary": study["summary"], "lambda": study["lambda"], "n_worlds": n_worlds})
            viz.tier_bars_figure(study["summary"], out_base + ".png")
            rows = []
            for split in ("seen", "unseen"):
                for m, per in study["raw"][split].items():
                    for oname, vals in per.items():
                        for i, v in enumerate(vals):
                            rows.append([split, m, oname, i, v])
            viz.write_csv(out_base + ".csv", ["split", "model", "ordering", "world", "low_tier"], rows)
    with open(out_base + ".json", "w") as f:
        json.dump(report, f, indent=2)
    click.echo(f"wrote {out_base}.json")


def _run_config(rundir) -> train_mod.TrainConfig:
    path = os.path.join(rundir, "train_config.json")
    if os.path.exists(path):
        with open(path) as f:
            return train_mod.TrainConfig.from_json(json.load(f))
    return train_mod.TrainConfig()


# ---------------------------------------------------------------------------
# serve


@main.command("serve")
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--worlds", "worlds_dir", type=click.Path(exists=True), default=None)
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="static UI directory (e.g. frontend/dist)")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve_cmd(checkpoint, worlds_dir, ui_dir, host, port):
    """Serve the HTTP API (and the UI, if built)."""
    import uvicorn

    if ui_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        ui_dir = candidate if os.path.isdir(candidate) else None
    app = service_mod.create_app(checkpoint, worlds_dir, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
