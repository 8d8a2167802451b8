"""Acceptance-scale studies over trained checkpoints.

Evaluation worlds are corridor worlds: Voronoi terrain with two traversable
bands (the most- and least-preferred canonical labels) joining a shared
start and goal, so that a planner can follow whichever terrain the active
preference favors. "Seen" worlds use the base textures the model trained
on; "unseen" worlds are re-textured with held-out synthetic textures that
never appear in any training phase.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from . import data as data_mod
from . import evaluation, textures, train, world as world_mod
from .data import Patch, PreferenceContext, TotalOrdering
from .evaluation import TierMap, margin_ranking_error, tier_proportions
from .model import ModelParams, forward
from .plan import PlannerConfig, astar, build_cost_field, oracle_cost_field

SEEN_WORLD_SEED = 201
UNSEEN_WORLD_SEED = 301
EVAL_WORLD_SIZE = 192
EVAL_L = 5


def held_out_textures() -> List[textures.TextureSpec]:
    """Synthetic textures excluded from the training replacement pool."""
    _, synth = textures.default_texture_sets()
    return synth[textures.SYNTHETIC_TRAIN_COUNT :]


def make_eval_world(seed: int, unseen: bool, L: int = EVAL_L, size: int = EVAL_WORLD_SIZE):
    """Corridor world plus its start/goal endpoints."""
    base, _ = textures.default_texture_sets()
    if unseen:
        pool = held_out_textures()
        if L > len(pool):
            raise ValueError(f"unseen eval worlds support at most {len(pool)} labels")
        assignment = {i: pool[i] for i in range(L)}
    else:
        assignment = {i: base[i] for i in range(L)}
    # carve the least-preferred canonical band first so the most-preferred
    # one wins at the shared endpoints
    w, start, goal = world_mod.generate_corridor_world(
        seed, size, size, L, assignment, corridor_labels=(L - 1, 0)
    )
    w.prerender()
    return w, start, goal


def informative_context(
    w: world_mod.TerrainWorld, ordering: TotalOrdering, n: int = 3, rng_seed: int = 0
) -> PreferenceContext:
    """Patch pairs drawn from the world itself, consistent with the ordering.

    With n pairs unable to cover every relation of a larger ordering, the
    pairs are chosen to pin down what planning needs most: the best terrain
    is shown beating the worst and a mid terrain, plus one adjacent relation
    (an operator showing the terrains they care about, not a random quiz).
    """
    if n != 3:
        raise ValueError("evaluation contexts are built with n = 3 pairs")
    o = ordering.order
    L = ordering.L
    if L < 3:
        raise ValueError("informative evaluation contexts need at least 3 terrains")
    if L == 3:
        rank_pairs = [(0, 2), (0, 1), (1, 2)]
    else:
        rank_pairs = [(0, L - 1), (0, L // 2), (1, L - 2)]
    rng = np.random.default_rng([rng_seed, 0x1F])
    order_perm = rng.permutation(len(rank_pairs))
    patch_pairs = []
    for k in order_perm:
        ra, rb = rank_pairs[int(k)]
        patch_pairs.append(
            (
                data_mod.sample_patch(w, o[ra], 16, rng),
                data_mod.sample_patch(w, o[rb], 16, rng),
            )
        )
    return PreferenceContext(patch_pairs)


def uninformative_context(
    w: world_mod.TerrainWorld, n: int = 3, rng_seed: int = 0
) -> PreferenceContext:
    """Context built solely from textures absent from the world.

    Forces the model onto its learned prior: none of the context terrains
    can be matched to anything visible in the scene.
    """
    base, synth = textures.default_texture_sets()
    present = {spec.id for spec in w.texture_assignment.values()}
    absent = [t for t in base + synth if t.id not in present]
    rng = np.random.default_rng([rng_seed, 0x2F])
    picks = rng.choice(len(absent), size=min(2 * n, len(absent)), replace=False)
    phantom = [absent[int(i)] for i in picks]
    phantom_order = TotalOrdering.random(len(phantom), rng)
    pairs = data_mod._choose_pairs(phantom_order, n, rng)

    def render_phantom(idx: int) -> Patch:
        x0 = int(rng.integers(0, 64))
        y0 = int(rng.integers(0, 64))
        return Patch(textures.render_patch(phantom[idx], x0, y0, 16), -1)

    return PreferenceContext([(render_phantom(a), render_phantom(b)) for a, b in pairs])


def plan_low_tier(
    w: world_mod.TerrainWorld,
    field,
    start: Tuple[int, int],
    goal: Tuple[int, int],
    ordering: TotalOrdering,
    lam: float = 10.0,
) -> evaluation.TierReport:
    path = astar(field, start, goal, PlannerConfig(lam))
    return tier_proportions(path, w.labels, TierMap(ordering))


def tier_studies(
    checkpoints: Dict[str, ModelParams],
    n_worlds: int = 20,
    lam: float = 10.0,
    log=None,
) -> Dict:
    """Planned-path tier proportions across the evaluation grid.

    Covers: canonical vs inverted preferences on seen worlds, informative
    contexts on unseen worlds, uninformative contexts on unseen worlds, and
    ground-truth-field planning on seen worlds.
    """
    canonical = TotalOrdering.canonical(EVAL_L)
    orderings = {"canonical": canonical, "inverted": canonical.inverted()}
    results: Dict = {
        "seen": {m: {o: [] for o in orderings} for m in checkpoints},
        "unseen": {m: {o: [] for o in orderings} for m in checkpoints},
        "oracle_seen": [],
        "uninformative_unseen": {m: {o: [] for o in orderings} for m in checkpoints},
    }
    for i in range(n_worlds):
        for split, seed0, unseen in (("seen", SEEN_WORLD_SEED, False), ("unseen", UNSEEN_WORLD_SEED, True)):
            w, start, goal = make_eval_world(seed0 + i, unseen)
            if not unseen:
                results["oracle_seen"].append(
                    plan_low_tier(w, oracle_cost_field(w, canonical), start, goal, canonical, lam).low
                )
            for oname, ordering in orderings.items():
                ctx = informative_context(w, ordering, rng_seed=1000 + 10 * i)
                ctx_un = uninformative_context(w, rng_seed=1000 + 10 * i) if unseen else None
                for mname, params in checkpoints.items():
                    field = build_cost_field(w, params, ctx)
                    rep = plan_low_tier(w, field, start, goal, ordering, lam)
                    results[split][mname][oname].append(rep.low)
                    if unseen:
                        field_un = build_cost_field(w, params, ctx_un)
                        rep_un = plan_low_tier(w, field_un, start, goal, ordering, lam)
                        results["uninformative_unseen"][mname][oname].append(rep_un.low)
            if log:
                log(f"tier study world {i + 1}/{n_worlds} ({split}) done")

    def mean(xs):
        return float(np.mean(xs)) if xs else float("nan")

    summary = {
        "oracle_seen_low": mean(results["oracle_seen"]),
        "seen_low": {
            m: {o: mean(v) for o, v in per.items()} for m, per in results["seen"].items()
        },
        "unseen_low": {
            m: {o: mean(v) for o, v in per.items()} for m, per in results["unseen"].items()
        },
        "uninformative_unseen_low": {
            m: {o: mean(v) for o, v in per.items()}
            for m, per in results["uninformative_unseen"].items()
        },
    }
    for m, per in summary["seen_low"].items():
        per["drop"] = per["canonical"] - per["inverted"]
    return {"raw": results, "summary": summary, "lambda": lam, "n_worlds": n_worlds}


# ---------------------------------------------------------------------------
# margin-ranking matrix


TEST_SEED_OFFSET = {"base": 21, "shuffled": 22, "synthetic": 23}


def ranking_matrix(
    checkpoints: Dict[str, ModelParams],
    config: train.TrainConfig,
    test_count: int = 200,
    num_points: int = 500,
    log=None,
) -> Dict:
    """Mean margin ranking error of each model on each held-out test set."""
    worlds = config.build_worlds()
    for w in worlds:
        w.prerender()
    matrix: Dict[str, Dict[str, float]] = {}
    alt_matrix: Dict[str, Dict[str, float]] = {}  # |target gap| penalty variant
    for phase in data_mod.PHASES:
        dconfig = config.dataset_config(worlds, test_count)
        seed = config.seed * 1000 + TEST_SEED_OFFSET[phase]
        examples = list(data_mod.make_dataset(phase, dconfig, seed))
        for mname, params in checkpoints.items():
            errs, alt_errs = [], []
            for j, ex in enumerate(examples):
                pred = forward(params, ex.image, ex.context)
                errs.append(
                    margin_ranking_error(pred, ex.target, num_points=num_points, rng_seed=j)
                )
                alt_errs.append(
                    margin_ranking_error(
                        pred, ex.target, num_points=num_points, rng_seed=j, penalty="target"
                    )
                )
            matrix.setdefault(mname, {})[phase] = float(np.mean(errs))
            alt_matrix.setdefault(mname, {})[phase] = float(np.mean(alt_errs))
        if log:
            log(f"ranking matrix: test set {phase!r} done")
    return {
        "matrix": matrix,
        "alt_penalty_matrix": alt_matrix,
        "penalty": "pred",
        "alt_penalty": "target",
        "test_count": test_count,
        "num_points": num_points,
    }


def ranking_matrix_pattern(matrix: Dict[str, Dict[str, float]]) -> Dict[str, bool]:
    """The structural claims: diagonal column minima, best row mean last phase."""
    models = ["base", "shuffled", "synthetic"]
    diag_ok = all(
        min(models, key=lambda m: matrix[m][phase]) == phase for phase in models
    )
    row_means = {m: float(np.mean([matrix[m][p] for p in models])) for m in models}
    synth_best = min(row_means, key=row_means.get) == "synthetic"
    return {"diagonal_column_minima": diag_ok, "synthetic_best_row_mean": synth_best, "row_means": row_means}


# ---------------------------------------------------------------------------
# condition checks on learned maps


def nc_study(
    params: ModelParams,
    n_worlds: int = 5,
    eps: float = 0.1,
    margin: float = 0.02,
    rng_seed: int = 50,
) -> Dict:
    """Equivalence/ordering violation rates of learned costmaps on seen worlds."""
    base, _ = textures.default_texture_sets()
    canonical = TotalOrdering.canonical(EVAL_L)
    reports = []
    for i in range(n_worlds):
        w = world_mod.generate_world(
            SEEN_WORLD_SEED + i, EVAL_WORLD_SIZE, EVAL_WORLD_SIZE, EVAL_L,
            {j: base[j] for j in range(EVAL_L)},
        )
        w.prerender()
        ctx = informative_context(w, canonical, rng_seed=rng_seed + i)
        pose = world_mod.Pose(w.width / 2 - 0.5, w.height / 2 - 0.5, 0.0)
        cm = forward(params, world_mod.observe(w, pose), ctx)
        labels = world_mod.label_window(w, pose)
        rep = evaluation.nc_report(cm, labels, canonical, eps=eps, margin=margin, rng_seed=rng_seed + i)
        reports.append(rep)
    return {
        "nc1_rate_mean": float(np.mean([r.nc1_violation_rate for r in reports])),
        "nc2_rate_mean": float(np.mean([r.nc2_violation_rate for r in reports])),
        "medians_sorted_all": all(r.medians_sorted for r in reports),
        "eps": eps,
        "margin": margin,
        "n_worlds": n_worlds,
    }


# ---------------------------------------------------------------------------
# brute-force verifier instances


def theorem_instances(n_instances: int = 20, rng_seed: int = 77) -> List[Dict]:
    """Small two-corridor grids with an exact witness structure.

    Each instance carries a ground-truth field H, its positive-affine probe,
    and an "injected violation" probe that swaps the costs of the two
    corridor terrains.
    """
    out = []
    sizes = [4, 4, 5, 5, 6]
    rng = np.random.default_rng(rng_seed)
    for k in range(n_instances):
        side = sizes[k % len(sizes)]
        labels = np.ones((side, side), dtype=np.int16)  # filler terrain
        labels[0, :] = 0  # cheap corridor along the top
        labels[-1, :] = 2  # expensive corridor along the bottom
        # start/goal on the left/right edges, touching both corridors
        labels[:, 0] = labels[:, -1] = 3
        costs = {0: 0.0, 1: 0.5, 2: 1.0, 3: 0.25}
        h_field = np.vectorize(costs.get)(labels).astype(np.float64)
        a = float(rng.integers(1, 4))
        b = float(rng.integers(0, 3)) / 10.0
        affine = a * h_field + b
        swapped_costs = dict(costs)
        swapped_costs[0], swapped_costs[2] = costs[2], costs[0]
        swapped = np.vectorize(swapped_costs.get)(labels).astype(np.float64)
        out.append(
            {
                "labels": labels,
                "h": h_field,
                "affine": affine,
                "affine_ab": (a, b),
                "violating": swapped,
                "start": (0, 0),
                "goal": (side - 1, side - 1),
            }
        )
    return out


def theorem_study(n_instances: int = 20, bound: int = 12, log=None) -> Dict:
    """Run the verifier on every instance; both checks must come back clean."""
    inst = theorem_instances(n_instances)
    affine_ok = 0
    witnesses = 0
    details = []
    for i, case in enumerate(inst):
        rep_aff = evaluation.verify_theorem(case["h"], case["affine"], bound=bound)
        ok = (
            rep_aff.is_positive_affine
            and rep_aff.argmin_mismatch_pairs == 0
            and rep_aff.h_cost_match
            and not rep_aff.has_violations
        )
        affine_ok += int(ok)
        rep_bad = evaluation.verify_theorem(case["h"], case["violating"], bound=bound)
        found = rep_bad.has_violations and rep_bad.witness is not None
        witnesses += int(found)
        details.append(
            {
                "size": case["labels"].shape[0],
                "affine_consistent": ok,
                "violations_detected": rep_bad.has_violations,
                "witness_found": rep_bad.witness is not None,
                "witness": rep_bad.witness,
            }
        )
        if log:
            log(f"theorem instance {i + 1}/{n_instances}: affine={ok} witness={found}")
    return {
        "instances": n_instances,
        "affine_consistent": affine_ok,
        "witnesses_found": witnesses,
        "details": details,
        "bound": bound,
    }
