// Scenario export: everything needed to replay the on-screen plan through
// the command line and get the same bytes back.

import type { ContextDraft } from "./context.js";
import type { PlanResponse, WorldDetail } from "./types.js";

export interface Scenario {
  world: unknown; // world file document, inline
  context: { pairs: { preferred: string; dispreferred: string }[] };
  start: [number, number];
  goal: [number, number];
  lambda: number;
  ordering: number[];
  checkpoint: string | null;
  seeds: { slot: number; side: string; label: number; seed: number; index: number }[];
  on_screen_path_record: string; // canonical JSON the CLI output must match
}

export function buildScenario(
  draft: ContextDraft,
  world: WorldDetail,
  plan: PlanResponse,
): Scenario {
  if (draft.isEmpty) {
    throw new Error("nothing to export: the context draft is empty");
  }
  if (!draft.isComplete) {
    throw new Error("cannot export a partial context draft");
  }
  return {
    world: world.recipe,
    context: draft.toWire(),
    start: plan.echo.start,
    goal: plan.echo.goal,
    lambda: plan.echo.lambda,
    ordering: plan.echo.ordering,
    checkpoint: plan.echo.checkpoint,
    seeds: draft.patchProvenance(),
    on_screen_path_record: plan.path_record_json,
  };
}

export function scenarioFileContents(scenario: Scenario): string {
  return JSON.stringify(scenario, null, 2);
}
