// Application wiring: world picker, patch gallery with drag & drop into
// ordered preference slots, click-to-place endpoints, plan submission, and
// the A/B comparison view (the blue/red convention: A blue, B red).

import { ApiClient, ApiError } from "./api.js";
import { ContextDraft, N_SLOTS, Side } from "./context.js";
import { LatestGate } from "./requests.js";
import { buildScenario, scenarioFileContents } from "./scenario.js";
import { drawScene, loadImage, OverlayMode, PlanLayer, renderTierBars } from "./render.js";
import type { GalleryPatch, PlanResponse, WorldDetail } from "./types.js";

const api = new ApiClient("");
const gate = new LatestGate();

interface PlanSlotState {
  response: PlanResponse;
  field: HTMLImageElement;
  draftWire: string; // JSON of the context that produced it
}

const state = {
  world: null as WorldDetail | null,
  worldImage: null as HTMLImageElement | null,
  draft: new ContextDraft(N_SLOTS),
  start: null as [number, number] | null,
  goal: null as [number, number] | null,
  lambda: 10,
  mode: "path" as OverlayMode,
  planA: null as PlanSlotState | null,
  planB: null as PlanSlotState | null,
  gallerySeed: 0,
  scale: 3,
};

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function banner(message: string, isError = true): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message;
  box.className = isError ? "banner error" : "banner info";
  box.style.display = message ? "block" : "none";
}

// ---------------------------------------------------------------------------
// world picker + gallery

async function initWorlds(): Promise<void> {
  const picker = el<HTMLSelectElement>("world-picker");
  try {
    const worlds = await api.listWorlds();
    picker.innerHTML = "";
    for (const w of worlds) {
      const opt = document.createElement("option");
      opt.value = w.id;
      opt.textContent = `${w.id} (${w.size[0]}x${w.size[1]}, ${w.L} terrains)`;
      picker.appendChild(opt);
    }
    if (worlds.length > 0) {
      await selectWorld(worlds[0].id);
    } else {
      banner("no worlds registered on the server", true);
    }
  } catch (err) {
    banner(`could not reach the service: ${err}`, true);
  }
  picker.onchange = () => void selectWorld(picker.value);
}

async function selectWorld(worldId: string): Promise<void> {
  state.world = await api.worldDetail(worldId);
  state.worldImage = await loadImage(state.world.image);
  state.start = state.world.start;
  state.goal = state.world.goal;
  state.planA = state.planB = null;
  state.draft = new ContextDraft(N_SLOTS);
  renderSlots();
  await refreshGallery();
  redraw();
}

async function refreshGallery(): Promise<void> {
  if (!state.world) return;
  const gallery = el<HTMLDivElement>("gallery");
  gallery.innerHTML = "";
  const perLabel = 4;
  for (let label = 0; label < state.world.L; label += 1) {
    const resp = await api.patches(state.world.id, label, perLabel, state.gallerySeed);
    resp.patches.forEach((png, index) => {
      const patch: GalleryPatch = { png, label, seed: resp.seed, index };
      gallery.appendChild(galleryTile(patch));
    });
  }
  if (gallery.children.length === 0) {
    const empty = document.createElement("div");
    empty.className = "placeholder";
    empty.textContent = "no patches";
    gallery.appendChild(empty);
  }
}

function galleryTile(patch: GalleryPatch): HTMLElement {
  const img = document.createElement("img");
  img.src = `data:image/png;base64,${patch.png}`;
  img.className = "patch";
  img.title = `terrain ${patch.label}`;
  img.draggable = true;
  img.ondragstart = (ev) => {
    ev.dataTransfer?.setData("application/json", JSON.stringify(patch));
  };
  return img;
}

// ---------------------------------------------------------------------------
// context slots

function renderSlots(): void {
  const box = el<HTMLDivElement>("slots");
  box.innerHTML = "";
  state.draft.slots.forEach((slot, i) => {
    const row = document.createElement("div");
    row.className = "slot-row";
    row.appendChild(dropCell(i, "preferred", slot.preferred));
    const sign = document.createElement("span");
    sign.className = "prefer-sign";
    sign.textContent = "over";
    row.appendChild(sign);
    row.appendChild(dropCell(i, "dispreferred", slot.dispreferred));
    const swap = document.createElement("button");
    swap.textContent = "swap";
    swap.title = "invert this single preference";
    swap.onclick = () => {
      state.draft.swap(i);
      renderSlots();
    };
    row.appendChild(swap);
    const clear = document.createElement("button");
    clear.textContent = "clear";
    clear.onclick = () => {
      state.draft.clear(i);
      renderSlots();
    };
    row.appendChild(clear);
    box.appendChild(row);
  });
  const complete = state.draft.isComplete;
  el<HTMLButtonElement>("plan-a").disabled = !complete;
  el<HTMLButtonElement>("plan-b").disabled = !complete;
  el<HTMLButtonElement>("export").disabled = state.planA === null;
}

function dropCell(slotIndex: number, side: Side, current: GalleryPatch | null): HTMLElement {
  const cell = document.createElement("div");
  cell.className = `drop-cell ${side}`;
  if (current) {
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${current.png}`;
    img.className = "patch";
    cell.appendChild(img);
  } else {
    cell.textContent = side === "preferred" ? "preferred" : "dispreferred";
  }
  cell.ondragover = (ev) => ev.preventDefault();
  cell.ondrop = (ev) => {
    ev.preventDefault();
    const raw = ev.dataTransfer?.getData("application/json");
    if (!raw) return;
    state.draft.place(slotIndex, side, JSON.parse(raw) as GalleryPatch);
    renderSlots();
  };
  return cell;
}

// ---------------------------------------------------------------------------
// planning

async function submitPlan(which: "A" | "B"): Promise<void> {
  if (!state.world) return;
  if (!state.draft.isComplete) {
    banner("fill every preference slot before planning", true);
    return;
  }
  if (!state.start || !state.goal) {
    banner("place both start and goal on the map first", true);
    return;
  }
  if (state.start[0] === state.goal[0] && state.start[1] === state.goal[1]) {
    banner("start and goal must differ", true);
    return;
  }
  banner("");
  const requestId = gate.issue();
  el<HTMLDivElement>("spinner").style.display = "inline";
  try {
    const wire = state.draft.toWire();
    const resp = await api.plan(state.world.id, state.start, state.goal, wire, state.lambda);
    if (!gate.isCurrent(requestId)) return; // superseded while in flight
    const field = await loadImage(resp.field_png);
    const slotState: PlanSlotState = { response: resp, field, draftWire: JSON.stringify(wire) };
    if (which === "A") state.planA = slotState;
    else state.planB = slotState;
    renderTierPanel();
    renderSlots();
    redraw();
  } catch (err) {
    if (err instanceof ApiError) banner(`plan rejected (${err.status}): ${err.message}`, true);
    else banner(`request failed: ${err}`, true);
  } finally {
    el<HTMLDivElement>("spinner").style.display = "none";
  }
}

function renderTierPanel(): void {
  const panel = el<HTMLDivElement>("tiers");
  panel.innerHTML = "";
  if (state.planA) renderTierBars(panel, "plan A", state.planA.response.tier_report, "#1565c0");
  if (state.planB) renderTierBars(panel, "plan B", state.planB.response.tier_report, "#c62828");
  const costs = el<HTMLDivElement>("costs");
  costs.textContent = [
    state.planA ? `A: cost ${state.planA.response.total_cost.toFixed(2)}` : "",
    state.planB ? `B: cost ${state.planB.response.total_cost.toFixed(2)}` : "",
  ]
    .filter(Boolean)
    .join("   ");
}

function redraw(): void {
  if (!state.world || !state.worldImage) return;
  const layers: PlanLayer[] = [];
  if (state.planA) {
    layers.push({ path: state.planA.response.path, color: "#1565c0", field: state.planA.field });
  }
  if (state.planB && state.mode === "ab") {
    layers.push({ path: state.planB.response.path, color: "#c62828", field: null });
  }
  drawScene(
    el<HTMLCanvasElement>("map"),
    state.worldImage,
    state.mode,
    layers,
    state.start,
    state.goal,
    state.scale,
  );
}

// ---------------------------------------------------------------------------
// endpoints + mode + export

function initControls(): void {
  const canvas = el<HTMLCanvasElement>("map");
  canvas.onclick = (ev) => {
    if (!state.world) return;
    const rect = canvas.getBoundingClientRect();
    const x = Math.floor((ev.clientX - rect.left) / state.scale);
    const y = Math.floor((ev.clientY - rect.top) / state.scale);
    if (ev.shiftKey) state.goal = [x, y];
    else state.start = [x, y];
    redraw();
  };
  const mode = el<HTMLSelectElement>("mode");
  mode.onchange = () => {
    state.mode = mode.value as OverlayMode;
    redraw();
  };
  const lambda = el<HTMLInputElement>("lambda");
  lambda.onchange = () => {
    state.lambda = Number(lambda.value);
  };
  el<HTMLButtonElement>("plan-a").onclick = () => void submitPlan("A");
  el<HTMLButtonElement>("plan-b").onclick = () => void submitPlan("B");
  el<HTMLButtonElement>("refresh-gallery").onclick = () => {
    state.gallerySeed += 1;
    void refreshGallery();
  };
  el<HTMLButtonElement>("export").onclick = exportScenario;
}

function exportScenario(): void {
  if (!state.world || !state.planA) {
    banner("plan once before exporting", true);
    return;
  }
  try {
    const scenario = buildScenario(state.draft, state.world, state.planA.response);
    const blob = new Blob([scenarioFileContents(scenario)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = `scenario_${state.world.id}.json`;
    a.click();
    URL.revokeObjectURL(a.href);
    banner("scenario exported; replay it with: pacer plan --scenario <file> --out path.json", false);
  } catch (err) {
    banner(String(err), true);
  }
}

export function main(): void {
  initControls();
  void initWorlds();
}

main();
