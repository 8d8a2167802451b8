// Canvas drawing for the scenario view: world raster, costmap overlay,
// path polylines, markers, and tier bars.

import type { TierReport } from "./types.js";

export type OverlayMode = "image" | "costmap" | "path" | "ab";

export function b64ImageUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

export function loadImage(b64: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error("could not decode image"));
    img.src = b64ImageUrl(b64);
  });
}

export interface PlanLayer {
  path: [number, number][];
  color: string;
  field: HTMLImageElement | null;
}

export function drawScene(
  canvas: HTMLCanvasElement,
  world: HTMLImageElement,
  mode: OverlayMode,
  layers: PlanLayer[],
  start: [number, number] | null,
  goal: [number, number] | null,
  scale: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.imageSmoothingEnabled = false;
  canvas.width = world.width * scale;
  canvas.height = world.height * scale;
  ctx.drawImage(world, 0, 0, canvas.width, canvas.height);

  const overlayField = mode === "costmap" || mode === "ab";
  if (overlayField) {
    ctx.globalAlpha = 0.55;
    for (const layer of layers) {
      if (layer.field) {
        ctx.drawImage(layer.field, 0, 0, canvas.width, canvas.height);
        if (mode !== "ab") break; // single overlay unless comparing
      }
    }
    ctx.globalAlpha = 1.0;
  }

  if (mode !== "image" && mode !== "costmap") {
    for (const layer of layers) {
      drawPath(ctx, layer.path, layer.color, scale);
    }
  } else if (mode === "costmap" && layers.length > 0) {
    drawPath(ctx, layers[0].path, layers[0].color, scale);
  }

  if (start) drawMarker(ctx, start, scale, "#ffffff", "S");
  if (goal) drawMarker(ctx, goal, scale, "#ffd54a", "G");
}

function drawPath(
  ctx: CanvasRenderingContext2D,
  path: [number, number][],
  color: string,
  scale: number,
): void {
  if (path.length === 0) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = Math.max(2, scale);
  ctx.lineJoin = "round";
  ctx.beginPath();
  ctx.moveTo((path[0][0] + 0.5) * scale, (path[0][1] + 0.5) * scale);
  for (const [x, y] of path.slice(1)) {
    ctx.lineTo((x + 0.5) * scale, (y + 0.5) * scale);
  }
  ctx.stroke();
}

function drawMarker(
  ctx: CanvasRenderingContext2D,
  cell: [number, number],
  scale: number,
  fill: string,
  text: string,
): void {
  const cx = (cell[0] + 0.5) * scale;
  const cy = (cell[1] + 0.5) * scale;
  ctx.beginPath();
  ctx.arc(cx, cy, 3 * scale, 0, 2 * Math.PI);
  ctx.fillStyle = fill;
  ctx.fill();
  ctx.strokeStyle = "#222";
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.font = `${3 * scale}px sans-serif`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(text, cx, cy);
}

export function renderTierBars(el: HTMLElement, label: string, report: TierReport, color: string): void {
  const row = document.createElement("div");
  row.className = "tier-row";
  const name = document.createElement("span");
  name.className = "tier-label";
  name.textContent = label;
  name.style.color = color;
  row.appendChild(name);
  const bar = document.createElement("div");
  bar.className = "tier-bar";
  const parts: [keyof TierReport, string][] = [
    ["low", "#4caf50"],
    ["medium", "#ffb300"],
    ["high", "#e53935"],
  ];
  for (const [tier, tierColor] of parts) {
    const seg = document.createElement("div");
    seg.className = "tier-seg";
    seg.style.width = `${(report[tier] * 100).toFixed(1)}%`;
    seg.style.background = tierColor;
    seg.title = `${tier}: ${(report[tier] * 100).toFixed(1)}%`;
    bar.appendChild(seg);
  }
  row.appendChild(bar);
  const pct = document.createElement("span");
  pct.className = "tier-pct";
  pct.textContent = `low ${(report.low * 100).toFixed(1)}%`;
  row.appendChild(pct);
  el.appendChild(row);
}
