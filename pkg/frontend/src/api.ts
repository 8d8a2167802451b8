// Thin typed client over the HTTP API. Every number shown in the UI comes
// from one of these responses; nothing is recomputed client-side.

import type {
  ContextWire,
  CostmapResponse,
  PatchResponse,
  PlanResponse,
  WorldDetail,
  WorldSummary,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  listWorlds(): Promise<WorldSummary[]> {
    return this.get("/api/worlds");
  }

  worldDetail(worldId: string): Promise<WorldDetail> {
    return this.get(`/api/worlds/${encodeURIComponent(worldId)}`);
  }

  patches(worldId: string, label: number, count: number, seed: number): Promise<PatchResponse> {
    const q = `label=${label}&count=${count}&seed=${seed}`;
    return this.get(`/api/worlds/${encodeURIComponent(worldId)}/patches?${q}`);
  }

  costmap(worldId: string, pose: { x: number; y: number; theta?: number }, context: ContextWire): Promise<CostmapResponse> {
    return this.post("/api/costmap", { world_id: worldId, pose, context });
  }

  plan(
    worldId: string,
    start: [number, number],
    goal: [number, number],
    context: ContextWire,
    lambda: number,
  ): Promise<PlanResponse> {
    return this.post("/api/plan", {
      world_id: worldId,
      start,
      goal,
      context,
      lambda,
    });
  }
}
