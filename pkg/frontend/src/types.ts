// Wire types mirroring the HTTP API.

export interface WorldSummary {
  id: string;
  size: [number, number];
  L: number;
  thumbnail: string; // base64 PNG
}

export interface WorldDetail {
  id: string;
  size: [number, number];
  L: number;
  start: [number, number] | null;
  goal: [number, number] | null;
  image: string; // base64 PNG of the full render
  recipe: unknown; // world file document, embedded verbatim in exports
}

export interface PatchResponse {
  world_id: string;
  label: number;
  seed: number;
  patches: string[]; // base64 PNGs, 16x16
}

export interface ContextWirePair {
  preferred: string; // base64 PNG
  dispreferred: string;
}

export interface ContextWire {
  pairs: ContextWirePair[];
}

export interface TierReport {
  low: number;
  medium: number;
  high: number;
}

export interface PlanResponse {
  path: [number, number][];
  total_cost: number;
  tier_report: TierReport;
  path_record_json: string;
  field_png: string;
  echo: {
    world_id: string;
    start: [number, number];
    goal: [number, number];
    lambda: number;
    ordering: number[];
    checkpoint: string | null;
  };
}

export interface CostmapResponse {
  costmap: string;
  stats: { min: number; max: number; mean: number };
  echo: { world_id: string; pose: [number, number, number] };
}

// A patch as the UI tracks it: pixels plus where it came from.
export interface GalleryPatch {
  png: string; // base64
  label: number;
  seed: number;
  index: number;
}
