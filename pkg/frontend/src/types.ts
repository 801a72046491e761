// Shapes of the server payloads. The UI never derives numbers itself: every
// value shown on screen comes from these payloads.

export interface BranchSpec {
  upper_bound: number | null;
  composition: string;
}

export interface CompositionMapSpec {
  branches: BranchSpec[];
  x_range: [number, number];
}

export interface BranchCurves {
  branch: number;
  composition: string;
  x0: number[];
  properties: Record<string, number[] | number[][]>;
}

export interface ModelPayload {
  model: {
    version: string;
    composition_map: CompositionMapSpec;
    submaps: unknown[];
    config: Record<string, number>;
  };
  branch_boundaries: number[];
  property_curves: { branches: BranchCurves[] };
}

export interface PredictPayload {
  x0: number;
  status: string;
  composition: string;
  t: number[];
  x: number[];
  data: { x0: number; t: number[]; y: number[] } | null;
}

export interface SemanticsPayload {
  composition: string;
  properties: Record<string, number | number[]>;
}

export interface JobPayload {
  status: "idle" | "running" | "done" | "failed";
  progress: string;
  error: string | null;
  old_rmse: number | null;
  new_rmse: number | null;
}

export interface DatasetSummary {
  count: number;
  x0_min: number;
  x0_max: number;
  observations_per_sample: number;
  metadata: Record<string, unknown>;
}

export interface EditOp {
  op: "pin_property" | "bound_property" | "restrict_library" | "fix_composition_map";
  target?: "all" | number;
  name?: string;
  value?: number;
  interval?: [number, number];
  filters?: Record<string, unknown>;
  map?: Record<string, unknown>;
}

export interface EditSpec {
  edits: EditOp[];
}
