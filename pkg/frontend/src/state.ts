// View state and the transitions the UI can make. Kept free of DOM code so
// the logic is testable: rendering subscribes to the store and redraws.

import type { EditOp, JobPayload, ModelPayload, PredictPayload } from "./types.js";

export interface ViewState {
  model: ModelPayload | null;
  previous: ModelPayload | null;
  selectedX0: number | null;
  selectedBranch: number;
  prediction: PredictPayload | null;
  previousPrediction: PredictPayload | null;
  draft: EditOp[];
  draftErrors: string[];
  job: JobPayload | null;
  compare: boolean;
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    model: null,
    previous: null,
    selectedX0: null,
    selectedBranch: 0,
    prediction: null,
    previousPrediction: null,
    draft: [],
    draftErrors: [],
    job: null,
    compare: false,
    banner: null,
  };
}

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): ViewState {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
    return this.state;
  }

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }
}

export function branchForX0(model: ModelPayload, x0: number): number {
  const bounds = model.branch_boundaries;
  for (let i = 0; i < bounds.length; i++) {
    if (x0 <= bounds[i]) return i;
  }
  return bounds.length;
}

export function clampX0(model: ModelPayload, x0: number): number {
  const [lo, hi] = model.model.composition_map.x_range;
  return Math.min(Math.max(x0, lo), hi);
}

/** The strip segments: [start, end, composition] per branch in x0 units. */
export function stripSegments(model: ModelPayload): [number, number, string][] {
  const { branches, x_range } = model.model.composition_map;
  const cuts = [x_range[0], ...model.branch_boundaries, x_range[1]];
  return branches.map((b, i) => [cuts[i], cuts[i + 1], b.composition]);
}
