// The edit-and-refit round trip: validate the draft locally, submit, poll
// the job, then reload the model and show the before/after comparison.

import { ApiError, Client } from "./api.js";
import { validateSpec } from "./editspec.js";
import { Store } from "./state.js";
import type { EditOp } from "./types.js";

export async function submitEdits(client: Client, store: Store, edits: EditOp[]): Promise<void> {
  const state = store.get();
  const errors = validateSpec({ edits }, state.model);
  if (errors.length) {
    store.update({ draftErrors: errors });
    return;
  }
  store.update({ draftErrors: [], banner: "submitting edit..." });
  try {
    await client.postEdit({ edits });
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      store.update({ banner: "fit in progress - try again when it finishes" });
      return;
    }
    store.update({ banner: `edit rejected: ${(err as Error).message}` });
    return;
  }

  store.update({ banner: "refitting..." });
  const job = await client.waitForJob();
  if (job.status === "failed") {
    store.update({ job, banner: `refit failed: ${job.error}` });
    return;
  }

  const previous = store.get().model;
  const previousPrediction = store.get().prediction;
  const model = await client.getModel();
  let prediction = null;
  const x0 = store.get().selectedX0;
  if (x0 !== null) {
    prediction = await client.getPredict(x0);
  }
  const delta =
    job.old_rmse !== null && job.new_rmse !== null
      ? ` (rmse ${job.old_rmse.toFixed(4)} -> ${job.new_rmse.toFixed(4)})`
      : "";
  store.update({
    model,
    previous,
    prediction,
    previousPrediction,
    job,
    draft: [],
    compare: true,
    banner: `refit done${delta}`,
  });
}

export async function revert(client: Client, store: Store): Promise<void> {
  try {
    await client.postRevert();
  } catch (err) {
    store.update({ banner: `revert failed: ${(err as Error).message}` });
    return;
  }
  const model = await client.getModel();
  const x0 = store.get().selectedX0;
  const prediction = x0 !== null ? await client.getPredict(x0) : null;
  store.update({
    model,
    previous: null,
    prediction,
    previousPrediction: null,
    compare: false,
    banner: "reverted to the previous model",
  });
}
