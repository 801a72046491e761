// Thin fetch client for the model service. The fetch function is injected
// so tests can drive the full flow against a scripted server.

import type {
  DatasetSummary,
  EditSpec,
  JobPayload,
  ModelPayload,
  PredictPayload,
  SemanticsPayload,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class Client {
  constructor(private fetchFn: FetchLike = fetch.bind(globalThis), private base = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        detail = (body as { detail?: string }).detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  getModel(points = 200): Promise<ModelPayload> {
    return this.request(`/api/model?points=${points}`);
  }

  getSemantics(x0: number): Promise<SemanticsPayload> {
    return this.request(`/api/semantics?x0=${encodeURIComponent(x0)}`);
  }

  getPredict(x0: number, points = 200): Promise<PredictPayload> {
    return this.request(`/api/predict?x0=${encodeURIComponent(x0)}&points=${points}`);
  }

  postEdit(spec: EditSpec): Promise<{ accepted: boolean }> {
    return this.request(`/api/edit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(spec),
    });
  }

  getJob(): Promise<JobPayload> {
    return this.request(`/api/job`);
  }

  postRevert(): Promise<{ reverted: boolean }> {
    return this.request(`/api/revert`, { method: "POST" });
  }

  getDatasetSummary(): Promise<DatasetSummary> {
    return this.request(`/api/dataset/summary`);
  }

  /** Poll the job endpoint until it leaves the running state. */
  async waitForJob(intervalMs = 250, maxWaitMs = 600_000, sleep = delay): Promise<JobPayload> {
    const deadline = Date.now() + maxWaitMs;
    for (;;) {
      const job = await this.getJob();
      if (job.status === "done" || job.status === "failed") return job;
      if (Date.now() > deadline) throw new ApiError(408, "timed out waiting for the fit job");
      await sleep(intervalMs);
    }
  }
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
