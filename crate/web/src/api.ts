import type { ApiErrorBody, CatalogEntry, Dose, TrialView } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

export type Fetch = (input: string, init?: RequestInit) => Promise<Response>;

export interface CohortRequest {
  dose: Dose;
  patients: number;
  dlts: number;
  override_note?: string;
}

export type SubmitResult = { kind: "ok"; view: TrialView } | { kind: "conflict"; view: TrialView; message: string };

let counter = 0;

export function newKey(): string {
  counter += 1;
  const rand = globalThis.crypto?.randomUUID?.() ?? `${Date.now()}-${Math.random()}`;
  return `${rand}-${counter}`;
}

export class ConductClient {
  constructor(
    private readonly base = "",
    private readonly fetcher: Fetch = (i, init) => fetch(i, init),
    private readonly retries = 2,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      let resp: Response;
      try {
        resp = await this.fetcher(this.base + path, {
          method,
          headers: body === undefined ? undefined : { "content-type": "application/json" },
          body: body === undefined ? undefined : JSON.stringify(body),
        });
      } catch (e) {
        lastError = e;
        continue;
      }
      const text = await resp.text();
      const parsed = text ? JSON.parse(text) : null;
      if (!resp.ok) throw new ApiError(resp.status, parsed as ApiErrorBody);
      return parsed as T;
    }
    throw lastError;
  }

  designs(): Promise<CatalogEntry[]> {
    return this.call("GET", "/api/designs");
  }

  create(body: { design: unknown; grid: { J: number; K: number }; config?: unknown; scenario?: unknown }): Promise<TrialView> {
    return this.call("POST", "/api/trials", body);
  }

  get(id: string): Promise<TrialView> {
    return this.call("GET", `/api/trials/${encodeURIComponent(id)}`);
  }

  /**
   * Post a cohort under the revision the page was showing. Network retries
   * reuse one idempotency key; a revision conflict refetches the trial.
   */
  async submitCohort(view: TrialView, cohort: CohortRequest, key = newKey()): Promise<SubmitResult> {
    try {
      const next = await this.call<TrialView>("POST", `/api/trials/${encodeURIComponent(view.id)}/cohorts`, {
        ...cohort,
        idempotency_key: key,
        expected_revision: view.revision,
      });
      return { kind: "ok", view: next };
    } catch (e) {
      if (e instanceof ApiError && e.body.code === "revision_conflict") {
        return { kind: "conflict", view: await this.get(view.id), message: e.body.message };
      }
      throw e;
    }
  }

  async undo(view: TrialView): Promise<SubmitResult> {
    try {
      const next = await this.call<TrialView>("POST", `/api/trials/${encodeURIComponent(view.id)}/undo`, {
        expected_revision: view.revision,
      });
      return { kind: "ok", view: next };
    } catch (e) {
      if (e instanceof ApiError && e.body.code === "revision_conflict") {
        return { kind: "conflict", view: await this.get(view.id), message: e.body.message };
      }
      throw e;
    }
  }
}
