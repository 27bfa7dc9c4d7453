import { describe, expect, it } from "vitest";
import { ConductClient } from "../src/api";
import type { Fetch } from "../src/api";
import { freshView } from "./helpers";

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), { status, headers: { "content-type": "application/json" } });
}

describe("ConductClient", () => {
  it("retries a dropped request with the same idempotency key", async () => {
    const bodies: any[] = [];
    let calls = 0;
    const fetcher: Fetch = async (_url, init) => {
      calls += 1;
      bodies.push(JSON.parse(String(init!.body)));
      if (calls === 1) throw new TypeError("network down");
      return json(200, { ...freshView(), revision: 1 });
    };
    const r = await new ConductClient("", fetcher).submitCohort(freshView(), { dose: { j: 1, k: 1 }, patients: 3, dlts: 0 });
    expect(r.kind).toBe("ok");
    expect(bodies).toHaveLength(2);
    expect(bodies[0].idempotency_key).toBe(bodies[1].idempotency_key);
    expect(bodies[0].expected_revision).toBe(0);
  });

  it("refetches on a revision conflict", async () => {
    const urls: string[] = [];
    const fetcher: Fetch = async (url, init) => {
      urls.push(`${init?.method} ${url}`);
      if (init?.method === "POST") return json(409, { code: "revision_conflict", message: "trial is at revision 2", detail: { revision: 2 } });
      return json(200, { ...freshView(), revision: 2 });
    };
    const r = await new ConductClient("", fetcher).submitCohort(freshView(), { dose: { j: 1, k: 1 }, patients: 3, dlts: 0 });
    expect(r.kind).toBe("conflict");
    expect(r.view.revision).toBe(2);
    expect(urls).toEqual(["POST /api/trials/t1/cohorts", "GET /api/trials/t1"]);
  });

  it("surfaces server validation errors", async () => {
    const fetcher: Fetch = async () => json(422, { code: "invalid_counts", message: "4 DLTs among 3 patients", detail: null });
    await expect(
      new ConductClient("", fetcher).submitCohort(freshView(), { dose: { j: 1, k: 1 }, patients: 3, dlts: 4 }),
    ).rejects.toMatchObject({ status: 422, body: { code: "invalid_counts" } });
  });
});
