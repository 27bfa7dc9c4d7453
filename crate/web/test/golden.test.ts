import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { gridView, timeline } from "../src/view";
import type { Recommendation, TrialView } from "../src/types";

interface Step {
  view: TrialView;
  decide: Recommendation;
}

const transcript: { trials: { design: string; steps: Step[] }[] } = JSON.parse(
  readFileSync(new URL("./fixtures/transcript.json", import.meta.url), "utf8"),
);

describe("golden transcript", () => {
  for (const trial of transcript.trials) {
    it(`${trial.design}: displayed recommendations equal the CLI decisions`, () => {
      expect(trial.steps.length).toBeGreaterThan(5);
      trial.steps.forEach((step, i) => {
        const g = gridView(step.view);
        const action = step.decide.decision.action;
        expect(g.recommended).toEqual(action.type === "assign" ? action.dose : null);
        expect(g.rows.flat().filter((c) => c.recommended)).toHaveLength(action.type === "assign" ? 1 : 0);
        expect(timeline(step.view.history.log)).toHaveLength(i);
        for (const c of g.rows.flat()) {
          const idx = (c.dose.k - 1) * step.view.history.grid.J + (c.dose.j - 1);
          expect(c.n).toBe(step.decide.n.data[idx]);
          expect(c.estimate).toBe(step.decide.estimates.data[idx]);
        }
      });
    });
  }
});
