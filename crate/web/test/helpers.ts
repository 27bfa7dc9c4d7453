import type { TrialView } from "../src/types";

export function zeros(J: number, K: number) {
  return { grid: { J, K }, data: new Array(J * K).fill(0) };
}

export function freshView(J = 5, K = 3): TrialView {
  return {
    id: "t1",
    design: "cboin",
    revision: 0,
    history: { design: { id: "cboin" }, grid: { J, K }, config: { phi: 0.3, max_n: 60, cohort_size: 3, seed: 1 }, log: [] },
    notes: [],
    recommendation: {
      decision: { action: { type: "assign", dose: { j: 1, k: 1 } }, reason: "start-up" },
      phase: "startup",
      cohort_size: 3,
      estimates: { grid: { J, K }, data: new Array(J * K).fill(null) },
      n: zeros(J, K),
      y: zeros(J, K),
      mtd: null,
    },
    terminated: false,
  };
}
