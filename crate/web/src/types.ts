export interface Dose {
  j: number;
  k: number;
}

export interface Grid {
  J: number;
  K: number;
}

/** Agent-B-major storage: index `(k - 1) * J + (j - 1)`. */
export interface Matrix<T> {
  grid: Grid;
  data: T[];
}

export type Action = { type: "assign"; dose: Dose } | { type: "terminate" };

export interface Decision {
  action: Action;
  reason: string;
}

export interface Cohort {
  dose: Dose;
  patients: number;
  dlts: number;
}

export interface History {
  design: { id: string; [param: string]: unknown };
  grid: Grid;
  config: { phi: number; max_n: number; cohort_size: number; seed: number; early_stop_n?: number | null };
  log: Cohort[];
  scenario?: unknown;
}

export interface Recommendation {
  decision: Decision;
  phase: string;
  cohort_size: number | null;
  estimates: Matrix<number | null>;
  n: Matrix<number>;
  y: Matrix<number>;
  mtd: { selected: Dose | null; estimate: number | null } | null;
}

export interface TrialView {
  id: string;
  design: string;
  revision: number;
  history: History;
  notes: (string | null)[];
  recommendation: Recommendation;
  terminated: boolean;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

export interface Parameter {
  name: string;
  type: string;
  default: unknown;
}

export interface CatalogEntry {
  id: string;
  name: string;
  parameters: Parameter[];
  needs_scenario_by_default: boolean;
}
