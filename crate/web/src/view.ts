// Pure view models. Nothing here decides doses: every recommendation comes
// verbatim from the API payload.

import type { CatalogEntry, Cohort, Dose, Matrix, TrialView } from "./types.js";

export interface CellView {
  dose: Dose;
  n: number;
  y: number;
  estimate: number | null;
  /** 0..1 shade from the estimate's quantile among tried doses. */
  shade: number | null;
  current: boolean;
  recommended: boolean;
  tried: boolean;
}

export interface GridView {
  /** Rows from the highest agent-B level down, as drawn on screen. */
  rows: CellView[][];
  banner: string | null;
  recommended: Dose | null;
  status: string;
}

export function at<T>(m: Matrix<T>, dose: Dose): T {
  return m.data[(dose.k - 1) * m.grid.J + (dose.j - 1)];
}

export function sameDose(a: Dose | null | undefined, b: Dose | null | undefined): boolean {
  return !!a && !!b && a.j === b.j && a.k === b.k;
}

export function formatDose(d: Dose): string {
  return `(${d.j},${d.k})`;
}

/** Mid-rank quantile of each value among `values`; ties share a shade. */
export function quantileShades(values: number[]): Map<number, number> {
  const sorted = [...new Set(values)].sort((a, b) => a - b);
  const out = new Map<number, number>();
  if (sorted.length === 1) {
    out.set(sorted[0], 0.5);
    return out;
  }
  sorted.forEach((v, i) => out.set(v, i / (sorted.length - 1)));
  return out;
}

export function recommendedDose(view: TrialView): Dose | null {
  const a = view.recommendation.decision.action;
  return a.type === "assign" && !view.terminated ? a.dose : null;
}

export function gridView(view: TrialView): GridView {
  const rec = view.recommendation;
  const { J, K } = view.history.grid;
  const log = view.history.log;
  const current = log.length > 0 ? log[log.length - 1].dose : null;
  const recommended = recommendedDose(view);
  const tried: number[] = [];
  for (let k = 1; k <= K; k++) {
    for (let j = 1; j <= J; j++) {
      const e = at(rec.estimates, { j, k });
      if (at(rec.n, { j, k }) > 0 && e !== null) tried.push(e);
    }
  }
  const shades = quantileShades(tried);
  const rows: CellView[][] = [];
  for (let k = K; k >= 1; k--) {
    const row: CellView[] = [];
    for (let j = 1; j <= J; j++) {
      const dose = { j, k };
      const n = at(rec.n, dose);
      const estimate = at(rec.estimates, dose);
      row.push({
        dose,
        n,
        y: at(rec.y, dose),
        estimate,
        shade: n > 0 && estimate !== null ? (shades.get(estimate) ?? null) : null,
        current: sameDose(current, dose),
        recommended: sameDose(recommended, dose),
        tried: n > 0,
      });
    }
    rows.push(row);
  }
  let banner: string | null = null;
  if (view.terminated) {
    const mtd = rec.mtd?.selected;
    banner = `Trial ended (${rec.decision.reason}). ` + (mtd ? `Selected MTD ${formatDose(mtd)}.` : "No MTD selected.");
  }
  const enrolled = log.reduce((s, c) => s + c.patients, 0);
  const status =
    `${view.design}, revision ${view.revision}, ${enrolled}/${view.history.config.max_n} patients, phase ${rec.phase}` +
    (recommended ? `; next ${formatDose(recommended)} (${rec.decision.reason})` : "");
  return { rows, banner, recommended, status };
}

export interface CohortInput {
  dose: Dose;
  patients: number;
  dlts: number;
  overrideNote?: string;
}

/** Client-side checks mirroring the server; returns messages, empty when valid. */
export function validateCohort(view: TrialView, input: CohortInput): string[] {
  const errors: string[] = [];
  const { J, K } = view.history.grid;
  const int = (x: number) => Number.isInteger(x);
  if (view.terminated) errors.push("The trial has ended.");
  if (!int(input.patients) || input.patients < 1) errors.push("Patients must be a whole number of at least 1.");
  if (!int(input.dlts) || input.dlts < 0) errors.push("DLTs must be a whole number of at least 0.");
  else if (input.dlts > input.patients) errors.push("DLTs cannot exceed patients.");
  const enrolled = view.history.log.reduce((s, c) => s + c.patients, 0);
  if (int(input.patients) && enrolled + input.patients > view.history.config.max_n) {
    errors.push(`Only ${view.history.config.max_n - enrolled} patients remain.`);
  }
  const d = input.dose;
  if (!int(d.j) || !int(d.k) || d.j < 1 || d.k < 1 || d.j > J || d.k > K) {
    errors.push(`Dose ${formatDose(d)} is outside the ${J}x${K} grid.`);
  } else if (!sameDose(recommendedDose(view), d) && !input.overrideNote?.trim()) {
    errors.push("Enrolling away from the recommended dose needs an override note.");
  }
  return errors;
}

export interface TimelineEntry {
  index: number;
  dose: Dose;
  patients: number;
  dlts: number;
  note: string | null;
  label: string;
}

export function timeline(log: Cohort[], notes: (string | null)[] = []): TimelineEntry[] {
  return log.map((c, i) => ({
    index: i + 1,
    dose: c.dose,
    patients: c.patients,
    dlts: c.dlts,
    note: notes[i] ?? null,
    label: `#${i + 1} ${formatDose(c.dose)}: ${c.dlts}/${c.patients} DLT` + (notes[i] ? ` (override: ${notes[i]})` : ""),
  }));
}

export interface FieldSpec {
  name: string;
  input: "number" | "checkbox" | "json";
  value: string | boolean;
}

/** Form fields generated from the design catalog, so they track the server. */
export function parameterFields(entry: CatalogEntry): FieldSpec[] {
  return entry.parameters.map((p) => {
    if (p.type === "boolean") return { name: p.name, input: "checkbox", value: p.default === true };
    if (p.type === "number" || p.type === "integer") return { name: p.name, input: "number", value: String(p.default) };
    return { name: p.name, input: "json", value: JSON.stringify(p.default) };
  });
}

/** Design object for `POST /api/trials`; only fields changed from the default are sent. */
export function designFromFields(entry: CatalogEntry, values: Record<string, string | boolean>): Record<string, unknown> {
  const design: Record<string, unknown> = { id: entry.id };
  for (const p of entry.parameters) {
    const v = values[p.name];
    if (v === undefined) continue;
    let parsed: unknown;
    if (p.type === "boolean") parsed = v === true;
    else if (p.type === "number" || p.type === "integer") parsed = Number(v);
    else parsed = JSON.parse(String(v));
    if (JSON.stringify(parsed) !== JSON.stringify(p.default)) design[p.name] = parsed;
  }
  return design;
}
