import { ApiError, ConductClient } from "./api.js";
import type { CatalogEntry, TrialView } from "./types.js";
import { designFromFields, formatDose, gridView, parameterFields, recommendedDose, timeline, validateCohort } from "./view.js";

const client = new ConductClient();
let catalog: CatalogEntry[] = [];
let current: TrialView | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

function el<K extends keyof HTMLElementTagNameMap>(tag: K, attrs: Record<string, string> = {}, text?: string) {
  const e = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  if (text !== undefined) e.textContent = text;
  return e;
}

function message(text: string, kind: "error" | "info" = "error") {
  const box = $("messages");
  box.className = kind;
  box.textContent = text;
}

function describeError(e: unknown): string {
  if (e instanceof ApiError) return `${e.body.message} (${e.body.code})`;
  return e instanceof Error ? e.message : String(e);
}

function renderParams() {
  const entry = catalog.find((d) => d.id === ($("design") as HTMLSelectElement).value);
  const box = $("params");
  box.replaceChildren();
  if (!entry) return;
  for (const f of parameterFields(entry)) {
    const label = el("label", {}, f.name + " ");
    const input = el("input", { name: f.name, "data-kind": f.input });
    if (f.input === "checkbox") {
      input.type = "checkbox";
      input.checked = f.value === true;
    } else {
      input.type = f.input === "number" ? "number" : "text";
      input.step = "any";
      input.value = String(f.value);
    }
    label.append(input);
    box.append(label);
  }
}

function render(view: TrialView) {
  current = view;
  location.hash = view.id;
  const g = gridView(view);
  $("status").textContent = g.status;
  const banner = $("banner");
  banner.hidden = !g.banner;
  banner.textContent = g.banner ?? "";

  const table = el("table", { class: "grid" });
  for (const row of g.rows) {
    const tr = el("tr");
    tr.append(el("th", {}, `B${row[0].dose.k}`));
    for (const c of row) {
      const td = el("td");
      if (c.shade !== null) td.style.background = `rgba(200, 40, 40, ${0.1 + 0.7 * c.shade})`;
      if (c.recommended) td.classList.add("recommended");
      if (c.current) td.classList.add("current");
      if (!c.tried) td.classList.add("untried");
      td.append(el("div", { class: "dose" }, formatDose(c.dose)));
      td.append(el("div", {}, `${c.y}/${c.n}`));
      td.append(el("div", { class: "est" }, c.estimate === null ? "-" : c.estimate.toFixed(3)));
      td.addEventListener("click", () => {
        ($("dose-j") as HTMLInputElement).value = String(c.dose.j);
        ($("dose-k") as HTMLInputElement).value = String(c.dose.k);
      });
      tr.append(td);
    }
    table.append(tr);
  }
  const head = el("tr");
  head.append(el("th"));
  for (let j = 1; j <= view.history.grid.J; j++) head.append(el("th", {}, `A${j}`));
  table.append(head);
  $("grid").replaceChildren(table);

  const rec = recommendedDose(view);
  if (rec) {
    ($("dose-j") as HTMLInputElement).value = String(rec.j);
    ($("dose-k") as HTMLInputElement).value = String(rec.k);
    const size = view.recommendation.cohort_size;
    if (size !== null) ($("patients") as HTMLInputElement).value = String(size);
  }
  ($("cohort") as HTMLFieldSetElement).disabled = view.terminated;

  const list = $("timeline");
  list.replaceChildren(...timeline(view.history.log, view.notes).map((t) => el("li", {}, t.label)));
  ($("undo") as HTMLButtonElement).disabled = view.history.log.length === 0;
  $("export").textContent = JSON.stringify(view.history, null, 2);
}

async function createTrial(ev: Event) {
  ev.preventDefault();
  const entry = catalog.find((d) => d.id === ($("design") as HTMLSelectElement).value);
  if (!entry) return;
  const values: Record<string, string | boolean> = {};
  for (const input of $("params").querySelectorAll("input")) {
    values[input.name] = input.type === "checkbox" ? input.checked : input.value;
  }
  const num = (id: string) => Number(($(id) as HTMLInputElement).value);
  const config: Record<string, number> = { phi: num("phi"), max_n: num("max-n"), cohort_size: num("cohort-size") };
  const seed = ($("seed") as HTMLInputElement).value.trim();
  if (seed) config.seed = Number(seed);
  try {
    const view = await client.create({
      design: designFromFields(entry, values),
      grid: { J: num("grid-j"), K: num("grid-k") },
      config,
    });
    message("Trial created.", "info");
    render(view);
  } catch (e) {
    message(describeError(e));
  }
}

async function submitCohort(ev: Event) {
  ev.preventDefault();
  if (!current) return;
  const input = {
    dose: { j: Number(($("dose-j") as HTMLInputElement).value), k: Number(($("dose-k") as HTMLInputElement).value) },
    patients: Number(($("patients") as HTMLInputElement).value),
    dlts: Number(($("dlts") as HTMLInputElement).value),
    overrideNote: ($("override") as HTMLInputElement).value,
  };
  const errors = validateCohort(current, input);
  if (errors.length > 0) {
    message(errors.join(" "));
    return;
  }
  try {
    const r = await client.submitCohort(current, {
      dose: input.dose,
      patients: input.patients,
      dlts: input.dlts,
      override_note: input.overrideNote.trim() || undefined,
    });
    render(r.view);
    if (r.kind === "conflict") message(`Someone else updated this trial; review the refreshed state. ${r.message}`);
    else {
      message("Cohort recorded.", "info");
      ($("dlts") as HTMLInputElement).value = "0";
      ($("override") as HTMLInputElement).value = "";
    }
  } catch (e) {
    message(describeError(e));
  }
}

async function undo() {
  if (!current || !confirm("Remove the last cohort?")) return;
  try {
    const r = await client.undo(current);
    render(r.view);
    message(r.kind === "conflict" ? `Trial changed elsewhere; nothing undone. ${r.message}` : "Last cohort removed.", r.kind === "conflict" ? "error" : "info");
  } catch (e) {
    message(describeError(e));
  }
}

async function start() {
  try {
    catalog = await client.designs();
  } catch (e) {
    message(`Cannot reach the conduct service: ${describeError(e)}`);
    return;
  }
  const select = $("design") as HTMLSelectElement;
  select.replaceChildren(...catalog.map((d) => el("option", { value: d.id }, d.name)));
  select.addEventListener("change", renderParams);
  renderParams();
  $("create").addEventListener("submit", createTrial);
  $("cohort-form").addEventListener("submit", submitCohort);
  $("undo").addEventListener("click", undo);
  $("open").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    try {
      render(await client.get(($("trial-id") as HTMLInputElement).value.trim()));
    } catch (e) {
      message(describeError(e));
    }
  });
  const id = location.hash.slice(1);
  if (id) {
    try {
      render(await client.get(id));
    } catch (e) {
      message(describeError(e));
    }
  }
}

void start();
