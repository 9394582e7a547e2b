/** Scripted browser flow against a real backend:
 *  drag g20 into the editor, set the case-count filter min=2 and the
 *  quarters filter min=2, enable two selects, submit, poll to DONE and
 *  download a CSV whose header matches the serialized query's result
 *  header. Also: every document the UI emits passes server validation. */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { App } from "../src/app.js";
import { EditorState } from "../src/editor.js";
import { APP_HTML, drag } from "./fixture.js";

const REPO = resolve(__dirname, "..", "..");
const FIXTURE = join(REPO, "tests", "fixtures", "parkinson");
const PORT = 8923; // pinned: must match the happy-dom origin in vitest.config.ts
const BASE = `http://127.0.0.1:${PORT}`;

const G20 = "dataset.icd.g00-g99.g20-g26.g20";
const AMB = "dataset.icd.physician_diagnoses";
const HOSP = "dataset.icd.hospital_diagnoses";

let server: ChildProcess | null = null;

function py(args: string[], env: Record<string, string> = {}) {
  const r = spawnSync("python3", ["-m", "cohortq.cli", ...args], {
    cwd: REPO,
    env: { ...process.env, ...env },
    encoding: "utf-8",
  });
  if (r.status !== 0) {
    throw new Error(`cohortq ${args.join(" ")} failed:\n${r.stdout}\n${r.stderr}`);
  }
  return r.stdout;
}

beforeAll(async () => {
  const work = mkdtempSync(join(tmpdir(), "cohortq-ui-"));
  const imports = join(work, "imports");
  for (const [input, desc] of [
    ["outpatient.csv", "outpatient.import.json"],
    ["hospital.csv", "hospital.import.json"],
  ]) {
    py([
      "ingest", "preprocess",
      "--descriptor", join(FIXTURE, desc),
      "--input", join(FIXTURE, input),
      "--out", imports,
      "--dataset-config", join(FIXTURE, "dataset.json"),
      "--bucket-count", "20",
    ]);
  }
  const config = join(work, "service.json");
  writeFileSync(
    config,
    JSON.stringify({
      datasetConfig: join(FIXTURE, "dataset.json"),
      importDir: imports,
      dataDir: join(work, "data"),
      bucketCount: 20,
      workers: 1,
      port: PORT,
    }),
  );
  server = spawn("python3", ["-m", "cohortq.cli", "serve", "--config", config], {
    cwd: REPO,
    stdio: ["ignore", "pipe", "pipe"],
  });
  const deadline = Date.now() + 120_000;
  for (;;) {
    try {
      const r = await fetch(`${BASE}/api/concepts`);
      if (r.ok) break;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) throw new Error("backend never came up");
    await new Promise((res) => setTimeout(res, 300));
  }
}, 180_000);

afterAll(() => {
  server?.kill();
});

async function startApp(): Promise<App> {
  document.body.innerHTML = APP_HTML;
  const app = new App(document, new Api(BASE, "ui-test"));
  await app.start();
  return app;
}

describe("UI contract against the live service", () => {
  it("drag, configure, run, poll, download: header matches the query", async () => {
    const app = await startApp();

    // drag G20 from the rendered tree into the editor
    const row = document.querySelector<HTMLElement>(`[data-concept-id="${G20}"]`);
    expect(row, "g20 row rendered from live /api/concepts").toBeTruthy();
    drag(row!, document.querySelector(".and-zone")!);
    expect(app.editor.groups.length).toBe(1);

    // open settings: hospital case count min=2, outpatient quarters min=2
    (document.querySelector(".editor-element .gear") as HTMLButtonElement).click();
    const setBound = (connector: string, filter: string, bound: string, v: string) => {
      const box = document.querySelector<HTMLElement>(`[data-connector-id="${connector}"]`)!;
      const f = box.querySelector<HTMLElement>(`[data-filter-id="${filter}"]`)!;
      const input = f.querySelector<HTMLInputElement>(`[data-bound="${bound}"]`)!;
      input.value = v;
      input.dispatchEvent(new Event("input", { bubbles: true }));
    };
    setBound(HOSP, `${HOSP}.case_number`, "min", "2");
    setBound(AMB, `${AMB}.quarters`, "min", "2");

    // enable two selects
    for (const sid of [`${AMB}.icd_codes`, `${HOSP}.number_of_cases`]) {
      const cb = document.querySelector<HTMLInputElement>(`[data-select-id="${sid}"]`)!;
      cb.checked = true;
      cb.dispatchEvent(new Event("change", { bubbles: true }));
    }

    const serialized = app.editor.serialize();
    expect(serialized.root.type).toBe("CONCEPT");

    // run through the app: submit, poll to DONE, CSV button appears
    const executionId = await app.run();
    expect(executionId).toBeTruthy();
    const status = document.getElementById("run-status")!.textContent!;
    expect(status).toContain("done");
    const csvBtn = document.getElementById("csv-button") as HTMLAnchorElement;
    expect(csvBtn.style.display).not.toBe("none");

    // the downloaded CSV's header equals the client-side result header
    const csv = await app.api.downloadCsv(executionId!);
    const header = csv.split("\n")[0].split(";");
    expect(header).toEqual(app.editor.expectedHeader());
    // cohort: >=2 outpatient quarters or >=2 hospital cases
    const entities = csv.trim().split("\n").slice(1).map((l) => l.split(";")[0]);
    expect(entities.length).toBeGreaterThan(0);
  });

  it("every document the UI emits passes server-side validation", async () => {
    const app = await startApp();
    const api = app.api;
    const docs = [] as ReturnType<EditorState["serialize"]>[];

    // bare concept
    const ed1 = new EditorState(app.editor.conceptsDocument);
    ed1.addConcept(G20);
    docs.push(ed1.serialize());

    // OR group + AND group with settings, negation, date restriction
    const ed2 = new EditorState(app.editor.conceptsDocument);
    const a = ed2.addConcept(G20, -1);
    ed2.addConcept("dataset.icd.g00-g99", 0);
    const b = ed2.addConcept("dataset.icd.g00-g99.g20-g26", -1);
    a.tables.find((t) => t.connectorId === AMB)!.filterValues[`${AMB}.kind`] = ["confirmed"];
    a.tables.find((t) => t.connectorId === AMB)!.dateColumn = "Visit date";
    b.negated = true;
    b.dateRestriction = { min: "2015-01-01", max: "2015-12-31" };
    b.tables.find((t) => t.connectorId === HOSP)!.selectIds.push(`${HOSP}.icd_codes`);
    docs.push(ed2.serialize());

    // range filter with decimal bounds
    const ed3 = new EditorState(app.editor.conceptsDocument);
    const c = ed3.addConcept(G20);
    c.tables.find((t) => t.connectorId === AMB)!.filterValues[`${AMB}.fee`] = {
      min: "10.50",
      max: "250.00",
    };
    c.tables.find((t) => t.connectorId === HOSP)!.enabled = false;
    docs.push(ed3.serialize());

    const ids: string[] = [];
    for (const doc of docs) {
      const executionId = await api.submit(doc); // throws ApiError on 400
      ids.push(executionId);
    }
    // saved-query reuse: a finished execution drags back in
    const done = await api.pollUntilDone(ids[0]);
    expect(done.state).toBe("DONE");
    const ed4 = new EditorState(app.editor.conceptsDocument);
    ed4.addConcept(G20);
    ed4.addSavedQuery(ids[0], "reused", 0);
    const executionId = await api.submit(ed4.serialize());
    const final = await api.pollUntilDone(executionId);
    expect(final.state).toBe("DONE");

    // round-trip: deserialize(serialize) resubmits cleanly
    const round = EditorState.deserialize(docs[1], app.editor.conceptsDocument);
    await api.submit(round.serialize());
  });

  it("polling a failed execution shows a terminal failed badge", async () => {
    const app = await startApp();
    // unknown saved query id is rejected up front with violations
    const ed = new EditorState(app.editor.conceptsDocument);
    ed.addSavedQuery("does-not-exist", "ghost");
    await expect(app.api.submit(ed.serialize())).rejects.toMatchObject({ status: 400 });

    // a failed execution surfaces as a failed badge through the app's runner
    app.editor.addSavedQuery("does-not-exist", "ghost");
    const result = await app.run();
    expect(result).toBeNull();
    expect(document.getElementById("run-status")!.textContent).toContain("Rejected");
  });
});
