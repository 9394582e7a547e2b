/** Application wiring: panels, drag-and-drop, run/poll/download, history. */

import { Api, ApiError } from "./api.js";
import { ConceptElement, EditorElement, EditorState } from "./editor.js";
import { HistoryEntry } from "./model.js";
import { SettingsDialog } from "./settings.js";
import { ConceptBrowser, DRAG_CONCEPT, DRAG_SAVED } from "./tree.js";

export class App {
  api: Api;
  editor!: EditorState;
  browser!: ConceptBrowser;
  settings!: SettingsDialog;
  private doc: Document;

  constructor(doc: Document, api?: Api) {
    this.doc = doc;
    this.api = api ?? new Api();
  }

  async start() {
    const $ = (id: string) => {
      const el = this.doc.getElementById(id);
      if (!el) throw new Error(`missing #${id}`);
      return el;
    };
    this.browser = new ConceptBrowser($("concept-tree"), $("info-panel"));
    this.settings = new SettingsDialog($("settings"), () => this.renderEditor());

    try {
      const concepts = await this.api.getConcepts();
      this.editor = new EditorState(concepts);
      this.browser.render(concepts);
      $("retry-banner").style.display = "none";
    } catch (err) {
      $("retry-banner").style.display = "block";
      return;
    }

    ($("concept-search") as HTMLInputElement).addEventListener("input", (ev) => {
      this.browser.search((ev.target as HTMLInputElement).value);
    });
    $("run-button").addEventListener("click", () => void this.run());
    this.bindDropZones();
    this.renderEditor();
    void this.refreshHistory();
  }

  // -- editor rendering -------------------------------------------------------

  private bindDropZones() {
    const zone = this.doc.getElementById("editor-groups")!;
    zone.addEventListener("dragover", (ev) => ev.preventDefault());
  }

  renderEditor() {
    const host = this.doc.getElementById("editor-groups")!;
    host.textContent = "";
    this.editor.groups.forEach((group, gi) => {
      const box = this.doc.createElement("div");
      box.className = "editor-group";
      box.dataset.group = String(gi);
      const title = this.doc.createElement("div");
      title.className = "group-title";
      title.textContent = gi === 0 ? "Group 1" : `AND Group ${gi + 1}`;
      box.appendChild(title);
      for (const el of group.elements) {
        box.appendChild(this.elementCard(el));
      }
      const orZone = this.dropZone("OR — drop here", (id, saved) =>
        saved ? this.dropSaved(id, gi) : this.dropConcept(id, gi),
      );
      orZone.classList.add("or-zone");
      box.appendChild(orZone);
      host.appendChild(box);
    });
    const andZone = this.dropZone("AND — drop here for a new group", (id, saved) =>
      saved ? this.dropSaved(id, -1) : this.dropConcept(id, -1),
    );
    andZone.classList.add("and-zone");
    host.appendChild(andZone);

    const runBtn = this.doc.getElementById("run-button") as HTMLButtonElement;
    runBtn.disabled = this.editor.isEmpty();
  }

  private elementCard(el: EditorElement): HTMLElement {
    const card = this.doc.createElement("div");
    card.className = "editor-element";
    if (el.negated) card.classList.add("negated");
    const label = this.doc.createElement("span");
    label.textContent = (el.negated ? "NOT " : "") + el.label;
    card.appendChild(label);

    if (el.kind === "concept") {
      const gear = this.doc.createElement("button");
      gear.className = "gear";
      gear.textContent = "settings";
      gear.addEventListener("click", () =>
        this.settings.open(el as ConceptElement, this.editor.conceptsDocument),
      );
      card.appendChild(gear);
    }
    const remove = this.doc.createElement("button");
    remove.className = "remove";
    remove.textContent = "x";
    remove.addEventListener("click", () => {
      this.editor.removeElement(el);
      this.renderEditor();
    });
    card.appendChild(remove);
    return card;
  }

  private dropZone(text: string, onDrop: (id: string, saved: boolean) => void): HTMLElement {
    const zone = this.doc.createElement("div");
    zone.className = "drop-zone";
    zone.textContent = text;
    zone.addEventListener("dragover", (ev) => ev.preventDefault());
    zone.addEventListener("drop", (ev: DragEvent) => {
      ev.preventDefault();
      const saved = ev.dataTransfer?.getData(DRAG_SAVED);
      if (saved) {
        onDrop(saved, true);
        return;
      }
      const concept = ev.dataTransfer?.getData(DRAG_CONCEPT);
      if (concept) onDrop(concept, false);
    });
    return zone;
  }

  dropConcept(conceptId: string, groupIndex: number): ConceptElement {
    const el = this.editor.addConcept(conceptId, groupIndex);
    this.renderEditor();
    return el;
  }

  dropSaved(executionId: string, groupIndex: number) {
    this.editor.addSavedQuery(executionId, executionId, groupIndex);
    this.renderEditor();
  }

  // -- run / poll / download ----------------------------------------------------

  async run(): Promise<string | null> {
    const status = this.doc.getElementById("run-status")!;
    const csvBtn = this.doc.getElementById("csv-button") as HTMLAnchorElement;
    csvBtn.style.display = "none";
    if (this.editor.isEmpty()) {
      status.textContent = "The editor is empty.";
      return null;
    }
    let executionId: string;
    try {
      executionId = await this.api.submit(this.editor.serialize());
    } catch (err) {
      if (err instanceof ApiError && err.violations.length) {
        status.textContent = `Rejected: ${err.violations.join("; ")}`;
      } else {
        status.textContent = String(err);
      }
      return null;
    }
    status.textContent = "running…";
    const final = await this.api.pollUntilDone(executionId, 250, (s) => {
      status.textContent = s.state.toLowerCase() + "…";
    });
    if (final.state === "DONE") {
      status.textContent = `done — ${final.lineCount} result lines`;
      csvBtn.href = this.api.resultUrl(executionId);
      csvBtn.style.display = "inline-block";
    } else {
      status.textContent = `failed: ${final.error ?? final.state.toLowerCase()}`;
      status.classList.add("failed-badge");
    }
    void this.refreshHistory();
    return executionId;
  }

  // -- history -------------------------------------------------------------------

  async refreshHistory() {
    const host = this.doc.getElementById("history-list");
    if (!host) return;
    const entries = await this.api.history();
    host.textContent = "";
    for (const e of entries) {
      host.appendChild(this.historyRow(e));
    }
  }

  private historyRow(entry: HistoryEntry): HTMLElement {
    const row = this.doc.createElement("div");
    row.className = "history-entry";
    row.draggable = entry.state === "DONE";
    row.dataset.executionId = entry.executionId;
    row.textContent = `${entry.name} — ${entry.state}`;
    row.addEventListener("dragstart", (ev: DragEvent) => {
      ev.dataTransfer?.setData(DRAG_SAVED, entry.executionId);
    });
    return row;
  }
}

export function boot() {
  const app = new App(document);
  void app.start();
  return app;
}

declare global {
  interface Window {
    cohortqApp?: App;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("concept-tree")) {
  window.cohortqApp = boot();
}
