/** Per-element settings dialog: typed filter inputs, additional values
 * (selects), the relevant time period, negation and the date column. */

import { ConceptElement, TableSettings } from "./editor.js";
import { ConceptsDocument, ConnectorDoc, FilterDoc, connectorById } from "./model.js";

export class SettingsDialog {
  private root: HTMLElement;
  private onChange: () => void;

  constructor(root: HTMLElement, onChange: () => void) {
    this.root = root;
    this.onChange = onChange;
  }

  close() {
    this.root.style.display = "none";
    this.root.textContent = "";
  }

  open(element: ConceptElement, concepts: ConceptsDocument) {
    this.root.textContent = "";
    this.root.style.display = "block";

    const title = document.createElement("h3");
    title.textContent = element.label;
    this.root.appendChild(title);

    // negation + relevant time period apply to the element as a whole
    const general = document.createElement("div");
    general.className = "settings-general";
    const neg = checkbox("Exclude (negate this criterion)", element.negated, (v) => {
      element.negated = v;
      this.onChange();
    });
    neg.querySelector("input")!.dataset.role = "negate";
    general.appendChild(neg);
    general.appendChild(
      dateInput("Period from", element.dateRestriction?.min ?? "", (v) => {
        element.dateRestriction = { ...element.dateRestriction, min: v || undefined };
        this.onChange();
      }),
    );
    general.appendChild(
      dateInput("Period to", element.dateRestriction?.max ?? "", (v) => {
        element.dateRestriction = { ...element.dateRestriction, max: v || undefined };
        this.onChange();
      }),
    );
    this.root.appendChild(general);

    for (const table of element.tables) {
      const conn = connectorById(concepts, table.connectorId);
      if (conn) this.root.appendChild(this.tableSection(table, conn));
    }

    const closeBtn = document.createElement("button");
    closeBtn.textContent = "Close";
    closeBtn.addEventListener("click", () => this.close());
    this.root.appendChild(closeBtn);
  }

  private tableSection(table: TableSettings, conn: ConnectorDoc): HTMLElement {
    const box = document.createElement("fieldset");
    box.className = "settings-table";
    box.dataset.connectorId = conn.id;
    const legend = document.createElement("legend");
    legend.textContent = conn.label;
    box.appendChild(legend);

    box.appendChild(
      checkbox("Use this source", table.enabled, (v) => {
        table.enabled = v;
        this.onChange();
      }),
    );

    if (conn.validityDates.length > 1) {
      const sel = document.createElement("select");
      sel.dataset.role = "date-column";
      for (const v of conn.validityDates) {
        const opt = document.createElement("option");
        opt.value = v.label;
        opt.textContent = v.label;
        if (table.dateColumn === v.label) opt.selected = true;
        sel.appendChild(opt);
      }
      sel.addEventListener("change", () => {
        table.dateColumn = sel.value;
        this.onChange();
      });
      box.appendChild(labeled("Date column", sel));
    }

    if (conn.filters.length) {
      const head = document.createElement("h4");
      head.textContent = "Filters";
      box.appendChild(head);
      for (const f of conn.filters) {
        box.appendChild(this.filterInput(table, f));
      }
    }

    if (conn.selects.length) {
      const head = document.createElement("h4");
      head.textContent = "Additional values";
      box.appendChild(head);
      for (const s of conn.selects) {
        const cb = checkbox(s.label, table.selectIds.includes(s.id), (v) => {
          if (v && !table.selectIds.includes(s.id)) table.selectIds.push(s.id);
          if (!v) table.selectIds = table.selectIds.filter((x) => x !== s.id);
          this.onChange();
        });
        cb.querySelector("input")!.dataset.selectId = s.id;
        box.appendChild(cb);
      }
    }
    return box;
  }

  private filterInput(table: TableSettings, f: FilterDoc): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "filter-input";
    wrap.dataset.filterId = f.id;

    if (f.type === "SELECT") {
      const sel = document.createElement("select");
      sel.multiple = true;
      for (const [key, display] of Object.entries(f.labels ?? {})) {
        const opt = document.createElement("option");
        opt.value = key;
        opt.textContent = display;
        const current = table.filterValues[f.id];
        if (
          (typeof current === "string" && current === key) ||
          (Array.isArray(current) && current.includes(key))
        ) {
          opt.selected = true;
        }
        sel.appendChild(opt);
      }
      sel.addEventListener("change", () => {
        const keys = Array.from(sel.selectedOptions).map((o) => o.value);
        if (keys.length === 0) delete table.filterValues[f.id];
        else table.filterValues[f.id] = keys.length === 1 ? keys[0] : keys;
        this.onChange();
      });
      return labeled(f.label, sel, wrap);
    }

    // COUNT / COUNT_QUARTERS / RANGE: min/max bounds
    const integer = f.type !== "RANGE";
    const minBox = boundInput("min", integer);
    const maxBox = boundInput("max", integer);
    const current = table.filterValues[f.id];
    if (current && typeof current === "object" && !Array.isArray(current)) {
      if (current.min !== undefined) minBox.value = String(current.min);
      if (current.max !== undefined) maxBox.value = String(current.max);
    }
    const update = () => {
      const value: { min?: number | string; max?: number | string } = {};
      if (minBox.value !== "") value.min = integer ? Number(minBox.value) : minBox.value;
      if (maxBox.value !== "") value.max = integer ? Number(maxBox.value) : maxBox.value;
      const bad =
        value.min !== undefined &&
        value.max !== undefined &&
        Number(value.min) > Number(value.max);
      wrap.classList.toggle("invalid", bad);
      if (bad) return; // inline validation: out-of-order bounds never serialize
      if (value.min === undefined && value.max === undefined) delete table.filterValues[f.id];
      else table.filterValues[f.id] = value;
      this.onChange();
    };
    minBox.addEventListener("input", update);
    maxBox.addEventListener("input", update);
    wrap.appendChild(minBox);
    wrap.appendChild(maxBox);
    return labeled(f.label, wrap);
  }
}

function labeled(text: string, el: HTMLElement, host?: HTMLElement): HTMLElement {
  const wrap = host ?? document.createElement("div");
  wrap.classList.add("labeled");
  const label = document.createElement("label");
  label.textContent = text;
  wrap.prepend(label);
  wrap.appendChild(el);
  return wrap;
}

function checkbox(text: string, checked: boolean, onChange: (v: boolean) => void): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "checkbox";
  const box = document.createElement("input");
  box.type = "checkbox";
  box.checked = checked;
  box.addEventListener("change", () => onChange(box.checked));
  wrap.appendChild(box);
  wrap.appendChild(document.createTextNode(" " + text));
  return wrap;
}

function boundInput(placeholder: string, integer: boolean): HTMLInputElement {
  const el = document.createElement("input");
  el.type = "number";
  el.placeholder = placeholder;
  el.dataset.bound = placeholder;
  if (integer) el.step = "1";
  return el;
}

function dateInput(text: string, value: string, onChange: (v: string) => void): HTMLElement {
  const el = document.createElement("input");
  el.type = "date";
  el.value = value;
  el.dataset.role = text.toLowerCase().replace(/\s+/g, "-");
  el.addEventListener("change", () => onChange(el.value));
  return labeled(text, el);
}
