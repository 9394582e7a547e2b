/** Concept browser: collapsible tree with search; nodes drag into the editor.
 * Hovering a node shows its description in the INFO panel. */

import { ConceptNodeDoc, ConceptsDocument } from "./model.js";

export const DRAG_CONCEPT = "application/x-concept-id";
export const DRAG_SAVED = "application/x-saved-query";

export class ConceptBrowser {
  private container: HTMLElement;
  private info: HTMLElement;
  private doc: ConceptsDocument | null = null;
  private filter = "";

  constructor(container: HTMLElement, info: HTMLElement) {
    this.container = container;
    this.info = info;
  }

  render(doc: ConceptsDocument) {
    this.doc = doc;
    this.redraw();
  }

  search(text: string) {
    this.filter = text.trim().toLowerCase();
    this.redraw();
  }

  /** ids of nodes whose subtree matches the search (kept expanded/highlighted) */
  private matches(node: ConceptNodeDoc): boolean {
    if (!this.filter) return false;
    return (
      node.name.toLowerCase().includes(this.filter) ||
      node.description.toLowerCase().includes(this.filter) ||
      node.children.some((c) => this.matches(c))
    );
  }

  private redraw() {
    this.container.textContent = "";
    if (!this.doc || this.doc.concepts.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "No concepts loaded.";
      this.container.appendChild(empty);
      return;
    }
    for (const tree of this.doc.concepts) {
      this.container.appendChild(this.renderNode(tree.root, 0));
    }
  }

  private renderNode(node: ConceptNodeDoc, depth: number): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "tree-node";

    const row = document.createElement("div");
    row.className = "tree-row";
    row.draggable = true;
    row.dataset.conceptId = node.id;
    const hit = this.filter && this.matches(node);
    const selfHit =
      this.filter &&
      (node.name.toLowerCase().includes(this.filter) ||
        node.description.toLowerCase().includes(this.filter));
    if (selfHit) row.classList.add("search-hit");

    const toggle = document.createElement("span");
    toggle.className = "tree-toggle";
    toggle.textContent = node.children.length ? "▸" : "·";
    row.appendChild(toggle);

    const label = document.createElement("span");
    label.className = "tree-label";
    label.textContent = node.description ? `${node.name} — ${node.description}` : node.name;
    row.appendChild(label);

    row.addEventListener("dragstart", (ev: DragEvent) => {
      ev.dataTransfer?.setData(DRAG_CONCEPT, node.id);
    });
    row.addEventListener("mouseenter", () => {
      this.info.textContent = node.description || node.name;
    });

    wrap.appendChild(row);

    const childBox = document.createElement("div");
    childBox.className = "tree-children";
    childBox.style.display = depth === 0 || hit ? "block" : "none";
    for (const c of node.children) {
      childBox.appendChild(this.renderNode(c, depth + 1));
    }
    wrap.appendChild(childBox);

    toggle.addEventListener("click", () => {
      const open = childBox.style.display !== "none";
      childBox.style.display = open ? "none" : "block";
      toggle.textContent = node.children.length ? (open ? "▸" : "▾") : "·";
    });
    if (childBox.style.display === "block" && node.children.length) {
      toggle.textContent = "▾";
    }
    return wrap;
  }
}
