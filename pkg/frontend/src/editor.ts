/** The query editor model: a list of OR-groups combined with AND.
 *
 * Dropping a concept into an existing group ORs it with the group's
 * elements; dropping it into the "new group" zone ANDs a fresh group onto
 * the query. Each element carries its own settings (per-connector filter
 * values, selected selects, date column choice, a relevant time period and
 * a negation flag) and serializes into the server's query document format.
 */

import {
  ConceptsDocument,
  ConnectorDoc,
  FilterValue,
  QueryDoc,
  QueryNodeDoc,
  TableEntryDoc,
  connectorById,
  findNode,
  treeOfNode,
} from "./model.js";

export interface TableSettings {
  connectorId: string;
  enabled: boolean;
  filterValues: Record<string, FilterValue>; // filter id -> value
  selectIds: string[];
  dateColumn?: string;
}

export interface ConceptElement {
  kind: "concept";
  conceptIds: string[];
  label: string;
  tables: TableSettings[];
  negated: boolean;
  dateRestriction?: { min?: string; max?: string };
}

export interface SavedElement {
  kind: "saved";
  executionId: string;
  label: string;
  negated: boolean;
  dateRestriction?: { min?: string; max?: string };
}

export type EditorElement = ConceptElement | SavedElement;

export interface Group {
  elements: EditorElement[];
}

export class EditorState {
  groups: Group[] = [];

  constructor(private concepts: ConceptsDocument) {}

  get conceptsDocument(): ConceptsDocument {
    return this.concepts;
  }

  isEmpty(): boolean {
    return this.groups.every((g) => g.elements.length === 0);
  }

  /** Drop a concept node into group `groupIndex` (append a new group when -1). */
  addConcept(conceptId: string, groupIndex = -1): ConceptElement {
    const node = findNode(this.concepts, conceptId);
    const tree = treeOfNode(this.concepts, conceptId);
    if (!node || !tree) throw new Error(`unknown concept node ${conceptId}`);
    const element: ConceptElement = {
      kind: "concept",
      conceptIds: [conceptId],
      label: node.description || node.name,
      negated: false,
      tables: tree.connectors.map((c) => ({
        connectorId: c.id,
        enabled: true,
        filterValues: {},
        selectIds: [],
      })),
    };
    this.place(element, groupIndex);
    return element;
  }

  addSavedQuery(executionId: string, label: string, groupIndex = -1): SavedElement {
    const element: SavedElement = {
      kind: "saved",
      executionId,
      label: label || executionId,
      negated: false,
    };
    this.place(element, groupIndex);
    return element;
  }

  private place(element: EditorElement, groupIndex: number) {
    if (groupIndex >= 0 && groupIndex < this.groups.length) {
      this.groups[groupIndex].elements.push(element);
    } else {
      this.groups.push({ elements: [element] });
    }
  }

  removeElement(element: EditorElement) {
    for (const g of this.groups) {
      const i = g.elements.indexOf(element);
      if (i >= 0) g.elements.splice(i, 1);
    }
    this.groups = this.groups.filter((g) => g.elements.length > 0);
  }

  clear() {
    this.groups = [];
  }

  // -- serialization --------------------------------------------------------

  private elementDoc(el: EditorElement): QueryNodeDoc {
    let doc: QueryNodeDoc;
    if (el.kind === "saved") {
      doc = { type: "SAVED_QUERY", query: el.executionId };
    } else {
      const tables: TableEntryDoc[] = [];
      for (const t of el.tables) {
        if (!t.enabled) continue;
        const entry: TableEntryDoc = { id: t.connectorId };
        const filters = Object.entries(t.filterValues)
          .filter(([, v]) => !valueEmpty(v))
          .map(([filter, value]) => ({ filter, value }));
        if (filters.length) entry.filters = filters;
        if (t.selectIds.length) entry.selects = [...t.selectIds];
        if (t.dateColumn) entry.dateColumn = t.dateColumn;
        tables.push(entry);
      }
      doc = { type: "CONCEPT", ids: [...el.conceptIds], tables };
    }
    if (el.negated) doc = { type: "NEGATION", child: doc };
    if (el.dateRestriction && (el.dateRestriction.min || el.dateRestriction.max)) {
      doc = { type: "DATE_RESTRICTION", dateRange: { ...el.dateRestriction }, child: doc };
    }
    return doc;
  }

  /** AND across groups, OR within a group; singletons collapse. */
  serialize(): QueryDoc {
    if (this.isEmpty()) throw new Error("empty editor cannot submit");
    const groupDocs = this.groups.map((g) => {
      const children = g.elements.map((el) => this.elementDoc(el));
      return children.length === 1 ? children[0] : { type: "OR" as const, children };
    });
    const root = groupDocs.length === 1 ? groupDocs[0] : { type: "AND" as const, children: groupDocs };
    return { type: "CONCEPT_QUERY", root };
  }

  /** Rebuild editor structure from a document this editor produced. */
  static deserialize(doc: QueryDoc, concepts: ConceptsDocument): EditorState {
    const state = new EditorState(concepts);
    const groups = doc.root.type === "AND" ? doc.root.children : [doc.root];
    for (const g of groups) {
      const members = g.type === "OR" ? g.children : [g];
      const group: Group = { elements: [] };
      for (const m of members) {
        group.elements.push(elementFromDoc(m, concepts));
      }
      state.groups.push(group);
    }
    return state;
  }

  /** Expected result columns of the serialized query: entity id, dates, then
   * selects in depth-first order; duplicate labels get the connector label. */
  expectedHeader(): string[] {
    const picked: { label: string; connector: ConnectorDoc }[] = [];
    const visit = (node: QueryNodeDoc) => {
      switch (node.type) {
        case "CONCEPT":
          for (const t of node.tables) {
            const conn = connectorById(this.concepts, t.id);
            if (!conn) continue;
            for (const sid of t.selects ?? []) {
              const sel = conn.selects.find((s) => s.id === sid);
              if (sel) picked.push({ label: sel.label, connector: conn });
            }
          }
          break;
        case "AND":
        case "OR":
          node.children.forEach(visit);
          break;
        case "NEGATION":
        case "DATE_RESTRICTION":
          visit(node.child);
          break;
        case "SAVED_QUERY":
          break;
      }
    };
    visit(this.serialize().root);
    const counts = new Map<string, number>();
    for (const p of picked) counts.set(p.label, (counts.get(p.label) ?? 0) + 1);
    const labels = picked.map((p) =>
      (counts.get(p.label) ?? 0) > 1 ? `${p.connector.label} ${p.label}` : p.label,
    );
    return ["result", "dates", ...labels];
  }
}

function valueEmpty(v: FilterValue): boolean {
  if (typeof v === "string") return v === "";
  if (Array.isArray(v)) return v.length === 0;
  return v.min === undefined && v.max === undefined;
}

function elementFromDoc(doc: QueryNodeDoc, concepts: ConceptsDocument): EditorElement {
  let negated = false;
  let dateRestriction: { min?: string; max?: string } | undefined;
  let inner = doc;
  if (inner.type === "DATE_RESTRICTION") {
    dateRestriction = { ...inner.dateRange };
    inner = inner.child;
  }
  if (inner.type === "NEGATION") {
    negated = true;
    inner = inner.child;
  }
  if (inner.type === "SAVED_QUERY") {
    return { kind: "saved", executionId: inner.query, label: inner.query, negated, dateRestriction };
  }
  if (inner.type !== "CONCEPT") {
    throw new Error(`cannot place a nested ${inner.type} into the group editor`);
  }
  const node = findNode(concepts, inner.ids[0]);
  const tree = treeOfNode(concepts, inner.ids[0]);
  if (!node || !tree) throw new Error(`unknown concept ${inner.ids[0]}`);
  const byId = new Map(inner.tables.map((t) => [t.id, t]));
  return {
    kind: "concept",
    conceptIds: [...inner.ids],
    label: node.description || node.name,
    negated,
    dateRestriction,
    tables: tree.connectors.map((c) => {
      const t = byId.get(c.id);
      return {
        connectorId: c.id,
        enabled: t !== undefined,
        filterValues: Object.fromEntries((t?.filters ?? []).map((f) => [f.filter, f.value])),
        selectIds: [...(t?.selects ?? [])],
        dateColumn: t?.dateColumn,
      };
    }),
  };
}
