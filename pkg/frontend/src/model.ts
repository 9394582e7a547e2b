/** Server document shapes (mirrors GET /api/concepts and the query format). */

export interface ConceptNodeDoc {
  id: string;
  name: string;
  description: string;
  children: ConceptNodeDoc[];
}

export interface ValidityDateDoc {
  label: string;
  column: string;
}

export interface FilterDoc {
  id: string;
  name: string;
  label: string;
  type: "SELECT" | "COUNT" | "RANGE" | "COUNT_QUARTERS";
  labels?: Record<string, string>;
  distinct?: boolean;
  column?: string;
}

export interface SelectDoc {
  id: string;
  name: string;
  label: string;
  type: "DISTINCT" | "COUNT" | "COUNT_QUARTERS" | "EVENT_DATES" | "EXISTS";
  column?: string;
  distinct?: boolean;
}

export interface ConnectorDoc {
  id: string;
  name: string;
  label: string;
  table: string;
  validityDates: ValidityDateDoc[];
  filters: FilterDoc[];
  selects: SelectDoc[];
}

export interface ConceptTreeDoc {
  root: ConceptNodeDoc;
  connectors: ConnectorDoc[];
}

export interface ConceptsDocument {
  dataset: string;
  concepts: ConceptTreeDoc[];
}

export interface HistoryEntry {
  executionId: string;
  name: string;
  state: string;
  createdAt: number;
  lineCount?: number | null;
  error?: string | null;
}

export interface StatusBody {
  executionId: string;
  state: string;
  lineCount?: number;
  error?: string;
}

/** Query document shapes (what POST /api/queries accepts). */

export type FilterValue = string | string[] | { min?: number | string; max?: number | string };

export interface TableEntryDoc {
  id: string;
  filters?: { filter: string; value: FilterValue }[];
  selects?: string[];
  dateColumn?: string;
}

export type QueryNodeDoc =
  | { type: "CONCEPT"; ids: string[]; tables: TableEntryDoc[] }
  | { type: "AND" | "OR"; children: QueryNodeDoc[] }
  | { type: "NEGATION"; child: QueryNodeDoc }
  | { type: "DATE_RESTRICTION"; dateRange: { min?: string; max?: string }; child: QueryNodeDoc }
  | { type: "SAVED_QUERY"; query: string };

export interface QueryDoc {
  type: "CONCEPT_QUERY";
  root: QueryNodeDoc;
  secondaryKey?: string;
}

/** Lookup helpers over the concepts document. */

export function findNode(doc: ConceptsDocument, id: string): ConceptNodeDoc | null {
  const walk = (n: ConceptNodeDoc): ConceptNodeDoc | null => {
    if (n.id === id) return n;
    for (const c of n.children) {
      const hit = walk(c);
      if (hit) return hit;
    }
    return null;
  };
  for (const tree of doc.concepts) {
    const hit = walk(tree.root);
    if (hit) return hit;
  }
  return null;
}

export function treeOfNode(doc: ConceptsDocument, id: string): ConceptTreeDoc | null {
  for (const tree of doc.concepts) {
    if (id === tree.root.id || id.startsWith(tree.root.id + ".")) return tree;
  }
  return null;
}

export function connectorById(doc: ConceptsDocument, id: string): ConnectorDoc | null {
  for (const tree of doc.concepts) {
    for (const c of tree.connectors) {
      if (c.id === id) return c;
    }
  }
  return null;
}
