import { describe, expect, it } from "vitest";

import { EditorState } from "../src/editor.js";
import { CONCEPTS } from "./fixture.js";

const G20 = "dataset.icd.g00-g99.g20-g26.g20";
const AMB = "dataset.icd.physician_diagnoses";
const HOSP = "dataset.icd.hospital_diagnoses";

describe("editor state", () => {
  it("empty editor cannot submit", () => {
    const ed = new EditorState(CONCEPTS);
    expect(ed.isEmpty()).toBe(true);
    expect(() => ed.serialize()).toThrow(/empty/);
  });

  it("a single dropped concept serializes to a bare CONCEPT root", () => {
    const ed = new EditorState(CONCEPTS);
    ed.addConcept(G20);
    const doc = ed.serialize();
    expect(doc.type).toBe("CONCEPT_QUERY");
    expect(doc.root.type).toBe("CONCEPT");
    if (doc.root.type === "CONCEPT") {
      expect(doc.root.ids).toEqual([G20]);
      expect(doc.root.tables.map((t) => t.id).sort()).toEqual([HOSP, AMB].sort());
    }
  });

  it("OR within a group, AND across groups", () => {
    const ed = new EditorState(CONCEPTS);
    ed.addConcept(G20, -1);
    ed.addConcept("dataset.icd.g00-g99", 0); // OR into group 0
    ed.addConcept("dataset.icd.g00-g99.g20-g26", -1); // new AND group
    const root = ed.serialize().root;
    expect(root.type).toBe("AND");
    if (root.type === "AND") {
      expect(root.children[0].type).toBe("OR");
      expect(root.children[1].type).toBe("CONCEPT");
    }
  });

  it("settings serialize into filters, selects and dateColumn", () => {
    const ed = new EditorState(CONCEPTS);
    const el = ed.addConcept(G20);
    const amb = el.tables.find((t) => t.connectorId === AMB)!;
    const hosp = el.tables.find((t) => t.connectorId === HOSP)!;
    amb.filterValues[`${AMB}.quarters`] = { min: 2 };
    amb.selectIds.push(`${AMB}.icd_codes`);
    amb.dateColumn = "Quarter";
    hosp.filterValues[`${HOSP}.case_number`] = { min: 2 };
    hosp.selectIds.push(`${HOSP}.number_of_cases`);
    const root = ed.serialize().root;
    expect(root.type).toBe("CONCEPT");
    if (root.type === "CONCEPT") {
      const ambDoc = root.tables.find((t) => t.id === AMB)!;
      expect(ambDoc.filters).toEqual([{ filter: `${AMB}.quarters`, value: { min: 2 } }]);
      expect(ambDoc.selects).toEqual([`${AMB}.icd_codes`]);
      expect(ambDoc.dateColumn).toBe("Quarter");
      const hospDoc = root.tables.find((t) => t.id === HOSP)!;
      expect(hospDoc.filters).toEqual([{ filter: `${HOSP}.case_number`, value: { min: 2 } }]);
    }
  });

  it("negation and date restriction wrap the element", () => {
    const ed = new EditorState(CONCEPTS);
    const el = ed.addConcept(G20);
    el.negated = true;
    el.dateRestriction = { min: "2015-01-01", max: "2015-12-31" };
    const root = ed.serialize().root;
    expect(root.type).toBe("DATE_RESTRICTION");
    if (root.type === "DATE_RESTRICTION") {
      expect(root.dateRange).toEqual({ min: "2015-01-01", max: "2015-12-31" });
      expect(root.child.type).toBe("NEGATION");
    }
  });

  it("disabling a source drops its table entry", () => {
    const ed = new EditorState(CONCEPTS);
    const el = ed.addConcept(G20);
    el.tables.find((t) => t.connectorId === HOSP)!.enabled = false;
    const root = ed.serialize().root;
    if (root.type === "CONCEPT") {
      expect(root.tables.map((t) => t.id)).toEqual([AMB]);
    }
  });

  it("history entries become SAVED_QUERY elements", () => {
    const ed = new EditorState(CONCEPTS);
    ed.addConcept(G20);
    ed.addSavedQuery("abc123", "previous cohort", 0);
    const root = ed.serialize().root;
    expect(root.type).toBe("OR");
    if (root.type === "OR") {
      expect(root.children[1]).toEqual({ type: "SAVED_QUERY", query: "abc123" });
    }
  });

  it("serialization round-trips through deserialize", () => {
    const ed = new EditorState(CONCEPTS);
    const el = ed.addConcept(G20);
    el.negated = true;
    el.dateRestriction = { min: "2015-01-01" };
    const amb = el.tables.find((t) => t.connectorId === AMB)!;
    amb.filterValues[`${AMB}.kind`] = "confirmed";
    amb.selectIds.push(`${AMB}.visit_count`);
    ed.addConcept("dataset.icd.g00-g99", 0);
    ed.addSavedQuery("exec9", "old", -1);
    const doc = ed.serialize();
    const back = EditorState.deserialize(doc, CONCEPTS);
    expect(back.serialize()).toEqual(doc);
    expect(back.groups.length).toBe(ed.groups.length);
    expect(back.groups[0].elements.length).toBe(2);
  });

  it("expectedHeader follows select order and disambiguates duplicates", () => {
    const ed = new EditorState(CONCEPTS);
    const el = ed.addConcept(G20);
    const amb = el.tables.find((t) => t.connectorId === AMB)!;
    const hosp = el.tables.find((t) => t.connectorId === HOSP)!;
    amb.selectIds.push(`${AMB}.icd_codes`, `${AMB}.visit_count`);
    hosp.selectIds.push(`${HOSP}.number_of_cases`);
    expect(ed.expectedHeader()).toEqual([
      "result",
      "dates",
      "Outpatient ICD-Code",
      "Number of physician visits",
      "Number of Cases",
    ]);
  });
});
