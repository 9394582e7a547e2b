/** A small concepts document matching the demo dataset's shape. */

import { ConceptsDocument } from "../src/model.js";

const AMB = "dataset.icd.physician_diagnoses";
const HOSP = "dataset.icd.hospital_diagnoses";

export const CONCEPTS: ConceptsDocument = {
  dataset: "dataset",
  concepts: [
    {
      root: {
        id: "dataset.icd",
        name: "icd",
        description: "Diagnosis codes",
        children: [
          {
            id: "dataset.icd.g00-g99",
            name: "g00-g99",
            description: "Diseases of the nervous system",
            children: [
              {
                id: "dataset.icd.g00-g99.g20-g26",
                name: "g20-g26",
                description: "Extrapyramidal and movement disorders",
                children: [
                  {
                    id: "dataset.icd.g00-g99.g20-g26.g20",
                    name: "g20",
                    description: "Parkinson's disease",
                    children: [],
                  },
                ],
              },
            ],
          },
        ],
      },
      connectors: [
        {
          id: AMB,
          name: "physician_diagnoses",
          label: "Physician Diagnoses",
          table: "outpatient_diagnosis",
          validityDates: [
            { label: "Quarter", column: "quarter" },
            { label: "Visit date", column: "visit_date" },
          ],
          filters: [
            {
              id: `${AMB}.kind`,
              name: "kind",
              label: "Diagnosis certainty",
              type: "SELECT",
              labels: { confirmed: "Confirmed", suspected: "Suspected" },
            },
            {
              id: `${AMB}.quarters`,
              name: "quarters",
              label: "Quarters",
              type: "COUNT_QUARTERS",
              column: "quarter",
            },
            { id: `${AMB}.fee`, name: "fee", label: "Fee", type: "RANGE", column: "fee" },
          ],
          selects: [
            {
              id: `${AMB}.icd_codes`,
              name: "icd_codes",
              label: "Outpatient ICD-Code",
              type: "DISTINCT",
              column: "icd_code",
            },
            {
              id: `${AMB}.visit_count`,
              name: "visit_count",
              label: "Number of physician visits",
              type: "COUNT",
              distinct: true,
              column: "visit_id",
            },
          ],
        },
        {
          id: HOSP,
          name: "hospital_diagnoses",
          label: "Hospital Diagnoses",
          table: "hospital_diagnosis",
          validityDates: [
            { label: "Case begin", column: "case_begin" },
            { label: "Case end", column: "case_end" },
          ],
          filters: [
            {
              id: `${HOSP}.case_number`,
              name: "case_number",
              label: "Case number",
              type: "COUNT",
              distinct: true,
              column: "case_id",
            },
          ],
          selects: [
            {
              id: `${HOSP}.number_of_cases`,
              name: "number_of_cases",
              label: "Number of Cases",
              type: "COUNT",
              distinct: true,
              column: "case_id",
            },
            {
              id: `${HOSP}.icd_codes`,
              name: "icd_codes",
              label: "List of inpatient ICD-Codes",
              type: "DISTINCT",
              column: "icd_code",
            },
          ],
        },
      ],
    },
  ],
};

export const APP_HTML = `
  <div id="retry-banner" style="display:none"></div>
  <p id="info-panel"></p>
  <input id="concept-search" type="search">
  <div id="concept-tree"></div>
  <div id="history-list"></div>
  <div id="editor-groups"></div>
  <button id="run-button" disabled>start query</button>
  <a id="csv-button" style="display:none">CSV</a>
  <span id="run-status"></span>
  <div id="settings" style="display:none"></div>
`;

/** Minimal stand-in for DataTransfer, enough for the app's handlers. */
export class FakeDataTransfer {
  private data = new Map<string, string>();
  setData(type: string, value: string) {
    this.data.set(type, value);
  }
  getData(type: string): string {
    return this.data.get(type) ?? "";
  }
}

export function drag(from: Element, to: Element) {
  const dt = new FakeDataTransfer();
  const start = Object.assign(new Event("dragstart", { bubbles: true }), {
    dataTransfer: dt,
  });
  from.dispatchEvent(start);
  const drop = Object.assign(new Event("drop", { bubbles: true, cancelable: true }), {
    dataTransfer: dt,
  });
  to.dispatchEvent(drop);
}
