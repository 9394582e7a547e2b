"""Dataset registry: the schemas and concept trees a deployment serves,
plus resolution of the dotted ids used in query documents.

Id scheme:
  concept node   <dataset>.<concept>[.<child>...]      e.g. dataset.icd.g00-g99.g20-g26.g20
  connector      <dataset>.<concept>.<connector>       e.g. dataset.icd.hospital_diagnoses
  filter/select  <connector id>.<name>
"""

from __future__ import annotations

import json

from .columns import TableSchema
from .concepts import ConceptTree, FilterDef, SelectDef, TableConnector, parse_concept
from .errors import IdError


class DatasetRegistry:
    def __init__(self, dataset: str, schemas: dict[str, TableSchema] | None = None):
        self.dataset = dataset
        self.schemas: dict[str, TableSchema] = dict(schemas or {})
        self.concepts: dict[str, ConceptTree] = {}
        self._concept_docs: list[dict] = []

    def add_table(self, schema: TableSchema):
        if schema.name in self.schemas:
            raise ValueError(f"table {schema.name!r} already registered")
        self.schemas[schema.name] = schema

    def add_concept(self, doc: dict) -> ConceptTree:
        tree = parse_concept(doc, self.schemas)
        if tree.name in self.concepts:
            raise ValueError(f"concept {tree.name!r} already registered")
        self.concepts[tree.name] = tree
        self._concept_docs.append(doc)
        return tree

    # -- id resolution ------------------------------------------------------

    def node_id(self, tree: ConceptTree, path_id: str) -> str:
        return f"{self.dataset}.{path_id}"

    def connector_id(self, tree: ConceptTree, connector: TableConnector) -> str:
        return f"{self.dataset}.{tree.name}.{connector.name}"

    def resolve_node(self, full_id: str):
        prefix = self.dataset + "."
        if not full_id.startswith(prefix):
            raise IdError(f"unknown dataset in id {full_id!r}")
        path = full_id[len(prefix):]
        concept = path.split(".", 1)[0]
        tree = self.concepts.get(concept)
        if tree is None:
            raise IdError(f"unknown concept {concept!r} in id {full_id!r}")
        return tree, tree.node_by_path(path)

    def resolve_connector(self, full_id: str):
        prefix = self.dataset + "."
        if not full_id.startswith(prefix):
            raise IdError(f"unknown dataset in id {full_id!r}")
        rest = full_id[len(prefix):]
        parts = rest.split(".")
        if len(parts) != 2:
            raise IdError(f"malformed connector id {full_id!r}")
        tree = self.concepts.get(parts[0])
        if tree is None:
            raise IdError(f"unknown concept {parts[0]!r} in id {full_id!r}")
        connector = tree.connector_by_name(parts[1])
        if connector is None:
            raise IdError(f"unknown connector {full_id!r}")
        return tree, connector

    def resolve_filter(self, full_id: str) -> tuple[ConceptTree, TableConnector, FilterDef]:
        conn_id, _, name = full_id.rpartition(".")
        tree, connector = self.resolve_connector(conn_id)
        f = connector.filter_by_name(name)
        if f is None:
            raise IdError(f"unknown filter id {full_id!r}")
        return tree, connector, f

    def resolve_select(self, full_id: str) -> tuple[ConceptTree, TableConnector, SelectDef]:
        conn_id, _, name = full_id.rpartition(".")
        tree, connector = self.resolve_connector(conn_id)
        s = connector.select_by_name(name)
        if s is None:
            raise IdError(f"unknown select id {full_id!r}")
        return tree, connector, s

    # -- documents ----------------------------------------------------------

    def to_frontend_document(self) -> dict:
        """Everything the concept browser and settings dialog need."""
        concepts = []
        for tree in self.concepts.values():
            node_doc = tree.to_document(self.dataset)
            connectors = []
            for c in tree.connectors:
                cid = self.connector_id(tree, c)
                connectors.append(
                    {
                        "id": cid,
                        "name": c.name,
                        "label": c.label,
                        "table": c.table,
                        "validityDates": [
                            {"label": v.label, "column": v.column} for v in c.validity_dates
                        ],
                        "filters": [
                            dict(f.to_document(), id=f"{cid}.{f.name}") for f in c.filters
                        ],
                        "selects": [
                            dict(s.to_document(), id=f"{cid}.{s.name}") for s in c.selects
                        ],
                    }
                )
            concepts.append({"root": node_doc, "connectors": connectors})
        return {"dataset": self.dataset, "concepts": concepts}

    def to_config_document(self) -> dict:
        """Full registry state, shippable to workers."""
        return {
            "dataset": self.dataset,
            "tables": [s.to_document() for s in self.schemas.values()],
            "concepts": list(self._concept_docs),
        }

    @staticmethod
    def from_config_document(doc: dict) -> "DatasetRegistry":
        reg = DatasetRegistry(doc["dataset"])
        for t in doc.get("tables", []):
            reg.add_table(TableSchema.from_document(t))
        for c in doc.get("concepts", []):
            reg.add_concept(c)
        return reg


def load_registry(path: str) -> DatasetRegistry:
    """Load a dataset config file: {dataset, tables, concepts}."""
    with open(path, "r", encoding="utf-8") as fh:
        return DatasetRegistry.from_config_document(json.load(fh))
