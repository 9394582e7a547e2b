"""Service configuration: JSON file plus COHORTQ_* environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field


@dataclass
class ServiceConfig:
    dataset_config: str = "dataset.json"  # registry document (tables + concepts)
    import_dir: str | None = None  # *.cqimport containers loaded at startup
    data_dir: str = "cohortq-data"  # execution history + results
    host: str = "127.0.0.1"
    port: int = 8080
    bucket_count: int = 100
    pool_size: int = 2
    workers: int = 1  # in-process workers; 0 = expect external workers
    manager_listen: str = "127.0.0.1:0"  # for external workers
    worker_connect: str = "127.0.0.1:8765"
    heartbeat_interval: float = 5.0
    heartbeat_miss_limit: int = 3
    csv_separator: str = ";"
    retention_days: int | None = None
    frontend_dir: str | None = None  # static assets, served at /
    owner_header: str = "X-User"
    extra: dict = field(default_factory=dict)

    @staticmethod
    def load(path: str | None = None) -> "ServiceConfig":
        cfg = ServiceConfig()
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            for key, value in doc.items():
                attr = _snake(key)
                if hasattr(cfg, attr):
                    setattr(cfg, attr, value)
                else:
                    cfg.extra[key] = value
        _apply_env(cfg)
        return cfg


def _snake(name: str) -> str:
    out = []
    for ch in name:
        if ch.isupper():
            out.append("_")
            out.append(ch.lower())
        else:
            out.append(ch)
    return "".join(out)


_ENV_FIELDS = {
    "COHORTQ_DATASET_CONFIG": ("dataset_config", str),
    "COHORTQ_IMPORT_DIR": ("import_dir", str),
    "COHORTQ_DATA_DIR": ("data_dir", str),
    "COHORTQ_HOST": ("host", str),
    "COHORTQ_PORT": ("port", int),
    "COHORTQ_BUCKET_COUNT": ("bucket_count", int),
    "COHORTQ_POOL_SIZE": ("pool_size", int),
    "COHORTQ_WORKERS": ("workers", int),
    "COHORTQ_MANAGER_LISTEN": ("manager_listen", str),
    "COHORTQ_WORKER_CONNECT": ("worker_connect", str),
    "COHORTQ_HEARTBEAT_INTERVAL": ("heartbeat_interval", float),
    "COHORTQ_HEARTBEAT_MISS_LIMIT": ("heartbeat_miss_limit", int),
    "COHORTQ_CSV_SEPARATOR": ("csv_separator", str),
    "COHORTQ_RETENTION_DAYS": ("retention_days", int),
    "COHORTQ_FRONTEND_DIR": ("frontend_dir", str),
}


def _apply_env(cfg: ServiceConfig):
    for env, (attr, conv) in _ENV_FIELDS.items():
        raw = os.environ.get(env)
        if raw is not None:
            setattr(cfg, attr, conv(raw))
