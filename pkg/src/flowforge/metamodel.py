"""The shared blackboard through which all pipe tasks communicate.

A meta-model bundles three sections:

* ``cfg``   -- a scoped key-value configuration store,
* ``log``   -- an append-only execution trace,
* ``space`` -- a versioned model space holding network- and kernel-stage
  model snapshots together with their metrics.

Tasks never call each other; they read and write this structure, and the
scheduler moves it between them. Cloning a meta-model (for parallel
strategy paths) yields a fully independent deep copy.

Configuration keys come in three scope forms, most specific wins:

* ``InstanceName@param``   -- one task instance,
* ``TaskType::param``      -- every task of that type,
* ``param``                -- global.
"""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

from .errors import ConfigError, FlowforgeError

METAMODEL_SCHEMA_VERSION = 1

ConfigValue = bool | int | float | str | list

_SCOPE_INSTANCE = "instance"
_SCOPE_TYPE = "type"
_SCOPE_GLOBAL = "global"

LOG_EVENTS = ("started", "finished", "branched", "error")
MAX_LOG_DETAIL = 4096  # bytes of detail kept per record


def _check_value(value: Any) -> ConfigValue:
    if isinstance(value, bool) or isinstance(value, (int, float, str)):
        return value
    if isinstance(value, list):
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(
                    f"config list values must be numbers, got {item!r}"
                )
        return list(value)
    raise ConfigError(
        f"config values must be number, string, boolean or list of numbers, got {type(value).__name__}"
    )


def parse_key(key: str) -> tuple[str, str | None, str]:
    """Split a raw key into (scope, qualifier, param).

    Raises ConfigError when the key matches none of the three scope
    grammars (empty parts, or mixing ``@`` and ``::``).
    """
    if not isinstance(key, str) or not key:
        raise ConfigError(f"config key must be a non-empty string, got {key!r}")
    has_at = "@" in key
    has_type = "::" in key
    if has_at and has_type:
        raise ConfigError(f"config key {key!r} mixes instance and type scopes")
    if has_at:
        instance, _, param = key.partition("@")
        if not instance or not param or "@" in param:
            raise ConfigError(f"malformed instance-scoped key {key!r}")
        return _SCOPE_INSTANCE, instance, param
    if has_type:
        task_type, _, param = key.partition("::")
        if not task_type or not param or "::" in param:
            raise ConfigError(f"malformed type-scoped key {key!r}")
        return _SCOPE_TYPE, task_type, param
    return _SCOPE_GLOBAL, None, key


class ConfigStore:
    """Scoped key-value store for task parameters.

    Resolution precedence is instance > type > global; an unchanged store
    always resolves the same query to the same value.
    """

    def __init__(self, entries: Mapping[str, ConfigValue] | None = None):
        self._entries: dict[str, ConfigValue] = {}
        if entries:
            for key, value in entries.items():
                self.set(key, value)

    def set(self, key: str, value: ConfigValue) -> None:
        parse_key(key)
        self._entries[key] = _check_value(value)

    def get(self, key: str, default: ConfigValue | None = None) -> ConfigValue | None:
        return self._entries.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self) -> Iterator[str]:
        return iter(self._entries)

    def resolve(
        self, instance: str, task_type: str, param: str
    ) -> ConfigValue | None:
        """Value at the most specific defined scope, or None when undefined."""
        for key in (f"{instance}@{param}", f"{task_type}::{param}", param):
            if key in self._entries:
                return self._entries[key]
        return None

    def require(self, instance: str, task_type: str, param: str) -> ConfigValue:
        value = self.resolve(instance, task_type, param)
        if value is None:
            raise ConfigError(
                f"missing required parameter {param!r} for task {instance!r} (type {task_type})"
            )
        return value

    def as_dict(self) -> dict[str, ConfigValue]:
        return copy.deepcopy(self._entries)

    @classmethod
    def from_dict(cls, entries: Mapping[str, ConfigValue]) -> "ConfigStore":
        return cls(entries)


def cfg_resolve(
    cfg: ConfigStore, instance: str, task_type: str, param: str
) -> ConfigValue | None:
    """Functional alias for :meth:`ConfigStore.resolve`."""
    return cfg.resolve(instance, task_type, param)


@dataclass(frozen=True)
class LogRecord:
    timestamp: float
    task: str
    event: str
    detail: str

    def to_list(self) -> list:
        return [self.timestamp, self.task, self.event, self.detail]


class ExecutionLog:
    """Append-only runtime trace. Timestamps never decrease across appends."""

    def __init__(self, records: list[LogRecord] | None = None):
        self._records: list[LogRecord] = list(records or ())

    def append(self, task: str, event: str, detail: str = "") -> LogRecord:
        if event not in LOG_EVENTS:
            raise FlowforgeError(f"unknown log event {event!r}")
        now = time.time()
        if self._records and now < self._records[-1].timestamp:
            now = self._records[-1].timestamp
        record = LogRecord(now, task, event, str(detail)[:MAX_LOG_DETAIL])
        self._records.append(record)
        return record

    def extend_from(self, other: "ExecutionLog") -> None:
        """Concatenate another log's history (used when merging strategy paths)."""
        self._records.extend(other._records)

    @property
    def records(self) -> tuple[LogRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def count(self, task: str | None = None, event: str | None = None) -> int:
        return sum(
            1
            for r in self._records
            if (task is None or r.task == task) and (event is None or r.event == event)
        )

    def to_list(self) -> list[list]:
        return [r.to_list() for r in self._records]

    @classmethod
    def from_list(cls, rows: list[list]) -> "ExecutionLog":
        return cls([LogRecord(float(t), str(task), str(ev), str(d)) for t, task, ev, d in rows])


MODEL_STAGES = ("network", "kernel")
# Ordered least- to most-refined; STOP extracts the latest entry of the
# most refined stage present.
STAGE_RANK = {stage: i for i, stage in enumerate(MODEL_STAGES)}


@dataclass(frozen=True)
class ModelEntry:
    version: int
    stage: str
    payload: Any
    metrics: Any | None
    producer: str


class ModelSpace:
    """Versioned, append-only store of model snapshots.

    Entries are immutable once inserted; payloads are stored by value so a
    later task can never alias-mutate history. Versions are unique and
    strictly increasing in insertion order, and entries of different
    stages coexist.
    """

    def __init__(self):
        self._entries: list[ModelEntry] = []

    def put(self, stage: str, payload: Any, metrics: Any | None, producer: str) -> int:
        if stage not in MODEL_STAGES:
            raise FlowforgeError(f"unknown model stage {stage!r}")
        if payload is None:
            raise FlowforgeError("model payload must not be None")
        validate = getattr(payload, "validate", None)
        if callable(validate):
            try:
                validate()
            except Exception as exc:
                raise FlowforgeError(f"rejected invalid model payload: {exc}") from exc
        version = self._entries[-1].version + 1 if self._entries else 1
        entry = ModelEntry(
            version=version,
            stage=stage,
            payload=copy.deepcopy(payload),
            metrics=copy.deepcopy(metrics),
            producer=producer,
        )
        self._entries.append(entry)
        return version

    def latest(self, stage: str | None = None) -> ModelEntry | None:
        for entry in reversed(self._entries):
            if stage is None or entry.stage == stage:
                return entry
        return None

    def get(self, version: int) -> ModelEntry | None:
        for entry in self._entries:
            if entry.version == version:
                return entry
        return None

    @property
    def entries(self) -> tuple[ModelEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


class MetaModel:
    """Configuration + log + model space, owned by exactly one flow token."""

    def __init__(self, cfg: ConfigStore | None = None):
        self.cfg = cfg if cfg is not None else ConfigStore()
        self.log = ExecutionLog()
        self.space = ModelSpace()

    def clone(self) -> "MetaModel":
        """Independent deep copy; mutating the clone never touches the original."""
        return copy.deepcopy(self)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "metamodel_version": METAMODEL_SCHEMA_VERSION,
            "cfg": self.cfg.as_dict(),
            "log": self.log.to_list(),
            "space": [
                {
                    "version": e.version,
                    "stage": e.stage,
                    "payload": e.payload.to_json_dict(),
                    "metrics": e.metrics.to_json_dict() if e.metrics is not None else None,
                    "producer": e.producer,
                }
                for e in self.space.entries
            ],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=indent)

    @classmethod
    def from_json_dict(cls, doc: Mapping[str, Any]) -> "MetaModel":
        # Local import: payload codecs live with the model types.
        from . import netmodel

        version = doc.get("metamodel_version")
        if version != METAMODEL_SCHEMA_VERSION:
            raise FlowforgeError(f"unsupported metamodel_version {version!r}")
        mm = cls(ConfigStore.from_dict(doc.get("cfg", {})))
        mm.log = ExecutionLog.from_list(doc.get("log", []))
        for row in doc.get("space", []):
            stage = row["stage"]
            payload = netmodel.payload_from_json_dict(stage, row["payload"])
            metrics = (
                netmodel.Metrics.from_json_dict(row["metrics"])
                if row.get("metrics") is not None
                else None
            )
            entry = ModelEntry(
                version=int(row["version"]),
                stage=stage,
                payload=payload,
                metrics=metrics,
                producer=str(row["producer"]),
            )
            mm.space._entries.append(entry)
        return mm

    @classmethod
    def from_json(cls, text: str) -> "MetaModel":
        return cls.from_json_dict(json.loads(text))
