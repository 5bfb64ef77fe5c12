"""Result records and their byte-stable CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__


@dataclass
class ResultRecord:
    experiment: str
    config: dict
    config_hash: str
    columns: list
    rows: list
    diagnostics: dict = field(default_factory=dict)
    library_version: str = __version__
    timestamp: str | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "config": self.config,
            "config_hash": self.config_hash,
            "columns": list(self.columns),
            "rows": self.rows,
            "diagnostics": self.diagnostics,
            "library_version": self.library_version,
        }
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        return cls(data["experiment"], data["config"], data["config_hash"], data["columns"], data["rows"],
                   data.get("diagnostics", {}), data.get("library_version", __version__), data.get("timestamp"))


def plain(value):
    """Convert numpy scalars/arrays (recursively) to JSON-ready Python values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def to_json(record: ResultRecord) -> str:
    return json.dumps(plain(record.to_dict()), sort_keys=True, indent=1) + "\n"


def to_csv(record: ResultRecord) -> str:
    buf = io.StringIO()
    meta = {"config": record.config, "config_hash": record.config_hash, "experiment": record.experiment,
            "library_version": record.library_version}
    if record.timestamp is not None:
        meta["timestamp"] = record.timestamp
    buf.write("# " + json.dumps(plain(meta), sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(record.columns)
    for row in record.rows:
        writer.writerow([_cell(row.get(c)) for c in record.columns])
    return buf.getvalue()


def _cell(v):
    v = plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return "" if v is None else v


def emit(record: ResultRecord, path, fmt: str = "json") -> str:
    """Write ``record`` to ``path`` (``-`` for stdout) and return the text written."""
    if fmt == "json":
        text = to_json(record)
    elif fmt == "csv":
        text = to_csv(record)
    else:
        raise ValueError("format must be 'csv' or 'json'")
    if path is None or str(path) == "-":
        return text
    try:
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write result file {path}: {exc}") from exc
    return text


def load_json(path) -> ResultRecord:
    with open(path, encoding="utf-8") as fh:
        return ResultRecord.from_dict(json.load(fh))


def load_csv(path):
    """Return ``(metadata, rows)``; row values stay strings."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path} lacks the metadata line")
        meta = json.loads(first[2:])
        rows = list(csv.DictReader(fh))
    return meta, rows
