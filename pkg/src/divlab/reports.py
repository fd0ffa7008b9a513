"""Report tables and the run manifest.

Each table is written twice: `<name>.tsv` (header row, then one line per
row) and `<name>.json` with the schema

    {"name": str, "columns": [str], "rows": [[value]], "meta": {str: value}}

Floats are written with repr, so identical inputs give identical bytes.
`manifest.json` is written last; it alone carries wall-clock data.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def plain(obj):
    """Convert numpy scalars/arrays, Fractions, sets and dataclasses to JSON values."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return [plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(x) for x in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted((plain(x) for x in obj), key=repr)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def _cell(v) -> str:
    v = plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return "" if v is None else str(v)


def write_table(table: Table, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv = out / f"{table.name}.tsv"
    lines = ["\t".join(table.columns)]
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValueError(f"row width {len(row)} != {len(table.columns)} in {table.name}")
        lines.append("\t".join(_cell(v) for v in row))
    tsv.write_text("\n".join(lines) + "\n")
    js = out / f"{table.name}.json"
    doc = {"name": table.name, "columns": list(table.columns),
           "rows": [plain(list(r)) for r in table.rows], "meta": plain(table.meta)}
    js.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")
    return [tsv, js]


def emit_report(tables: list[Table], out_dir: str | Path) -> list[Path]:
    files: list[Path] = []
    for t in tables:
        files += write_table(t, out_dir)
    return files


def read_table(path: str | Path) -> Table:
    doc = json.loads(Path(path).read_text())
    return Table(doc["name"], doc["columns"], doc["rows"], doc.get("meta", {}))


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    stages: list = field(default_factory=list)  # (name, seconds)
    files: list = field(default_factory=list)

    def stage(self, name: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                manifest.stages.append((name, time.perf_counter() - self.t))

        return _Timer()

    def write(self, out_dir: str | Path, status: int = 0) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        entries = [{"path": Path(f).name, "sha256": sha256_file(f)} for f in self.files]
        doc = {"config_hash": self.config_hash, "version": self.version, "exit_status": status,
               "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
               "stages": [{"name": n, "seconds": s} for n, s in self.stages],
               "files": entries}
        path = out / "manifest.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        return path


def verify_manifest(out_dir: str | Path) -> bool:
    out = Path(out_dir)
    doc = json.loads((out / "manifest.json").read_text())
    return all(sha256_file(out / e["path"]) == e["sha256"] for e in doc["files"])
