"""Machine-readable experiment reports (JSON canonical, CSV projection)."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

SCHEMA_VERSION = 1
CSV_COLUMNS = ("experiment", "record", "field", "value")


def encode(value: Any) -> Any:
    """Convert numpy scalars, complex numbers and tuples to JSON-ready values."""
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [encode(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    return value


def load_schema() -> dict:
    return json.loads(resources.files("bellcal").joinpath("report.schema.json").read_text())


@dataclass
class ExperimentReport:
    experiment: str
    parameters: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "schema_version": self.schema_version,
            "parameters": encode(self.parameters),
            "results": encode(self.results),
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
        # Sub-check detail is not serialized; the overall verdict is.
        return cls(d["experiment"], dict(d["parameters"]), list(d["results"]),
                   {"pass": bool(d["pass"])}, d["schema_version"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record, fld, value in csv_rows(self.to_dict()):
            writer.writerow((self.experiment, record, fld, value))
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")


def _flatten(prefix: str, value: Any):
    if isinstance(value, dict):
        for k, v in value.items():
            yield from _flatten(f"{prefix}.{k}" if prefix else k, v)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            yield from _flatten(f"{prefix}.{i}" if prefix else str(i), v)
    else:
        yield prefix, value


def _csv_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    if value is None:
        return ""
    return str(value)


def csv_rows(report: dict):
    """``(record, field, value)`` rows: parameters, one block per result, verdict."""
    for fld, v in _flatten("", report["parameters"]):
        yield "parameters", fld, _csv_value(v)
    for i, rec in enumerate(report["results"]):
        for fld, v in _flatten("", rec):
            yield str(i), fld, _csv_value(v)
    yield "summary", "pass", _csv_value(report["pass"])
