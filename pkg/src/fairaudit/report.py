"""Versioned audit report with a canonical, byte-stable JSON encoding.

Canonical form: keys sorted, two-space indent, floats with 17 significant
digits, infinities as the strings ``"inf"``/``"-inf"``, NaN as null. Writing,
reading and writing again reproduces the same bytes. The only
run-dependent value is the timestamp under ``generated_at``.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any

import numpy as np

from .errors import ReportSchemaError

REPORT_VERSION = "1.0.0"
TIMESTAMP_KEY = "generated_at"
SEMVER = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)(?:-[0-9A-Za-z.-]+)?(?:\+[0-9A-Za-z.-]+)?$")


def _float(v: float) -> str:
    if math.isnan(v):
        return "null"
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def _encode(obj: Any, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, Enum):
        return _encode(obj.value, indent)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k.value if isinstance(k, Enum) else k), v) for k, v in obj.items())
        body = ",\n".join(f"{inner}{json.dumps(k, ensure_ascii=False)}: {_encode(v, indent + 1)}"
                          for k, v in items)
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in seq) + "\n" + pad + "]"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict(), indent)
    raise TypeError(f"cannot encode {type(obj).__name__} in a report")


def canonical_json(obj: Any) -> str:
    return _encode(obj, 0) + "\n"


@dataclass
class AuditReport:
    report_version: str
    generated_at: str
    rng: str
    dataset_fingerprint: str
    schema: list
    load_log: dict
    representativeness: list
    correlation_summary: dict
    decision: dict
    pre_mitigation: dict
    mitigation_status: str  # feasible | infeasible | disabled | not_required
    policy: dict | None
    post_mitigation: dict | None
    frontier: list
    subgroup_findings: list
    probe_plan: dict | None
    reassessment: dict | None
    verdict: dict
    config_echo: dict
    artifacts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        validate_report_dict(d)
        return cls(**d)

    def without_timestamp(self) -> dict:
        d = self.to_dict()
        d.pop(TIMESTAMP_KEY)
        return d


REPORT_KEYS = frozenset(f.name for f in fields(AuditReport))

# nested sections whose key sets are fixed
SECTION_KEYS = {
    "decision": {"criterion", "trace", "thresholds_used", "excluded_features"},
    "pre_mitigation": {"gap_report", "group_metrics", "accuracy", "threshold", "attribute"},
    "post_mitigation": {"gap_report", "group_metrics", "accuracy"},
    "correlation_summary": {"labels", "top_pairs", "proxy_flags", "warnings", "matrix_csv"},
    "verdict": {"exit_code", "status", "message"},
    "policy": {"per_group", "criterion", "epsilon", "achieved_gaps", "achieved_accuracy", "attribute"},
}


def validate_report_dict(d: Any) -> None:
    if not isinstance(d, dict):
        raise ReportSchemaError("report must be a JSON object")
    unknown = set(d) - REPORT_KEYS
    if unknown:
        raise ReportSchemaError(f"unknown report fields {sorted(unknown)}")
    missing = REPORT_KEYS - set(d)
    if missing:
        raise ReportSchemaError(f"report lacks fields {sorted(missing)}")
    if not isinstance(d["report_version"], str) or not SEMVER.match(d["report_version"]):
        raise ReportSchemaError(f"report_version {d['report_version']!r} is not semver")
    for key, allowed in SECTION_KEYS.items():
        section = d.get(key)
        if section is None:
            continue
        if not isinstance(section, dict):
            raise ReportSchemaError(f"{key} must be an object")
        extra = set(section) - allowed
        if extra:
            raise ReportSchemaError(f"unknown fields in {key}: {sorted(extra)}")


def write_report(r: AuditReport | dict, path: str | os.PathLike) -> None:
    d = r.to_dict() if isinstance(r, AuditReport) else r
    validate_report_dict(d)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(d))


def read_report(path: str | os.PathLike) -> AuditReport:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ReportSchemaError(f"{path}: not valid JSON ({exc})") from None
    return AuditReport.from_dict(d)


def decode_float(v) -> float | None:
    """Inverse of the float encoding for a value read back from a report."""
    if v is None:
        return None
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)
