"""Verification report record shared by every checker."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PASS = "pass"
FAIL = "fail"
UNMET = "hypothesis_unmet"
INFO = "info"

STATUSES = (PASS, FAIL, UNMET, INFO)


def clean(value: Any) -> Any:
    """Convert numpy scalars/arrays to plain JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, complex):
        return [clean(value.real), clean(value.imag)]
    return value


@dataclass
class VerificationReport:
    check_id: str
    params: dict[str, Any] = field(default_factory=dict)
    worst_ratio: float | None = None
    argmax_s: float | None = None
    fitted_constant: float | None = None
    status: str = INFO
    hypothesis: str = "strict"
    unmet: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    baseline: float | None = None
    baseline_match: bool | None = None

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def passed(self) -> bool:
        return self.status in (PASS, INFO)

    def to_dict(self) -> dict[str, Any]:
        return clean(
            {
                "check_id": self.check_id,
                "params": self.params,
                "worst_ratio": self.worst_ratio,
                "argmax_s": self.argmax_s,
                "fitted_constant": self.fitted_constant,
                "status": self.status,
                "hypothesis": self.hypothesis,
                "unmet": list(self.unmet),
                "details": self.details,
                "baseline": self.baseline,
                "baseline_match": self.baseline_match,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        d = self.to_dict()
        rows = [
            ("check", d["check_id"]),
            ("status", d["status"]),
            ("hypothesis", d["hypothesis"]),
            ("worst_ratio", _fmt(d["worst_ratio"])),
            ("argmax_s", _fmt(d["argmax_s"])),
            ("fitted_constant", _fmt(d["fitted_constant"])),
            ("baseline", _fmt(d["baseline"])),
        ]
        if d["unmet"]:
            rows.append(("unmet", "; ".join(d["unmet"])))
        for key in sorted(d["details"]):
            val = d["details"][key]
            if isinstance(val, (dict, list)):
                val = json.dumps(val, sort_keys=True)
                if len(val) > 160:
                    val = val[:157] + "..."
            rows.append((key, _fmt(val)))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def combine_status(statuses: list[str]) -> str:
    """fail dominates, then hypothesis_unmet, then pass; all-info stays info."""
    if FAIL in statuses:
        return FAIL
    if UNMET in statuses:
        return UNMET
    if PASS in statuses:
        return PASS
    return INFO


def relative_drift(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|), zero when both vanish."""
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale
