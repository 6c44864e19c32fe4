"""Incumbents and solve reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..pep.qcqp import QcqpProblem

REPORT_FORMAT = "ncgpep-solve-report/1"


@dataclass
class Incumbent:
    z: np.ndarray
    value: float
    source: str = ""


def relative_gap(upper: float, lower: float) -> float:
    return (upper - lower) / max(abs(upper), 1e-12)


def point_by_kind(prob: QcqpProblem, z: np.ndarray) -> dict[str, Any]:
    """Incumbent grouped as F, G, H and named scalars."""
    n = prob.gram_size
    out: dict[str, Any] = {
        "G": np.asarray(prob.gram_matrix(z)).reshape(n, n).tolist(),
        "H": np.asarray(prob.factor_matrix(z)).reshape(n, n).tolist(),
        "F": {},
        "scalars": {},
    }
    for v, val in zip(prob.variables, z):
        if v.kind == "F":
            out["F"][v.name] = float(val)
        elif v.kind not in ("G", "H"):
            out["scalars"][v.name] = float(val)
    return out


@dataclass
class SolveReport:
    problem: str
    upper_bound: float
    incumbent_value: float
    incumbent: dict[str, Any]
    nodes: int
    cuts: int
    termination: str
    wall_time: float = 0.0
    min_eig: float = 0.0
    max_violation: float = 0.0
    stages: dict[str, float] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return relative_gap(self.upper_bound, self.incumbent_value)

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        d = {
            "format": REPORT_FORMAT,
            "problem": self.problem,
            "upper_bound": self.upper_bound,
            "incumbent_value": self.incumbent_value,
            "gap": self.gap,
            "nodes": self.nodes,
            "cuts": self.cuts,
            "termination": self.termination,
            "min_eig": self.min_eig,
            "max_violation": self.max_violation,
            "stages": self.stages,
            "extra": self.extra,
            "incumbent": self.incumbent,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, timing: bool = False) -> str:
        """Canonical JSON; wall time is left out unless ``timing`` is set."""
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=1, default=_default)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SolveReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError("unrecognized report payload")
        return cls(d["problem"], d["upper_bound"], d["incumbent_value"], d["incumbent"], d["nodes"],
                   d["cuts"], d["termination"], d.get("wall_time", 0.0), d.get("min_eig", 0.0),
                   d.get("max_violation", 0.0), d.get("stages", {}), d.get("extra", {}))


def _default(o: Any) -> Any:
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))
