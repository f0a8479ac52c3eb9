"""Residual statistics and JSON-serializable reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1


def _clean(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass
class ResidualStats:
    max: float
    mean: float
    p99: float
    count: int
    masked_count: int = 0

    @classmethod
    def from_values(cls, values, mask=None) -> ResidualStats:
        """Statistics of |values| over points where ``mask`` is False (or finite)."""
        v = np.abs(np.asarray(values, float)).ravel()
        masked = np.zeros(v.shape, bool) if mask is None else np.broadcast_to(mask, np.shape(values)).ravel()
        masked = masked | ~np.isfinite(v)
        v = v[~masked]
        if v.size == 0:
            return cls(float("nan"), float("nan"), float("nan"), 0, int(masked.sum()))
        return cls(float(v.max()), float(v.mean()), float(np.percentile(v, 99)), int(v.size), int(masked.sum()))

    def merge(self, other: ResidualStats) -> ResidualStats:
        """Combine two disjoint samples; p99 is bounded by the larger p99."""
        n = self.count + other.count
        if n == 0:
            return ResidualStats(float("nan"), float("nan"), float("nan"), 0, self.masked_count + other.masked_count)
        parts = [s for s in (self, other) if s.count]
        mean = sum(s.mean * s.count for s in parts) / n
        return ResidualStats(
            max(s.max for s in parts), mean, max(s.p99 for s in parts), n,
            self.masked_count + other.masked_count,
        )

    @property
    def empty(self) -> bool:
        return self.count == 0

    def to_dict(self):
        return {"max": _clean(self.max), "mean": _clean(self.mean), "p99": _clean(self.p99),
                "count": self.count, "masked_count": self.masked_count}


@dataclass
class ResidualReport:
    example: str
    params: dict = field(default_factory=dict)
    grid: list = field(default_factory=list)
    backend: str = "analytic"
    tol_profile: str = "analytic"
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    probes: dict = field(default_factory=dict)
    wall_ms: float | None = None

    def add(self, name: str, stats: ResidualStats, tol: float | None = None):
        if name in self.residuals:
            stats = self.residuals[name].merge(stats)
        self.residuals[name] = stats
        if tol is not None:
            self.tolerances[name] = tol

    def fail(self, name: str, message: str):
        """Record a module refusal or error under a residual name."""
        self.failures[name] = message

    @property
    def failed_names(self) -> list[str]:
        out = set(self.failures)
        for name, stats in self.residuals.items():
            tol = self.tolerances.get(name)
            if tol is not None and not stats.empty and not stats.max <= tol:
                out.add(name)
        return sorted(out)

    @property
    def passed(self) -> bool:
        return not self.failed_names

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "example": self.example,
            "params": _clean(self.params),
            "grid": _clean(self.grid),
            "backend": self.backend,
            "tol_profile": self.tol_profile,
            "residuals": {k: self.residuals[k].to_dict() for k in sorted(self.residuals)},
            "tolerances": {k: _clean(self.tolerances[k]) for k in sorted(self.tolerances)},
            "failures": {k: self.failures[k] for k in sorted(self.failures)},
            "failed": self.failed_names,
            "probes": _clean(self.probes),
            "pass": self.passed,
            "wall_ms": _clean(self.wall_ms),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ProbeReport:
    name: str
    data: dict = field(default_factory=dict)
    passed: bool = True
    inconclusive: bool = False

    def to_dict(self):
        return {"name": self.name, "pass": self.passed, "inconclusive": self.inconclusive,
                "data": _clean(self.data)}
