"""Residual reports shared by every verification routine, and order fitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InvalidParameterError


def sig9(x: float) -> float:
    """Round to 9 significant digits (keeps reports diff-able)."""
    if x is None or not math.isfinite(x) or x == 0:
        return x
    return float(f"{x:.9g}")


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return sig9(v) if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [sig9(obj.real), sig9(obj.imag)]
    return obj


@dataclass
class ResidualReport:
    """Outcome of one check, carrying every parameter needed to rerun it."""

    check: str
    params: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)
    fitted_order: float | None = None
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "params": _clean(self.params),
            "residuals": _clean([float(r) for r in self.residuals]),
            "fitted_order": None if self.fitted_order is None else sig9(float(self.fitted_order)),
            "pass": bool(self.passed),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write(self, directory) -> Path:
        path = Path(directory) / f"{self.check}.json"
        path.write_text(self.to_json())
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualReport":
        return cls(d["check"], d["params"], list(d["residuals"]), d["fitted_order"], d["pass"])


def fit_order(steps: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of ``log(residual)`` against ``log(step)``.

    A residual behaving like ``C * step**p`` yields ``p``.
    """
    steps = np.asarray(steps, dtype=float)
    res = np.asarray(residuals, dtype=float)
    if steps.size < 3:
        raise InvalidParameterError("need at least 3 points to fit an order")
    if np.any(res <= 0) or np.any(steps <= 0):
        raise InvalidParameterError("order fit needs positive steps and residuals")
    slope, _ = np.polyfit(np.log(steps), np.log(res), 1)
    return float(slope)
