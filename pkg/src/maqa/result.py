from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

OBJECTIVES = ("et-min", "et-max", "lra-min", "lra-max", "tbr-min", "tbr-max", "ur-min", "ur-max")


def _num(x: float | None) -> float | str | None:
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf"
    return x


@dataclass
class AnalysisResult:
    objective: str  # "et" | "lra" | "tbr" | "ur"
    direction: str
    value: float
    values: np.ndarray | None = None
    error_bound: float | None = None
    epsilon: float | None = None
    tol: float | None = None
    policy: dict[int, str] | None = None
    time_s: float = 0.0
    states: int = 0
    goal_states: int = 0
    transitions: int = 0
    state_names: tuple[str, ...] | None = None
    notes: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return f"{self.objective}-{self.direction}"

    @property
    def bracket(self) -> tuple[float, float] | None:
        if self.error_bound is None:
            return None
        return self.value, self.value + self.error_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.name,
            "direction": self.direction,
            "value": _num(self.value),
            "error_bound": _num(self.error_bound),
            "epsilon": _num(self.epsilon),
            "states": int(self.states),
            "goal_states": int(self.goal_states),
            "time_s": round(float(self.time_s), 6),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def to_text(self) -> str:
        lines = [f"objective: {self.name}", f"value: {_fmt(self.value)}"]
        if self.error_bound is not None:
            lo, hi = self.bracket
            lines.append(f"bracket: [{_fmt(lo)}, {_fmt(hi)}] (epsilon {self.epsilon:g}, bound {self.error_bound:.3e})")
        elif self.tol is not None:
            lines.append(f"tolerance: {self.tol:g}")
        lines.append(f"states: {self.states}  goal states: {self.goal_states}  transitions: {self.transitions}")
        for key, val in self.extra.items():
            if isinstance(val, (int, float, str)):
                lines.append(f"{key}: {val}")
        lines.extend(f"note: {n}" for n in self.notes)
        lines.append(f"time: {self.time_s:.3f}s")
        return "\n".join(lines)

    def policy_lines(self) -> list[str]:
        if not self.policy:
            return []
        names = self.state_names
        return [f"{names[s] if names else s} {a}" for s, a in sorted(self.policy.items())]


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.10g}"
