"""Registered calculation tools exposed to the generation agent.

All tools are pure: equal arguments always return equal results. The
registry listing is stable (sorted by name).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import NotFoundError, ValidationError


def _series(values: Any, name: str) -> list[float]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ValidationError(f"{name} expects a non-empty list of numbers")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} expects numbers: {exc}") from exc


def mean(values: list) -> float:
    series = _series(values, "mean")
    return sum(series) / len(series)


def std_dev(values: list) -> float:
    """Population standard deviation."""
    series = _series(values, "std_dev")
    mu = sum(series) / len(series)
    return math.sqrt(sum((v - mu) ** 2 for v in series) / len(series))


def min_max(values: list) -> dict:
    series = _series(values, "min_max")
    return {"min": min(series), "max": max(series)}


def setup_time_delta(old_minutes: float, new_minutes: float) -> dict:
    """Absolute and percentage change between two setup times."""
    try:
        old, new = float(old_minutes), float(new_minutes)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"setup_time_delta expects numbers: {exc}") from exc
    if old == 0:
        raise ValidationError("old_minutes must be non-zero for a percent change")
    return {"absolute_delta": old - new, "percent_change": (old - new) / old * 100.0}


def linear_trend(series: list) -> dict:
    """Least-squares slope of a series over indices 0..n-1."""
    values = _series(series, "linear_trend")
    n = len(values)
    if n < 2:
        raise ValidationError("linear_trend needs at least 2 points")
    xs = range(n)
    mean_x = (n - 1) / 2.0
    mean_y = sum(values) / n
    denom = sum((x - mean_x) ** 2 for x in xs)
    slope = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, values)) / denom
    return {"slope": slope}


@dataclass
class ToolRegistry:
    tools: dict[str, Callable] = field(default_factory=dict)

    def register(self, name: str, fn: Callable) -> None:
        self.tools[name] = fn

    def names(self) -> list[str]:
        return sorted(self.tools)

    def call(self, name: str, arguments: dict) -> Any:
        if name not in self.tools:
            raise NotFoundError(f"unknown tool {name!r}")
        if not isinstance(arguments, dict):
            raise ValidationError("tool arguments must be a mapping")
        try:
            return self.tools[name](**arguments)
        except TypeError as exc:
            raise ValidationError(f"bad arguments for {name!r}: {exc}") from exc

    @classmethod
    def default(cls) -> "ToolRegistry":
        registry = cls()
        registry.register("mean", mean)
        registry.register("std_dev", std_dev)
        registry.register("min_max", min_max)
        registry.register("setup_time_delta", setup_time_delta)
        registry.register("linear_trend", linear_trend)
        return registry
