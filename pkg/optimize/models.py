"""
Optimization problems over boxed parameters and their reports.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from django.core.exceptions import ValidationError


@dataclass(frozen=True, eq=False)
class OptimizationProblem:
    """
    Minimize objective(x) for x in the box given by bounds.

    The objective maps a parameter vector (ordered as names) to a cost >= 0.
    """

    names: Tuple[str, ...]
    bounds: Tuple[Tuple[float, float], ...]
    objective: Callable
    budget: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        self.clean()

    def clean(self):
        if not self.names or len(self.names) != len(self.bounds):
            raise ValidationError("Every parameter needs exactly one (lower, upper) bound.")
        for name, (lo, hi) in zip(self.names, self.bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise ValidationError(f"Bounds of '{name}' must be finite with lower < upper, got ({lo}, {hi}).")
        if self.budget < 1:
            raise ValidationError(f"Evaluation budget must be at least 1, got {self.budget}.")

    @property
    def dims(self):
        return len(self.names)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.bounds])

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_unit(self, x):
        """Map box coordinates onto [0, 1]^n."""
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    def from_unit(self, u):
        """Project unit-box coordinates back into the box."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return np.clip(self.lower + u * (self.upper - self.lower), self.lower, self.upper)


@dataclass(frozen=True)
class TraceEntry:
    """One objective evaluation and the best cost seen so far."""

    params: Tuple[float, ...]
    cost: float
    best_cost: float


@dataclass(frozen=True)
class OptimizationReport:
    names: Tuple[str, ...]
    best_params: Tuple[float, ...]
    best_cost: float
    evaluations: int
    converged: bool
    starts: int = 1
    trace: List[TraceEntry] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.clean()

    def clean(self):
        """The reported optimum must be the cheapest traced evaluation."""
        if not self.trace:
            raise ValidationError("An optimization report needs at least one evaluation.")
        cheapest = min(entry.cost for entry in self.trace)
        if self.best_cost != cheapest:
            raise ValidationError(f"Best cost {self.best_cost} differs from the trace minimum {cheapest}.")
        if self.evaluations != len(self.trace):
            raise ValidationError(f"{self.evaluations} evaluations reported, {len(self.trace)} traced.")

    @property
    def params(self):
        """Best parameters keyed by name."""
        return dict(zip(self.names, self.best_params))

    def __str__(self):
        values = ", ".join(f"{name}={value:.4f}" for name, value in self.params.items())
        return f"best cost {self.best_cost:.3e} at ({values}) after {self.evaluations} evaluations"


@dataclass(frozen=True)
class Resolution:
    """
    A protocol frozen by calibration and tuning.

    Attributes:
        protocol: the resolved bench.models.Protocol
        anchor: (efficiency, time in ns) the amplitude was calibrated against, if any
        crossing_ns: first time the resolved run reaches the anchor efficiency
        reports: optimization reports keyed by step name
    """

    protocol: object
    anchor: Optional[Tuple[float, float]] = None
    crossing_ns: Optional[float] = None
    reports: Dict[str, OptimizationReport] = field(default_factory=dict)

    def __str__(self):
        steps = ", ".join(self.reports) or "none"
        return f"{self.protocol} resolved (tuning: {steps})"
