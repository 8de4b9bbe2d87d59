"""
Benchmark protocol records, sweep grids and comparison reports.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import List, Optional

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError


@dataclass(frozen=True)
class Protocol:
    """
    A fully resolved transfer protocol. Amplitudes in rad/ns, times in ns.
    """

    VARIANT_STIRAP = "stirap"
    VARIANT_RR = "rr"
    VARIANT_STIRUP = "stirup"
    VARIANT_STIRUP_OP = "stirup-op"
    VARIANT_STIRUP_DRAG = "stirup-drag"
    VARIANT_STIRAP_CD = "stirap-cd"

    VARIANT_CHOICES = [
        (VARIANT_STIRAP, "STIRAP"),
        (VARIANT_RR, "Resonant Rabi"),
        (VARIANT_STIRUP, "STIRUP"),
        (VARIANT_STIRUP_OP, "STIRUP with optimized shape"),
        (VARIANT_STIRUP_DRAG, "STIRUP with DRAG"),
        (VARIANT_STIRAP_CD, "Counterdiabatic STIRAP"),
    ]

    PASSAGE_VARIANTS = (VARIANT_STIRUP, VARIANT_STIRUP_OP, VARIANT_STIRUP_DRAG)

    variant: str
    omega0: float
    duration: float
    shape_a: float = 0.0
    shape_b: float = 4.0
    lambda_p: float = 1.0
    lambda_s: float = 1.0
    sigma: Optional[float] = None
    delay: Optional[float] = None

    def __post_init__(self):
        self.clean()

    def __str__(self):
        return f"{self.variant} (T={self.duration:g} ns, omega0/2pi={self.omega0 / settings.MHZ:.3f} MHz)"

    def clean(self):
        """Validate that every parameter is resolved and in range."""
        if self.variant not in dict(self.VARIANT_CHOICES):
            raise ValidationError(f"Unknown protocol '{self.variant}'.")
        if not self.omega0 >= 0:
            raise ValidationError(f"omega0 must be non-negative, got {self.omega0}.")
        if not self.duration > 0:
            raise ValidationError(f"Duration must be positive, got {self.duration}.")

    @classmethod
    def from_settings(cls, variant, **overrides):
        """
        Protocol with the defaults of settings.PASSAGE["PROTOCOLS"], overridden
        by keyword arguments in the same units as the settings table.
        """
        if variant not in dict(cls.VARIANT_CHOICES):
            raise ValidationError(f"Unknown protocol '{variant}'.")
        values = dict(settings.PASSAGE["PROTOCOLS"].get(variant, {}))
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_table(variant, values)

    @classmethod
    def from_table(cls, variant, values):
        """Build from MHz/ns table entries (omega0_mhz, duration_ns, sigma_ns, ...)."""
        return cls(
            variant=variant,
            omega0=values.get("omega0_mhz", 20.0) * settings.MHZ,
            duration=values.get("duration_ns", 50.0),
            shape_a=values.get("shape_a", 0.0),
            shape_b=values.get("shape_b", 4.0),
            lambda_p=values.get("lambda_p", 1.0),
            lambda_s=values.get("lambda_s", 1.0),
            sigma=values.get("sigma_ns"),
            delay=values.get("delay_ns"),
        )

    @classmethod
    def from_dict(cls, document):
        """Inverse of as_dict; unknown keys are rejected."""
        unknown = sorted(set(document) - {f.name for f in fields(cls)})
        if unknown:
            raise ValidationError(f"Unknown protocol fields {unknown}.")
        return cls(**document)

    def with_params(self, **changes):
        return replace(self, **changes)

    def at_duration(self, duration):
        """Same protocol stretched to a new duration; explicit STIRAP timings scale along."""
        scale = duration / self.duration
        return replace(
            self,
            duration=float(duration),
            sigma=None if self.sigma is None else self.sigma * scale,
            delay=None if self.delay is None else self.delay * scale,
        )

    def as_dict(self):
        return asdict(self)


def model_hash(model):
    """sha256 of the model parameters as sorted JSON."""
    payload = json.dumps(asdict(model), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class SweepAxis:
    """Uniform axis of a sweep."""

    name: str
    minimum: float
    maximum: float
    points: int

    def __post_init__(self):
        if self.points < 1:
            raise ValidationError(f"Axis '{self.name}' needs at least one point.")
        if self.points > 1 and not self.maximum > self.minimum:
            raise ValidationError(f"Axis '{self.name}' needs maximum > minimum.")

    @property
    def values(self):
        return np.linspace(self.minimum, self.maximum, self.points)


@dataclass(frozen=True, eq=False)
class SweepGrid:
    """Transfer efficiency on a one- or two-axis parameter grid."""

    EFFICIENCY_TOLERANCE = 1e-6

    axes: List[SweepAxis]
    efficiency: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "efficiency", np.asarray(self.efficiency, dtype=float))
        self.clean()

    def clean(self):
        """The grid must be fully populated with efficiencies in [0, 1]."""
        shape = tuple(axis.points for axis in self.axes)
        if self.efficiency.shape != shape:
            raise ValidationError(f"Efficiency grid has shape {self.efficiency.shape}, axes require {shape}.")
        if not np.all(np.isfinite(self.efficiency)):
            raise ValidationError("Sweep grid has unpopulated or non-finite cells.")
        low, high = float(self.efficiency.min()), float(self.efficiency.max())
        if low < -self.EFFICIENCY_TOLERANCE or high > 1 + self.EFFICIENCY_TOLERANCE:
            raise ValidationError(f"Efficiencies must lie in [0, 1], got [{low}, {high}].")

    def cell(self, *indices):
        return float(self.efficiency[indices])

    def long_rows(self):
        """(axis values..., efficiency) per cell, row-major."""
        grids = np.meshgrid(*[axis.values for axis in self.axes], indexing="ij")
        for index in np.ndindex(*self.efficiency.shape):
            row = {axis.name: float(grid[index]) for axis, grid in zip(self.axes, grids)}
            row["efficiency"] = float(self.efficiency[index])
            yield row


@dataclass(frozen=True)
class ComparisonRow:
    """Summary of one protocol in a comparison."""

    protocol: str
    duration_ns: float
    omega0_mhz: float
    final_efficiency: float
    peak_efficiency: float
    time_to_target_ns: Optional[float]
    worst_case_efficiency: float


@dataclass(frozen=True)
class ComparisonReport:
    """Ranked protocol summaries."""

    target_efficiency: float
    eta_window: float
    rows: List[ComparisonRow]
    metadata: dict = field(default_factory=dict)
