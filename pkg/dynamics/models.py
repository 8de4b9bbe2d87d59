"""
Device model and evolution results.
"""
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from qstate.models import PureState


@dataclass(frozen=True)
class SystemModel:
    """
    Transmon truncated to |0>, |1>, |2> (and the leakage level |3>).

    Frequencies in GHz, relaxation and coherence times in ns.
    """

    f10: float
    f21: float
    t1_10: float
    t2_10: float
    t1_21: float
    t2_21: float
    dims: int = PureState.DIMS_LEAKAGE
    include_leakage: bool = True
    decoherence: bool = True

    # Tolerance on solved dephasing rates (1/ns) before they count as negative
    RATE_TOLERANCE = 1e-15

    def __post_init__(self):
        self.clean()

    def __str__(self):
        return (
            f"SystemModel(dims={self.dims}, alpha/2pi={self.alpha / (2 * math.pi) * 1e3:.1f} MHz, "
            f"leakage={self.include_leakage}, decoherence={self.decoherence})"
        )

    @classmethod
    def from_settings(cls, **overrides):
        """Model of the reference device from settings.PASSAGE["SYSTEM"]."""
        values = dict(settings.PASSAGE["SYSTEM"])
        values.update(overrides)
        return cls(**values)

    @classmethod
    def ideal(cls, **overrides):
        """Closed three-level model: ideal H0 without leakage or decoherence."""
        return cls.from_settings(dims=PureState.DIMS_QUTRIT, include_leakage=False, decoherence=False, **overrides)

    @property
    def alpha(self):
        """Anharmonicity 2 pi (f21 - f10) in rad/ns."""
        return 2 * math.pi * (self.f21 - self.f10)

    @property
    def dephasing_rates(self):
        """
        Pure-dephasing rates on |1><1| and |2><2| that reproduce both T2 values.

        Returns:
            tuple: (gamma_1, gamma_2) in 1/ns
        """
        relax_10 = 1.0 / self.t1_10
        relax_21 = 1.0 / self.t1_21
        gamma_1 = 2.0 * (1.0 / self.t2_10 - 0.5 * relax_10)
        gamma_2 = 2.0 * (1.0 / self.t2_21 - 0.5 * (relax_10 + relax_21)) - gamma_1
        return gamma_1, gamma_2

    def clean(self):
        """Validate the physical consistency of the model."""
        if self.dims not in dict(PureState.DIMS_CHOICES):
            raise ValidationError(f"Model dimension must be 3 or 4, got {self.dims}.")
        if self.include_leakage and self.dims != PureState.DIMS_LEAKAGE:
            raise ValidationError("The leakage level requires dims = 4.")
        if self.f10 <= 0 or self.f21 <= 0:
            raise ValidationError("Transition frequencies must be positive.")
        for name in ("t1_10", "t2_10", "t1_21", "t2_21"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}.")
        if self.t2_10 > 2 * self.t1_10:
            raise ValidationError(f"t2_10 = {self.t2_10} ns exceeds 2 t1_10 = {2 * self.t1_10} ns.")
        if self.t2_21 > 2 * self.t1_21:
            raise ValidationError(f"t2_21 = {self.t2_21} ns exceeds 2 t1_21 = {2 * self.t1_21} ns.")
        gamma_1, gamma_2 = self.dephasing_rates
        if gamma_1 < -self.RATE_TOLERANCE or gamma_2 < -self.RATE_TOLERANCE:
            raise ValidationError(
                f"Coherence times need negative pure-dephasing rates ({gamma_1:.3e}, {gamma_2:.3e} 1/ns)."
            )

    def closed(self):
        """The same model with every collapse channel removed."""
        return replace(self, decoherence=False)


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """
    Populations recorded at every integration step.

    Attributes:
        times: recorded times (ns)
        populations: (steps, dims) level occupations
        trace_defects: |tr(rho) - 1| (or |<psi|psi> - 1|) per recorded time
        min_eigenvalue: smallest eigenvalue of rho over the run (1 for pure states)
        final_state: PureState or DensityMatrix at T
        states: recorded kets (closed evolutions only)
    """

    times: np.ndarray
    populations: np.ndarray
    trace_defects: np.ndarray
    min_eigenvalue: float
    final_state: object
    states: Optional[np.ndarray] = None

    @property
    def dims(self):
        return self.populations.shape[1]

    @property
    def final_efficiency(self):
        """Population of |2> at the end of the window."""
        return float(self.populations[-1, 2])

    @property
    def max_p1(self):
        return float(np.max(self.populations[:, 1]))

    @property
    def max_p3(self):
        if self.dims < PureState.DIMS_LEAKAGE:
            return 0.0
        return float(np.max(self.populations[:, 3]))

    @property
    def trace_defect(self):
        return float(np.max(self.trace_defects))

    def population_at(self, t, level=2):
        """Population of `level` at time t, linearly interpolated between records."""
        if not self.times[0] - 1e-9 <= t <= self.times[-1] + 1e-9:
            raise ValidationError(f"Time {t} ns lies outside the recorded window [0, {self.times[-1]:g}] ns.")
        return float(np.interp(t, self.times, self.populations[:, level]))

    def crossing_time(self, target, level=2):
        """
        First time the population of `level` reaches target, interpolated
        between records; None if it never does.
        """
        series = self.populations[:, level]
        above = np.nonzero(series >= target)[0]
        if above.size == 0:
            return None
        k = int(above[0])
        if k == 0:
            return float(self.times[0])
        t0, t1 = self.times[k - 1], self.times[k]
        p0, p1 = series[k - 1], series[k]
        return float(t0 + (target - p0) * (t1 - t0) / (p1 - p0))

    def __str__(self):
        return (
            f"EvolutionResult(P2(T)={self.final_efficiency:.6f}, max P1={self.max_p1:.4f}, "
            f"max P3={self.max_p3:.2e}, trace defect={self.trace_defect:.1e})"
        )
