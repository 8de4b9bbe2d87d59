"""
Passage, pulse-shape and waveform types.
"""
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from django.core.exceptions import ValidationError


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """
    Uniform grid over [0, T] with an even number of intervals.

    The RK4 propagator takes steps of 2*dt and reads the middle sample as
    the half-step value, so the sample count is always odd.
    """

    duration: float
    samples: int

    def __post_init__(self):
        if self.duration <= 0:
            raise ValidationError(f"Grid duration must be positive, got {self.duration}.")
        if self.samples < 3 or self.samples % 2 == 0:
            raise ValidationError(f"Grid needs an odd sample count >= 3, got {self.samples}.")

    @classmethod
    def for_duration(cls, duration, dt):
        """Finest odd grid over [0, duration] whose spacing does not exceed dt."""
        if dt <= 0:
            raise ValidationError(f"Sample spacing must be positive, got {dt}.")
        intervals = 2 * max(1, math.ceil(duration / (2 * dt) - 1e-9))
        return cls(duration=float(duration), samples=intervals + 1)

    @property
    def dt(self):
        return self.duration / (self.samples - 1)

    @property
    def times(self):
        return np.linspace(0.0, self.duration, self.samples)


@dataclass(frozen=True)
class GShape:
    """
    The finite combination G(t) = beta_dot(t) cot gamma(t).
    """

    VARIANT_CONSTANT = "constant"
    VARIANT_GAUSS_BUMP = "gauss_bump"
    VARIANT_HYPER_GAUSS_BUMP = "hyper_gauss_bump"

    VARIANT_CHOICES = [
        (VARIANT_CONSTANT, "Constant"),
        (VARIANT_GAUSS_BUMP, "Gaussian bump"),
        (VARIANT_HYPER_GAUSS_BUMP, "Hyper-Gaussian window with Gaussian bump"),
    ]

    variant: str
    omega0: float
    A: float = 0.0
    B: float = 4.0

    def __post_init__(self):
        self.clean()

    def clean(self):
        """Validate shape parameters."""
        if self.variant not in dict(self.VARIANT_CHOICES):
            raise ValidationError(f"Unknown G shape variant '{self.variant}'.")
        if not self.omega0 > 0:
            raise ValidationError(f"omega0 must be positive, got {self.omega0}.")
        if self.A < 0:
            raise ValidationError(f"Bump amplitude A must be non-negative, got {self.A}.")
        if not self.B > 0:
            raise ValidationError(f"Bump width divisor B must be positive, got {self.B}.")

    @property
    def has_analytic_derivative(self):
        return self.variant != self.VARIANT_HYPER_GAUSS_BUMP

    def _bump(self, t, duration):
        tau = np.asarray(t, dtype=float) - duration / 2
        width = duration / self.B
        return np.exp(-(tau / width) ** 2), tau, width

    def window(self, t, duration):
        """Hyper-Gaussian window exp(-(2 tau / T)^8); 1 for the other variants."""
        t = np.asarray(t, dtype=float)
        if self.variant != self.VARIANT_HYPER_GAUSS_BUMP:
            return np.ones_like(t)
        tau = t - duration / 2
        return np.exp(-((2 * tau / duration) ** 8))

    def evaluate(self, t, duration):
        """G(t) in rad/ns."""
        t = np.asarray(t, dtype=float)
        if self.variant == self.VARIANT_CONSTANT:
            return np.full_like(t, self.omega0)
        bump, _, _ = self._bump(t, duration)
        return self.omega0 * self.window(t, duration) * (1 + self.A * bump)

    def derivative(self, t, duration):
        """dG/dt for the variants with a closed form."""
        t = np.asarray(t, dtype=float)
        if self.variant == self.VARIANT_CONSTANT:
            return np.zeros_like(t)
        if self.variant == self.VARIANT_GAUSS_BUMP:
            bump, tau, width = self._bump(t, duration)
            return self.omega0 * self.A * bump * (-2 * tau / width ** 2)
        raise ValidationError("The hyper-Gaussian shape is differentiated numerically.")


@dataclass(frozen=True)
class PassageSpec:
    """
    User-defined passage

        cos(gamma)cos(beta)|0> + e^{i phi1} sin(gamma)|1> - e^{i phi2} cos(gamma)sin(beta)|2>

    with gamma derived from G, and phi = phi1 + pi/2.
    """

    BETA_SIGMOID = "sigmoid"

    BETA_CHOICES = [
        (BETA_SIGMOID, "Sigmoid"),
    ]

    PHASE_ZERO = "zero"
    PHASE_SINE_SQUARED = "sine_squared"

    PHASE_CHOICES = [
        (PHASE_ZERO, "Identically zero"),
        (PHASE_SINE_SQUARED, "a sin^2(pi t / T)"),
    ]

    # Sigmoid boundary tolerances
    BETA_BOUNDARY_TOLERANCE = 0.011
    FLAT_END_TOLERANCE = 0.11

    duration: float
    g_shape: GShape
    beta_shape: str = BETA_SIGMOID
    phi_offset: float = 0.0
    phi2_shape: str = PHASE_ZERO
    phi2_amplitude: float = 0.0

    def __str__(self):
        return f"{self.g_shape.variant} passage, T={self.duration:g} ns"

    @property
    def is_real(self):
        return self.phi_offset == 0.0 and (self.phi2_shape == self.PHASE_ZERO or self.phi2_amplitude == 0.0)

    def violations(self):
        """Return the list of violated boundary conditions."""
        from .services import PassageService

        problems = []
        if self.duration <= 0:
            return [f"duration must be positive (got {self.duration})"]
        if self.beta_shape not in dict(self.BETA_CHOICES):
            problems.append(f"unknown beta shape '{self.beta_shape}'")
            return problems
        if self.phi2_shape not in dict(self.PHASE_CHOICES):
            problems.append(f"unknown phase shape '{self.phi2_shape}'")
        T = self.duration
        ends = np.array([0.0, T])
        beta = PassageService.beta_sigmoid(ends, T)
        beta_dot = PassageService.beta_sigmoid_derivative(ends, T)
        g_ends = self.g_shape.evaluate(ends, T)
        if beta[0] > self.BETA_BOUNDARY_TOLERANCE:
            problems.append(f"beta(0) = {beta[0]:.6f} rad exceeds {self.BETA_BOUNDARY_TOLERANCE}")
        if abs(beta[1] - math.pi / 2) > self.BETA_BOUNDARY_TOLERANCE:
            problems.append(f"|beta(T) - pi/2| = {abs(beta[1] - math.pi / 2):.6f} rad exceeds {self.BETA_BOUNDARY_TOLERANCE}")
        if abs(beta_dot[0]) * T > self.FLAT_END_TOLERANCE:
            problems.append(f"|beta_dot(0)|*T = {abs(beta_dot[0]) * T:.4f} exceeds {self.FLAT_END_TOLERANCE}")
        if abs(beta_dot[1]) * T > self.FLAT_END_TOLERANCE:
            problems.append(f"|beta_dot(T)|*T = {abs(beta_dot[1]) * T:.4f} exceeds {self.FLAT_END_TOLERANCE}")
        if g_ends[0] == 0:
            problems.append("G(0) must be non-zero")
        if g_ends[1] == 0:
            problems.append("G(T) must be non-zero")
        return problems

    def clean(self):
        """Validate the boundary conditions of the passage."""
        problems = self.violations()
        if problems:
            raise ValidationError([f"Passage boundary condition violated: {p}." for p in problems])


@dataclass(frozen=True, eq=False)
class Waveform:
    """
    Sampled complex drive envelopes (Rabi frequencies, rad/ns) on a uniform grid.
    """

    dt: float
    pump: np.ndarray
    stokes: np.ndarray
    detunings: Tuple[float, float] = (0.0, 0.0)
    auxiliary: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("pump", "stokes", "auxiliary"):
            values = getattr(self, name)
            if values is None:
                continue
            array = np.array(values, dtype=complex)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "detunings", (float(self.detunings[0]), float(self.detunings[1])))
        self.clean()

    def clean(self):
        """Validate sample layout and finiteness."""
        if not self.dt > 0:
            raise ValidationError(f"Sample spacing must be positive, got {self.dt}.")
        if self.pump.ndim != 1 or self.pump.shape != self.stokes.shape:
            raise ValidationError("Pump and Stokes envelopes must be 1-d and of equal length.")
        if self.samples < 2:
            raise ValidationError("A waveform needs at least two samples.")
        if self.auxiliary is not None and self.auxiliary.shape != self.pump.shape:
            raise ValidationError("Auxiliary envelope length differs from the drive envelopes.")
        channels = [self.pump, self.stokes] + ([self.auxiliary] if self.auxiliary is not None else [])
        if not all(np.all(np.isfinite(channel)) for channel in channels):
            raise ValidationError("Waveform samples must be finite.")

    @classmethod
    def zeros(cls, grid, detunings=(0.0, 0.0)):
        """Waveform with both drives off."""
        return cls(dt=grid.dt, pump=np.zeros(grid.samples), stokes=np.zeros(grid.samples), detunings=detunings)

    @property
    def samples(self):
        return self.pump.shape[0]

    @property
    def duration(self):
        return self.dt * (self.samples - 1)

    @property
    def times(self):
        return np.linspace(0.0, self.duration, self.samples)

    @property
    def peak_amplitude(self):
        channels = [self.pump, self.stokes] + ([self.auxiliary] if self.auxiliary is not None else [])
        return float(max(np.max(np.abs(channel)) for channel in channels))

    def scaled(self, factor):
        """Return the waveform with every drive multiplied by a common factor."""
        auxiliary = None if self.auxiliary is None else self.auxiliary * factor
        return replace(self, pump=self.pump * factor, stokes=self.stokes * factor, auxiliary=auxiliary)

    def with_detunings(self, delta1, delta2):
        return replace(self, detunings=(delta1, delta2))


@dataclass(frozen=True)
class MixingAngle:
    """Dark-state rotation angle, tan(theta) = |Omega_P| / |Omega_S|."""

    theta: float
