"""
Service layer for passage definition, pulse synthesis and baseline waveforms.

Rabi-frequency convention: H0 = 1/2 (Omega_P |0><1| + Omega_S |1><2| + h.c.),
so the synthesized Rabi frequencies are twice the matrix elements that make
the user-defined passage an exact solution of the Schrodinger equation.
"""
import logging
import math

import numpy as np
from django.core.exceptions import ValidationError
from scipy.integrate import cumulative_trapezoid, quad, trapezoid

from qstate.models import PureState
from .models import MixingAngle, PassageSpec, Waveform

logger = logging.getLogger(__name__)


def fourth_order_derivative(values, dt):
    """
    First derivative on a uniform grid: five-point central stencil inside,
    one-sided fourth-order stencils on the two outermost samples at each end.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if n < 5:
        raise ValidationError("Fourth-order differences need at least five samples.")
    d = np.empty(n)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dt)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * dt)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * dt)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * dt)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * dt)
    return d


class PassageService:
    """Passage evaluation and inverse engineering of the drive pulses."""

    SIGMOID_STEEPNESS = 10.0

    @classmethod
    def _sigmoid(cls, t, duration):
        if duration <= 0:
            raise ValidationError(f"Duration must be positive, got {duration}.")
        tau = np.asarray(t, dtype=float) - duration / 2
        return 1.0 / (1.0 + np.exp(-cls.SIGMOID_STEEPNESS * tau / duration))

    @classmethod
    def beta_sigmoid(cls, t, duration):
        """beta(t) = (pi/2) / (1 + exp(-10 (t - T/2) / T))."""
        return 0.5 * math.pi * cls._sigmoid(t, duration)

    @classmethod
    def beta_sigmoid_derivative(cls, t, duration):
        s = cls._sigmoid(t, duration)
        return 0.5 * math.pi * (cls.SIGMOID_STEEPNESS / duration) * s * (1 - s)

    @classmethod
    def beta_sigmoid_second_derivative(cls, t, duration):
        s = cls._sigmoid(t, duration)
        rate = cls.SIGMOID_STEEPNESS / duration
        return 0.5 * math.pi * rate ** 2 * s * (1 - s) * (1 - 2 * s)

    @classmethod
    def _check_g(cls, g_values):
        if np.any(g_values <= 0):
            raise ValidationError("Divergent passage: G(t) crosses zero on the grid.")

    @classmethod
    def gamma_at(cls, spec: PassageSpec, t):
        """gamma(t) = arctan(beta_dot / G) at arbitrary times."""
        g_values = np.atleast_1d(spec.g_shape.evaluate(t, spec.duration))
        cls._check_g(g_values)
        beta_dot = cls.beta_sigmoid_derivative(t, spec.duration)
        return np.arctan(beta_dot / spec.g_shape.evaluate(t, spec.duration))

    @classmethod
    def gamma_profile(cls, spec: PassageSpec, grid):
        """
        Derived gamma(t) and gamma_dot(t) on the grid.

        Returns:
            tuple: (gamma, gamma_dot) arrays in rad and rad/ns
        """
        times = grid.times
        T = spec.duration
        g_values = spec.g_shape.evaluate(times, T)
        cls._check_g(g_values)
        beta_dot = cls.beta_sigmoid_derivative(times, T)
        gamma = np.arctan(beta_dot / g_values)

        if spec.g_shape.has_analytic_derivative:
            beta_ddot = cls.beta_sigmoid_second_derivative(times, T)
            g_dot = spec.g_shape.derivative(times, T)
            gamma_dot = (beta_ddot * g_values - beta_dot * g_dot) / (g_values ** 2 + beta_dot ** 2)
        else:
            gamma_dot = fourth_order_derivative(gamma, grid.dt)
        return gamma, gamma_dot

    @classmethod
    def _phi2(cls, spec, t):
        t = np.asarray(t, dtype=float)
        if spec.phi2_shape == PassageSpec.PHASE_ZERO or spec.phi2_amplitude == 0.0:
            return np.zeros_like(t), np.zeros_like(t)
        angle = math.pi * t / spec.duration
        value = spec.phi2_amplitude * np.sin(angle) ** 2
        rate = spec.phi2_amplitude * (math.pi / spec.duration) * np.sin(2 * angle)
        return value, rate

    @classmethod
    def _phi_rate(cls, spec, t):
        # d(phi)/dt = d(phi2)/dt cot^2(gamma) sin^2(beta), with cot(gamma) = G / beta_dot
        _, phi2_rate = cls._phi2(spec, t)
        cot_gamma = spec.g_shape.evaluate(t, spec.duration) / cls.beta_sigmoid_derivative(t, spec.duration)
        return phi2_rate * cot_gamma ** 2 * np.sin(cls.beta_sigmoid(t, spec.duration)) ** 2

    @classmethod
    def phi_series(cls, spec: PassageSpec, times):
        """
        phi = phi1 + pi/2 at increasing times, from the consistency condition;
        quadrature runs piecewise between consecutive times.
        """
        times = np.asarray(times, dtype=float)
        if spec.is_real:
            return np.full(times.shape, spec.phi_offset)
        edges = np.concatenate([[0.0], times])
        increments = [
            quad(lambda s: float(cls._phi_rate(spec, s)), a, b, limit=200)[0]
            for a, b in zip(edges[:-1], edges[1:])
        ]
        return spec.phi_offset + np.cumsum(increments)

    @classmethod
    def synthesize_pulses(cls, spec: PassageSpec, grid) -> Waveform:
        """
        Inverse-engineer Omega_P, Omega_S that drive the system along the passage.
        """
        spec.clean()
        if abs(grid.duration - spec.duration) > 1e-9 * spec.duration:
            raise ValidationError(
                f"Grid spans {grid.duration} ns but the passage lasts {spec.duration} ns."
            )
        times = grid.times
        T = spec.duration
        beta = cls.beta_sigmoid(times, T)
        g_values = spec.g_shape.evaluate(times, T)
        gamma, gamma_dot = cls.gamma_profile(spec, grid)

        if spec.is_real:
            radius = np.hypot(g_values, gamma_dot)
            angle = beta + np.arctan(gamma_dot / g_values)
            pump = 2 * radius * np.sin(angle)
            stokes = 2 * radius * np.cos(angle)
        else:
            phi2, phi2_rate = cls._phi2(spec, times)
            phi = spec.phi_offset + cumulative_trapezoid(cls._phi_rate(spec, times), times, initial=0.0)
            cot_gamma = g_values / cls.beta_sigmoid_derivative(times, T)
            pump = 2 * (g_values * np.sin(beta) + gamma_dot * np.cos(beta)) * np.exp(-1j * phi)
            stokes = 2 * (
                g_values * np.cos(beta)
                - gamma_dot * np.sin(beta)
                - 1j * phi2_rate * cot_gamma * np.sin(beta)
            ) * np.exp(-1j * (phi2 - phi))

        waveform = Waveform(dt=grid.dt, pump=pump, stokes=stokes)
        logger.debug(
            f"Synthesized {spec}: {grid.samples} samples, peak {waveform.peak_amplitude:.4f} rad/ns, "
            f"max sin^2(gamma) {np.max(np.sin(gamma) ** 2):.4f}"
        )
        return waveform

    @classmethod
    def dark_state(cls, angle: MixingAngle) -> PureState:
        """
        State annihilated by H0 for tan(theta) = Omega_P / Omega_S:
        cos(theta)|0> - sin(theta)|2>.
        """
        return PureState([math.cos(angle.theta), 0.0, -math.sin(angle.theta)])

    @classmethod
    def passage_states(cls, spec: PassageSpec, times) -> np.ndarray:
        """Kets of the passage at increasing times, shape (len(times), 3)."""
        times = np.asarray(times, dtype=float)
        if np.any(times < -1e-12) or np.any(times > spec.duration * (1 + 1e-12)):
            raise ValidationError(f"Times outside the passage [0, {spec.duration}].")
        beta = cls.beta_sigmoid(times, spec.duration)
        gamma = cls.gamma_at(spec, times)
        phi1 = cls.phi_series(spec, times) - math.pi / 2
        phi2, _ = cls._phi2(spec, times)
        return np.stack([
            np.cos(gamma) * np.cos(beta),
            np.exp(1j * phi1) * np.sin(gamma),
            -np.exp(1j * phi2) * np.cos(gamma) * np.sin(beta),
        ], axis=1)

    @classmethod
    def evaluate_passage(cls, spec: PassageSpec, t: float) -> PureState:
        """
        The passage state cos(gamma)cos(beta)|0> + e^{i phi1} sin(gamma)|1>
        - e^{i phi2} cos(gamma)sin(beta)|2> at time t.
        """
        return PureState(cls.passage_states(spec, [t])[0])

    @classmethod
    def intermediate_population_profile(cls, spec: PassageSpec, grid):
        """Designed occupancy sin^2(gamma) of level |1> along the passage."""
        gamma, _ = cls.gamma_profile(spec, grid)
        return np.sin(gamma) ** 2

    @classmethod
    def boundary_infidelity(cls, spec: PassageSpec) -> float:
        """1 - |<0|Phi(0)>|^2, the price of the sigmoid not starting at exactly zero."""
        beta0 = float(cls.beta_sigmoid(0.0, spec.duration))
        gamma0 = float(cls.gamma_at(spec, 0.0))
        return 1.0 - (math.cos(gamma0) * math.cos(beta0)) ** 2

    @classmethod
    def mixing_angle(cls, waveform: Waveform):
        """theta(t) = arctan(|Omega_P| / |Omega_S|) per sample."""
        return np.arctan2(np.abs(waveform.pump), np.abs(waveform.stokes))


class BaselineService:
    """Reference waveforms the user-defined passages are benchmarked against."""

    @classmethod
    def stirap_waveform(cls, omega0, duration, grid, sigma=None, delay=None) -> Waveform:
        """
        Counterintuitive Gaussian pair: Stokes centred at T/2 - delay precedes
        the pump centred at T/2 + delay.
        """
        sigma = duration / 6 if sigma is None else sigma
        delay = duration / 10 if delay is None else delay
        if not sigma > 0:
            raise ValidationError(f"STIRAP width must be positive, got {sigma}.")
        if not 0 < delay < duration / 2:
            raise ValidationError(f"STIRAP delay must lie in (0, T/2), got {delay}.")
        tau = grid.times - duration / 2
        stokes = omega0 * np.exp(-((tau + delay) / sigma) ** 2)
        pump = omega0 * np.exp(-((tau - delay) / sigma) ** 2)
        return Waveform(dt=grid.dt, pump=pump, stokes=stokes)

    @classmethod
    def _pi_pulse(cls, times, window):
        envelope = np.sin(2 * PassageService.beta_sigmoid(times, window))
        area = trapezoid(envelope, times)
        return envelope * (math.pi / area)

    @classmethod
    def rr_waveform(cls, omega0, duration, grid) -> Waveform:
        """
        Resonant Rabi baseline: a pi pulse on 0-1 in [0, T/2] followed by a
        pi pulse on 1-2 in [T/2, T]; each bump sin(2 beta) is scaled to area pi.
        """
        if duration <= 0:
            raise ValidationError(f"Duration must be positive, got {duration}.")
        times = grid.times
        middle = (grid.samples - 1) // 2
        half = duration / 2
        pump = np.zeros(grid.samples)
        stokes = np.zeros(grid.samples)
        pump[: middle + 1] = cls._pi_pulse(times[: middle + 1], half)
        stokes[middle:] = cls._pi_pulse(times[middle:] - half, half)
        logger.debug(f"RR pulses calibrated to area pi: peak {pump.max():.4f} rad/ns (nominal {omega0:.4f})")
        return Waveform(dt=grid.dt, pump=pump, stokes=stokes)

    @classmethod
    def counterdiabatic_waveform(cls, stirap: Waveform, grid=None) -> Waveform:
        """
        Add the transitionless-driving 0-2 drive Omega_A = 2i theta_dot.
        """
        if not (np.any(stirap.pump != 0) and np.any(stirap.stokes != 0)):
            raise ValidationError("Counterdiabatic driving needs non-zero pump and Stokes envelopes.")
        theta = PassageService.mixing_angle(stirap)
        theta_dot = np.gradient(theta, stirap.dt, edge_order=2)
        return Waveform(
            dt=stirap.dt,
            pump=stirap.pump,
            stokes=stirap.stokes,
            detunings=stirap.detunings,
            auxiliary=2j * theta_dot,
        )

    @classmethod
    def drag_correct(cls, waveform: Waveform, alpha, lambda_p=1.0, lambda_s=1.0) -> Waveform:
        """
        Quadrature correction Omega -> Omega + i lambda dOmega/dt / alpha on each drive.
        """
        if alpha == 0:
            raise ValidationError("DRAG correction needs a non-zero anharmonicity.")
        pump_dot = np.gradient(waveform.pump, waveform.dt, edge_order=2)
        stokes_dot = np.gradient(waveform.stokes, waveform.dt, edge_order=2)
        return Waveform(
            dt=waveform.dt,
            pump=waveform.pump + 1j * lambda_p * pump_dot / alpha,
            stokes=waveform.stokes + 1j * lambda_s * stokes_dot / alpha,
            detunings=waveform.detunings,
            auxiliary=waveform.auxiliary,
        )
