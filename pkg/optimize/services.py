"""
Service layer for derivative-free tuning of passage, DRAG and amplitude parameters.
"""
import itertools
import logging
import math

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from scipy.optimize import bisect, minimize

from bench.models import Protocol
from bench.services import ProtocolService
from dynamics.models import SystemModel
from dynamics.services import EvolutionService, IntegrationError
from passage.models import Waveform
from passage.services import BaselineService
from qstate.models import DensityMatrix, PureState
from .models import OptimizationProblem, OptimizationReport, Resolution, TraceEntry

logger = logging.getLogger(__name__)


class _BudgetExhausted(Exception):
    pass


class OptimizerService:
    """Nelder-Mead on the unit-scaled box with a strict evaluation budget."""

    # Simplex edge and convergence diameter, in unit-box coordinates
    INITIAL_STEP = 0.1
    XATOL = 1e-4

    @classmethod
    def _initial_simplex(cls, u0):
        simplex = [u0]
        for k in range(u0.shape[0]):
            vertex = u0.copy()
            vertex[k] += cls.INITIAL_STEP if vertex[k] + cls.INITIAL_STEP <= 1.0 else -cls.INITIAL_STEP
            simplex.append(vertex)
        return np.array(simplex)

    @classmethod
    def nelder_mead(cls, problem: OptimizationProblem, x0) -> OptimizationReport:
        """
        Minimize problem.objective from x0 with reflection, expansion,
        contraction and shrink coefficients (1, 2, 0.5, 0.5).

        Vertices are projected onto the box; the run stops when the simplex
        diameter drops below XATOL or the budget is spent.
        """
        problem.clean()
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (problem.dims,) or not problem.contains(x0):
            raise ValidationError(f"Start point {x0.tolist()} is not inside the bounds {list(problem.bounds)}.")

        trace = []

        def evaluate(u):
            if len(trace) >= problem.budget:
                raise _BudgetExhausted
            x = problem.from_unit(u)
            cost = float(problem.objective(x))
            best = cost if not trace else min(cost, trace[-1].best_cost)
            trace.append(TraceEntry(params=tuple(float(v) for v in x), cost=cost, best_cost=best))
            logger.debug(f"Evaluation {len(trace)}: {dict(zip(problem.names, x.round(6)))} -> {cost:.6e}")
            return cost

        u0 = problem.to_unit(x0)
        try:
            result = minimize(
                evaluate,
                u0,
                method="Nelder-Mead",
                bounds=[(0.0, 1.0)] * problem.dims,
                options={
                    "initial_simplex": cls._initial_simplex(u0),
                    "xatol": cls.XATOL,
                    "fatol": math.inf,
                    "maxfev": problem.budget,
                },
            )
            converged = bool(result.success)
        except _BudgetExhausted:
            converged = False
        return cls._report(problem, trace, converged)

    @classmethod
    def _report(cls, problem, trace, converged, starts=1):
        best = min(trace, key=lambda entry: entry.cost)
        report = OptimizationReport(
            names=problem.names,
            best_params=best.params,
            best_cost=best.cost,
            evaluations=len(trace),
            converged=converged,
            starts=starts,
            trace=trace,
            seed=problem.seed,
        )
        logger.info(f"Nelder-Mead: {report}")
        return report

    @classmethod
    def start_points(cls, problem: OptimizationProblem, starts, random_starts=0):
        """
        Grid of `starts` points per axis (box corners included), followed by
        random_starts uniform draws seeded by problem.seed.
        """
        if starts < 1:
            raise ValidationError(f"Need at least one start per axis, got {starts}.")
        if starts == 1:
            axes = [[0.5 * (lo + hi)] for lo, hi in problem.bounds]
        else:
            axes = [np.linspace(lo, hi, starts) for lo, hi in problem.bounds]
        points = [np.array(point, dtype=float) for point in itertools.product(*axes)]
        rng = np.random.default_rng(problem.seed)
        points.extend(rng.uniform(problem.lower, problem.upper) for _ in range(random_starts))
        return points

    @classmethod
    def multi_start(cls, problem: OptimizationProblem, starts=3, random_starts=0) -> OptimizationReport:
        """
        Nelder-Mead from every start point, each with the full budget; the
        merged trace keeps evaluation order.
        """
        points = cls.start_points(problem, starts, random_starts)
        trace = []
        converged = True
        for index, x0 in enumerate(points, start=1):
            report = cls.nelder_mead(problem, x0)
            logger.info(f"Start {index}/{len(points)} from {x0.round(4).tolist()}: best {report.best_cost:.4e}")
            for entry in report.trace:
                best = entry.cost if not trace else min(entry.cost, trace[-1].best_cost)
                trace.append(TraceEntry(params=entry.params, cost=entry.cost, best_cost=best))
            converged = converged and report.converged
        return cls._report(problem, trace, converged, starts=len(points))


class CalibrationService:
    """Transfer-cost objectives and the tuning operations built on them."""

    @classmethod
    def _transfer_run(cls, waveform: Waveform, model: SystemModel):
        rho0 = DensityMatrix.from_pure(PureState.basis(0, model.dims))
        return EvolutionService.evolve_lindblad(model, waveform, rho0)

    @classmethod
    def waveform_cost(cls, waveform: Waveform, model: SystemModel) -> float:
        """1 - P2(T) of the master-equation run from |0><0|; failures cost 1."""
        try:
            result = cls._transfer_run(waveform, model)
        except (ValidationError, IntegrationError) as exc:
            logger.warning(f"Transfer simulation failed, cost set to 1: {exc}")
            return 1.0
        return float(1.0 - np.clip(result.final_efficiency, 0.0, 1.0))

    @classmethod
    def transfer_cost(cls, protocol: Protocol, model: SystemModel, dt=None) -> float:
        """1 - final efficiency of the protocol; synthesis failures cost 1."""
        try:
            return 1.0 - ProtocolService.efficiency(protocol, model, dt=dt)
        except (ValidationError, IntegrationError) as exc:
            logger.warning(f"{protocol.variant} failed with {protocol.as_dict()}, cost set to 1: {exc}")
            return 1.0

    @classmethod
    def efficiency_at(cls, protocol: Protocol, model: SystemModel, time, dt=None) -> float:
        """P2 at `time` within the protocol's own run; failed runs count as 0."""
        try:
            result = ProtocolService.simulate(protocol, model, dt=dt)
        except (ValidationError, IntegrationError) as exc:
            logger.warning(f"{protocol.variant} failed with {protocol.as_dict()}, efficiency set to 0: {exc}")
            return 0.0
        return float(np.clip(result.population_at(time), 0.0, 1.0))

    @classmethod
    def optimize_ab(cls, protocol: Protocol, model: SystemModel, budget=None, starts=None,
                    bounds_a=None, bounds_b=None, seed=0, random_starts=0, dt=None):
        """
        Multi-start search of the shape parameters (A, B) of a shaped STIRUP protocol.

        Returns:
            tuple: (A, B, OptimizationReport)
        """
        if protocol.variant != Protocol.VARIANT_STIRUP_OP:
            raise ValidationError(f"Shape optimization needs a '{Protocol.VARIANT_STIRUP_OP}' protocol.")
        defaults = settings.PASSAGE["OPTIMIZER"]
        problem = OptimizationProblem(
            names=("A", "B"),
            bounds=(bounds_a or defaults["bounds_a"], bounds_b or defaults["bounds_b"]),
            objective=lambda x: cls.transfer_cost(protocol.with_params(shape_a=x[0], shape_b=x[1]), model, dt=dt),
            budget=defaults["budget"] if budget is None else budget,
            seed=seed,
        )
        report = OptimizerService.multi_start(problem, defaults["starts"] if starts is None else starts, random_starts)
        a, b = report.best_params
        return a, b, report

    @classmethod
    def optimize_drag(cls, waveform: Waveform, model: SystemModel, bounds=None, budget=None, seed=0):
        """
        Nelder-Mead over the DRAG coefficients (lambda_P, lambda_S) from the
        uncorrected point (0, 0).

        A correction is feasible only if the peak |3> population stays at or
        below that of the uncorrected run; infeasible points cost 1.

        Returns:
            tuple: (lambda_p, lambda_s, OptimizationReport)
        """
        if model.dims != PureState.DIMS_LEAKAGE:
            raise ValidationError("DRAG optimization needs the four-level model.")
        defaults = settings.PASSAGE["OPTIMIZER"]
        bounds = bounds or defaults["bounds_lambda"]
        reference = cls._transfer_run(BaselineService.drag_correct(waveform, model.alpha, 0.0, 0.0), model).max_p3

        def objective(x):
            corrected = BaselineService.drag_correct(waveform, model.alpha, x[0], x[1])
            try:
                result = cls._transfer_run(corrected, model)
            except (ValidationError, IntegrationError) as exc:
                logger.warning(f"DRAG run failed at {x.round(4).tolist()}, cost set to 1: {exc}")
                return 1.0
            if result.max_p3 > reference:
                logger.debug(f"DRAG {x.round(4).tolist()} raises max P3 to {result.max_p3:.3e} (cap {reference:.3e})")
                return 1.0
            return float(1.0 - np.clip(result.final_efficiency, 0.0, 1.0))

        problem = OptimizationProblem(
            names=("lambda_p", "lambda_s"),
            bounds=(bounds, bounds),
            objective=objective,
            budget=defaults["budget"] if budget is None else budget,
            seed=seed,
        )
        report = OptimizerService.nelder_mead(problem, (0.0, 0.0))
        lambda_p, lambda_s = report.best_params
        return lambda_p, lambda_s, report

    @classmethod
    def optimize_stirap_timing(cls, protocol: Protocol, model: SystemModel, budget=None,
                               bounds_sigma=None, bounds_delay=None, seed=0, dt=None):
        """
        Nelder-Mead over the STIRAP pulse width and delay, as fractions of T,
        from the protocol's current timing.

        Returns:
            tuple: (sigma, delay, OptimizationReport), times in ns
        """
        if protocol.variant not in (Protocol.VARIANT_STIRAP, Protocol.VARIANT_STIRAP_CD):
            raise ValidationError(f"Pulse timing is tuned for STIRAP protocols, not '{protocol.variant}'.")
        plain = protocol.with_params(variant=Protocol.VARIANT_STIRAP)
        defaults = settings.PASSAGE["RESOLUTION"]
        T = protocol.duration
        problem = OptimizationProblem(
            names=("sigma_ratio", "delay_ratio"),
            bounds=(bounds_sigma or defaults["bounds_sigma"], bounds_delay or defaults["bounds_delay"]),
            objective=lambda x: cls.transfer_cost(plain.with_params(sigma=x[0] * T, delay=x[1] * T), model, dt=dt),
            budget=settings.PASSAGE["OPTIMIZER"]["budget"] if budget is None else budget,
            seed=seed,
        )
        start = (
            1 / 6 if protocol.sigma is None else protocol.sigma / T,
            1 / 10 if protocol.delay is None else protocol.delay / T,
        )
        report = OptimizerService.nelder_mead(problem, np.clip(start, problem.lower, problem.upper))
        sigma_ratio, delay_ratio = report.best_params
        return sigma_ratio * T, delay_ratio * T, report

    # Log-spaced bracket scan over [omega0 / 10, 10 omega0]
    CALIBRATION_POINTS = 13
    CALIBRATION_TOLERANCE = 2e-3

    @classmethod
    def calibrate_amplitude(cls, protocol: Protocol, model: SystemModel, efficiency, time, dt=None):
        """
        omega0 at which the protocol's run has P2 = efficiency at `time`;
        the crossing nearest the nominal omega0 is refined by bisection.
        """
        if protocol.variant == Protocol.VARIANT_RR:
            raise ValidationError("Resonant Rabi pulses are area-calibrated; omega0 does not set the efficiency.")
        if not protocol.omega0 > 0:
            raise ValidationError("Amplitude calibration needs a positive nominal omega0.")
        if not 0 < efficiency < 1:
            raise ValidationError(f"Target efficiency must lie in (0, 1), got {efficiency}.")
        if not 0 < time <= protocol.duration:
            raise ValidationError(f"Anchor time must lie in (0, {protocol.duration:g}] ns, got {time}.")

        def excess(omega0):
            return cls.efficiency_at(protocol.with_params(omega0=float(omega0)), model, time, dt=dt) - efficiency

        amplitudes = np.geomspace(protocol.omega0 / 10, 10 * protocol.omega0, cls.CALIBRATION_POINTS)
        values = np.array([excess(omega0) for omega0 in amplitudes])
        crossings = [
            k for k in range(len(amplitudes) - 1)
            if values[k] == 0 or np.sign(values[k]) != np.sign(values[k + 1])
        ]
        if not crossings:
            mhz = amplitudes / settings.MHZ
            raise ValidationError(
                f"Efficiency {efficiency:.3f} at {time} ns is not bracketed for omega0/2pi in "
                f"[{mhz[0]:.3f}, {mhz[-1]:.3f}] MHz: efficiencies span "
                f"[{values.min() + efficiency:.4f}, {values.max() + efficiency:.4f}]."
            )
        k = min(crossings, key=lambda i: abs(math.log(math.sqrt(amplitudes[i] * amplitudes[i + 1]) / protocol.omega0)))
        if values[k] == 0:
            omega0 = float(amplitudes[k])
        else:
            omega0 = float(bisect(excess, amplitudes[k], amplitudes[k + 1], xtol=1e-6 * protocol.omega0))
        residual = excess(omega0)
        if abs(residual) > cls.CALIBRATION_TOLERANCE:
            raise ValidationError(
                f"Calibration stalled at omega0/2pi = {omega0 / settings.MHZ:.4f} MHz with "
                f"efficiency off by {residual:+.4f}."
            )
        logger.info(
            f"Calibrated {protocol.variant}: omega0/2pi = {omega0 / settings.MHZ:.4f} MHz "
            f"reaches {efficiency:.3f} at {time} ns"
        )
        return omega0


class ResolutionService:
    """
    Freeze protocols for benchmarking: calibrate the amplitude against the
    anchor of its variant, tune the shape, DRAG or timing parameters, then
    recalibrate so the frozen protocol still meets its anchor.
    """

    @classmethod
    def anchor(cls, variant):
        """(efficiency, time in ns) anchoring the variant's amplitude, or None."""
        defaults = settings.PASSAGE["RESOLUTION"]
        time = defaults["anchors_ns"].get(variant)
        return None if time is None else (defaults["target_efficiency"], time)

    @classmethod
    def resolve(cls, protocol: Protocol, model: SystemModel, budget=None, starts=None, seed=0, dt=None) -> Resolution:
        """
        Resolved copy of the protocol. Resonant Rabi and unoptimized STIRUP
        pass through unchanged.
        """
        variant = protocol.variant
        if variant == Protocol.VARIANT_STIRUP_OP:
            resolution = cls._resolve_shape(protocol, model, budget, starts, seed, dt)
        elif variant == Protocol.VARIANT_STIRUP_DRAG:
            resolution = cls._resolve_drag(protocol, model, budget, seed, dt)
        elif variant in (Protocol.VARIANT_STIRAP, Protocol.VARIANT_STIRAP_CD):
            resolution = cls._resolve_stirap(protocol, model, budget, seed, dt)
        else:
            resolution = Resolution(protocol=protocol)
        logger.info(str(resolution))
        return resolution

    @classmethod
    def resolve_all(cls, protocols, model: SystemModel, budget=None, starts=None, seed=0, dt=None):
        return [cls.resolve(protocol, model, budget=budget, starts=starts, seed=seed, dt=dt) for protocol in protocols]

    @classmethod
    def _anchored(cls, protocol, model, anchor, reports, dt):
        crossing = ProtocolService.simulate(protocol, model, dt=dt).crossing_time(anchor[0])
        return Resolution(protocol=protocol, anchor=anchor, crossing_ns=crossing, reports=reports)

    @classmethod
    def _resolve_shape(cls, protocol, model, budget, starts, seed, dt):
        efficiency, time = cls.anchor(protocol.variant)
        omega0 = CalibrationService.calibrate_amplitude(protocol, model, efficiency, time, dt=dt)
        a, b, report = CalibrationService.optimize_ab(
            protocol.with_params(omega0=omega0), model, budget=budget, starts=starts, seed=seed, dt=dt
        )
        shaped = protocol.with_params(omega0=omega0, shape_a=a, shape_b=b)
        omega0 = CalibrationService.calibrate_amplitude(shaped, model, efficiency, time, dt=dt)
        return cls._anchored(shaped.with_params(omega0=omega0), model, (efficiency, time), {"shape": report}, dt)

    @classmethod
    def _resolve_drag(cls, protocol, model, budget, seed, dt):
        plain = protocol.with_params(variant=Protocol.VARIANT_STIRUP)
        waveform = ProtocolService.build_waveform(plain, model, dt=dt)
        lambda_p, lambda_s, report = CalibrationService.optimize_drag(waveform, model, budget=budget, seed=seed)
        return Resolution(protocol=protocol.with_params(lambda_p=lambda_p, lambda_s=lambda_s), reports={"drag": report})

    @classmethod
    def _resolve_stirap(cls, protocol, model, budget, seed, dt):
        efficiency, time = cls.anchor(Protocol.VARIANT_STIRAP)
        sigma, delay, report = CalibrationService.optimize_stirap_timing(
            protocol, model, budget=budget, seed=seed, dt=dt
        )
        timed = protocol.with_params(variant=Protocol.VARIANT_STIRAP, sigma=sigma, delay=delay)
        omega0 = CalibrationService.calibrate_amplitude(timed, model, efficiency, time, dt=dt)
        resolved = protocol.with_params(omega0=omega0, sigma=sigma, delay=delay)
        return cls._anchored(resolved, model, (efficiency, time), {"timing": report}, dt)
