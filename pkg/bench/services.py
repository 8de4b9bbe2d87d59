"""
Service layer for protocol simulation, robustness sweeps and comparisons.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from scipy.optimize import bisect

from dynamics.models import SystemModel
from dynamics.services import EvolutionService
from passage.models import GShape, PassageSpec, Waveform
from passage.serializers import passage_summary
from passage.services import BaselineService, PassageService
from qstate.models import DensityMatrix, PureState
from .models import ComparisonReport, ComparisonRow, Protocol, SweepAxis, SweepGrid, model_hash

logger = logging.getLogger(__name__)


class ProtocolService:
    """Waveforms and simulations of resolved protocols."""

    @classmethod
    def passage_spec(cls, protocol: Protocol) -> PassageSpec:
        """Passage behind a STIRUP-family protocol."""
        if protocol.variant == Protocol.VARIANT_STIRUP_OP:
            shape = GShape(
                GShape.VARIANT_HYPER_GAUSS_BUMP, protocol.omega0, A=protocol.shape_a, B=protocol.shape_b
            )
        elif protocol.variant in (Protocol.VARIANT_STIRUP, Protocol.VARIANT_STIRUP_DRAG):
            shape = GShape(GShape.VARIANT_CONSTANT, protocol.omega0)
        else:
            raise ValidationError(f"Protocol '{protocol.variant}' is not defined by a passage.")
        return PassageSpec(duration=protocol.duration, g_shape=shape)

    @classmethod
    def _build(cls, protocol: Protocol, model: SystemModel, grid):
        variant = protocol.variant
        if variant in (Protocol.VARIANT_STIRAP, Protocol.VARIANT_STIRAP_CD):
            waveform = BaselineService.stirap_waveform(
                protocol.omega0, protocol.duration, grid, sigma=protocol.sigma, delay=protocol.delay
            )
            if variant == Protocol.VARIANT_STIRAP_CD:
                waveform = BaselineService.counterdiabatic_waveform(waveform, grid)
            return waveform
        if variant == Protocol.VARIANT_RR:
            return BaselineService.rr_waveform(protocol.omega0, protocol.duration, grid)
        waveform = PassageService.synthesize_pulses(cls.passage_spec(protocol), grid)
        if variant == Protocol.VARIANT_STIRUP_DRAG:
            waveform = BaselineService.drag_correct(waveform, model.alpha, protocol.lambda_p, protocol.lambda_s)
        return waveform

    @classmethod
    def build_waveform(cls, protocol: Protocol, model: SystemModel, dt=None, eta=0.0, detunings=(0.0, 0.0)):
        """
        Sampled drives of the protocol, scaled by (1 + eta) and detuned.

        Zero-amplitude protocols (omega0 = 0 or eta = -1) yield idle drives.
        """
        dt = settings.PASSAGE_DT_NS if dt is None else dt
        if eta < -1:
            raise ValidationError(f"Amplitude error must be at least -1, got {eta}.")

        def build(grid):
            if protocol.omega0 == 0 or eta == -1:
                return Waveform.zeros(grid, detunings)
            return cls._build(protocol, model, grid).scaled(1.0 + eta).with_detunings(*detunings)

        return EvolutionService.sample(model, build, protocol.duration, dt)

    @classmethod
    def simulate(cls, protocol: Protocol, model: SystemModel, dt=None, eta=0.0, detunings=(0.0, 0.0)):
        """Master-equation evolution from |0><0|."""
        waveform = cls.build_waveform(protocol, model, dt=dt, eta=eta, detunings=detunings)
        rho0 = DensityMatrix.from_pure(PureState.basis(0, model.dims))
        return EvolutionService.evolve_lindblad(model, waveform, rho0)

    @classmethod
    def efficiency(cls, protocol: Protocol, model: SystemModel, dt=None, eta=0.0, detunings=(0.0, 0.0)) -> float:
        """Final population of |2>, clipped to [0, 1]."""
        result = cls.simulate(protocol, model, dt=dt, eta=eta, detunings=detunings)
        return float(np.clip(result.final_efficiency, 0.0, 1.0))


def _cell_efficiency(task):
    protocol, model, dt, eta, detunings = task
    return ProtocolService.efficiency(protocol, model, dt=dt, eta=eta, detunings=detunings)


class SweepService:
    """Robustness sweeps; cells are independent simulations."""

    @classmethod
    def _evaluate(cls, tasks):
        workers = max(1, int(settings.PASSAGE_THREADS))
        if workers == 1 or len(tasks) == 1:
            return [_cell_efficiency(task) for task in tasks]
        logger.info(f"Evaluating {len(tasks)} cells on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cell_efficiency, tasks, chunksize=max(1, len(tasks) // (4 * workers))))

    @classmethod
    def _metadata(cls, protocol, model, dt, **extra):
        passage = None
        if protocol.variant in Protocol.PASSAGE_VARIANTS and protocol.omega0 > 0:
            passage = passage_summary(ProtocolService.passage_spec(protocol))
        return {
            "protocol": protocol.as_dict(),
            "passage": passage,
            "model": asdict(model),
            "model_hash": model_hash(model),
            "dt_ns": settings.PASSAGE_DT_NS if dt is None else dt,
            **extra,
        }

    @classmethod
    def efficiency_curve(cls, protocol: Protocol, model: SystemModel, dt=None):
        """P0..P3 along the protocol; P2 is the transfer efficiency."""
        result = ProtocolService.simulate(protocol, model, dt=dt)
        logger.info(f"{protocol}: final efficiency {result.final_efficiency:.4f}, max P1 {result.max_p1:.4f}")
        return result

    @classmethod
    def rabi_error_sweep(cls, protocol: Protocol, model: SystemModel, eta_min, eta_max, points, dt=None) -> SweepGrid:
        """Final efficiency with both drives scaled by (1 + eta)."""
        if eta_min < -1:
            raise ValidationError(f"eta range must not extend below -1, got {eta_min}.")
        axis = SweepAxis("eta", eta_min, eta_max, points)
        tasks = [(protocol, model, dt, float(eta), (0.0, 0.0)) for eta in axis.values]
        grid = SweepGrid(
            axes=[axis],
            efficiency=cls._evaluate(tasks),
            metadata=cls._metadata(protocol, model, dt, sweep="rabi"),
        )
        logger.info(f"Rabi sweep of {protocol}: worst {grid.efficiency.min():.4f}, best {grid.efficiency.max():.4f}")
        return grid

    @classmethod
    def detuning_map(cls, protocol: Protocol, model: SystemModel, max_detuning_mhz, points, dt=None) -> SweepGrid:
        """
        Final efficiency over (delta1, delta2) in [-max, max]^2, axes in MHz.

        Args:
            points: (n, m) cell counts along delta1 and delta2
        """
        n, m = points
        axes = [
            SweepAxis("delta1_mhz", -max_detuning_mhz, max_detuning_mhz, n),
            SweepAxis("delta2_mhz", -max_detuning_mhz, max_detuning_mhz, m),
        ]
        tasks = [
            (protocol, model, dt, 0.0, (float(d1) * settings.MHZ, float(d2) * settings.MHZ))
            for d1 in axes[0].values
            for d2 in axes[1].values
        ]
        efficiency = np.array(cls._evaluate(tasks)).reshape(n, m)
        grid = SweepGrid(axes=axes, efficiency=efficiency, metadata=cls._metadata(protocol, model, dt, sweep="detuning"))
        logger.info(f"Detuning map of {protocol}: {n}x{m} cells, high-efficiency area {cls.high_efficiency_area(grid):.3f}")
        return grid

    @classmethod
    def efficiency_vs_duration(cls, protocol: Protocol, model: SystemModel, t_min, t_max, points, dt=None) -> SweepGrid:
        """Final efficiency of separate runs of duration T."""
        axis = SweepAxis("duration_ns", t_min, t_max, points)
        tasks = [(protocol.at_duration(float(T)), model, dt, 0.0, (0.0, 0.0)) for T in axis.values]
        return SweepGrid(
            axes=[axis],
            efficiency=cls._evaluate(tasks),
            metadata=cls._metadata(protocol, model, dt, sweep="duration"),
        )

    @classmethod
    def time_to_efficiency(cls, protocol: Protocol, model: SystemModel, target, t_min, t_max, points=12, dt=None):
        """
        Shortest duration T at which a run of length T reaches the target
        efficiency: first crossing on a duration scan, refined by bisection.
        """
        curve = cls.efficiency_vs_duration(protocol, model, t_min, t_max, points, dt=dt)
        durations = curve.axes[0].values
        above = np.nonzero(curve.efficiency >= target)[0]
        if above.size == 0:
            raise ValidationError(
                f"{protocol.variant} does not reach {target:.3f} for T in [{t_min}, {t_max}] ns "
                f"(best {curve.efficiency.max():.4f})."
            )
        k = int(above[0])
        if k == 0:
            return float(durations[0])

        def excess(T):
            return ProtocolService.efficiency(protocol.at_duration(T), model, dt=dt) - target

        crossing = bisect(excess, durations[k - 1], durations[k], xtol=1e-2)
        logger.info(f"{protocol.variant} reaches {target:.3f} at T = {crossing:.2f} ns")
        return float(crossing)

    @classmethod
    def high_efficiency_area(cls, grid: SweepGrid, threshold=0.9):
        """Fraction of cells at or above the threshold."""
        return float(np.mean(grid.efficiency >= threshold))

    @classmethod
    def compare_protocols(cls, protocols, model: SystemModel, eta_min, eta_max, eta_points,
                          target=0.96, eta_window=0.2, dt=None) -> ComparisonReport:
        """
        Efficiency curve, amplitude robustness and the first time P2 reaches
        the target within each run,
        ranked by worst-case efficiency for |eta| <= eta_window, then peak efficiency.
        """
        rows = []
        for protocol in protocols:
            curve = cls.efficiency_curve(protocol, model, dt=dt)
            sweep = cls.rabi_error_sweep(protocol, model, eta_min, eta_max, eta_points, dt=dt)
            inside = np.abs(sweep.axes[0].values) <= eta_window + 1e-12
            worst = float(sweep.efficiency[inside].min()) if inside.any() else float(sweep.efficiency.min())
            time_to_target = curve.crossing_time(target)
            if time_to_target is None:
                logger.warning(f"{protocol.variant} never reaches {target:.3f} within {protocol.duration:g} ns")
            rows.append(ComparisonRow(
                protocol=protocol.variant,
                duration_ns=protocol.duration,
                omega0_mhz=protocol.omega0 / settings.MHZ,
                final_efficiency=curve.final_efficiency,
                peak_efficiency=float(np.max(curve.populations[:, 2])),
                time_to_target_ns=time_to_target,
                worst_case_efficiency=worst,
            ))
        rows.sort(key=lambda row: (-row.worst_case_efficiency, -row.peak_efficiency, row.protocol))
        return ComparisonReport(
            target_efficiency=target,
            eta_window=eta_window,
            rows=rows,
            metadata={"model": asdict(model), "model_hash": model_hash(model)},
        )

    @classmethod
    def adiabatic_gap(cls, omega0, duration, dt=None):
        """
        |P2(T)| difference between Constant-G STIRUP and STIRAP of equal omega0
        on the closed three-level model.
        """
        model = SystemModel.ideal()
        stirup = Protocol(Protocol.VARIANT_STIRUP, omega0, duration)
        stirap = Protocol(Protocol.VARIANT_STIRAP, omega0, duration)
        return abs(ProtocolService.efficiency(stirup, model, dt=dt) - ProtocolService.efficiency(stirap, model, dt=dt))
