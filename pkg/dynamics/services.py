"""
Service layer for Hamiltonian assembly and fixed-step integration.

Frame: doubly rotating at the two drive frequencies. Diagonal
-delta1 |1><1| - (delta1 + delta2)|2><2| - (delta1 + 2 delta2)|3><3|; the
anharmonicity enters only through the phases of the off-resonant couplings.
"""
import logging
import math

import numpy as np
from django.core.exceptions import ValidationError
from scipy.ndimage import uniform_filter1d

from qstate.models import DensityMatrix, Operator, PureState
from qstate.services import StateService
from passage.models import PassageSpec, TimeGrid, Waveform
from passage.services import PassageService
from .models import EvolutionResult, SystemModel

logger = logging.getLogger(__name__)


class IntegrationError(Exception):
    """The fixed step cannot resolve the Hamiltonian."""


class HamiltonianService:
    """Time-dependent Hamiltonians of the driven transmon."""

    @classmethod
    def _assemble(cls, model: SystemModel, times, pump, stokes, auxiliary, detunings):
        d = model.dims
        n = times.shape[0]
        delta1, delta2 = detunings
        H = np.zeros((n, d, d), dtype=complex)
        H[:, 1, 1] = -delta1
        H[:, 2, 2] = -(delta1 + delta2)

        h01 = 0.5 * pump
        h12 = 0.5 * stokes
        if d == PureState.DIMS_LEAKAGE:
            H[:, 3, 3] = -(delta1 + 2 * delta2)
            alpha = model.alpha
            cross = np.exp(1j * (alpha + delta2 - delta1) * times)
            h01 = h01 + 0.5 * (stokes / math.sqrt(2)) * cross
            h12 = h12 + 0.5 * math.sqrt(2) * pump * cross.conj()
            if model.include_leakage:
                h23 = 0.5 * (
                    (math.sqrt(6) / 2) * stokes * np.exp(-1j * alpha * times)
                    + math.sqrt(3) * pump * np.exp(-1j * (2 * alpha + delta2 - delta1) * times)
                )
                H[:, 2, 3] = h23
                H[:, 3, 2] = h23.conj()

        H[:, 0, 1] = h01
        H[:, 1, 0] = np.conj(h01)
        H[:, 1, 2] = h12
        H[:, 2, 1] = np.conj(h12)
        if auxiliary is not None:
            H[:, 0, 2] = 0.5 * auxiliary
            H[:, 2, 0] = 0.5 * np.conj(auxiliary)
        return H

    @classmethod
    def hamiltonian_series(cls, model: SystemModel, waveform: Waveform) -> np.ndarray:
        """H at every waveform sample, shape (samples, dims, dims)."""
        return cls._assemble(
            model, waveform.times, waveform.pump, waveform.stokes, waveform.auxiliary, waveform.detunings
        )

    @classmethod
    def build_hamiltonian(cls, model: SystemModel, waveform: Waveform, t: float) -> Operator:
        """H(t), with the drives linearly interpolated between samples."""
        if not -1e-12 <= t <= waveform.duration * (1 + 1e-12):
            raise ValidationError(f"Time {t} outside the waveform span [0, {waveform.duration}].")
        times = waveform.times

        def sample(channel):
            if channel is None:
                return None
            return np.array([np.interp(t, times, channel.real) + 1j * np.interp(t, times, channel.imag)])

        H = cls._assemble(
            model,
            np.array([float(t)]),
            sample(waveform.pump),
            sample(waveform.stokes),
            sample(waveform.auxiliary),
            waveform.detunings,
        )
        return Operator(H[0])

    @classmethod
    def collapse_operators(cls, model: SystemModel):
        """
        Relaxation 1->0 and 2->1 plus pure dephasing of |1> and |2>; |3> is not dissipated.
        """
        if not model.decoherence:
            return []
        d = model.dims
        gamma_1, gamma_2 = model.dephasing_rates
        operators = [
            math.sqrt(1.0 / model.t1_10) * StateService.ket_bra(0, 1, d),
            math.sqrt(1.0 / model.t1_21) * StateService.ket_bra(1, 2, d),
        ]
        if gamma_1 > 0:
            operators.append(math.sqrt(gamma_1) * StateService.ket_bra(1, 1, d))
        if gamma_2 > 0:
            operators.append(math.sqrt(gamma_2) * StateService.ket_bra(2, 2, d))
        return operators

    @classmethod
    def dissipator(cls, model: SystemModel) -> np.ndarray:
        """
        Superoperator sum_k D[L_k] acting on row-major vec(rho).
        """
        d = model.dims
        identity = np.eye(d)
        superop = np.zeros((d * d, d * d), dtype=complex)
        for L in cls.collapse_operators(model):
            LdL = L.conj().T @ L
            superop += np.kron(L, L.conj()) - 0.5 * (np.kron(LdL, identity) + np.kron(identity, LdL.T))
        return superop


class EvolutionService:
    """Closed and open evolution with RK4 steps of 2 dt over the sampled drives."""

    MAX_PHASE_PER_STEP = 0.05

    @classmethod
    def max_dt(cls, model: SystemModel, waveform: Waveform) -> float:
        """Largest sample spacing for which the step guard holds."""
        peak = float(np.max(np.linalg.norm(HamiltonianService.hamiltonian_series(model, waveform), ord=2, axis=(1, 2))))
        return math.inf if peak == 0 else cls.MAX_PHASE_PER_STEP / (2 * peak)

    @classmethod
    def sample(cls, model: SystemModel, build, duration, dt) -> Waveform:
        """
        Build a waveform on the grid of spacing dt over [0, duration], refining
        the grid once if the drives are too strong for the step guard.

        Args:
            build: callable TimeGrid -> Waveform
        """
        grid = TimeGrid.for_duration(duration, dt)
        waveform = build(grid)
        limit = cls.max_dt(model, waveform)
        if grid.dt > limit:
            grid = TimeGrid.for_duration(duration, 0.95 * limit)
            logger.debug(f"Refined sample spacing to {grid.dt:.4g} ns for peak drive {waveform.peak_amplitude:.3f} rad/ns")
            waveform = build(grid)
        return waveform

    @classmethod
    def _series(cls, model, waveform):
        if waveform.samples % 2 == 0:
            raise ValidationError(
                f"Waveform needs an odd sample count for 2 dt steps, got {waveform.samples}."
            )
        series = HamiltonianService.hamiltonian_series(model, waveform)
        step = 2 * waveform.dt
        peak = float(np.max(np.linalg.norm(series, ord=2, axis=(1, 2))))
        if peak * step > cls.MAX_PHASE_PER_STEP:
            raise IntegrationError(
                f"Step too coarse: max||H|| * 2dt = {peak * step:.3f} > {cls.MAX_PHASE_PER_STEP}; "
                f"use dt <= {cls.MAX_PHASE_PER_STEP / (2 * peak):.4g} ns."
            )
        return series, step

    @classmethod
    def _rk4(cls, y0, series, step, rhs):
        """Advance y over sample triples (k, k+1, k+2); returns the states at even samples."""
        steps = (series.shape[0] - 1) // 2
        trajectory = np.empty((steps + 1,) + y0.shape, dtype=complex)
        y = y0.astype(complex)
        trajectory[0] = y
        half = 0.5 * step
        for n in range(steps):
            H0, Hm, H1 = series[2 * n], series[2 * n + 1], series[2 * n + 2]
            k1 = rhs(y, H0)
            k2 = rhs(y + half * k1, Hm)
            k3 = rhs(y + half * k2, Hm)
            k4 = rhs(y + step * k3, H1)
            y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            trajectory[n + 1] = y
        return trajectory

    @classmethod
    def evolve_schrodinger(cls, model: SystemModel, waveform: Waveform, psi0: PureState) -> EvolutionResult:
        """Integrate i dpsi/dt = H psi without renormalization."""
        if psi0.dims != model.dims:
            raise ValidationError(f"Initial state has {psi0.dims} levels, model has {model.dims}.")
        if not psi0.is_normalized:
            raise ValidationError(f"Initial state is not normalized (norm {psi0.norm:.12f}).")
        series, step = cls._series(model, waveform)

        kets = cls._rk4(psi0.amplitudes, series, step, lambda psi, H: -1j * (H @ psi))

        populations = np.abs(kets) ** 2
        norm_defects = np.abs(populations.sum(axis=1) - 1.0)
        result = EvolutionResult(
            times=waveform.times[::2],
            populations=populations,
            trace_defects=norm_defects,
            min_eigenvalue=1.0,
            final_state=PureState(kets[-1]),
            states=kets,
        )
        logger.debug(f"Schrodinger evolution over {waveform.duration:g} ns: {result}")
        return result

    @classmethod
    def evolve_lindblad(cls, model: SystemModel, waveform: Waveform, rho0: DensityMatrix) -> EvolutionResult:
        """Integrate drho/dt = -i[H, rho] + sum_k D[L_k] rho."""
        rho0.clean()
        d = model.dims
        if rho0.dims != d:
            raise ValidationError(f"Initial density matrix has {rho0.dims} levels, model has {d}.")
        series, step = cls._series(model, waveform)
        superop = HamiltonianService.dissipator(model)

        def rhs(rho, H):
            commutator = H @ rho - rho @ H
            return -1j * commutator + (superop @ rho.reshape(-1)).reshape(d, d)

        rhos = cls._rk4(rho0.elements, series, step, rhs)

        populations = np.real(np.diagonal(rhos, axis1=1, axis2=2))
        trace_defects = np.abs(np.trace(rhos, axis1=1, axis2=2) - 1.0)
        hermitian = 0.5 * (rhos + np.conj(np.transpose(rhos, (0, 2, 1))))
        min_eigenvalue = float(np.min(np.linalg.eigvalsh(hermitian)[:, 0]))
        result = EvolutionResult(
            times=waveform.times[::2],
            populations=populations,
            trace_defects=trace_defects,
            min_eigenvalue=min_eigenvalue,
            final_state=DensityMatrix(rhos[-1]),
        )
        logger.debug(f"Lindblad evolution over {waveform.duration:g} ns: {result}")
        return result

    @classmethod
    def passage_consistency(cls, spec: PassageSpec, grid, waveform: Waveform = None) -> float:
        """
        Max infidelity between the closed three-level evolution started in the
        passage's initial state and the passage itself, over the step times.
        """
        if waveform is None:
            waveform = PassageService.synthesize_pulses(spec, grid)
        model = SystemModel.ideal()
        psi0 = PassageService.evaluate_passage(spec, 0.0)
        result = cls.evolve_schrodinger(model, waveform, psi0)
        targets = PassageService.passage_states(spec, np.minimum(result.times, spec.duration))
        overlaps = np.abs(np.sum(targets.conj() * result.states, axis=1)) ** 2
        norms = np.sum(np.abs(result.states) ** 2, axis=1)
        worst = float(np.max(1.0 - np.minimum(1.0, overlaps / norms)))
        logger.info(f"Passage consistency for {spec}: max infidelity {worst:.3e}")
        return worst

    @classmethod
    def terminal_oscillation(cls, result: EvolutionResult, alpha: float, fraction: float = 0.2) -> float:
        """
        Peak-to-trough of the |2> population in the final window, after removing
        its moving average over one anharmonicity period.
        """
        if not 0 < fraction <= 1:
            raise ValidationError(f"Window fraction must lie in (0, 1], got {fraction}.")
        p2 = result.populations[:, 2]
        dt = result.times[1] - result.times[0]
        width = max(1, int(round(2 * math.pi / abs(alpha) / dt))) if alpha else 1
        residual = p2 - uniform_filter1d(p2, size=width, mode="nearest")
        start = int(math.floor((1 - fraction) * p2.shape[0]))
        stop = max(start + 1, p2.shape[0] - width // 2)
        window = residual[start:stop]
        return float(np.max(window) - np.min(window))
