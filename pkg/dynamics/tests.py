import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from core.formats import read_csv
from passage.models import GShape, PassageSpec, TimeGrid, Waveform
from passage.services import PassageService
from qstate.models import DensityMatrix, PureState
from qstate.services import StateService
from .models import EvolutionResult, SystemModel
from .serializers import EVOLUTION_COLUMNS, SystemModelSerializer, write_evolution_csv
from .services import EvolutionService, HamiltonianService, IntegrationError

MHZ = 2 * math.pi * 1e-3


def constant_waveform(grid, pump, stokes, detunings=(0.0, 0.0), auxiliary=None):
    return Waveform(
        dt=grid.dt,
        pump=np.full(grid.samples, pump, dtype=complex),
        stokes=np.full(grid.samples, stokes, dtype=complex),
        detunings=detunings,
        auxiliary=auxiliary,
    )


def stirup_spec(shape, duration):
    return PassageSpec(duration=duration, g_shape=shape)


class SystemModelTests(SimpleTestCase):

    def test_reference_device(self):
        model = SystemModel.from_settings()
        self.assertAlmostEqual(model.alpha, 2 * math.pi * (4.958 - 5.208), places=12)
        self.assertLess(model.alpha, 0)

    def test_dephasing_rates_reproduce_coherence_times(self):
        model = SystemModel.from_settings()
        gamma_1, gamma_2 = model.dephasing_rates
        self.assertAlmostEqual(0.5 / model.t1_10 + 0.5 * gamma_1, 1 / model.t2_10, places=15)
        self.assertAlmostEqual(
            0.5 * (1 / model.t1_10 + 1 / model.t1_21 + gamma_1 + gamma_2), 1 / model.t2_21, places=15
        )
        self.assertGreater(gamma_1, 0)
        self.assertGreater(gamma_2, 0)

    def test_coherence_bound(self):
        with self.assertRaises(ValidationError):
            SystemModel.from_settings(t2_10=10000.0)

    def test_leakage_needs_four_levels(self):
        with self.assertRaises(ValidationError):
            SystemModel.from_settings(dims=3, include_leakage=True)

    def test_serializer_rejects_inconsistent_device(self):
        data = dict(SystemModel.from_settings().__dict__)
        data["t2_21"] = 20000.0
        serializer = SystemModelSerializer(data=data)
        self.assertFalse(serializer.is_valid())
        self.assertIn("system", serializer.errors)

    def test_serializer_builds_model(self):
        serializer = SystemModelSerializer(data={**SystemModel.from_settings().__dict__, "dims": 3, "include_leakage": False})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.build_model().dims, 3)


class HamiltonianTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.for_duration(10.0, 0.1)

    def test_no_drive_is_zero(self):
        H = HamiltonianService.build_hamiltonian(SystemModel.from_settings(), Waveform.zeros(self.grid), 3.0)
        self.assertEqual(float(np.max(np.abs(H.elements))), 0.0)

    def test_ideal_three_level(self):
        omega0 = 0.3
        waveform = constant_waveform(self.grid, omega0, omega0)
        H = HamiltonianService.build_hamiltonian(SystemModel.ideal(), waveform, 4.2)
        expected = 0.5 * omega0 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_allclose(H.elements, expected, atol=1e-15)

    def test_leakage_coupling(self):
        pump, stokes, t = 0.2, 0.1, 3.0
        model = SystemModel.from_settings(decoherence=False)
        alpha = model.alpha
        H = HamiltonianService.build_hamiltonian(model, constant_waveform(self.grid, pump, stokes), t)
        expected = 0.5 * (
            (math.sqrt(6) / 2) * stokes * np.exp(-1j * alpha * t) + math.sqrt(3) * pump * np.exp(-2j * alpha * t)
        )
        self.assertAlmostEqual(H.elements[2, 3], expected, places=14)

    def test_detuning_diagonal(self):
        model = SystemModel.from_settings()
        waveform = Waveform.zeros(self.grid, detunings=(0.1, 0.02))
        H = HamiltonianService.build_hamiltonian(model, waveform, 1.0)
        np.testing.assert_allclose(np.diag(H.elements).real, [0.0, -0.1, -0.12, -0.14], atol=1e-15)

    @given(
        st.floats(min_value=-1, max_value=1),
        st.floats(min_value=-1, max_value=1),
        st.floats(min_value=-0.1, max_value=0.1),
        st.floats(min_value=0, max_value=10),
    )
    @settings(max_examples=30, deadline=None)
    def test_hermitian(self, pump, stokes, delta, t):
        waveform = constant_waveform(
            self.grid, pump * (1 + 0.5j), stokes, detunings=(delta, -2 * delta),
            auxiliary=np.full(self.grid.samples, 0.3j),
        )
        H = HamiltonianService.build_hamiltonian(SystemModel.from_settings(), waveform, t)
        self.assertTrue(H.is_hermitian)

    def test_outside_span(self):
        with self.assertRaises(ValidationError):
            HamiltonianService.build_hamiltonian(SystemModel.ideal(), Waveform.zeros(self.grid), 11.0)

    def test_collapse_operators(self):
        model = SystemModel.from_settings()
        self.assertEqual(len(HamiltonianService.collapse_operators(model)), 4)
        self.assertEqual(HamiltonianService.collapse_operators(model.closed()), [])


class SchrodingerTests(SimpleTestCase):

    def test_no_drive_keeps_populations(self):
        grid = TimeGrid.for_duration(20.0, 0.5)
        psi0 = StateService.normalize(PureState([1, 1j, 0.5]))
        result = EvolutionService.evolve_schrodinger(SystemModel.ideal(), Waveform.zeros(grid), psi0)
        np.testing.assert_allclose(result.populations, np.tile(StateService.populations(psi0), (21, 1)), atol=1e-15)

    def test_pi_pulse_inverts(self):
        omega = 0.5
        grid = TimeGrid.for_duration(math.pi / omega, 0.01)
        result = EvolutionService.evolve_schrodinger(
            SystemModel.ideal(), constant_waveform(grid, omega, 0.0), PureState.basis(0)
        )
        self.assertAlmostEqual(result.populations[-1, 1], 1.0, delta=1e-8)

    def test_norm_preserved(self):
        spec = stirup_spec(GShape(GShape.VARIANT_CONSTANT, 20 * MHZ), 50.0)
        waveform = PassageService.synthesize_pulses(spec, TimeGrid.for_duration(50.0, 0.01))
        result = EvolutionService.evolve_schrodinger(
            SystemModel.from_settings(decoherence=False), waveform, PureState.basis(0, 4)
        )
        self.assertLess(result.trace_defect, 1e-9)

    def test_fourth_order_convergence(self):
        spec = stirup_spec(GShape(GShape.VARIANT_CONSTANT, 0.5), 20.0)
        exact = PassageService.evaluate_passage(spec, 20.0).amplitudes
        psi0 = PassageService.evaluate_passage(spec, 0.0)

        def final_error(dt):
            grid = TimeGrid.for_duration(20.0, dt)
            waveform = PassageService.synthesize_pulses(spec, grid)
            result = EvolutionService.evolve_schrodinger(SystemModel.ideal(), waveform, psi0)
            return np.linalg.norm(result.final_state.amplitudes - exact)

        ratio = final_error(0.04) / final_error(0.02)
        self.assertGreater(ratio, 12)
        self.assertLess(ratio, 20)

    def test_step_guard(self):
        grid = TimeGrid.for_duration(1.0, 0.05)
        with self.assertRaises(IntegrationError):
            EvolutionService.evolve_schrodinger(
                SystemModel.ideal(), constant_waveform(grid, 5.0, 5.0), PureState.basis(0)
            )

    def test_even_sample_count(self):
        waveform = Waveform(dt=0.1, pump=np.zeros(10), stokes=np.zeros(10))
        with self.assertRaises(ValidationError):
            EvolutionService.evolve_schrodinger(SystemModel.ideal(), waveform, PureState.basis(0))

    def test_leakage_scales_quadratically(self):
        grid = TimeGrid.for_duration(20.0, 0.01)
        model = SystemModel.from_settings(decoherence=False)

        def max_p3(pump):
            result = EvolutionService.evolve_schrodinger(
                model, constant_waveform(grid, pump, 0.0), PureState.basis(2, 4)
            )
            return result.max_p3

        ratio = max_p3(0.02) / max_p3(0.01)
        self.assertGreater(ratio, 3.6)
        self.assertLess(ratio, 4.4)


class PassageConsistencyTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.for_duration(50.0, 0.02)

    def test_all_shapes_track_the_passage(self):
        for shape in (
            GShape(GShape.VARIANT_CONSTANT, 0.2),
            GShape(GShape.VARIANT_GAUSS_BUMP, 0.2, A=2.0, B=5.0),
            GShape(GShape.VARIANT_HYPER_GAUSS_BUMP, 0.2, A=1.0, B=4.0),
        ):
            with self.subTest(variant=shape.variant):
                infidelity = EvolutionService.passage_consistency(stirup_spec(shape, 50.0), self.grid)
                self.assertLessEqual(infidelity, 1e-6)

    def test_corrupted_pump_is_detected(self):
        spec = stirup_spec(GShape(GShape.VARIANT_CONSTANT, 0.2), 50.0)
        waveform = PassageService.synthesize_pulses(spec, self.grid)
        corrupted = Waveform(dt=waveform.dt, pump=1.05 * waveform.pump, stokes=waveform.stokes)
        self.assertGreaterEqual(EvolutionService.passage_consistency(spec, self.grid, corrupted), 1e-3)

    def test_complex_phase_branch(self):
        spec = PassageSpec(
            duration=20.0,
            g_shape=GShape(GShape.VARIANT_CONSTANT, 0.5),
            phi2_shape=PassageSpec.PHASE_SINE_SQUARED,
            phi2_amplitude=0.01,
        )
        infidelity = EvolutionService.passage_consistency(spec, TimeGrid.for_duration(20.0, 0.005))
        self.assertLessEqual(infidelity, 1e-6)


class LindbladTests(SimpleTestCase):

    def setUp(self):
        self.model = SystemModel.from_settings(dims=3, include_leakage=False)
        self.idle = Waveform.zeros(TimeGrid.for_duration(2000.0, 1.0))

    def test_relaxation_of_first_excited_state(self):
        rho0 = DensityMatrix(np.diag([0.0, 1.0, 0.0]))
        result = EvolutionService.evolve_lindblad(self.model, self.idle, rho0)
        expected = math.exp(-2000.0 / 4820.0)
        self.assertAlmostEqual(result.populations[-1, 1] / expected, 1.0, delta=5e-3)

    def test_coherence_decay(self):
        plus = StateService.normalize(PureState([1, 1, 0]))
        result = EvolutionService.evolve_lindblad(self.model, self.idle, DensityMatrix.from_pure(plus))
        coherence = abs(result.final_state.elements[0, 1])
        self.assertAlmostEqual(coherence / (0.5 * math.exp(-2000.0 / 5060.0)), 1.0, delta=1e-2)

    def test_ground_state_is_stationary(self):
        result = EvolutionService.evolve_lindblad(self.model, self.idle, DensityMatrix(np.diag([1.0, 0.0, 0.0])))
        np.testing.assert_allclose(result.populations[:, 0], 1.0, atol=1e-15)

    def test_invalid_initial_state(self):
        with self.assertRaises(ValidationError):
            EvolutionService.evolve_lindblad(self.model, self.idle, DensityMatrix(np.diag([0.5, 0.2, 0.2])))

    def test_closed_limit_matches_schrodinger(self):
        spec = stirup_spec(GShape(GShape.VARIANT_CONSTANT, 20 * MHZ), 30.0)
        waveform = PassageService.synthesize_pulses(spec, TimeGrid.for_duration(30.0, 0.02))
        model = SystemModel.from_settings(decoherence=False)
        psi0 = PureState.basis(0, 4)
        closed = EvolutionService.evolve_schrodinger(model, waveform, psi0)
        mixed = EvolutionService.evolve_lindblad(model, waveform, DensityMatrix.from_pure(psi0))
        np.testing.assert_allclose(mixed.populations, closed.populations, atol=1e-7)

    def test_trace_and_positivity(self):
        spec = stirup_spec(GShape(GShape.VARIANT_CONSTANT, 20 * MHZ), 50.0)
        waveform = PassageService.synthesize_pulses(spec, TimeGrid.for_duration(50.0, 0.02))
        result = EvolutionService.evolve_lindblad(
            SystemModel.from_settings(), waveform, DensityMatrix.from_pure(PureState.basis(0, 4))
        )
        self.assertLessEqual(result.trace_defect, 1e-6)
        self.assertGreaterEqual(result.min_eigenvalue, -1e-6)
        np.testing.assert_allclose(result.populations.sum(axis=1), 1.0, atol=1e-6)


class TerminalOscillationTests(SimpleTestCase):

    def _result(self, p2):
        times = np.arange(p2.shape[0]) * 0.04
        populations = np.zeros((p2.shape[0], 3))
        populations[:, 2] = p2
        populations[:, 0] = 1 - p2
        return EvolutionResult(
            times=times, populations=populations, trace_defects=np.zeros_like(p2),
            min_eigenvalue=1.0, final_state=None,
        )

    def test_oscillation_amplitude(self):
        alpha = -math.pi / 2
        t = np.arange(2501) * 0.04
        p2 = 0.8 + 0.001 * t + 0.005 * np.sin(abs(alpha) * t)
        value = EvolutionService.terminal_oscillation(self._result(p2), alpha)
        self.assertAlmostEqual(value, 0.01, delta=1e-3)

    def test_smooth_rise_has_no_oscillation(self):
        t = np.arange(2501) * 0.04
        value = EvolutionService.terminal_oscillation(self._result(0.5 + 0.004 * t), -math.pi / 2)
        self.assertLess(value, 1e-12)


class CrossingTimeTests(SimpleTestCase):

    _result = TerminalOscillationTests._result

    def test_first_crossing_is_interpolated(self):
        t = np.arange(101) * 0.04
        result = self._result(t / 4)
        self.assertAlmostEqual(result.crossing_time(0.5), 2.0, places=12)
        self.assertAlmostEqual(result.population_at(3.0), 0.75, places=12)

    def test_later_dips_do_not_move_the_crossing(self):
        p2 = np.array([0.0, 0.5, 1.0, 0.2, 1.0])
        self.assertAlmostEqual(self._result(p2).crossing_time(0.75), 0.06, places=12)

    def test_never_reached(self):
        self.assertIsNone(self._result(np.full(11, 0.3)).crossing_time(0.96))

    def test_time_outside_window(self):
        with self.assertRaises(ValidationError):
            self._result(np.zeros(11)).population_at(1.0)


class EvolutionExportTests(SimpleTestCase):

    def test_three_level_csv_has_zero_leakage_column(self):
        grid = TimeGrid.for_duration(4.0, 1.0)
        result = EvolutionService.evolve_schrodinger(SystemModel.ideal(), Waveform.zeros(grid), PureState.basis(1))
        with tempfile.TemporaryDirectory() as tmp:
            header, rows = read_csv(write_evolution_csv(Path(tmp) / "evolution.csv", result))
        self.assertEqual(header, EVOLUTION_COLUMNS)
        self.assertEqual(rows[0], [0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        self.assertEqual(len(rows), 3)


class SamplingTests(SimpleTestCase):

    @staticmethod
    def _constant(amplitude):
        def build(grid):
            return Waveform(dt=grid.dt, pump=np.full(grid.samples, amplitude), stokes=np.zeros(grid.samples))
        return build

    def test_strong_drive_is_refined(self):
        model = SystemModel.ideal()
        build = self._constant(1.0)
        with self.assertRaises(IntegrationError):
            EvolutionService.evolve_schrodinger(model, build(TimeGrid.for_duration(10.0, 0.1)), PureState.basis(0))
        waveform = EvolutionService.sample(model, build, 10.0, 0.1)
        self.assertEqual(waveform.samples % 2, 1)
        self.assertLessEqual(waveform.dt, EvolutionService.max_dt(model, waveform))
        result = EvolutionService.evolve_schrodinger(model, waveform, PureState.basis(0))
        self.assertAlmostEqual(float(result.populations[-1].sum()), 1.0, places=6)

    def test_weak_drive_keeps_grid(self):
        waveform = EvolutionService.sample(SystemModel.ideal(), self._constant(0.01), 10.0, 0.1)
        self.assertAlmostEqual(waveform.dt, 0.1)
        self.assertEqual(waveform.samples, 101)
