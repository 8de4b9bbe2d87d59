import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from core.formats import read_csv
from qstate.models import PureState
from qstate.services import StateService
from .models import GShape, MixingAngle, PassageSpec, TimeGrid, Waveform
from .serializers import WAVEFORM_COLUMNS, write_waveform_csv
from .services import BaselineService, PassageService, fourth_order_derivative

MHZ = 2 * math.pi * 1e-3


def constant_spec(omega0=20 * MHZ, duration=50.0):
    return PassageSpec(duration=duration, g_shape=GShape(GShape.VARIANT_CONSTANT, omega0))


class TimeGridTests(SimpleTestCase):

    def test_for_duration_keeps_requested_spacing(self):
        grid = TimeGrid.for_duration(50.0, 0.02)
        self.assertEqual(grid.samples, 2501)
        self.assertAlmostEqual(grid.dt, 0.02, places=12)
        self.assertEqual(grid.times[-1], 50.0)

    def test_rounds_up_to_even_interval_count(self):
        grid = TimeGrid.for_duration(1.0, 0.3)
        self.assertEqual(grid.samples % 2, 1)
        self.assertLessEqual(grid.dt, 0.3)

    def test_even_sample_count_rejected(self):
        with self.assertRaises(ValidationError):
            TimeGrid(duration=1.0, samples=10)


class BetaSigmoidTests(SimpleTestCase):

    def test_midpoint(self):
        self.assertAlmostEqual(float(PassageService.beta_sigmoid(25.0, 50.0)), math.pi / 4, places=15)

    def test_start_value(self):
        self.assertAlmostEqual(float(PassageService.beta_sigmoid(0.0, 50.0)), 0.010513, places=6)

    def test_midpoint_derivative(self):
        T = 40.0
        self.assertAlmostEqual(
            float(PassageService.beta_sigmoid_derivative(T / 2, T)), 5 * math.pi / (4 * T), places=14
        )

    def test_derivatives_match_finite_differences(self):
        T = 30.0
        t = np.linspace(0, T, 3001)
        beta = PassageService.beta_sigmoid(t, T)
        beta_dot = PassageService.beta_sigmoid_derivative(t, T)
        np.testing.assert_allclose(fourth_order_derivative(beta, t[1]), beta_dot, atol=1e-9)
        np.testing.assert_allclose(
            fourth_order_derivative(beta_dot, t[1]),
            PassageService.beta_sigmoid_second_derivative(t, T),
            atol=1e-9,
        )

    def test_strictly_increasing(self):
        beta = PassageService.beta_sigmoid(np.linspace(0, 10, 101), 10.0)
        self.assertTrue(np.all(np.diff(beta) > 0))

    def test_non_positive_duration(self):
        with self.assertRaises(ValidationError):
            PassageService.beta_sigmoid(0.0, 0.0)


class FourthOrderDerivativeTests(SimpleTestCase):

    def test_sine(self):
        t = np.linspace(0, 2 * math.pi, 629)
        dt = t[1] - t[0]
        np.testing.assert_allclose(fourth_order_derivative(np.sin(t), dt), np.cos(t), atol=1e-7)

    def test_too_few_samples(self):
        with self.assertRaises(ValidationError):
            fourth_order_derivative([0.0, 1.0, 2.0], 1.0)


class PassageSpecTests(SimpleTestCase):

    def test_sigmoid_passage_is_valid(self):
        self.assertEqual(constant_spec().violations(), [])

    def test_unknown_phase_curve_listed(self):
        spec = PassageSpec(duration=50.0, g_shape=GShape(GShape.VARIANT_CONSTANT, 0.1), phi2_shape="chirp")
        with self.assertRaises(ValidationError) as caught:
            spec.clean()
        self.assertIn("chirp", str(caught.exception))

    def test_negative_bump_amplitude(self):
        with self.assertRaises(ValidationError):
            GShape(GShape.VARIANT_GAUSS_BUMP, 0.1, A=-1.0)

    def test_hyper_gaussian_window(self):
        shape = GShape(GShape.VARIANT_HYPER_GAUSS_BUMP, 1.0, A=0.0)
        self.assertAlmostEqual(float(shape.evaluate(0.0, 10.0)), math.exp(-1), places=14)
        self.assertAlmostEqual(float(shape.evaluate(5.0, 10.0)), 1.0, places=14)


class GammaProfileTests(SimpleTestCase):

    def test_constant_midpoint(self):
        omega0, T = 0.2, 40.0
        spec = constant_spec(omega0, T)
        grid = TimeGrid.for_duration(T, 0.1)
        gamma, gamma_dot = PassageService.gamma_profile(spec, grid)
        middle = grid.samples // 2
        self.assertAlmostEqual(gamma[middle], math.atan(5 * math.pi / (4 * T * omega0)), places=14)
        self.assertAlmostEqual(gamma_dot[middle], 0.0, places=14)

    def test_large_bump_suppresses_midpoint(self):
        T = 40.0
        spec = PassageSpec(duration=T, g_shape=GShape(GShape.VARIANT_GAUSS_BUMP, 0.2, A=1e6))
        gamma, _ = PassageService.gamma_profile(spec, TimeGrid.for_duration(T, 0.1))
        self.assertLess(gamma[gamma.shape[0] // 2], 1e-6)

    def test_analytic_gamma_dot_matches_numeric(self):
        T = 40.0
        spec = PassageSpec(duration=T, g_shape=GShape(GShape.VARIANT_GAUSS_BUMP, 0.2, A=1.5, B=5.0))
        grid = TimeGrid.for_duration(T, 0.01)
        gamma, gamma_dot = PassageService.gamma_profile(spec, grid)
        np.testing.assert_allclose(fourth_order_derivative(gamma, grid.dt), gamma_dot, atol=1e-8)


class SynthesizePulsesTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.for_duration(50.0, 0.02)

    def _identity_check(self, spec):
        waveform = PassageService.synthesize_pulses(spec, self.grid)
        times = self.grid.times
        _, gamma_dot = PassageService.gamma_profile(spec, self.grid)
        g_values = spec.g_shape.evaluate(times, spec.duration)
        lhs = np.abs(waveform.pump) ** 2 + np.abs(waveform.stokes) ** 2
        np.testing.assert_allclose(lhs, 4 * (g_values ** 2 + gamma_dot ** 2), rtol=1e-10)
        self.assertTrue(np.all(np.isfinite(waveform.pump)))
        self.assertTrue(np.all(np.isfinite(waveform.stokes)))

    def test_quadrature_identity_all_shapes(self):
        for shape in (
            GShape(GShape.VARIANT_CONSTANT, 20 * MHZ),
            GShape(GShape.VARIANT_GAUSS_BUMP, 20 * MHZ, A=1.0, B=4.0),
            GShape(GShape.VARIANT_HYPER_GAUSS_BUMP, 20 * MHZ, A=1.0, B=4.0),
        ):
            with self.subTest(variant=shape.variant):
                self._identity_check(PassageSpec(duration=50.0, g_shape=shape))

    def test_midpoint_of_constant_shape(self):
        omega0 = 20 * MHZ
        waveform = PassageService.synthesize_pulses(constant_spec(omega0), self.grid)
        middle = self.grid.samples // 2
        self.assertAlmostEqual(waveform.pump[middle].real, 2 * omega0 * math.sin(math.pi / 4), places=12)
        self.assertAlmostEqual(waveform.stokes[middle].real, 2 * omega0 * math.cos(math.pi / 4), places=12)

    def test_real_branch_has_no_imaginary_part(self):
        waveform = PassageService.synthesize_pulses(constant_spec(), self.grid)
        self.assertEqual(float(np.max(np.abs(waveform.pump.imag))), 0.0)
        self.assertIsNone(waveform.auxiliary)

    def test_constant_phase_rotates_drives(self):
        real = PassageService.synthesize_pulses(constant_spec(), self.grid)
        shifted_spec = PassageSpec(
            duration=50.0, g_shape=GShape(GShape.VARIANT_CONSTANT, 20 * MHZ), phi_offset=0.3
        )
        shifted = PassageService.synthesize_pulses(shifted_spec, self.grid)
        np.testing.assert_allclose(shifted.pump, real.pump * np.exp(-0.3j), atol=1e-13)
        np.testing.assert_allclose(shifted.stokes, real.stokes * np.exp(0.3j), atol=1e-13)

    def test_grid_must_span_passage(self):
        with self.assertRaises(ValidationError):
            PassageService.synthesize_pulses(constant_spec(duration=40.0), self.grid)


class DarkStateTests(SimpleTestCase):

    def test_limits(self):
        self.assertAlmostEqual(
            StateService.fidelity(PassageService.dark_state(MixingAngle(0.0)), PureState.basis(0)), 1.0
        )
        self.assertAlmostEqual(
            StateService.fidelity(PassageService.dark_state(MixingAngle(math.pi / 2)), PureState.basis(2)), 1.0
        )

    def test_equal_weights(self):
        state = PassageService.dark_state(MixingAngle(math.pi / 4))
        np.testing.assert_allclose(StateService.populations(state), [0.5, 0.0, 0.5], atol=1e-15)

    @given(st.floats(min_value=0.01, max_value=1.0), st.floats(min_value=0.01, max_value=1.0))
    @settings(max_examples=30, deadline=None)
    def test_annihilated_by_drive(self, pump, stokes):
        theta = math.atan2(pump, stokes)
        h0 = 0.5 * np.array([[0, pump, 0], [pump, 0, stokes], [0, stokes, 0]])
        state = PassageService.dark_state(MixingAngle(theta))
        self.assertLess(float(np.max(np.abs(h0 @ state.amplitudes))), 1e-14)


class EvaluatePassageTests(SimpleTestCase):

    def setUp(self):
        self.spec = constant_spec(omega0=1.0, duration=100.0)

    def test_starts_near_ground_state(self):
        state = PassageService.evaluate_passage(self.spec, 0.0)
        self.assertGreaterEqual(StateService.fidelity(state, PureState.basis(0)), 0.9998)

    def test_ends_near_target(self):
        state = PassageService.evaluate_passage(self.spec, 100.0)
        self.assertGreaterEqual(StateService.population(state, 2), 0.9998)

    def test_boundary_infidelity(self):
        state = PassageService.evaluate_passage(self.spec, 0.0)
        self.assertAlmostEqual(
            PassageService.boundary_infidelity(self.spec),
            1 - StateService.fidelity(state, PureState.basis(0)),
            places=14,
        )

    @given(st.floats(min_value=0.0, max_value=100.0))
    @settings(max_examples=30, deadline=None)
    def test_intermediate_population(self, t):
        state = PassageService.evaluate_passage(self.spec, t)
        gamma = float(PassageService.gamma_at(self.spec, t))
        self.assertTrue(state.is_normalized)
        self.assertAlmostEqual(StateService.population(state, 1), math.sin(gamma) ** 2, places=14)

    def test_outside_window(self):
        with self.assertRaises(ValidationError):
            PassageService.evaluate_passage(self.spec, 101.0)


class IntermediatePopulationProfileTests(SimpleTestCase):

    def test_peak_at_midpoint_for_constant_shape(self):
        grid = TimeGrid.for_duration(50.0, 0.05)
        profile = PassageService.intermediate_population_profile(constant_spec(), grid)
        self.assertEqual(int(np.argmax(profile)), grid.samples // 2)
        self.assertLess(profile[0], 1e-2 * profile.max())

    def test_bump_lowers_profile_pointwise(self):
        grid = TimeGrid.for_duration(50.0, 0.05)
        flat = PassageSpec(duration=50.0, g_shape=GShape(GShape.VARIANT_GAUSS_BUMP, 0.1, A=0.5))
        bumped = PassageSpec(duration=50.0, g_shape=GShape(GShape.VARIANT_GAUSS_BUMP, 0.1, A=2.0))
        lower = PassageService.intermediate_population_profile(bumped, grid)
        higher = PassageService.intermediate_population_profile(flat, grid)
        self.assertTrue(np.all(lower < higher))


class StirapWaveformTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.for_duration(150.0, 0.05)
        self.waveform = BaselineService.stirap_waveform(20 * MHZ, 150.0, self.grid)

    def test_symmetric_crossing(self):
        middle = self.grid.samples // 2
        self.assertAlmostEqual(abs(self.waveform.pump[middle]), abs(self.waveform.stokes[middle]), places=15)

    def test_counterintuitive_order(self):
        theta = PassageService.mixing_angle(self.waveform)
        self.assertLess(theta[0], 1e-3)
        self.assertGreater(theta[-1], math.pi / 2 - 1e-3)

    def test_parameter_validation(self):
        with self.assertRaises(ValidationError):
            BaselineService.stirap_waveform(0.1, 150.0, self.grid, sigma=0.0)
        with self.assertRaises(ValidationError):
            BaselineService.stirap_waveform(0.1, 150.0, self.grid, delay=75.0)


class RrWaveformTests(SimpleTestCase):

    def test_each_half_is_a_pi_pulse(self):
        grid = TimeGrid.for_duration(40.0, 0.02)
        waveform = BaselineService.rr_waveform(20 * MHZ, 40.0, grid)
        times = grid.times
        middle = grid.samples // 2
        self.assertAlmostEqual(trapezoid(waveform.pump.real[: middle + 1], times[: middle + 1]), math.pi, places=9)
        self.assertAlmostEqual(trapezoid(waveform.stokes.real[middle:], times[middle:]), math.pi, places=9)
        self.assertFalse(np.any(waveform.pump[middle + 1:]))
        self.assertFalse(np.any(waveform.stokes[:middle]))


class CounterdiabaticWaveformTests(SimpleTestCase):

    def test_auxiliary_integrates_to_mixing_angle_change(self):
        grid = TimeGrid.for_duration(150.0, 0.05)
        stirap = BaselineService.stirap_waveform(20 * MHZ, 150.0, grid)
        waveform = BaselineService.counterdiabatic_waveform(stirap, grid)
        theta = PassageService.mixing_angle(stirap)
        self.assertEqual(float(np.max(np.abs(waveform.auxiliary.real))), 0.0)
        area = trapezoid(waveform.auxiliary.imag, grid.times) / 2
        self.assertAlmostEqual(area, theta[-1] - theta[0], delta=1e-4)

    def test_constant_mixing_angle_has_no_correction(self):
        grid = TimeGrid.for_duration(10.0, 0.1)
        flat = Waveform(dt=grid.dt, pump=np.full(grid.samples, 0.1), stokes=np.full(grid.samples, 0.2))
        waveform = BaselineService.counterdiabatic_waveform(flat, grid)
        np.testing.assert_allclose(waveform.auxiliary, 0.0, atol=1e-15)

    def test_needs_both_drives(self):
        grid = TimeGrid.for_duration(10.0, 0.1)
        with self.assertRaises(ValidationError):
            BaselineService.counterdiabatic_waveform(Waveform.zeros(grid), grid)


class DragCorrectTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.for_duration(10.0, 0.1)
        self.alpha = -1.5708

    def test_zero_coefficients_are_identity(self):
        waveform = PassageService.synthesize_pulses(constant_spec(duration=10.0), self.grid)
        corrected = BaselineService.drag_correct(waveform, self.alpha, 0.0, 0.0)
        np.testing.assert_array_equal(corrected.pump, waveform.pump)
        np.testing.assert_array_equal(corrected.stokes, waveform.stokes)

    def test_linear_ramp(self):
        ramp = Waveform(dt=self.grid.dt, pump=self.grid.times, stokes=np.full(self.grid.samples, 0.3))
        corrected = BaselineService.drag_correct(ramp, self.alpha, 2.0, 1.0)
        np.testing.assert_allclose(corrected.pump.imag, 2.0 / self.alpha, rtol=1e-12)
        np.testing.assert_allclose(corrected.stokes.imag, 0.0, atol=1e-15)

    def test_zero_anharmonicity(self):
        with self.assertRaises(ValidationError):
            BaselineService.drag_correct(Waveform.zeros(self.grid), 0.0)


class WaveformExportTests(SimpleTestCase):

    def test_csv_layout(self):
        grid = TimeGrid.for_duration(2.0, 0.5)
        waveform = Waveform(dt=grid.dt, pump=grid.times * (1 + 1j), stokes=np.ones(grid.samples))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_waveform_csv(Path(tmp) / "waveform.csv", waveform)
            header, rows = read_csv(path)
        self.assertEqual(header, WAVEFORM_COLUMNS)
        self.assertEqual(header, ["t_ns", "reP", "imP", "reS", "imS", "reA", "imA"])
        self.assertEqual(len(rows), grid.samples)
        self.assertEqual(rows[-1], [2.0, 2.0, 2.0, 1.0, 0.0, 0.0, 0.0])

    def test_scaled_multiplies_every_channel(self):
        grid = TimeGrid.for_duration(2.0, 0.5)
        waveform = Waveform(dt=grid.dt, pump=np.ones(5), stokes=np.ones(5), auxiliary=np.ones(5) * 1j)
        scaled = waveform.scaled(1.5)
        np.testing.assert_allclose(scaled.auxiliary, 1.5j)
        self.assertEqual(scaled.peak_amplitude, 1.5)
