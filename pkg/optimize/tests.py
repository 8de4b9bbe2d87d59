import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, tag
from hypothesis import given, settings, strategies as st

from bench.models import Protocol
from bench.services import ProtocolService, SweepService
from dynamics.models import SystemModel
from dynamics.services import EvolutionService
from passage.models import Waveform, TimeGrid
from passage.services import BaselineService
from qstate.models import DensityMatrix, PureState
from .models import OptimizationProblem, OptimizationReport, TraceEntry
from .serializers import read_resolved_json, write_report_json, write_resolved_json
from .services import CalibrationService, OptimizerService, ResolutionService

MHZ = 2 * math.pi * 1e-3


def bowl(x):
    return (x[0] - 0.3) ** 2 + (x[1] + 0.2) ** 2


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


class OptimizationProblemTests(SimpleTestCase):

    def test_budget_must_allow_one_evaluation(self):
        with self.assertRaises(ValidationError):
            OptimizationProblem(names=("x",), bounds=((0, 1),), objective=sum, budget=0)

    def test_bounds_must_be_finite_and_ordered(self):
        with self.assertRaises(ValidationError):
            OptimizationProblem(names=("x",), bounds=((0, math.inf),), objective=sum, budget=5)
        with self.assertRaises(ValidationError):
            OptimizationProblem(names=("x",), bounds=((1, 1),), objective=sum, budget=5)
        with self.assertRaises(ValidationError):
            OptimizationProblem(names=("x", "y"), bounds=((0, 1),), objective=sum, budget=5)

    def test_unit_box_projection(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-2, 2), (0, 10)), objective=sum, budget=5)
        np.testing.assert_allclose(problem.to_unit((0.0, 2.5)), [0.5, 0.25])
        np.testing.assert_allclose(problem.from_unit((1.5, -0.5)), [2.0, 0.0])

    def test_report_best_is_trace_minimum(self):
        trace = [TraceEntry((0.0,), 2.0, 2.0), TraceEntry((1.0,), 1.0, 1.0)]
        with self.assertRaises(ValidationError):
            OptimizationReport(names=("x",), best_params=(0.0,), best_cost=2.0, evaluations=2, converged=True, trace=trace)


class NelderMeadTests(SimpleTestCase):

    def test_quadratic_bowl(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-1, 1), (-1, 1)), objective=bowl, budget=400)
        report = OptimizerService.nelder_mead(problem, (0.0, 0.0))
        self.assertTrue(report.converged)
        np.testing.assert_allclose(report.best_params, (0.3, -0.2), atol=1e-3)

    def test_rosenbrock(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-2, 2), (-2, 2)), objective=rosenbrock, budget=2000)
        report = OptimizerService.nelder_mead(problem, (-1.0, 1.0))
        self.assertLessEqual(report.best_cost, 1e-6)
        self.assertLessEqual(report.evaluations, 2000)

    def test_budget_is_strict(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-2, 2), (-2, 2)), objective=rosenbrock, budget=7)
        report = OptimizerService.nelder_mead(problem, (-1.0, 1.0))
        self.assertEqual(report.evaluations, 7)
        self.assertFalse(report.converged)

    def test_start_must_be_inside_bounds(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-1, 1), (-1, 1)), objective=bowl, budget=10)
        with self.assertRaises(ValidationError):
            OptimizerService.nelder_mead(problem, (1.5, 0.0))

    def test_best_cost_trace_is_monotone(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-2, 2), (-2, 2)), objective=rosenbrock, budget=300)
        report = OptimizerService.multi_start(problem, starts=2)
        best = [entry.best_cost for entry in report.trace]
        self.assertTrue(all(later <= earlier for earlier, later in zip(best, best[1:])))
        self.assertEqual(report.best_cost, best[-1])
        self.assertEqual(report.starts, 4)

    def test_seeded_runs_are_identical(self):
        problem = OptimizationProblem(
            names=("x", "y"), bounds=((-2, 2), (-2, 2)), objective=rosenbrock, budget=50, seed=7
        )
        first = OptimizerService.multi_start(problem, starts=1, random_starts=2)
        second = OptimizerService.multi_start(problem, starts=1, random_starts=2)
        self.assertEqual(first.best_params, second.best_params)
        self.assertEqual([entry.cost for entry in first.trace], [entry.cost for entry in second.trace])

    def test_grid_starts_include_box_corners(self):
        problem = OptimizationProblem(names=("A", "B"), bounds=((0, 5), (2, 12)), objective=bowl, budget=5)
        points = [tuple(point) for point in OptimizerService.start_points(problem, 3)]
        self.assertEqual(len(points), 9)
        self.assertIn((0.0, 2.0), points)
        self.assertIn((5.0, 12.0), points)

    @settings(max_examples=25, deadline=None)
    @given(
        lower=st.floats(-10, 0),
        width=st.floats(0.5, 10),
        target=st.floats(-30, 30),
        start=st.floats(0, 1),
    )
    def test_never_leaves_the_box(self, lower, width, target, start):
        problem = OptimizationProblem(
            names=("x", "y"),
            bounds=((lower, lower + width), (lower, lower + width)),
            objective=lambda x: (x[0] - target) ** 2 + (x[1] + target) ** 2,
            budget=40,
        )
        x0 = (lower + start * width, lower + (1 - start) * width)
        report = OptimizerService.nelder_mead(problem, x0)
        for entry in report.trace:
            self.assertTrue(problem.contains(entry.params), entry.params)


class CalibrationServiceTests(SimpleTestCase):

    def setUp(self):
        self.ideal = SystemModel.ideal()

    def test_zero_waveform_costs_one(self):
        grid = TimeGrid.for_duration(20.0, 0.1)
        self.assertEqual(CalibrationService.waveform_cost(Waveform.zeros(grid), SystemModel.from_settings()), 1.0)

    def test_failures_cost_one(self):
        waveform = Waveform(dt=0.1, pump=np.ones(200), stokes=np.ones(200))
        self.assertEqual(CalibrationService.waveform_cost(waveform, self.ideal), 1.0)

    def test_transfer_cost_is_deterministic(self):
        protocol = Protocol(Protocol.VARIANT_STIRUP_OP, 20 * MHZ, 50.0, shape_a=1.0, shape_b=4.0)
        first = CalibrationService.transfer_cost(protocol, self.ideal, dt=0.1)
        self.assertEqual(first, CalibrationService.transfer_cost(protocol, self.ideal, dt=0.1))
        self.assertLess(first, 0.02)

    def test_optimize_ab_dominates_its_starts(self):
        protocol = Protocol(Protocol.VARIANT_STIRUP_OP, 20 * MHZ, 50.0)
        a, b, report = CalibrationService.optimize_ab(protocol, self.ideal, budget=3, starts=2, dt=0.1)
        baseline = CalibrationService.transfer_cost(protocol.with_params(shape_a=0.0, shape_b=2.0), self.ideal, dt=0.1)
        self.assertLessEqual(report.best_cost, baseline)
        self.assertEqual(report.evaluations, 12)
        self.assertTrue(0.0 <= a <= 5.0 and 2.0 <= b <= 12.0)
        again = CalibrationService.optimize_ab(protocol, self.ideal, budget=3, starts=2, dt=0.1)
        self.assertEqual((a, b), again[:2])

    def test_optimize_ab_needs_shaped_protocol(self):
        with self.assertRaises(ValidationError):
            CalibrationService.optimize_ab(Protocol(Protocol.VARIANT_STIRUP, 20 * MHZ, 50.0), self.ideal, budget=1)

    def test_optimize_drag_starts_uncorrected(self):
        model = SystemModel.from_settings(decoherence=False)
        waveform = ProtocolService.build_waveform(Protocol(Protocol.VARIANT_STIRUP, 20 * MHZ, 30.0), model, dt=0.05)
        lambda_p, lambda_s, report = CalibrationService.optimize_drag(waveform, model, budget=4)
        self.assertEqual(report.trace[0].params, (0.0, 0.0))
        self.assertLessEqual(report.best_cost, report.trace[0].cost)
        self.assertEqual(report.evaluations, 4)
        self.assertTrue(-2.0 <= lambda_p <= 2.0 and -2.0 <= lambda_s <= 2.0)

    def test_optimize_ab_lowers_intermediate_population(self):
        protocol = Protocol(Protocol.VARIANT_STIRUP_OP, 20 * MHZ, 50.0)
        a, b, _ = CalibrationService.optimize_ab(protocol, self.ideal, budget=3, starts=2, dt=0.1)
        shaped = ProtocolService.simulate(protocol.with_params(shape_a=a, shape_b=b), self.ideal, dt=0.1)
        flat = ProtocolService.simulate(protocol.with_params(shape_a=0.0), self.ideal, dt=0.1)
        self.assertGreater(a, 0.0)
        self.assertLess(shaped.max_p1, flat.max_p1)

    def test_optimized_drag_does_not_raise_leakage(self):
        model = SystemModel.from_settings(decoherence=False)
        waveform = ProtocolService.build_waveform(Protocol(Protocol.VARIANT_STIRUP, 20 * MHZ, 30.0), model, dt=0.05)
        lambda_p, lambda_s, _ = CalibrationService.optimize_drag(waveform, model, budget=8)
        rho0 = DensityMatrix.from_pure(PureState.basis(0, 4))

        def max_p3(lp, ls):
            corrected = BaselineService.drag_correct(waveform, model.alpha, lp, ls)
            return EvolutionService.evolve_lindblad(model, corrected, rho0).max_p3

        self.assertLessEqual(max_p3(lambda_p, lambda_s), max_p3(0.0, 0.0))

    def test_stirap_timing_starts_from_defaults(self):
        protocol = Protocol(Protocol.VARIANT_STIRAP, 30 * MHZ, 100.0)
        sigma, delay, report = CalibrationService.optimize_stirap_timing(protocol, self.ideal, budget=3, dt=0.1)
        np.testing.assert_allclose(report.trace[0].params, (1 / 6, 0.1), rtol=1e-12)
        self.assertLessEqual(report.best_cost, report.trace[0].cost)
        self.assertTrue(10.0 <= sigma <= 30.0 and 2.0 <= delay <= 25.0)

    def test_stirap_timing_rejects_passages(self):
        with self.assertRaises(ValidationError):
            CalibrationService.optimize_stirap_timing(Protocol(Protocol.VARIANT_STIRUP, 20 * MHZ, 50.0), self.ideal)

    def test_optimize_drag_needs_leakage_level(self):
        grid = TimeGrid.for_duration(20.0, 0.1)
        with self.assertRaises(ValidationError):
            CalibrationService.optimize_drag(Waveform.zeros(grid), self.ideal, budget=2)

    def test_calibrate_stirap(self):
        protocol = Protocol(Protocol.VARIANT_STIRAP, 30 * MHZ, 150.0)
        omega0 = CalibrationService.calibrate_amplitude(protocol, self.ideal, 0.9, 100.0, dt=0.1)
        self.assertTrue(3 * MHZ <= omega0 <= 300 * MHZ)
        result = ProtocolService.simulate(protocol.with_params(omega0=omega0), self.ideal, dt=0.1)
        self.assertAlmostEqual(result.population_at(100.0), 0.9, delta=2e-3)

    def test_anchor_must_lie_within_the_run(self):
        protocol = Protocol(Protocol.VARIANT_STIRAP, 30 * MHZ, 150.0)
        with self.assertRaises(ValidationError):
            CalibrationService.calibrate_amplitude(protocol, self.ideal, 0.9, 200.0, dt=0.1)

    def test_calibration_rejects_rr(self):
        with self.assertRaises(ValidationError):
            CalibrationService.calibrate_amplitude(Protocol(Protocol.VARIANT_RR, 20 * MHZ, 40.0), self.ideal, 0.9, 40.0)

    def test_unreachable_calibration_target(self):
        protocol = Protocol(Protocol.VARIANT_STIRAP, 0.1 * MHZ, 150.0)
        with self.assertRaises(ValidationError):
            CalibrationService.calibrate_amplitude(protocol, self.ideal, 0.5, 10.0, dt=0.1)


class ReportExportTests(SimpleTestCase):

    def test_report_json(self):
        problem = OptimizationProblem(names=("x", "y"), bounds=((-1, 1), (-1, 1)), objective=bowl, budget=30)
        report = OptimizerService.nelder_mead(problem, (0.0, 0.0))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report_json(Path(tmp) / "report.json", report, resolved={"variant": "stirup-op"})
            document = json.loads(path.read_text())
        self.assertEqual(set(document["best_params"]), {"x", "y"})
        self.assertEqual(document["evaluations"], 30)
        self.assertEqual(len(document["trace"]), 30)
        self.assertEqual(document["protocol"], {"variant": "stirup-op"})
        self.assertEqual(document["best_cost"], min(entry["cost"] for entry in document["trace"]))


@tag("slow")
class DeviceOptimizationTests(SimpleTestCase):
    """Tuning on the four-level device with decoherence."""

    def test_shape_optimization_beats_constant_bump(self):
        model = SystemModel.from_settings()
        protocol = Protocol.from_settings(Protocol.VARIANT_STIRUP_OP)
        a, b, report = CalibrationService.optimize_ab(protocol, model, budget=20, starts=2)
        flat = CalibrationService.transfer_cost(protocol.with_params(shape_a=0.0, shape_b=2.0), model)
        self.assertLessEqual(report.best_cost, flat)

    def test_stirap_calibration_eases_with_time(self):
        model = SystemModel.ideal()
        protocol = Protocol.from_settings(Protocol.VARIANT_STIRAP)
        short = CalibrationService.calibrate_amplitude(protocol, model, 0.96, 150.0)
        stretched = protocol.with_params(omega0=short).at_duration(300.0)
        long = CalibrationService.calibrate_amplitude(stretched, model, 0.96, 300.0)
        self.assertLess(long, short)


class ResolutionServiceTests(SimpleTestCase):

    def setUp(self):
        self.ideal = SystemModel.ideal()

    def test_rabi_pulses_pass_through(self):
        protocol = Protocol.from_settings(Protocol.VARIANT_RR)
        resolution = ResolutionService.resolve(protocol, self.ideal, dt=0.1)
        self.assertEqual(resolution.protocol, protocol)
        self.assertIsNone(resolution.anchor)
        self.assertEqual(resolution.reports, {})

    def test_shaped_passage_meets_its_anchor(self):
        protocol = Protocol.from_settings(Protocol.VARIANT_STIRUP_OP)
        resolution = ResolutionService.resolve(protocol, self.ideal, budget=2, starts=1, dt=0.1)
        self.assertEqual(resolution.anchor, (0.96, 34.0))
        self.assertEqual(list(resolution.reports), ["shape"])
        self.assertEqual(resolution.protocol.shape_a, resolution.reports["shape"].params["A"])
        self.assertAlmostEqual(resolution.crossing_ns, 34.0, delta=1.0)
        result = ProtocolService.simulate(resolution.protocol, self.ideal, dt=0.1)
        self.assertAlmostEqual(result.population_at(34.0), 0.96, delta=2e-3)

    def test_resolved_protocols_reload(self):
        resolutions = [
            ResolutionService.resolve(Protocol.from_settings(Protocol.VARIANT_RR), self.ideal, dt=0.1),
            ResolutionService.resolve(
                Protocol.from_settings(Protocol.VARIANT_STIRAP, sigma_ns=30.0, delay_ns=12.0), self.ideal,
                budget=1, dt=0.1,
            ),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_resolved_json(Path(tmp) / "resolved.json", resolutions)
            document = json.loads(path.read_text())
            protocols = read_resolved_json(path)
        self.assertEqual(protocols, [resolution.protocol for resolution in resolutions])
        self.assertEqual(document["protocols"][1]["anchor"], {"efficiency": 0.96, "time_ns": 150.0})
        self.assertEqual(document["protocols"][1]["reports"]["timing"]["evaluations"], 1)

    def test_unreadable_resolution_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "resolved.json"
            path.write_text('{"protocols": [{"protocol": {"variant": "rr", "colour": 1}}]}')
            with self.assertRaises(ValidationError):
                read_resolved_json(path)


@tag("slow")
class ResolvedDeviceTests(SimpleTestCase):
    """Resolved protocols on the four-level device with decoherence."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = SystemModel.from_settings()
        cls.stirup_op = ResolutionService.resolve(
            Protocol.from_settings(Protocol.VARIANT_STIRUP_OP), cls.model, budget=40, starts=2
        )
        cls.stirap = ResolutionService.resolve(Protocol.from_settings(Protocol.VARIANT_STIRAP), cls.model, budget=20)
        cls.rr = Protocol.from_settings(Protocol.VARIANT_RR)

    def test_fast_high_fidelity_transfer(self):
        result = SweepService.efficiency_curve(self.stirup_op.protocol, self.model)
        self.assertAlmostEqual(self.stirup_op.crossing_ns, 34.0, delta=2.0)
        self.assertLessEqual(result.crossing_time(0.99), 44.0)
        self.assertGreaterEqual(result.final_efficiency, 0.992)
        self.assertLess(result.trace_defect, 1e-6)

    def test_four_times_faster_than_stirap(self):
        self.assertAlmostEqual(self.stirap.crossing_ns, 150.0, delta=2.0)
        self.assertGreaterEqual(self.stirap.crossing_ns / self.stirup_op.crossing_ns, 4.0)

    def test_amplitude_robustness(self):
        shaped = SweepService.rabi_error_sweep(self.stirup_op.protocol, self.model, -0.2, 0.2, 5)
        rabi = SweepService.rabi_error_sweep(self.rr, self.model, -0.2, 0.2, 5)
        self.assertGreater(shaped.efficiency.min(), 0.92)
        self.assertGreater(shaped.efficiency.min(), rabi.efficiency.min())

    def test_shaping_suppresses_terminal_oscillation(self):
        plain = SweepService.efficiency_curve(Protocol.from_settings(Protocol.VARIANT_STIRUP), self.model)
        shaped = SweepService.efficiency_curve(self.stirup_op.protocol, self.model)
        unoptimized = EvolutionService.terminal_oscillation(plain, self.model.alpha)
        self.assertGreaterEqual(unoptimized, 0.01)
        self.assertLess(EvolutionService.terminal_oscillation(shaped, self.model.alpha), unoptimized)

    def test_two_photon_ridge(self):
        maps = {
            name: SweepService.detuning_map(protocol, self.model, 20.0, (7, 7))
            for name, protocol in (("stirup-op", self.stirup_op.protocol), ("stirap", self.stirap.protocol), ("rr", self.rr))
        }
        shaped = maps["stirup-op"]
        # anti-diagonal delta1 = -delta2 within +-10 MHz
        for i in (2, 3, 4):
            self.assertAlmostEqual(shaped.cell(i, 6 - i), shaped.cell(3, 3), delta=0.05)
        area = SweepService.high_efficiency_area(shaped)
        self.assertGreater(area, SweepService.high_efficiency_area(maps["stirap"]))
        self.assertGreater(area, SweepService.high_efficiency_area(maps["rr"]))
