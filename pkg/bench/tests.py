import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, override_settings, tag

from core.formats import read_csv
from dynamics.models import SystemModel
from dynamics.services import EvolutionService
from .models import ComparisonReport, ComparisonRow, Protocol, SweepAxis, SweepGrid, model_hash
from .serializers import comparison_table, write_comparison_json, write_sweep_csv, write_sweep_json
from .services import ProtocolService, SweepService

MHZ = 2 * math.pi * 1e-3


class ProtocolTests(SimpleTestCase):

    def test_defaults_from_settings(self):
        protocol = Protocol.from_settings(Protocol.VARIANT_STIRUP_OP)
        self.assertAlmostEqual(protocol.omega0, 18 * MHZ, places=14)
        self.assertEqual(protocol.duration, 44.0)
        self.assertEqual((protocol.shape_a, protocol.shape_b), (0.0, 6.0))

    def test_overrides_in_table_units(self):
        protocol = Protocol.from_settings(Protocol.VARIANT_STIRAP, omega0_mhz=10.0, duration_ns=None)
        self.assertAlmostEqual(protocol.omega0, 10 * MHZ, places=14)
        self.assertEqual(protocol.duration, 150.0)

    def test_unknown_variant(self):
        with self.assertRaises(ValidationError):
            Protocol.from_settings("adiabatic")

    def test_unresolved_parameters_rejected(self):
        with self.assertRaises(ValidationError):
            Protocol(Protocol.VARIANT_RR, 0.1, 0.0)
        with self.assertRaises(ValidationError):
            Protocol(Protocol.VARIANT_RR, -0.1, 40.0)

    def test_model_hash(self):
        model = SystemModel.from_settings()
        self.assertEqual(model_hash(model), model_hash(SystemModel.from_settings()))
        self.assertNotEqual(model_hash(model), model_hash(SystemModel.from_settings(t1_10=4000.0)))

    def test_baselines_have_no_passage(self):
        with self.assertRaises(ValidationError):
            ProtocolService.passage_spec(Protocol.from_settings(Protocol.VARIANT_STIRAP))


class SweepGridTests(SimpleTestCase):

    def setUp(self):
        self.axes = [SweepAxis("delta1_mhz", -1.0, 1.0, 3), SweepAxis("delta2_mhz", -1.0, 1.0, 2)]

    def test_shape_must_match_axes(self):
        with self.assertRaises(ValidationError):
            SweepGrid(axes=self.axes, efficiency=np.zeros((2, 3)))

    def test_unpopulated_cell(self):
        efficiency = np.full((3, 2), 0.5)
        efficiency[1, 1] = np.nan
        with self.assertRaises(ValidationError):
            SweepGrid(axes=self.axes, efficiency=efficiency)

    def test_efficiency_range(self):
        with self.assertRaises(ValidationError):
            SweepGrid(axes=self.axes, efficiency=np.full((3, 2), 1.5))
        SweepGrid(axes=self.axes, efficiency=np.full((3, 2), 1 + 1e-8))

    def test_axis_needs_increasing_range(self):
        with self.assertRaises(ValidationError):
            SweepAxis("eta", 0.3, -0.3, 5)
        self.assertEqual(list(SweepAxis("eta", 0.1, 0.1, 1).values), [0.1])

    def test_long_rows_are_row_major(self):
        grid = SweepGrid(axes=self.axes, efficiency=np.arange(6).reshape(3, 2) / 10)
        rows = list(grid.long_rows())
        self.assertEqual(len(rows), 6)
        self.assertEqual(rows[1], {"delta1_mhz": -1.0, "delta2_mhz": 1.0, "efficiency": 0.1})
        self.assertEqual(rows[-1]["efficiency"], 0.5)

    def test_high_efficiency_area(self):
        grid = SweepGrid(axes=self.axes, efficiency=[[0.95, 0.2], [0.9, 0.5], [0.1, 0.99]])
        self.assertAlmostEqual(SweepService.high_efficiency_area(grid), 0.5)


class ProtocolServiceTests(SimpleTestCase):

    def setUp(self):
        self.model = SystemModel.ideal()
        self.stirup = Protocol(Protocol.VARIANT_STIRUP, 20 * MHZ, 50.0)

    def test_total_amplitude_loss_never_transfers(self):
        self.assertEqual(ProtocolService.efficiency(self.stirup, self.model, dt=0.1, eta=-1.0), 0.0)
        grid = SweepService.rabi_error_sweep(self.stirup, self.model, -1.0, 0.0, 3, dt=0.1)
        self.assertEqual(grid.cell(0), 0.0)

    def test_amplitude_error_below_minus_one_rejected(self):
        with self.assertRaises(ValidationError):
            ProtocolService.build_waveform(self.stirup, self.model, dt=0.1, eta=-1.5)
        with self.assertRaises(ValidationError):
            SweepService.rabi_error_sweep(self.stirup, self.model, -1.5, 0.0, 3, dt=0.1)

    def test_zero_amplitude_never_transfers(self):
        model = SystemModel.from_settings()
        for variant in (Protocol.VARIANT_STIRUP_OP, Protocol.VARIANT_RR):
            result = SweepService.efficiency_curve(Protocol(variant, 0.0, 20.0), model, dt=0.1)
            self.assertEqual(float(np.max(np.abs(result.populations[:, 2]))), 0.0)

    def test_amplitude_error_scales_drives(self):
        nominal = ProtocolService.build_waveform(self.stirup, self.model, dt=0.1)
        scaled = ProtocolService.build_waveform(self.stirup, self.model, dt=0.1, eta=0.1)
        np.testing.assert_allclose(scaled.pump, 1.1 * nominal.pump, rtol=1e-14)
        np.testing.assert_allclose(scaled.stokes, 1.1 * nominal.stokes, rtol=1e-14)

    def test_strong_drives_are_sampled_within_step_guard(self):
        protocol = Protocol(Protocol.VARIANT_STIRUP, 400 * MHZ, 20.0)
        waveform = ProtocolService.build_waveform(protocol, SystemModel.from_settings(), dt=0.1)
        self.assertLess(waveform.dt, 0.1)
        self.assertLessEqual(waveform.dt, EvolutionService.max_dt(SystemModel.from_settings(), waveform))

    def test_ideal_stirup_follows_passage(self):
        efficiency = ProtocolService.efficiency(self.stirup, self.model, dt=0.1)
        self.assertGreater(efficiency, 0.99)

    def test_drag_variant_adds_quadrature(self):
        protocol = Protocol(Protocol.VARIANT_STIRUP_DRAG, 20 * MHZ, 50.0)
        waveform = ProtocolService.build_waveform(protocol, SystemModel.from_settings(), dt=0.1)
        self.assertGreater(float(np.max(np.abs(waveform.pump.imag))), 0.0)

    def test_counterdiabatic_drive_is_exact_when_fast(self):
        cd = Protocol(Protocol.VARIANT_STIRAP_CD, 20 * MHZ, 20.0)
        self.assertGreaterEqual(ProtocolService.efficiency(cd, self.model, dt=0.01), 1 - 1e-4)
        plain = cd.with_params(variant=Protocol.VARIANT_STIRAP)
        self.assertLess(ProtocolService.efficiency(plain, self.model, dt=0.01), 0.5)


class SweepServiceTests(SimpleTestCase):

    def setUp(self):
        self.model = SystemModel.ideal()
        self.stirup = Protocol(Protocol.VARIANT_STIRUP, 20 * MHZ, 50.0)
        self.rr = Protocol(Protocol.VARIANT_RR, 20 * MHZ, 40.0)

    def test_detuning_center_matches_nominal(self):
        grid = SweepService.detuning_map(self.stirup, self.model, 10.0, (3, 3), dt=0.1)
        self.assertEqual(grid.efficiency.shape, (3, 3))
        nominal = ProtocolService.efficiency(self.stirup, self.model, dt=0.1)
        self.assertAlmostEqual(grid.cell(1, 1), nominal, places=12)
        self.assertEqual(grid.metadata["sweep"], "detuning")
        self.assertEqual(grid.metadata["model_hash"], model_hash(self.model))
        self.assertEqual(grid.metadata["passage"]["g_variant"], "constant")
        self.assertEqual(grid.metadata["passage"]["duration_ns"], 50.0)

    def test_cells_do_not_depend_on_evaluation_order(self):
        grid = SweepService.rabi_error_sweep(self.stirup, self.model, -0.2, 0.2, 3, dt=0.1)
        reversed_cells = [
            ProtocolService.efficiency(self.stirup, self.model, dt=0.1, eta=eta) for eta in (0.2, 0.0, -0.2)
        ]
        np.testing.assert_array_equal(grid.efficiency, reversed_cells[::-1])

    @override_settings(PASSAGE_THREADS=2)
    def test_worker_pool_matches_serial(self):
        serial = [ProtocolService.efficiency(self.rr, self.model, dt=0.1, eta=eta) for eta in (-0.1, 0.0, 0.1)]
        pooled = SweepService.rabi_error_sweep(self.rr, self.model, -0.1, 0.1, 3, dt=0.1)
        np.testing.assert_array_equal(pooled.efficiency, serial)

    def test_rr_peaks_at_calibrated_amplitude(self):
        grid = SweepService.rabi_error_sweep(self.rr, self.model, -0.2, 0.2, 5, dt=0.05)
        self.assertEqual(int(np.argmax(grid.efficiency)), 2)
        self.assertGreater(grid.cell(2), 0.999)
        # two sequential rotations by pi (1 + eta)
        self.assertAlmostEqual(grid.cell(0), math.sin(0.4 * math.pi) ** 4, delta=5e-3)

    def test_time_to_efficiency(self):
        stirap = Protocol(Protocol.VARIANT_STIRAP, 50 * MHZ, 150.0)
        crossing = SweepService.time_to_efficiency(stirap, self.model, 0.9, 10.0, 200.0, points=6, dt=0.1)
        self.assertGreater(crossing, 10.0)
        self.assertLess(crossing, 200.0)
        reached = ProtocolService.efficiency(stirap.with_params(duration=crossing), self.model, dt=0.1)
        self.assertAlmostEqual(reached, 0.9, delta=0.02)

    def test_unreachable_target(self):
        idle = Protocol(Protocol.VARIANT_STIRUP, 0.0, 20.0)
        with self.assertRaises(ValidationError):
            SweepService.time_to_efficiency(idle, self.model, 0.5, 10.0, 20.0, points=2, dt=0.1)

    def test_comparison_ranks_protocols(self):
        idle = Protocol(Protocol.VARIANT_STIRUP, 0.0, 50.0)
        report = SweepService.compare_protocols([idle, self.rr], self.model, -0.1, 0.1, 3, dt=0.1)
        self.assertEqual([row.protocol for row in report.rows], ["rr", "stirup"])
        self.assertIsNone(report.rows[1].time_to_target_ns)
        crossing = report.rows[0].time_to_target_ns
        self.assertTrue(20.0 < crossing < 40.0)
        curve = SweepService.efficiency_curve(self.rr, self.model, dt=0.1)
        self.assertAlmostEqual(crossing, curve.crossing_time(0.96), places=12)
        self.assertAlmostEqual(curve.population_at(crossing), 0.96, delta=1e-3)
        self.assertEqual(report.rows[1].peak_efficiency, 0.0)

    def test_single_protocol_comparison(self):
        report = SweepService.compare_protocols([self.rr], self.model, -0.1, 0.1, 3, dt=0.1)
        self.assertEqual(len(report.rows), 1)
        self.assertGreater(report.rows[0].worst_case_efficiency, 0.9)


class BenchExportTests(SimpleTestCase):

    def setUp(self):
        self.grid = SweepGrid(
            axes=[SweepAxis("delta1_mhz", -1.0, 1.0, 2), SweepAxis("delta2_mhz", -1.0, 1.0, 2)],
            efficiency=[[0.1, 0.2], [0.3, 1 / 3]],
            metadata={"sweep": "detuning"},
        )

    def test_sweep_csv_long_format(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_sweep_csv(Path(tmp) / "map.csv", self.grid)
            header, rows = read_csv(path)
            text = path.read_text()
        self.assertEqual(header, ["delta1_mhz", "delta2_mhz", "efficiency"])
        self.assertEqual(rows[-1], [1.0, 1.0, float("0.333333333333")])
        self.assertIn("0.333333333333\n", text)

    def test_sweep_json(self):
        with tempfile.TemporaryDirectory() as tmp:
            document = json.loads(write_sweep_json(Path(tmp) / "map.json", self.grid).read_text())
        self.assertEqual([axis["name"] for axis in document["axes"]], ["delta1_mhz", "delta2_mhz"])
        self.assertEqual(document["efficiency"][1], [0.3, 0.333333333333])
        self.assertEqual(document["metadata"], {"sweep": "detuning"})

    def test_comparison_outputs(self):
        report = ComparisonReport(
            target_efficiency=0.96,
            eta_window=0.2,
            rows=[
                ComparisonRow("stirup-op", 50.0, 20.0, 0.995, 0.996, 34.2, 0.93),
                ComparisonRow("rr", 40.0, 20.0, 0.98, 0.98, None, 0.85),
            ],
        )
        table = comparison_table(report)
        self.assertIn("stirup-op", table.splitlines()[2])
        self.assertIn("34.20", table)
        with tempfile.TemporaryDirectory() as tmp:
            document = json.loads(write_comparison_json(Path(tmp) / "report.json", report).read_text())
        self.assertIsNone(document["rows"][1]["time_to_target_ns"])
        self.assertEqual(document["rows"][0]["worst_case_efficiency"], 0.93)


@tag("slow")
class ReferenceDeviceTests(SimpleTestCase):
    """Transfer on the four-level device with decoherence."""

    def test_unresolved_shape_defaults_stay_physical(self):
        result = SweepService.efficiency_curve(Protocol.from_settings(Protocol.VARIANT_STIRUP_OP), SystemModel.from_settings())
        self.assertLess(result.trace_defect, 1e-6)
        self.assertGreater(result.min_eigenvalue, -1e-6)

    def test_cross_coupling_oscillation(self):
        protocol = Protocol.from_settings(Protocol.VARIANT_STIRUP)
        device = SystemModel.from_settings(decoherence=False)
        coupled = EvolutionService.terminal_oscillation(SweepService.efficiency_curve(protocol, device), device.alpha)
        ideal = EvolutionService.terminal_oscillation(
            SweepService.efficiency_curve(protocol, SystemModel.ideal()), device.alpha
        )
        self.assertGreater(coupled, 1e-3)
        self.assertGreater(coupled, ideal)

    def test_adiabatic_limit(self):
        self.assertLess(SweepService.adiabatic_gap(1.0, 200.0), 1e-3)
