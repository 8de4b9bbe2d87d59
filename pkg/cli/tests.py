import io
import json
import math
import tempfile
from contextlib import redirect_stderr
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from rest_framework import serializers

from bench.models import Protocol, SweepAxis, SweepGrid
from bench.serializers import write_sweep_csv
from core.formats import read_csv
from .serializers import flatten_errors
from .services import ConfigService, PlotService, run

MHZ = 2 * math.pi * 1e-3

IDEAL = {"dims": 3, "include_leakage": False, "decoherence": False, "integration": {"dt_ns": 0.1}}


class ConfigTestCase(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_config(self, document, name="config.json"):
        path = self.tmp / name
        path.write_text(document if isinstance(document, str) else json.dumps(document))
        return path

    def error_paths(self, callable_, *args, **kwargs):
        with self.assertRaises(serializers.ValidationError) as caught:
            callable_(*args, **kwargs)
        return [path for path, _ in flatten_errors(caught.exception.detail)]


class LoadConfigTests(ConfigTestCase):

    def test_default_is_reference_device(self):
        config = ConfigService.load_config("default")
        model = config.model
        self.assertEqual((model.f10, model.f21), (5.208, 4.958))
        self.assertEqual((model.t1_10, model.t2_10, model.t1_21, model.t2_21), (4820.0, 5060.0, 5960.0, 2550.0))
        self.assertEqual(config.protocol.variant, Protocol.VARIANT_STIRUP_OP)
        self.assertEqual(config.dt_ns, 0.02)

    def test_empty_document_matches_default(self):
        config = ConfigService.load_config(self.write_config({}))
        self.assertEqual(config.model, ConfigService.load_config(None).model)
        self.assertEqual(config.sweep["detuning_points"], [41, 41])

    def test_overrides(self):
        path = self.write_config({"t1_10": 6000.0, "protocol": {"name": "rr", "omega0_mhz": 10.0}, "seed": 3})
        config = ConfigService.load_config(path, output_dir=self.tmp / "runs")
        self.assertEqual(config.model.t1_10, 6000.0)
        self.assertEqual(config.protocol.variant, Protocol.VARIANT_RR)
        self.assertAlmostEqual(config.protocol.omega0, 10 * MHZ, places=14)
        self.assertEqual(config.protocol.duration, 40.0)
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.output_path("a.csv"), self.tmp / "runs" / "a.csv")

    def test_command_line_protocol_wins(self):
        path = self.write_config({"protocol": {"name": "rr"}})
        self.assertEqual(ConfigService.load_config(path, protocol="stirap").protocol.variant, "stirap")

    def test_coherence_bound(self):
        self.assertIn("system", self.error_paths(ConfigService.load_config, self.write_config({"t2_10": 20000})))

    def test_duplicate_key(self):
        path = self.write_config('{"protocol": {"name": "rr", "name": "stirap"}}')
        self.assertEqual(self.error_paths(ConfigService.load_config, path), ["protocol.name"])

    def test_unknown_keys(self):
        path = self.write_config({"protocol": {"name": "rr", "colour": "red"}, "verbose": True})
        self.assertEqual(sorted(self.error_paths(ConfigService.load_config, path)), ["protocol.colour", "verbose"])

    def test_invalid_values_report_key_path(self):
        path = self.write_config({"protocol": {"name": "rr", "duration_ns": -1}, "sweep": {"eta_min": -1.5}})
        self.assertEqual(
            sorted(self.error_paths(ConfigService.load_config, path)), ["protocol.duration_ns", "sweep.eta_min"]
        )

    def test_missing_file(self):
        self.assertEqual(self.error_paths(ConfigService.load_config, self.tmp / "nope.json"), ["config"])

    def test_malformed_json(self):
        self.assertEqual(self.error_paths(ConfigService.load_config, self.write_config("{")), ["config"])
        self.assertEqual(self.error_paths(ConfigService.load_config, self.write_config("[]")), ["config"])


class PlotServiceTests(ConfigTestCase):

    def detuning_csv(self):
        axis = SweepAxis("delta1_mhz", -20.0, 20.0, 41)
        other = SweepAxis("delta2_mhz", -20.0, 20.0, 41)
        x, y = np.meshgrid(axis.values, other.values, indexing="ij")
        grid = SweepGrid(axes=[axis, other], efficiency=np.exp(-((x + y) / 20) ** 2))
        return write_sweep_csv(self.tmp / "detuning.csv", grid)

    def test_heatmap_is_deterministic(self):
        csv_path = self.detuning_csv()
        first = PlotService.plot_csv(csv_path, self.tmp / "a.svg", seed=1).read_bytes()
        second = PlotService.plot_csv(csv_path, self.tmp / "b.svg", seed=1).read_bytes()
        self.assertEqual(first, second)
        self.assertIn(b"<svg", first)

    def test_plot_leaves_data_untouched(self):
        csv_path = self.detuning_csv()
        before = csv_path.read_bytes()
        PlotService.plot_csv(csv_path, self.tmp / "map.svg")
        self.assertEqual(csv_path.read_bytes(), before)

    def test_unrecognized_layout(self):
        path = self.write_config("a,b,c,d\n1,2,3,4\n", name="odd.csv")
        with self.assertRaises(serializers.ValidationError):
            PlotService.plot_csv(path, self.tmp / "odd.svg")


class CommandTests(ConfigTestCase):

    def call(self, *args, **options):
        return call_command(*args, stdout=io.StringIO(), stderr=io.StringIO(), **options)

    def test_synth(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "stirup-op"}})
        self.call("synth", config=str(config), out=str(self.tmp))
        header, rows = read_csv(self.tmp / "waveform_stirup-op.csv")
        self.assertEqual(header, ["t_ns", "reP", "imP", "reS", "imS", "reA", "imA"])
        self.assertEqual(len(rows) % 2, 1)
        self.assertTrue(np.all(np.isfinite(rows[0])) and np.all(np.isfinite(rows[-1])))
        self.assertAlmostEqual(rows[-1][0], 44.0)

    def test_simulate(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "stirup-op"}})
        self.call("simulate", config=str(config), out=str(self.tmp))
        header, rows = read_csv(self.tmp / "evolution_stirup-op.csv")
        self.assertEqual(header, ["t_ns", "p0", "p1", "p2", "p3", "trace_defect"])
        self.assertGreater(rows[-1][3], 0.98)

    def test_rabi_sweep(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "rr"}})
        self.call("sweep", "rabi", config=str(config), out=str(self.tmp), grid="3")
        header, rows = read_csv(self.tmp / "sweep_rabi_rr.csv")
        self.assertEqual(header, ["eta", "efficiency"])
        self.assertEqual([row[0] for row in rows], [-0.3, 0.0, 0.3])
        document = json.loads((self.tmp / "sweep_rabi_rr.json").read_text())
        self.assertEqual(document["axes"][0]["points"], 3)

    def test_optimize_shape(self):
        config = self.write_config(
            {**IDEAL, "protocol": {"name": "stirup-op"}, "optimizer": {"budget": 1, "starts": 1}}
        )
        self.call("optimize", config=str(config), out=str(self.tmp))
        document = json.loads((self.tmp / "optimize_stirup-op.json").read_text())
        self.assertEqual(document["evaluations"], 1)
        self.assertEqual(document["best_params"], {"A": 2.5, "B": 7.0})
        self.assertEqual(document["protocol"]["shape_a"], 2.5)

    def test_optimize_needs_tunable_protocol(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "rr"}})
        with self.assertRaises(CommandError) as caught:
            self.call("optimize", config=str(config), out=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)

    def test_malformed_calibration_target(self):
        with self.assertRaises(CommandError) as caught:
            self.call("optimize", calibrate="0.96", out=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)

    def test_compare(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "rr"}})
        self.call("compare", config=str(config), out=str(self.tmp), protocols="rr", grid="3")
        table = (self.tmp / "compare.txt").read_text()
        self.assertIn("rr", table.splitlines()[2])
        self.assertEqual(len(json.loads((self.tmp / "compare.json").read_text())["rows"]), 1)

    def test_resolve_freezes_protocols(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "rr"}})
        self.call("resolve", config=str(config), out=str(self.tmp), protocols="rr")
        document = json.loads((self.tmp / "resolved.json").read_text())
        self.assertEqual([entry["protocol"]["variant"] for entry in document["protocols"]], ["rr"])
        self.assertIsNone(document["protocols"][0]["anchor"])

    def test_compare_resolved_file(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "rr"}})
        self.call("resolve", config=str(config), out=str(self.tmp), protocols="rr")
        self.call(
            "compare", config=str(config), out=str(self.tmp), resolved=str(self.tmp / "resolved.json"), grid="3"
        )
        rows = json.loads((self.tmp / "compare.json").read_text())["rows"]
        self.assertEqual([row["protocol"] for row in rows], ["rr"])

    def test_plot(self):
        csv_path = PlotServiceTests.detuning_csv(self)
        self.call("plot", str(csv_path), out=str(self.tmp / "figures"), seed=2)
        self.assertTrue((self.tmp / "figures" / "detuning.svg").is_file())


class ExitCodeTests(ConfigTestCase):

    def run_quietly(self, argv):
        with redirect_stderr(io.StringIO()) as stderr:
            code = run(argv)
        return code, stderr.getvalue()

    def test_success(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "rr"}})
        code, _ = self.run_quietly(["synth", "--config", str(config), "--out", str(self.tmp)])
        self.assertEqual(code, 0)

    def test_config_error(self):
        config = self.write_config({"protocol": {"name": "rr", "duration_ns": 0}})
        code, stderr = self.run_quietly(["synth", "--config", str(config), "--out", str(self.tmp)])
        self.assertEqual(code, 1)
        self.assertIn("protocol.duration_ns", stderr)

    def test_bad_grid(self):
        code, _ = self.run_quietly(["sweep", "rabi", "--grid", "3,x", "--out", str(self.tmp)])
        self.assertEqual(code, 1)

    def test_runtime_error(self):
        config = self.write_config({**IDEAL, "protocol": {"name": "stirap", "delay_ns": 100.0}})
        code, _ = self.run_quietly(["simulate", "--config", str(config), "--out", str(self.tmp)])
        self.assertEqual(code, 2)

    def test_unknown_compare_selection(self):
        code, _ = self.run_quietly(["compare", "--protocols", "rr,pulse", "--out", str(self.tmp)])
        self.assertEqual(code, 1)

    def test_unreadable_resolved_file(self):
        path = self.write_config("{}", name="resolved.json")
        code, stderr = self.run_quietly(["compare", "--resolved", str(path), "--out", str(self.tmp)])
        self.assertEqual(code, 1)
        self.assertIn("--resolved", stderr)
