import logging

from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from bench.serializers import comparison_table, write_comparison_json
from bench.services import SweepService
from cli.base import CONFIG_ERROR
from cli.management.commands.resolve import Command as ResolveCommand
from optimize.serializers import read_resolved_json

logger = logging.getLogger(__name__)


class Command(ResolveCommand):
    help = "Rank resolved protocols by amplitude robustness, peak efficiency and time to the target efficiency."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--resolved", metavar="FILE", help="resolved.json from the resolve command")
        parser.add_argument("--target", type=float, default=0.96, help="Efficiency for the time-to-target column")
        parser.add_argument("--eta-window", type=float, default=0.2, help="Half-width of the worst-case eta window")

    def resolved_protocols(self, config, options):
        if options["resolved"] is None:
            return [resolution.protocol for resolution in self.resolve(config, options)]
        try:
            protocols = read_resolved_json(options["resolved"])
        except ValidationError as exc:
            raise CommandError(f"--resolved: {'; '.join(exc.messages)}", returncode=CONFIG_ERROR)
        logger.info(f"Loaded {len(protocols)} resolved protocols from {options['resolved']}")
        return protocols

    def execute_run(self, config, options):
        protocols = self.resolved_protocols(config, options)
        sweep = config.sweep
        points = options["grid"][0] if options["grid"] else sweep["eta_points"]
        report = SweepService.compare_protocols(
            protocols,
            config.model,
            sweep["eta_min"],
            sweep["eta_max"],
            points,
            target=options["target"],
            eta_window=options["eta_window"],
            dt=config.dt_ns,
        )
        write_comparison_json(config.output_path("compare.json"), report)
        table = comparison_table(report)
        path = config.output_path("compare.txt")
        path.write_text(table)
        logger.info(f"Wrote {path}")
        self.stdout.write(table, ending="")
