import logging

from django.core.management.base import CommandError

from bench.models import Protocol
from cli.base import CONFIG_ERROR, PassageCommand
from optimize.serializers import write_resolved_json
from optimize.services import ResolutionService

logger = logging.getLogger(__name__)


def select_protocols(config, selection):
    """Protocols named in a comma-separated selection; the configured one replaces its default."""
    names = [part.strip() for part in selection.split(",") if part.strip()]
    unknown = sorted(set(names) - set(dict(Protocol.VARIANT_CHOICES)))
    if unknown or not names:
        raise CommandError(f"--protocols: unknown or empty selection {unknown}.", returncode=CONFIG_ERROR)
    return [config.protocol if name == config.protocol.variant else Protocol.from_settings(name) for name in names]


class Command(PassageCommand):
    help = "Calibrate and tune protocols against their anchors and freeze them in resolved.json."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--protocols",
            default=",".join(value for value, _ in Protocol.VARIANT_CHOICES),
            help="Comma-separated protocol names; the configured protocol replaces its default entry",
        )

    def resolve(self, config, options):
        protocols = select_protocols(config, options["protocols"])
        return ResolutionService.resolve_all(
            protocols,
            config.model,
            budget=config.optimizer["budget"],
            starts=config.optimizer["starts"],
            seed=config.seed,
            dt=config.dt_ns,
        )

    def execute_run(self, config, options):
        resolutions = self.resolve(config, options)
        path = write_resolved_json(config.output_path("resolved.json"), resolutions)
        self.stdout.write(str(path))
