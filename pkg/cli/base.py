"""
Shared plumbing of the passage management commands.
"""
import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from dynamics.services import IntegrationError
from .serializers import flatten_errors
from .services import ConfigService

logger = logging.getLogger(__name__)

CONFIG_ERROR = 1
RUNTIME_ERROR = 2


def parse_grid(value):
    """'n' or 'n,m' -> tuple of positive ints."""
    try:
        points = tuple(int(part) for part in value.split(","))
    except ValueError:
        points = ()
    if not 1 <= len(points) <= 2 or min(points) < 1:
        raise CommandError(f"--grid expects n or n,m with positive integers, got '{value}'.", returncode=CONFIG_ERROR)
    return points


class PassageCommand(BaseCommand):
    """
    Base command: resolves the run configuration, maps configuration
    problems to exit code 1 and computation failures to exit code 2.
    """

    requires_system_checks = []
    requires_migrations_checks = False

    def add_arguments(self, parser):
        parser.add_argument("--config", default=ConfigService.DEFAULT, help="JSON configuration file or 'default'")
        parser.add_argument("--protocol", help="Protocol name, overrides protocol.name")
        parser.add_argument("--out", help="Output directory, overrides output_dir")
        parser.add_argument("--seed", type=int, help="Seed for randomized restarts and plot ids")
        parser.add_argument("--grid", help="Point counts n or n,m")

    def load_config(self, options):
        try:
            return ConfigService.load_config(
                options["config"], protocol=options["protocol"], output_dir=options["out"], seed=options["seed"]
            )
        except serializers.ValidationError as exc:
            problems = "; ".join(f"{path}: {message}" for path, message in flatten_errors(exc.detail))
            raise CommandError(f"Invalid configuration: {problems}", returncode=CONFIG_ERROR)
        except ValidationError as exc:
            raise CommandError(f"Invalid configuration: {'; '.join(exc.messages)}", returncode=CONFIG_ERROR)

    def handle(self, *args, **options):
        if options["grid"] is not None:
            options["grid"] = parse_grid(options["grid"])
        config = self.load_config(options)
        try:
            self.execute_run(config, options)
        except (ValidationError, IntegrationError, serializers.ValidationError) as exc:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {exc}", exc_info=True)
            raise CommandError(str(exc), returncode=RUNTIME_ERROR)

    def execute_run(self, config, options):
        raise NotImplementedError
