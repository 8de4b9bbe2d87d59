import logging

from django.conf import settings
from django.core.management.base import CommandError

from bench.models import Protocol
from bench.services import ProtocolService
from cli.base import CONFIG_ERROR, PassageCommand
from core.formats import write_json
from optimize.serializers import write_report_json
from optimize.services import CalibrationService

logger = logging.getLogger(__name__)


def parse_target(value):
    """'e,t' -> (efficiency, time in ns)."""
    try:
        efficiency, time = (float(part) for part in value.split(","))
    except ValueError:
        raise CommandError(f"--calibrate expects efficiency,time_ns, got '{value}'.", returncode=CONFIG_ERROR)
    return efficiency, time


class Command(PassageCommand):
    help = "Optimize STIRUP shape or DRAG parameters, or calibrate omega0 against an efficiency target."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--calibrate", metavar="E,T", help="Efficiency E reached at T ns")

    def execute_run(self, config, options):
        protocol = config.protocol
        if options["calibrate"] is not None:
            return self.calibrate(config, *parse_target(options["calibrate"]))

        budget, starts = config.optimizer["budget"], config.optimizer["starts"]
        if protocol.variant == Protocol.VARIANT_STIRUP_OP:
            a, b, report = CalibrationService.optimize_ab(
                protocol, config.model, budget=budget, starts=starts, seed=config.seed, dt=config.dt_ns
            )
            resolved = protocol.with_params(shape_a=a, shape_b=b)
        elif protocol.variant == Protocol.VARIANT_STIRUP_DRAG:
            plain = protocol.with_params(variant=Protocol.VARIANT_STIRUP)
            waveform = ProtocolService.build_waveform(plain, config.model, dt=config.dt_ns)
            lambda_p, lambda_s, report = CalibrationService.optimize_drag(
                waveform, config.model, budget=budget, seed=config.seed
            )
            resolved = protocol.with_params(lambda_p=lambda_p, lambda_s=lambda_s)
        else:
            raise CommandError(
                f"Nothing to optimize for '{protocol.variant}'; use stirup-op, stirup-drag or --calibrate.",
                returncode=CONFIG_ERROR,
            )
        logger.info(f"Optimized {protocol.variant}: {report}")
        path = write_report_json(
            config.output_path(f"optimize_{protocol.variant}.json"), report, resolved=resolved.as_dict()
        )
        self.stdout.write(str(path))

    def calibrate(self, config, efficiency, time):
        protocol = config.protocol
        omega0 = CalibrationService.calibrate_amplitude(protocol, config.model, efficiency, time, dt=config.dt_ns)
        path = write_json(
            config.output_path(f"calibrate_{protocol.variant}.json"),
            {
                "protocol": protocol.with_params(omega0=omega0).as_dict(),
                "omega0_mhz": omega0 / settings.MHZ,
                "target_efficiency": efficiency,
                "time_ns": time,
            },
        )
        self.stdout.write(str(path))
