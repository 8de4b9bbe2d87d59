import logging

from bench.serializers import write_sweep_csv, write_sweep_json
from bench.services import SweepService
from cli.base import PassageCommand

logger = logging.getLogger(__name__)


class Command(PassageCommand):
    help = "Efficiency sweep over the amplitude error (rabi) or the two detunings (detuning)."

    KIND_RABI = "rabi"
    KIND_DETUNING = "detuning"

    def add_arguments(self, parser):
        parser.add_argument("kind", choices=[self.KIND_RABI, self.KIND_DETUNING])
        super().add_arguments(parser)

    def execute_run(self, config, options):
        sweep, grid = config.sweep, options["grid"]
        if options["kind"] == self.KIND_RABI:
            points = grid[0] if grid else sweep["eta_points"]
            result = SweepService.rabi_error_sweep(
                config.protocol, config.model, sweep["eta_min"], sweep["eta_max"], points, dt=config.dt_ns
            )
        else:
            if grid:
                points = (grid[0], grid[-1])
            else:
                points = tuple(sweep["detuning_points"])
            result = SweepService.detuning_map(
                config.protocol, config.model, sweep["detuning_max_mhz"], points, dt=config.dt_ns
            )
        stem = f"sweep_{options['kind']}_{config.protocol.variant}"
        csv_path = write_sweep_csv(config.output_path(f"{stem}.csv"), result)
        write_sweep_json(config.output_path(f"{stem}.json"), result)
        self.stdout.write(str(csv_path))
