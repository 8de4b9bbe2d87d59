import logging

from bench.services import SweepService
from cli.base import PassageCommand
from dynamics.serializers import write_evolution_csv

logger = logging.getLogger(__name__)


class Command(PassageCommand):
    help = "Simulate a protocol with the master equation and export populations as CSV."

    def execute_run(self, config, options):
        result = SweepService.efficiency_curve(config.protocol, config.model, dt=config.dt_ns)
        logger.info(
            f"Final efficiency {result.final_efficiency:.6f}, max P3 {result.max_p3:.2e}, "
            f"trace defect {result.trace_defect:.1e}, min eigenvalue {result.min_eigenvalue:.1e}"
        )
        path = write_evolution_csv(config.output_path(f"evolution_{config.protocol.variant}.csv"), result)
        self.stdout.write(str(path))
