import logging
from pathlib import Path

from cli.base import PassageCommand
from cli.services import PlotService

logger = logging.getLogger(__name__)


class Command(PassageCommand):
    help = "Render exported CSV files as SVG line plots or heatmaps."

    def add_arguments(self, parser):
        parser.add_argument("csv", nargs="+", help="Waveform, evolution or sweep CSV files")
        super().add_arguments(parser)

    def execute_run(self, config, options):
        for csv_path in options["csv"]:
            svg_path = config.output_path(f"{Path(csv_path).stem}.svg")
            PlotService.plot_csv(csv_path, svg_path, seed=config.seed)
            self.stdout.write(str(svg_path))
