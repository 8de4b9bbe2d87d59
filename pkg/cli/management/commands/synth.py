import logging

from django.conf import settings

from bench.services import ProtocolService
from cli.base import PassageCommand
from passage.serializers import write_waveform_csv

logger = logging.getLogger(__name__)


class Command(PassageCommand):
    help = "Synthesize the drives of a protocol and export them as CSV."

    def execute_run(self, config, options):
        protocol = config.protocol
        waveform = ProtocolService.build_waveform(protocol, config.model, dt=config.dt_ns)
        logger.info(
            f"{protocol}: {waveform.samples} samples, peak drive/2pi {waveform.peak_amplitude / settings.MHZ:.3f} MHz"
        )
        path = write_waveform_csv(config.output_path(f"waveform_{protocol.variant}.csv"), waveform)
        self.stdout.write(str(path))
