"""
Resolved run configuration.
"""
from dataclasses import dataclass, field
from pathlib import Path

from bench.models import Protocol
from dynamics.models import SystemModel


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, validated and in internal units."""

    model: SystemModel
    protocol: Protocol
    dt_ns: float
    sweep: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = 0

    def output_path(self, name):
        return Path(self.output_dir) / name
