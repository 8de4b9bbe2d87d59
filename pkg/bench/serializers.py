"""
Serializers for bench app.
"""
import numpy as np
from rest_framework import serializers

from core.formats import SignificantFloatField, format_float, write_csv, write_json


class SweepAxisSerializer(serializers.Serializer):
    name = serializers.CharField()
    minimum = SignificantFloatField()
    maximum = SignificantFloatField()
    points = serializers.IntegerField(min_value=1)


class SweepGridSerializer(serializers.Serializer):
    """Grid and metadata of a sweep; efficiency nested per axis."""

    axes = SweepAxisSerializer(many=True)
    efficiency = serializers.SerializerMethodField()
    metadata = serializers.JSONField()

    def get_efficiency(self, grid):
        rounded = np.vectorize(lambda value: float(format_float(value)), otypes=[float])(grid.efficiency)
        return rounded.tolist()


def sweep_columns(grid):
    return [axis.name for axis in grid.axes] + ["efficiency"]


def write_sweep_csv(path, grid):
    """Long format: one row per cell, axis values then efficiency."""
    return write_csv(path, sweep_columns(grid), grid.long_rows())


def write_sweep_json(path, grid):
    return write_json(path, SweepGridSerializer(grid).data)


class ComparisonRowSerializer(serializers.Serializer):
    protocol = serializers.CharField()
    duration_ns = SignificantFloatField()
    omega0_mhz = SignificantFloatField()
    final_efficiency = SignificantFloatField()
    peak_efficiency = SignificantFloatField()
    time_to_target_ns = SignificantFloatField(allow_null=True)
    worst_case_efficiency = SignificantFloatField()


class ComparisonReportSerializer(serializers.Serializer):
    """Ranked comparison; rows are ordered best first."""

    target_efficiency = SignificantFloatField()
    eta_window = SignificantFloatField()
    rows = ComparisonRowSerializer(many=True)
    metadata = serializers.JSONField()


def write_comparison_json(path, report):
    return write_json(path, ComparisonReportSerializer(report).data)


def comparison_table(report):
    """Plain-text ranking table."""
    target = f"t({report.target_efficiency:.0%}) ns"
    worst = f"worst |eta|<={report.eta_window:g}"
    header = f"{'rank':<5}{'protocol':<13}{'T ns':>8}{'final':>9}{'peak':>9}{target:>14}{worst:>20}"
    lines = [header, "-" * len(header)]
    for rank, row in enumerate(report.rows, start=1):
        reach = "-" if row.time_to_target_ns is None else f"{row.time_to_target_ns:.2f}"
        lines.append(
            f"{rank:<5}{row.protocol:<13}{row.duration_ns:>8.1f}{row.final_efficiency:>9.4f}"
            f"{row.peak_efficiency:>9.4f}{reach:>14}{row.worst_case_efficiency:>20.4f}"
        )
    return "\n".join(lines) + "\n"
