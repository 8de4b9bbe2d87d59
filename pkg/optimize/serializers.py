"""
Serializers for optimize app.
"""
import json
from pathlib import Path

from django.core.exceptions import ValidationError
from rest_framework import serializers

from bench.models import Protocol
from core.formats import SignificantFloatField, write_json


class TraceEntrySerializer(serializers.Serializer):
    params = serializers.ListField(child=SignificantFloatField())
    cost = SignificantFloatField()
    best_cost = SignificantFloatField()


class OptimizationReportSerializer(serializers.Serializer):
    """JSON form of an optimization report."""

    best_params = serializers.SerializerMethodField()
    best_cost = SignificantFloatField()
    evaluations = serializers.IntegerField()
    converged = serializers.BooleanField()
    starts = serializers.IntegerField()
    seed = serializers.IntegerField()
    trace = TraceEntrySerializer(many=True)

    def get_best_params(self, report):
        field = SignificantFloatField()
        return {name: field.to_representation(value) for name, value in report.params.items()}


def write_report_json(path, report, resolved=None):
    """
    Export a report; `resolved` is the protocol with the optimum applied.
    """
    data = dict(OptimizationReportSerializer(report).data)
    if resolved is not None:
        data["protocol"] = resolved
    return write_json(path, data)


class ResolutionSerializer(serializers.Serializer):
    """A frozen protocol with its anchor and the reports of its tuning steps."""

    protocol = serializers.SerializerMethodField()
    anchor = serializers.SerializerMethodField()
    crossing_ns = SignificantFloatField(allow_null=True)
    reports = serializers.SerializerMethodField()

    def get_protocol(self, resolution):
        return resolution.protocol.as_dict()

    def get_anchor(self, resolution):
        if resolution.anchor is None:
            return None
        efficiency, time = resolution.anchor
        return {"efficiency": efficiency, "time_ns": time}

    def get_reports(self, resolution):
        return {name: OptimizationReportSerializer(report).data for name, report in resolution.reports.items()}


def write_resolved_json(path, resolutions):
    """Export frozen protocols; read_resolved_json loads them back."""
    return write_json(path, {"protocols": ResolutionSerializer(resolutions, many=True).data})


def read_resolved_json(path):
    """Protocols of a write_resolved_json document, in file order."""
    try:
        document = json.loads(Path(path).read_text())
        entries = document["protocols"]
        return [Protocol.from_dict(entry["protocol"]) for entry in entries]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"Cannot read resolved protocols from {path}: {exc}")
