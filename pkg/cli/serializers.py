"""
Serializers for run configuration documents.
"""
from collections.abc import Mapping
from pathlib import Path

from rest_framework import serializers

from bench.models import Protocol
from dynamics.serializers import SystemModelSerializer
from .models import RunConfig


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        errors = {}
        if isinstance(data, Mapping):
            errors = {key: ["Unknown key."] for key in sorted(set(data) - set(self.fields))}
        try:
            value = super().to_internal_value(data)
        except serializers.ValidationError as exc:
            detail = exc.detail if isinstance(exc.detail, Mapping) else {"non_field_errors": exc.detail}
            raise serializers.ValidationError({**detail, **errors})
        if errors:
            raise serializers.ValidationError(errors)
        return value


class ProtocolConfigSerializer(StrictSerializer):
    """Protocol choice and overrides, in MHz and ns."""

    name = serializers.ChoiceField(choices=Protocol.VARIANT_CHOICES)
    omega0_mhz = serializers.FloatField(min_value=0.0, required=False)
    duration_ns = serializers.FloatField(required=False)
    shape_a = serializers.FloatField(required=False)
    shape_b = serializers.FloatField(required=False)
    lambda_p = serializers.FloatField(required=False)
    lambda_s = serializers.FloatField(required=False)
    sigma_ns = serializers.FloatField(required=False, allow_null=True)
    delay_ns = serializers.FloatField(required=False, allow_null=True)

    def validate_duration_ns(self, value):
        if value <= 0:
            raise serializers.ValidationError("Duration must be positive.")
        return value


class IntegrationConfigSerializer(StrictSerializer):
    dt_ns = serializers.FloatField()

    def validate_dt_ns(self, value):
        if value <= 0:
            raise serializers.ValidationError("Sample spacing must be positive.")
        return value


class SweepConfigSerializer(StrictSerializer):
    eta_min = serializers.FloatField()
    eta_max = serializers.FloatField()
    eta_points = serializers.IntegerField(min_value=1)
    detuning_max_mhz = serializers.FloatField(min_value=0.0)
    detuning_points = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2, max_length=2)

    def validate_eta_min(self, value):
        if value < -1:
            raise serializers.ValidationError("Amplitude errors must be at least -1.")
        return value

    def validate(self, attrs):
        if attrs["eta_points"] > 1 and not attrs["eta_max"] > attrs["eta_min"]:
            raise serializers.ValidationError({"eta_max": ["Must exceed eta_min."]})
        return attrs


class OptimizerConfigSerializer(StrictSerializer):
    budget = serializers.IntegerField(min_value=1)
    starts = serializers.IntegerField(min_value=1)


class RunConfigSerializer(StrictSerializer, SystemModelSerializer):
    """
    Complete run configuration: flat device keys plus protocol, integration,
    sweep and optimizer sections.
    """

    protocol = ProtocolConfigSerializer()
    integration = IntegrationConfigSerializer()
    sweep = SweepConfigSerializer()
    optimizer = OptimizerConfigSerializer()
    output_dir = serializers.CharField()
    seed = serializers.IntegerField(min_value=0)

    def build_config(self) -> RunConfig:
        data = self.validated_data
        overrides = {key: value for key, value in data["protocol"].items() if key != "name"}
        return RunConfig(
            model=self.build_model(),
            protocol=Protocol.from_settings(data["protocol"]["name"], **overrides),
            dt_ns=data["integration"]["dt_ns"],
            sweep=dict(data["sweep"]),
            optimizer=dict(data["optimizer"]),
            output_dir=Path(data["output_dir"]),
            seed=data["seed"],
        )


def flatten_errors(detail, prefix=""):
    """Serializer errors as (dotted key path, message) pairs."""
    if isinstance(detail, Mapping):
        for key, value in detail.items():
            if key == "non_field_errors":
                path = prefix
            else:
                path = f"{prefix}.{key}" if prefix else key
            yield from flatten_errors(value, path)
    elif isinstance(detail, (list, tuple)):
        for item in detail:
            yield from flatten_errors(item, prefix)
    else:
        yield prefix or "config", str(detail)
