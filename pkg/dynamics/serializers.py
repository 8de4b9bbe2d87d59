"""
Serializers for dynamics app.
"""
from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers

from core.formats import SignificantFloatField, write_csv
from qstate.models import PureState
from .models import SystemModel


class SystemModelSerializer(serializers.Serializer):
    """Validate device parameters and build a SystemModel."""

    f10 = serializers.FloatField(min_value=0.0)
    f21 = serializers.FloatField(min_value=0.0)
    t1_10 = serializers.FloatField()
    t2_10 = serializers.FloatField()
    t1_21 = serializers.FloatField()
    t2_21 = serializers.FloatField()
    dims = serializers.ChoiceField(choices=PureState.DIMS_CHOICES)
    include_leakage = serializers.BooleanField()
    decoherence = serializers.BooleanField()

    def validate(self, attrs):
        """Check the physical constraints between fields."""
        attrs = super().validate(attrs)
        try:
            SystemModel(**self._model_fields(attrs))
        except DjangoValidationError as exc:
            raise serializers.ValidationError({"system": exc.messages})
        return attrs

    @staticmethod
    def _model_fields(attrs):
        names = ("f10", "f21", "t1_10", "t2_10", "t1_21", "t2_21", "dims", "include_leakage", "decoherence")
        return {name: attrs[name] for name in names}

    def build_model(self):
        return SystemModel(**self._model_fields(self.validated_data))


class EvolutionSampleSerializer(serializers.Serializer):
    """One CSV row of an evolution."""

    t_ns = SignificantFloatField()
    p0 = SignificantFloatField()
    p1 = SignificantFloatField()
    p2 = SignificantFloatField()
    p3 = SignificantFloatField()
    trace_defect = SignificantFloatField()


EVOLUTION_COLUMNS = list(EvolutionSampleSerializer().fields)


def evolution_rows(result):
    """Per-step mappings; p3 is 0 for three-level runs."""
    for k, t in enumerate(result.times):
        populations = result.populations[k]
        yield {
            "t_ns": float(t),
            "p0": float(populations[0]),
            "p1": float(populations[1]),
            "p2": float(populations[2]),
            "p3": float(populations[3]) if result.dims > 3 else 0.0,
            "trace_defect": float(result.trace_defects[k]),
        }


def write_evolution_csv(path, result):
    """Export an evolution as t_ns,p0,p1,p2,p3,trace_defect."""
    data = EvolutionSampleSerializer(list(evolution_rows(result)), many=True).data
    return write_csv(path, EVOLUTION_COLUMNS, data)
