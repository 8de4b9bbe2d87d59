"""
Serializers for passage app.
"""
from rest_framework import serializers

from core.formats import SignificantFloatField, write_csv
from .models import PassageSpec


class WaveformSampleSerializer(serializers.Serializer):
    """One CSV row of a sampled waveform."""

    t_ns = SignificantFloatField()
    reP = SignificantFloatField()
    imP = SignificantFloatField()
    reS = SignificantFloatField()
    imS = SignificantFloatField()
    reA = SignificantFloatField()
    imA = SignificantFloatField()


WAVEFORM_COLUMNS = list(WaveformSampleSerializer().fields)


def waveform_rows(waveform):
    """Per-sample mappings of a waveform; the auxiliary channel is 0 when absent."""
    auxiliary = waveform.auxiliary
    for k, t in enumerate(waveform.times):
        yield {
            "t_ns": float(t),
            "reP": float(waveform.pump[k].real),
            "imP": float(waveform.pump[k].imag),
            "reS": float(waveform.stokes[k].real),
            "imS": float(waveform.stokes[k].imag),
            "reA": 0.0 if auxiliary is None else float(auxiliary[k].real),
            "imA": 0.0 if auxiliary is None else float(auxiliary[k].imag),
        }


def write_waveform_csv(path, waveform):
    """Export a waveform as t_ns,reP,imP,reS,imS,reA,imA."""
    data = WaveformSampleSerializer(list(waveform_rows(waveform)), many=True).data
    return write_csv(path, WAVEFORM_COLUMNS, data)


def passage_summary(spec: PassageSpec):
    """Flat description of a passage for run metadata."""
    return {
        "duration_ns": spec.duration,
        "g_variant": spec.g_shape.variant,
        "omega0": spec.g_shape.omega0,
        "A": spec.g_shape.A,
        "B": spec.g_shape.B,
        "beta_shape": spec.beta_shape,
        "phi_offset": spec.phi_offset,
        "phi2_shape": spec.phi2_shape,
        "phi2_amplitude": spec.phi2_amplitude,
    }
