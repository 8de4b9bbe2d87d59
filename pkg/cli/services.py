"""
Service layer for configuration loading, plotting and command dispatch.
"""
import json
import logging
from pathlib import Path

import matplotlib
import numpy as np
from django.conf import settings
from django.core.management import execute_from_command_line
from matplotlib.figure import Figure
from rest_framework import serializers

from core.formats import read_csv
from .models import RunConfig
from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)


class _Pairs(list):
    """Key/value pairs of one JSON object, in document order."""


class ConfigService:
    """Load and validate run configuration documents."""

    DEFAULT = "default"
    DEFAULT_PROTOCOL = "stirup-op"

    @classmethod
    def defaults(cls):
        """The built-in document: reference device and settings tables."""
        passage = settings.PASSAGE
        return {
            **passage["SYSTEM"],
            "protocol": {"name": cls.DEFAULT_PROTOCOL},
            "integration": {"dt_ns": settings.PASSAGE_DT_NS},
            "sweep": {**passage["SWEEP"], "detuning_points": list(passage["SWEEP"]["detuning_points"])},
            "optimizer": {key: passage["OPTIMIZER"][key] for key in ("budget", "starts")},
            "output_dir": settings.PASSAGE_OUTPUT_DIR,
            "seed": 0,
        }

    @classmethod
    def _objects(cls, value, path=""):
        """Turn parsed pairs into dicts, rejecting duplicate keys by dotted path."""
        if isinstance(value, _Pairs):
            document = {}
            for key, item in value:
                key_path = f"{path}.{key}" if path else key
                if key in document:
                    raise serializers.ValidationError({key_path: ["Duplicate key."]})
                document[key] = cls._objects(item, key_path)
            return document
        if isinstance(value, list):
            return [cls._objects(item, f"{path}[{index}]") for index, item in enumerate(value)]
        return value

    @classmethod
    def parse(cls, text):
        try:
            raw = json.loads(text, object_pairs_hook=_Pairs)
        except json.JSONDecodeError as exc:
            raise serializers.ValidationError({"config": [f"Invalid JSON: {exc}"]})
        document = cls._objects(raw)
        if not isinstance(document, dict):
            raise serializers.ValidationError({"config": ["The configuration must be a JSON object."]})
        return document

    @classmethod
    def merge(cls, document):
        """Document over the defaults; sections merge key by key."""
        merged = cls.defaults()
        for key, value in document.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return merged

    @classmethod
    def load_config(cls, path=None, protocol=None, output_dir=None, seed=None) -> RunConfig:
        """
        Resolve a configuration file ('default' or None for the built-ins),
        then apply command-line overrides.
        """
        if path is None or str(path) == cls.DEFAULT:
            document = {}
        else:
            path = Path(path)
            if not path.is_file():
                raise serializers.ValidationError({"config": [f"Configuration file not found: {path}"]})
            document = cls.parse(path.read_text())

        data = cls.merge(document)
        if protocol is not None:
            section = data.get("protocol")
            data["protocol"] = {**section, "name": protocol} if isinstance(section, dict) else section
        if output_dir is not None:
            data["output_dir"] = str(output_dir)
        if seed is not None:
            data["seed"] = seed

        serializer = RunConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        config = serializer.build_config()
        logger.debug(f"Resolved configuration: {config}")
        return config


class PlotService:
    """Deterministic SVG views of exported CSV files."""

    WAVEFORM_COLUMNS = ("reP", "imP", "reS", "imS", "reA", "imA")
    POPULATION_COLUMNS = ("p0", "p1", "p2", "p3")

    @classmethod
    def _save(cls, figure, path, seed):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context({"svg.hashsalt": f"passage-{seed}"}):
            figure.savefig(path, format="svg", metadata={"Date": None})
        logger.info(f"Wrote {path}")
        return path

    @classmethod
    def line_plot(cls, x, series, xlabel, ylabel, path, seed=0, title=None):
        """
        Args:
            series (dict): label -> y values
        """
        figure = Figure(figsize=(6, 4))
        axes = figure.subplots()
        for label, values in series.items():
            axes.plot(x, values, label=label)
        axes.set_xlabel(xlabel)
        axes.set_ylabel(ylabel)
        if title:
            axes.set_title(title)
        axes.legend(loc="best")
        axes.grid(alpha=0.3)
        figure.tight_layout()
        return cls._save(figure, path, seed)

    @classmethod
    def heatmap(cls, x, y, values, xlabel, ylabel, path, seed=0, title=None):
        """values[i, j] belongs to (x[i], y[j])."""
        figure = Figure(figsize=(5.5, 4.5))
        axes = figure.subplots()
        mesh = axes.pcolormesh(x, y, np.asarray(values).T, shading="nearest", vmin=0.0, vmax=1.0, cmap="viridis")
        figure.colorbar(mesh, ax=axes, label="efficiency")
        axes.set_xlabel(xlabel)
        axes.set_ylabel(ylabel)
        if title:
            axes.set_title(title)
        figure.tight_layout()
        return cls._save(figure, path, seed)

    @classmethod
    def plot_csv(cls, csv_path, svg_path, seed=0):
        """Render a waveform, evolution or sweep CSV; the layout follows its header."""
        if not Path(csv_path).is_file():
            raise serializers.ValidationError({"plot": [f"CSV file not found: {csv_path}"]})
        header, rows = read_csv(csv_path)
        if not rows:
            raise serializers.ValidationError({"plot": [f"{csv_path} has no data rows."]})
        data = np.array(rows)
        columns = {name: data[:, index] for index, name in enumerate(header)}
        title = Path(csv_path).stem

        if header[0] == "t_ns" and set(cls.WAVEFORM_COLUMNS) <= set(header):
            series = {name: columns[name] * 1e3 / (2 * np.pi) for name in cls.WAVEFORM_COLUMNS if np.any(columns[name])}
            return cls.line_plot(columns["t_ns"], series, "t (ns)", "drive / 2pi (MHz)", svg_path, seed, title)
        if header[0] == "t_ns" and set(cls.POPULATION_COLUMNS) <= set(header):
            series = {name.upper(): columns[name] for name in cls.POPULATION_COLUMNS}
            return cls.line_plot(columns["t_ns"], series, "t (ns)", "population", svg_path, seed, title)
        if header[-1] == "efficiency" and len(header) == 2:
            return cls.line_plot(
                columns[header[0]], {"efficiency": columns["efficiency"]}, header[0], "efficiency", svg_path, seed, title
            )
        if header[-1] == "efficiency" and len(header) == 3:
            x, y = np.unique(columns[header[0]]), np.unique(columns[header[1]])
            if x.size * y.size != data.shape[0]:
                raise serializers.ValidationError({"plot": [f"{csv_path} is not a complete grid."]})
            order = np.lexsort((columns[header[1]], columns[header[0]]))
            values = columns["efficiency"][order].reshape(x.size, y.size)
            return cls.heatmap(x, y, values, header[0], header[1], svg_path, seed, title)
        raise serializers.ValidationError({"plot": [f"Unrecognized CSV layout: {','.join(header)}"]})


def run(argv):
    """Run one passage command; returns the process exit code."""
    try:
        execute_from_command_line(["manage.py", *argv])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else (0 if exc.code is None else 1)
    return 0
