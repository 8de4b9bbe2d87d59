"""
Shared export helpers: significant-digit float field and CSV writing.
"""
import csv
import json
import logging
from pathlib import Path

from rest_framework import serializers

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12


def format_float(value):
    """Render a float with 12 significant digits."""
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


class SignificantFloatField(serializers.FloatField):
    """Float field whose representation is rounded to 12 significant digits."""

    def to_representation(self, value):
        return float(format_float(value))


def write_csv(path, fieldnames, rows):
    """
    Write serialized rows as CSV with a header line.

    Args:
        path: destination file
        fieldnames (list): column order
        rows (iterable): mappings keyed by fieldnames
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_float(row[name]) if isinstance(row[name], float) else row[name] for name in fieldnames])
    logger.info(f"Wrote {path}")
    return path


def read_csv(path):
    """Read a CSV written by write_csv into (header, rows of floats)."""
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(cell) for cell in row] for row in reader if row]
    return header, rows


def write_json(path, data):
    """Write a JSON document with sorted keys and a trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote {path}")
    return path
