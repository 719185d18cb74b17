"""Touchstone .s1p and CSV ingestion for real one-port VNA exports.

Supports the RI, MA, and DB data formats with any of the standard frequency
units; samples are normalized to rectangular complex S11 and frequencies to Hz.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import (MissingOptionLineError, NonMonotoneFrequencyError, TouchstoneError,
                     WrongPortCountError)
from .trace import ComplexTrace, FrequencyGrid

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_FORMATS = ("RI", "MA", "DB")


def _parse_option_line(line: str) -> dict:
    tokens = line[1:].split()
    opts = {"unit": 1e9, "parameter": "S", "format": "MA", "resistance": 50.0}
    i = 0
    while i < len(tokens):
        t = tokens[i].upper()
        if t.lower() in _FREQ_UNITS:
            opts["unit"] = _FREQ_UNITS[t.lower()]
        elif t in ("S", "Y", "Z", "H", "G"):
            opts["parameter"] = t
        elif t in _FORMATS:
            opts["format"] = t
        elif t == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneError("option line: 'R' without a resistance value")
            opts["resistance"] = float(tokens[i + 1])
            i += 1
        else:
            raise TouchstoneError(f"option line: unknown token {tokens[i]!r}")
        i += 1
    if opts["parameter"] != "S":
        raise TouchstoneError(f"only S-parameter files are supported, got {opts['parameter']!r}")
    return opts


def parse_touchstone(text: str) -> ComplexTrace:
    """Parse a one-port Touchstone sweep into a complex trace.

    The trace's metadata records the source format and reference resistance.
    The grid is the file's frequency axis; non-uniform spacing is preserved in
    metadata["frequencies_hz"] while the grid spans the same endpoints.
    """
    opts = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if opts is not None:
                raise TouchstoneError(f"line {lineno}: second option line")
            if rows:
                raise MissingOptionLineError(f"line {lineno}: option line after data rows")
            opts = _parse_option_line(line)
            continue
        if opts is None:
            raise MissingOptionLineError(f"line {lineno}: data before any option line")
        fields = line.split()
        if len(fields) != 3:
            raise WrongPortCountError(
                f"line {lineno}: expected 3 columns for a one-port file, got {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise TouchstoneError(f"line {lineno}: non-numeric value") from exc
    if opts is None:
        raise MissingOptionLineError("no option line ('# ...') in file")
    if len(rows) < 2:
        raise TouchstoneError(f"need at least 2 data rows, got {len(rows)}")
    data = np.asarray(rows)
    freqs = data[:, 0] * opts["unit"]
    if not np.all(np.diff(freqs) > 0):
        raise NonMonotoneFrequencyError("frequencies must be strictly increasing")
    a, b = data[:, 1], data[:, 2]
    if opts["format"] == "RI":
        samples = a + 1j * b
    elif opts["format"] == "MA":
        samples = a * np.exp(1j * np.radians(b))
    else:  # DB
        samples = 10.0 ** (a / 20.0) * np.exp(1j * np.radians(b))
    grid = FrequencyGrid(float(freqs[0]), float(freqs[-1]), len(freqs))
    meta = {
        "source": "touchstone",
        "format": opts["format"],
        "reference_ohm": opts["resistance"],
        "frequencies_hz": freqs.tolist(),
    }
    return ComplexTrace(grid, samples, meta)


def parse_touchstone_file(path) -> ComplexTrace:
    with open(path) as fh:
        return parse_touchstone(fh.read())


_CSV_COLUMNS = ("frequency_hz", "s11_re", "s11_im")


def parse_vna_csv(text: str) -> ComplexTrace:
    """Parse a CSV VNA export with columns frequency_hz, s11_re, s11_im."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not set(_CSV_COLUMNS) <= set(reader.fieldnames):
        raise TouchstoneError(f"CSV header must contain columns {_CSV_COLUMNS}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        try:
            rows.append([float(rec[c]) for c in _CSV_COLUMNS])
        except (TypeError, ValueError) as exc:
            raise TouchstoneError(f"line {lineno}: non-numeric value") from exc
    if len(rows) < 2:
        raise TouchstoneError(f"need at least 2 data rows, got {len(rows)}")
    data = np.asarray(rows)
    freqs = data[:, 0]
    if not np.all(np.diff(freqs) > 0):
        raise NonMonotoneFrequencyError("frequencies must be strictly increasing")
    grid = FrequencyGrid(float(freqs[0]), float(freqs[-1]), len(freqs))
    meta = {"source": "csv", "format": "RI", "frequencies_hz": freqs.tolist()}
    return ComplexTrace(grid, data[:, 1] + 1j * data[:, 2], meta)


def parse_vna_csv_file(path) -> ComplexTrace:
    with open(path) as fh:
        return parse_vna_csv(fh.read())
