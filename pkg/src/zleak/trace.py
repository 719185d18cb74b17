"""Core frequency-domain data containers.

A sweep is a set of linearly spaced frequency stamps; a trace is one complex
S11 sample per stamp. Batches hold many traces on a shared grid together with
per-trace metadata (plaintext, key, shares, seeds).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

CHANNELS = ("phase_deg", "magnitude_db", "both")


def wrap_phase_deg(deg):
    """Principal value in degrees, (-180, 180]."""
    out = np.mod(np.asarray(deg, dtype=float) + 180.0, 360.0) - 180.0
    out = np.where(out == -180.0, 180.0, out)
    return out if out.ndim else float(out)


def magnitude_db(samples):
    return 20.0 * np.log10(np.abs(samples))


def phase_deg(samples):
    return wrap_phase_deg(np.degrees(np.angle(samples)))


def from_db_deg(mag_db, ph_deg):
    """Rectangular complex value from (dB, degree) form."""
    return 10.0 ** (np.asarray(mag_db, dtype=float) / 20.0) * np.exp(
        1j * np.radians(np.asarray(ph_deg, dtype=float))
    )


@dataclass(frozen=True)
class FrequencyGrid:
    """Linearly spanned frequency stamps, endpoints inclusive."""

    start_hz: float
    stop_hz: float
    points: int

    def __post_init__(self):
        if not (self.start_hz > 0):
            raise ValueError(f"start_hz must be > 0, got {self.start_hz}")
        if not (self.stop_hz > self.start_hz):
            raise ValueError(f"stop_hz must exceed start_hz, got {self.stop_hz}")
        if int(self.points) != self.points or self.points < 2:
            raise ValueError(f"points must be an integer >= 2, got {self.points}")

    @property
    def span_hz(self) -> float:
        return self.stop_hz - self.start_hz

    @property
    def spacing_hz(self) -> float:
        return self.span_hz / (self.points - 1)

    def stamps(self) -> np.ndarray:
        return np.linspace(self.start_hz, self.stop_hz, self.points)

    def nearest_index(self, f_hz: float) -> int:
        i = round((f_hz - self.start_hz) / self.spacing_hz)
        return int(min(max(i, 0), self.points - 1))

    def fingerprint(self) -> str:
        payload = json.dumps([self.start_hz, self.stop_hz, self.points]).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"start_hz": self.start_hz, "stop_hz": self.stop_hz, "points": self.points}

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyGrid":
        return cls(float(d["start_hz"]), float(d["stop_hz"]), int(d["points"]))


@dataclass
class ComplexTrace:
    """One complex S11 sample per frequency stamp."""

    grid: FrequencyGrid
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.shape != (self.grid.points,):
            raise ShapeError(
                f"trace has {self.samples.shape} samples for a {self.grid.points}-point grid"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trace contains non-finite samples")

    def magnitude_db(self) -> np.ndarray:
        return magnitude_db(self.samples)

    def phase_deg(self) -> np.ndarray:
        return phase_deg(self.samples)


class TraceBatch:
    """Many traces on a shared grid, stored as an (n_traces, points) array.

    `channel` names the scalar the attacks analyze per stamp: the phase in
    degrees (default), the magnitude in dB, or both concatenated.
    """

    def __init__(self, grid: FrequencyGrid, samples: np.ndarray, metadata: list[dict] | None = None,
                 channel: str = "phase_deg"):
        samples = np.asarray(samples, dtype=np.complex128)
        if samples.ndim != 2 or samples.shape[1] != grid.points:
            raise ShapeError(f"batch shape {samples.shape} does not match {grid.points}-point grid")
        if channel not in CHANNELS:
            raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
        self.grid = grid
        self.samples = samples
        self.metadata = list(metadata) if metadata is not None else [{} for _ in range(len(samples))]
        if len(self.metadata) != len(samples):
            raise ShapeError("metadata count does not match trace count")
        self.channel = channel

    def __len__(self) -> int:
        return self.samples.shape[0]

    def trace(self, i: int) -> ComplexTrace:
        return ComplexTrace(self.grid, self.samples[i], dict(self.metadata[i]))

    def channel_matrix(self, channel: str | None = None) -> np.ndarray:
        """Per-trace scalar rows in the requested channel, shape (n, points) or (n, 2*points)."""
        channel = channel or self.channel
        if channel == "phase_deg":
            return phase_deg(self.samples)
        if channel == "magnitude_db":
            return magnitude_db(self.samples)
        if channel == "both":
            return np.concatenate([phase_deg(self.samples), magnitude_db(self.samples)], axis=1)
        raise ValueError(f"unknown channel {channel!r}")

    def with_channel(self, channel: str) -> "TraceBatch":
        return TraceBatch(self.grid, self.samples, self.metadata, channel)

    def subset(self, indices) -> "TraceBatch":
        idx = np.asarray(indices, dtype=int)
        return TraceBatch(self.grid, self.samples[idx], [self.metadata[i] for i in idx], self.channel)

    def plaintexts(self) -> np.ndarray:
        """First-byte plaintext labels, for the single-byte attack scenarios."""
        vals = []
        for m in self.metadata:
            p = m.get("plaintext")
            if p is None:
                raise KeyError("batch traces carry no plaintext labels")
            vals.append(int(p, 16) if isinstance(p, str) else int(p))
        return np.asarray(vals, dtype=np.int64)
