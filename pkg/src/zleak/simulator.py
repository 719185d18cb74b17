"""Simulated device under test.

Register bits perturb a baseline S11 curve through per-bit resonance lobes
("virtual probes"): each active bit adds its lobes' magnitude (dB) and phase
(degree) deflections, shaped by a Gaussian profile around the lobe center.
Complex Gaussian noise with instrument averaging sits on top.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng as zrng
from .errors import ConfigurationError, NoWitnessError, ShapeError
from .pdn import RlcLadder, ladder_baseline_trace
from .trace import ComplexTrace, FrequencyGrid, TraceBatch, from_db_deg

DEVICE_SCHEMA_VERSION = 1

# Per-quadrature complex-noise standard deviations (S11 units).
# "paper_like" is calibrated so the acceptance-scale single-trace template
# attack succeeds at averaging 200; see the acceptance suite.
NOISE_PRESETS = {"clean": 0.0, "paper_like": 0.01, "hard": 0.08}


@dataclass(frozen=True)
class Lobe:
    center_hz: float
    bandwidth_hz: float
    magnitude_db: float
    phase_deg: float

    def __post_init__(self):
        if not (self.bandwidth_hz > 0):
            raise ValueError(f"lobe bandwidth must be > 0, got {self.bandwidth_hz}")


@dataclass(frozen=True)
class BitSignature:
    """Frequency response a register bit adds to the trace when set."""

    owner: str
    lobes: tuple

    def __post_init__(self):
        if len(self.lobes) == 0:
            raise ValueError(f"signature for {self.owner!r} needs at least one lobe")

    def response_db_deg(self, f_hz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mag = np.zeros_like(f_hz, dtype=float)
        ph = np.zeros_like(f_hz, dtype=float)
        for lb in self.lobes:
            profile = np.exp(-(((f_hz - lb.center_hz) / lb.bandwidth_hz) ** 2))
            mag += lb.magnitude_db * profile
            ph += lb.phase_deg * profile
        return mag, ph


@dataclass(frozen=True)
class SignaturePolicy:
    """Generation parameters for per-bit signatures.

    Ranges are sampled per lobe; bandwidths are fractions of the grid span.
    With disjoint=True each lobe gets its own slot of the span so the
    center +/- bandwidth intervals never overlap across bits.
    """

    lobes_per_bit: int = 1
    magnitude_db_range: tuple = (0.02, 0.06)
    phase_deg_range: tuple = (0.3, 0.6)
    bandwidth_fraction_range: tuple = (0.004, 0.01)
    disjoint: bool = True

    def __post_init__(self):
        if self.lobes_per_bit < 1:
            raise ValueError("lobes_per_bit must be >= 1")
        for lo, hi in (self.magnitude_db_range, self.phase_deg_range, self.bandwidth_fraction_range):
            if hi < lo:
                raise ValueError("policy ranges must be (low, high) with low <= high")


@dataclass
class SnapshotState:
    """Register contents of the DUT at the measured clock-gated instant."""

    bits: dict

    def active(self) -> list[str]:
        return [b for b, v in self.bits.items() if v]


@dataclass
class DeviceModel:
    """Baseline curve plus per-bit signatures and a noise specification."""

    grid: FrequencyGrid
    baseline: ComplexTrace
    signatures: dict
    noise_sigma: float
    seed: int
    signature_free: frozenset = frozenset()

    def __post_init__(self):
        if self.baseline.grid != self.grid:
            raise ShapeError("baseline grid does not match device grid")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for owner, sig in self.signatures.items():
            if sig.owner != owner:
                raise ValueError(f"signature owner {sig.owner!r} filed under {owner!r}")
            for lb in sig.lobes:
                if not (self.grid.start_hz <= lb.center_hz <= self.grid.stop_hz):
                    raise ValueError(f"lobe center {lb.center_hz} outside grid span for {owner!r}")
        self._responses = {}

    def bit_ids(self) -> list[str]:
        return list(self.signatures)

    def response(self, bit_id: str) -> tuple[np.ndarray, np.ndarray]:
        """Cached (magnitude dB, phase deg) response vectors over the grid."""
        if bit_id not in self._responses:
            self._responses[bit_id] = self.signatures[bit_id].response_db_deg(self.grid.stamps())
        return self._responses[bit_id]

    def check_state(self, state: SnapshotState) -> None:
        unknown = [b for b in state.bits if b not in self.signatures and b not in self.signature_free]
        if unknown:
            raise ConfigurationError(f"state bits without signatures: {sorted(unknown)}")

    # --- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": DEVICE_SCHEMA_VERSION,
            "grid": self.grid.to_dict(),
            "baseline_re": self.baseline.samples.real.tolist(),
            "baseline_im": self.baseline.samples.imag.tolist(),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "signature_free": sorted(self.signature_free),
            "signatures": {
                owner: [
                    [lb.center_hz, lb.bandwidth_hz, lb.magnitude_db, lb.phase_deg]
                    for lb in sig.lobes
                ]
                for owner, sig in self.signatures.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceModel":
        if d.get("schema_version") != DEVICE_SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported device schema_version {d.get('schema_version')}")
        grid = FrequencyGrid.from_dict(d["grid"])
        baseline = ComplexTrace(
            grid, np.asarray(d["baseline_re"]) + 1j * np.asarray(d["baseline_im"])
        )
        signatures = {
            owner: BitSignature(owner, tuple(Lobe(*row) for row in rows))
            for owner, rows in d["signatures"].items()
        }
        return cls(grid, baseline, signatures, float(d["noise_sigma"]), int(d["seed"]),
                   frozenset(d.get("signature_free", [])))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DeviceModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _generate_signatures(grid: FrequencyGrid, bit_ids: list[str], policy: SignaturePolicy,
                         seed: int) -> dict:
    span = grid.span_hz
    n_lobes = len(bit_ids) * policy.lobes_per_bit
    signatures = {}
    if policy.disjoint:
        if grid.points < 4 * n_lobes:
            raise ConfigurationError(
                f"{grid.points}-point grid too coarse for {n_lobes} disjoint lobes"
            )
        slot = span / n_lobes
        for bi, bit_id in enumerate(bit_ids):
            r = zrng.stream(seed, f"signature:{bit_id}")
            lobes = []
            for li in range(policy.lobes_per_bit):
                slot_start = grid.start_hz + (bi * policy.lobes_per_bit + li) * slot
                center = slot_start + slot * (0.35 + 0.3 * r.random())
                frac = r.uniform(*policy.bandwidth_fraction_range)
                bw = min(frac * span, 0.30 * slot)
                lobes.append(Lobe(center, bw,
                                  r.uniform(*policy.magnitude_db_range),
                                  r.uniform(*policy.phase_deg_range)))
            signatures[bit_id] = BitSignature(bit_id, tuple(lobes))
    else:
        for bit_id in bit_ids:
            r = zrng.stream(seed, f"signature:{bit_id}")
            lobes = []
            for _ in range(policy.lobes_per_bit):
                center = grid.start_hz + span * (0.02 + 0.96 * r.random())
                bw = r.uniform(*policy.bandwidth_fraction_range) * span
                lobes.append(Lobe(center, bw,
                                  r.uniform(*policy.magnitude_db_range),
                                  r.uniform(*policy.phase_deg_range)))
            signatures[bit_id] = BitSignature(bit_id, tuple(lobes))
    return signatures


def build_device_model(grid: FrequencyGrid, baseline_source, bit_ids: list[str],
                       policy: SignaturePolicy = SignaturePolicy(), seed: int = 0,
                       noise_sigma: float | str = "paper_like",
                       signature_free=()) -> DeviceModel:
    """Deterministically generate a device: same inputs give identical models."""
    if len(set(bit_ids)) != len(bit_ids):
        raise ConfigurationError("bit_ids must be distinct")
    if isinstance(baseline_source, RlcLadder):
        baseline = ladder_baseline_trace(baseline_source, grid)
    elif isinstance(baseline_source, ComplexTrace):
        if baseline_source.grid != grid:
            raise ShapeError("baseline trace grid does not match device grid")
        baseline = baseline_source
    else:
        raise TypeError(f"unsupported baseline source {type(baseline_source)!r}")
    sigma = NOISE_PRESETS[noise_sigma] if isinstance(noise_sigma, str) else float(noise_sigma)
    signatures = _generate_signatures(grid, list(bit_ids), policy, seed)
    return DeviceModel(grid, baseline, signatures, sigma, seed,
                       signature_free=frozenset(signature_free))


def _state_deflection(model: DeviceModel, state: SnapshotState) -> tuple[np.ndarray, np.ndarray]:
    mag = np.zeros(model.grid.points)
    ph = np.zeros(model.grid.points)
    for bit_id in state.active():
        if bit_id in model.signatures:
            m, p = model.response(bit_id)
            mag = mag + m
            ph = ph + p
    return mag, ph


def _noise(model: DeviceModel, noise_seed: int, averaging: int,
           materialize: bool = False) -> np.ndarray:
    if model.noise_sigma == 0:
        return np.zeros(model.grid.points, dtype=np.complex128)
    r = zrng.stream(noise_seed, "noise")
    if materialize:
        draws = r.standard_normal((averaging, 2, model.grid.points)) * model.noise_sigma
        q = draws.mean(axis=0)
    else:
        q = r.standard_normal((2, model.grid.points)) * (model.noise_sigma / math.sqrt(averaging))
    return q[0] + 1j * q[1]


def synthesize_trace(model: DeviceModel, state: SnapshotState, noise_seed: int,
                     averaging: int = 1, materialize_averaging: bool = False,
                     metadata: dict | None = None) -> ComplexTrace:
    """One noisy sweep of the device holding the given register state.

    Averaging is applied as variance division; materialize_averaging=True
    instead averages that many raw draws (statistically identical, for audit).
    """
    if averaging < 1:
        raise ValueError("averaging must be >= 1")
    model.check_state(state)
    mag, ph = _state_deflection(model, state)
    samples = model.baseline.samples * from_db_deg(mag, ph)
    samples = samples + _noise(model, noise_seed, averaging, materialize_averaging)
    meta = dict(metadata or {})
    meta.setdefault("averaging", averaging)
    meta.setdefault("noise_seed", noise_seed)
    return ComplexTrace(model.grid, samples, meta)


def synthesize_batch(model: DeviceModel, states: list[SnapshotState], noise_seeds: list[int],
                     averaging: int = 1, metadata: list[dict] | None = None) -> TraceBatch:
    """Vectorized multi-trace synthesis; identical to per-trace synthesize_trace."""
    if len(states) != len(noise_seeds):
        raise ShapeError("states and noise_seeds must align")
    n = len(states)
    points = model.grid.points
    sig_ids = model.bit_ids()
    index = {b: i for i, b in enumerate(sig_ids)}
    state_mat = np.zeros((n, len(sig_ids)))
    for ti, st in enumerate(states):
        model.check_state(st)
        for b in st.active():
            if b in index:
                state_mat[ti, index[b]] = 1.0
    if sig_ids:
        resp_mag = np.stack([model.response(b)[0] for b in sig_ids])
        resp_ph = np.stack([model.response(b)[1] for b in sig_ids])
        mag = state_mat @ resp_mag
        ph = state_mat @ resp_ph
    else:
        mag = np.zeros((n, points))
        ph = np.zeros((n, points))
    samples = model.baseline.samples[None, :] * from_db_deg(mag, ph)
    if model.noise_sigma > 0:
        for ti in range(n):
            samples[ti] += _noise(model, noise_seeds[ti], averaging)
    meta = metadata if metadata is not None else [{} for _ in range(n)]
    meta = [dict(m, averaging=averaging, noise_seed=int(s)) for m, s in zip(meta, noise_seeds)]
    return TraceBatch(model.grid, samples, meta)


def reference_normalize(trace: ComplexTrace, reference: ComplexTrace) -> ComplexTrace:
    """Store the per-stamp difference against a reference sweep.

    The difference is taken in (dB magnitude, principal-value phase) form,
    i.e. the returned complex samples are trace/reference, whose dB magnitude
    and phase are exactly the per-stamp differences.
    """
    if trace.grid != reference.grid:
        raise ShapeError("trace and reference grids differ")
    return ComplexTrace(trace.grid, trace.samples / reference.samples, dict(trace.metadata))


def normalize_batch(batch: TraceBatch, reference: ComplexTrace) -> TraceBatch:
    if batch.grid != reference.grid:
        raise ShapeError("batch and reference grids differ")
    return TraceBatch(batch.grid, batch.samples / reference.samples[None, :],
                      batch.metadata, batch.channel)


def masking_distinguishability_witness(model: DeviceModel, bit_id: str) -> tuple[float, float]:
    """Frequency and noiseless |trace(bit=1) - trace(bit=0)| deflection, maximized
    over the grid. A nonzero return certifies a frequency where the two states'
    impedance differs."""
    if bit_id not in model.signatures:
        raise ConfigurationError(f"bit {bit_id!r} has no signature")
    mag, ph = model.response(bit_id)
    delta = np.abs(model.baseline.samples * (from_db_deg(mag, ph) - 1.0))
    k = int(np.argmax(delta))
    if delta[k] == 0:
        raise NoWitnessError(f"bit {bit_id!r} produces no deflection anywhere on the grid")
    return float(model.grid.stamps()[k]), float(delta[k])


def deflection_energy(model: DeviceModel, state: SnapshotState) -> float:
    """Sum of per-stamp squared noiseless deflections (power-consumption proxy)."""
    mag, ph = _state_deflection(model, state)
    delta = model.baseline.samples * (from_db_deg(mag, ph) - 1.0)
    return float(np.sum(np.abs(delta) ** 2))
