"""Attack scenarios: register-bit layouts, input schedules, and campaigns.

A scenario binds the crypto semantics to the simulated device: which register
bits exist, how each scheduled input sets them, and what labels each trace
carries. Campaigns are deterministic in their seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as zrng
from .aes import SBOX, share_split
from .errors import ConfigurationError
from .simulator import (BitSignature, DeviceModel, Lobe, SignaturePolicy, SnapshotState,
                        build_device_model, normalize_batch, synthesize_batch)
from .trace import FrequencyGrid, TraceBatch

SCENARIO_KINDS = ("fanout", "sbox", "sbox_hw", "masked_key_byte", "masked_full_key")
CAMPAIGN_SCHEMA_VERSION = 1


def kshare_bit_id(share: int, bit: int, byte: int | None = None) -> str:
    if byte is None:
        return f"kshare{share}.bit{bit}"
    return f"kshare{share}.byte{byte}.bit{bit}"


def full_key_bit_ids(n_bits: int) -> list[str]:
    """Canonical byte-major ordering of the 3 x 128 key-share register bits."""
    ids = []
    for byte in range(16):
        for share in range(3):
            for bit in range(8):
                ids.append(kshare_bit_id(share, bit, byte))
    if n_bits > len(ids):
        raise ConfigurationError(f"at most {len(ids)} full-key bits exist, requested {n_bits}")
    return ids[:n_bits]


@dataclass
class ScenarioSpec:
    """One simulate-and-measure campaign."""

    kind: str
    traces: int
    averaging: int = 1
    seed: int = 0
    key: int | list = 0
    normalize: str = "baseline"  # baseline | measured | none
    channel: str = "phase_deg"
    # fanout
    traces_per_class: int | None = None
    # sbox_hw: stamp index carrying the HW-linear leak
    leak_stamp_index: int | None = None
    # masked_full_key
    n_target_bits: int = 64

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigurationError(f"unknown scenario kind {self.kind!r}")
        if self.normalize not in ("baseline", "measured", "none"):
            raise ConfigurationError(f"unknown normalize mode {self.normalize!r}")
        if self.traces < 0:
            raise ConfigurationError("traces must be >= 0")


def scenario_bit_ids(spec: ScenarioSpec) -> tuple[list[str], list[str]]:
    """(signatured bit ids, signature-free bit ids) for the scenario."""
    if spec.kind == "fanout":
        return ["fanout"], []
    if spec.kind in ("sbox", "sbox_hw"):
        return [f"sbox.bit{j}" for j in range(8)], []
    if spec.kind == "masked_key_byte":
        key_bits = [kshare_bit_id(s, b) for s in range(3) for b in range(8)]
        input_bits = [f"pshare{s}.bit{b}" for s in range(3) for b in range(8)]
        return key_bits, input_bits
    if spec.kind == "masked_full_key":
        return full_key_bit_ids(spec.n_target_bits), []
    raise ConfigurationError(spec.kind)


def build_scenario_device(grid: FrequencyGrid, baseline_source, spec: ScenarioSpec,
                          policy: SignaturePolicy = SignaturePolicy(), device_seed: int = 0,
                          noise_sigma: float | str = "paper_like") -> DeviceModel:
    bit_ids, sig_free = scenario_bit_ids(spec)
    if spec.kind == "sbox_hw":
        return build_hw_linear_device(grid, baseline_source, bit_ids,
                                      leak_stamp_index=spec.leak_stamp_index
                                      if spec.leak_stamp_index is not None else grid.points // 2,
                                      policy=policy, device_seed=device_seed,
                                      noise_sigma=noise_sigma)
    return build_device_model(grid, baseline_source, bit_ids, policy=policy, seed=device_seed,
                              noise_sigma=noise_sigma, signature_free=sig_free)


def build_hw_linear_device(grid: FrequencyGrid, baseline_source, bit_ids: list[str],
                           leak_stamp_index: int, policy: SignaturePolicy = SignaturePolicy(),
                           device_seed: int = 0,
                           noise_sigma: float | str = "paper_like") -> DeviceModel:
    """All bits share one identical lobe at a grid stamp, so the total phase
    deflection is exactly proportional to the Hamming weight of the register."""
    model = build_device_model(grid, baseline_source, bit_ids, policy=policy, seed=device_seed,
                               noise_sigma=noise_sigma)
    center = float(grid.stamps()[leak_stamp_index])
    bw = max(policy.bandwidth_fraction_range[0], 1e-6) * grid.span_hz
    lobe = Lobe(center, bw,
                0.5 * sum(policy.magnitude_db_range),
                0.5 * sum(policy.phase_deg_range))
    sigs = {b: BitSignature(b, (lobe,)) for b in bit_ids}
    return DeviceModel(model.grid, model.baseline, sigs, model.noise_sigma, model.seed)


def _byte_bits(value: int, prefix: str) -> dict:
    return {f"{prefix}.bit{b}": (value >> b) & 1 for b in range(8)}


def _schedule(spec: ScenarioSpec) -> tuple[list[SnapshotState], list[dict]]:
    states, metas = [], []
    if spec.kind == "fanout":
        per_class = spec.traces_per_class if spec.traces_per_class is not None else spec.traces // 2
        for cls in (0, 1):
            for _ in range(per_class):
                states.append(SnapshotState({"fanout": cls}))
                metas.append({"bits": {"fanout": cls}})
    elif spec.kind in ("sbox", "sbox_hw"):
        key = int(spec.key) & 0xFF
        r = zrng.stream(spec.seed, "plaintext")
        pts = r.integers(0, 256, size=spec.traces)
        for i in range(spec.traces):
            p = int(pts[i])
            inter = int(SBOX[key ^ p])
            states.append(SnapshotState(_byte_bits(inter, "sbox")))
            metas.append({"plaintext": f"{p:02x}", "key": f"{key:02x}"})
    elif spec.kind == "masked_key_byte":
        key = int(spec.key) & 0xFF
        for i in range(spec.traces):
            ks = share_split(key, 2, zrng.derive_seed(spec.seed, "key-shares", i))
            ps = share_split(0, 2, zrng.derive_seed(spec.seed, "input-shares", i))
            bits = {}
            for s in range(3):
                bits.update(_byte_bits(ks.shares[s], f"kshare{s}"))
                bits.update(_byte_bits(ps.shares[s], f"pshare{s}"))
            states.append(SnapshotState(bits))
            metas.append({"key": f"{key:02x}", "shares": [f"{v:02x}" for v in ks.shares]})
    elif spec.kind == "masked_full_key":
        key_bytes = list(spec.key) if isinstance(spec.key, (list, tuple)) else [int(spec.key)] * 16
        if len(key_bytes) != 16:
            raise ConfigurationError("masked_full_key needs a 16-byte key")
        target_ids = set(full_key_bit_ids(spec.n_target_bits))
        n_bytes = (spec.n_target_bits + 23) // 24
        for i in range(spec.traces):
            bits = {}
            share_hex = ["", "", ""]
            for byte in range(n_bytes):
                ks = share_split(key_bytes[byte] & 0xFF, 2,
                                 zrng.derive_seed(spec.seed, f"key-shares.byte{byte}", i))
                for s in range(3):
                    share_hex[s] += f"{ks.shares[s]:02x}"
                    for b in range(8):
                        bid = kshare_bit_id(s, b, byte)
                        if bid in target_ids:
                            bits[bid] = (ks.shares[s] >> b) & 1
            states.append(SnapshotState(bits))
            metas.append({"key": bytes(key_bytes).hex(), "shares": share_hex})
    else:
        raise ConfigurationError(spec.kind)
    for m in metas:
        m["scenario"] = spec.kind
    return states, metas


def run_campaign(model: DeviceModel, spec: ScenarioSpec) -> TraceBatch:
    """Synthesize the scenario's schedule; deterministic given the spec's seeds."""
    states, metas = _schedule(spec)
    missing = [b for st in states[:1] for b in st.bits
               if b not in model.signatures and b not in model.signature_free]
    if missing:
        raise ConfigurationError(f"scenario bits missing from device model: {sorted(missing)}")
    noise_seeds = [zrng.derive_seed(spec.seed, "trace-noise", i) for i in range(len(states))]
    batch = synthesize_batch(model, states, noise_seeds, spec.averaging, metas)
    if spec.normalize == "baseline":
        batch = normalize_batch(batch, model.baseline)
    elif spec.normalize == "measured":
        ref_states = [SnapshotState({}) for _ in states]
        ref_seeds = [zrng.derive_seed(spec.seed, "reference-noise", i) for i in range(len(states))]
        refs = synthesize_batch(model, ref_states, ref_seeds, spec.averaging)
        batch = TraceBatch(batch.grid, batch.samples / refs.samples, batch.metadata, batch.channel)
    return batch.with_channel(spec.channel)


def bit_label_array(batch: TraceBatch, bit_id: str) -> np.ndarray:
    """Per-trace 0/1 labels for a register bit, derived from trace metadata."""
    labels = np.empty(len(batch), dtype=np.int64)
    for i, m in enumerate(batch.metadata):
        bits = m.get("bits") or {}
        if bit_id in bits:
            labels[i] = int(bits[bit_id])
            continue
        if bit_id.startswith("kshare"):
            head, _, bitpart = bit_id.rpartition(".bit")
            bit = int(bitpart)
            if ".byte" in head:
                sharepart, _, bytepart = head.partition(".byte")
                share, byte = int(sharepart[len("kshare"):]), int(bytepart)
            else:
                share, byte = int(head[len("kshare"):]), 0
            shares = m.get("shares")
            if shares is None:
                raise KeyError(f"trace {i} carries no share labels for {bit_id!r}")
            share_bytes = bytes.fromhex(shares[share])
            labels[i] = (share_bytes[byte] >> bit) & 1
            continue
        if bit_id.startswith("sbox.bit"):
            bit = int(bit_id[len("sbox.bit"):])
            key = int(m["key"], 16)
            p = int(m["plaintext"], 16)
            labels[i] = (int(SBOX[key ^ p]) >> bit) & 1
            continue
        raise KeyError(f"cannot derive label {bit_id!r} from trace {i} metadata")
    return labels
