"""The three impedance attacks: DIMA, CIMA, and TIMA.

DIMA partitions traces per key hypothesis by a predicted intermediate bit and
scores the per-stamp difference of class means. CIMA correlates a Hamming
weight prediction against each frequency stamp. TIMA profiles per-bit
multivariate Gaussian templates at selected points of interest and classifies
attack traces by accumulated log-likelihood.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .aes import HW_TABLE, SBOX, IntermediateSelector
from .errors import (ArchiveTruncatedError, ArchiveVersionError, IncompleteRecoveryError,
                     InsufficientDataError, NumericDomainError, ShapeError)
from .scenarios import bit_label_array
from .trace import TraceBatch

TEMPLATE_MAGIC = b"ZTPL1\n"
TEMPLATE_SCHEMA_VERSION = 1

# An absolute ridge floor keeps noiseless profiling covariances invertible
# (the relative ridge is proportional to trace(cov) and vanishes with it).
RIDGE_ABS_FLOOR = 1e-12


@dataclass
class KeyRanking:
    """Hypotheses ordered by descending score; ties by ascending hypothesis."""

    entries: list  # [(hypothesis, score)]
    best_frequency: dict = field(default_factory=dict)  # hypothesis -> stamp index

    @classmethod
    def from_scores(cls, hypotheses, scores, best_frequency=None) -> "KeyRanking":
        order = sorted(range(len(hypotheses)), key=lambda i: (-scores[i], hypotheses[i]))
        entries = [(int(hypotheses[i]), float(scores[i])) for i in order]
        return cls(entries, dict(best_frequency or {}))

    def best(self) -> int:
        return self.entries[0][0]

    def rank_of(self, hypothesis: int) -> int:
        for r, (h, _) in enumerate(self.entries, start=1):
            if h == int(hypothesis):
                return r
        raise KeyError(f"hypothesis {hypothesis} not in ranking")


def _predict_bits(k: int, plaintexts: np.ndarray, sel: IntermediateSelector) -> np.ndarray:
    inter = SBOX[np.bitwise_xor(int(k), plaintexts)]
    if sel.bit_index is None:
        return inter
    return (inter >> sel.bit_index) & 1


@dataclass
class DimaResult:
    ranking: KeyRanking
    dom_matrix: np.ndarray  # (n_keys, n_stamps)
    hypotheses: list
    degenerate: set = field(default_factory=set)


def dima_attack(batch: TraceBatch, sel: IntermediateSelector = IntermediateSelector(0),
                key_space=range(256), score: str = "mean") -> DimaResult:
    """Differential analysis over frequency stamps (difference-of-means).

    score="mean" averages the DOM curve over all stamps (the classic rule);
    score="max" takes its peak instead (useful when lobes are narrow).
    """
    if score not in ("mean", "max"):
        raise ValueError(f"unknown score rule {score!r}")
    X = batch.channel_matrix()
    pts = batch.plaintexts()
    hyps = [int(k) for k in key_space]
    dom = np.zeros((len(hyps), X.shape[1]))
    degenerate = set()
    bit_sels = [sel] if sel.bit_index is not None else [IntermediateSelector(b) for b in range(8)]
    for ki, k in enumerate(hyps):
        acc = np.zeros(X.shape[1])
        ok = 0
        for bs in bit_sels:
            h = _predict_bits(k, pts, bs).astype(bool)
            n1 = int(h.sum())
            if n1 == 0 or n1 == len(h):
                degenerate.add(k)
                continue
            acc += np.abs(X[h].mean(axis=0) - X[~h].mean(axis=0))
            ok += 1
        dom[ki] = acc / ok if ok else 0.0
    scores = dom.mean(axis=1) if score == "mean" else dom.max(axis=1)
    best = {k: int(np.argmax(dom[ki])) for ki, k in enumerate(hyps)}
    return DimaResult(KeyRanking.from_scores(hyps, scores, best), dom, hyps, degenerate)


@dataclass
class CimaResult:
    ranking: KeyRanking
    corr_matrix: np.ndarray  # (n_keys, n_stamps)
    hypotheses: list
    flagged_zero_variance: bool = False


def cima_attack(batch: TraceBatch, sel: IntermediateSelector = IntermediateSelector(None),
                key_space=range(256)) -> CimaResult:
    """Pearson correlation between HW(sbox(k ^ p)) and each frequency stamp."""
    X = batch.channel_matrix()
    if X.shape[0] < 3:
        raise ValueError("CIMA needs at least 3 traces")
    pts = batch.plaintexts()
    hyps = [int(k) for k in key_space]
    Xc = X - X.mean(axis=0)
    sx = np.sqrt((Xc**2).sum(axis=0))
    flagged = bool(np.any(sx == 0))
    corr = np.zeros((len(hyps), X.shape[1]))
    for ki, k in enumerate(hyps):
        preds = HW_TABLE[_predict_bits(k, pts, IntermediateSelector(None))].astype(float) \
            if sel.bit_index is None else _predict_bits(k, pts, sel).astype(float)
        pc = preds - preds.mean()
        sp = math.sqrt(float((pc**2).sum()))
        if sp == 0:
            flagged = True
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            row = (pc @ Xc) / (sp * sx)
        corr[ki] = np.where(sx == 0, 0.0, row)
    scores = np.abs(corr).max(axis=1)
    best = {k: int(np.argmax(np.abs(corr[ki]))) for ki, k in enumerate(hyps)}
    return CimaResult(KeyRanking.from_scores(hyps, scores, best), corr, hyps, flagged)


@dataclass
class PoiSelection:
    indices: np.ndarray
    shortfall: bool


def select_pois(class_means, p: int, alpha: float = 0.01) -> PoiSelection:
    """Greedy localized top-K on the difference-of-means curve.

    Repeatedly takes the stamp with maximal DOM, then excludes every stamp
    within alpha * n_stamps of it. Returned indices are sorted ascending.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    m0, m1 = class_means
    dom = np.abs(np.asarray(m1, dtype=float) - np.asarray(m0, dtype=float))
    n = dom.shape[0]
    radius = alpha * n
    work = dom.astype(float).copy()
    picks = []
    idx = np.arange(n)
    while len(picks) < p:
        j = int(np.argmax(work))
        if not np.isfinite(work[j]):
            break
        picks.append(j)
        work[np.abs(idx - j) <= radius] = -np.inf
    return PoiSelection(np.array(sorted(picks), dtype=int), shortfall=len(picks) < p)


@dataclass
class BitTemplate:
    pois: np.ndarray
    means: np.ndarray  # (2, p)
    covs: np.ndarray  # (2, p, p), ridge-regularized
    class_counts: tuple
    shortfall: bool = False


@dataclass
class TemplateSet:
    grid_fingerprint: str
    channel: str
    p: int
    alpha: float
    ridge: float
    profiling_traces: int
    templates: dict  # bit_id -> BitTemplate

    # --- persistence: text header + packed little-endian float64 payload ---

    def save(self, path) -> None:
        header = {
            "schema_version": TEMPLATE_SCHEMA_VERSION,
            "grid_fingerprint": self.grid_fingerprint,
            "channel": self.channel,
            "p": self.p,
            "alpha": self.alpha,
            "ridge": self.ridge,
            "profiling_traces": self.profiling_traces,
            "bits": [
                {
                    "id": bit,
                    "pois": [int(i) for i in t.pois],
                    "class_counts": list(t.class_counts),
                    "shortfall": t.shortfall,
                }
                for bit, t in self.templates.items()
            ],
        }
        blob = json.dumps(header).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(TEMPLATE_MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for t in self.templates.values():
                fh.write(np.ascontiguousarray(t.means, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(t.covs, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TemplateSet":
        with open(path, "rb") as fh:
            magic = fh.read(len(TEMPLATE_MAGIC))
            if magic != TEMPLATE_MAGIC:
                raise ArchiveVersionError("not a template file (bad magic)")
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            if header.get("schema_version") != TEMPLATE_SCHEMA_VERSION:
                raise ArchiveVersionError(
                    f"unsupported template schema_version {header.get('schema_version')}")
            templates = {}
            for entry in header["bits"]:
                p_i = len(entry["pois"])
                need = 8 * (2 * p_i + 2 * p_i * p_i)
                raw = fh.read(need)
                if len(raw) < need:
                    raise ArchiveTruncatedError("template payload truncated")
                means = np.frombuffer(raw[: 16 * p_i], dtype="<f8").reshape(2, p_i)
                covs = np.frombuffer(raw[16 * p_i:], dtype="<f8").reshape(2, p_i, p_i)
                templates[entry["id"]] = BitTemplate(
                    np.array(entry["pois"], dtype=int), means.copy(), covs.copy(),
                    tuple(entry["class_counts"]), bool(entry["shortfall"]))
        return cls(header["grid_fingerprint"], header["channel"], header["p"],
                   header["alpha"], header["ridge"], header["profiling_traces"], templates)


def _batch_fingerprint(batch: TraceBatch) -> str:
    return f"{batch.grid.fingerprint()}:{batch.channel}"


def tima_profile(batch: TraceBatch, targets: list[str], p: int = 5, alpha: float = 0.01,
                 ridge: float = 1e-6) -> TemplateSet:
    """Build per-bit two-class Gaussian templates at selected POIs."""
    X = batch.channel_matrix()
    templates = {}
    for bit in targets:
        labels = bit_label_array(batch, bit)
        idx = [np.flatnonzero(labels == c) for c in (0, 1)]
        for c in (0, 1):
            if len(idx[c]) < 2:
                raise InsufficientDataError(
                    f"bit {bit!r}: class {c} has {len(idx[c])} traces (need >= 2)")
        m = [X[idx[c]].mean(axis=0) for c in (0, 1)]
        sel = select_pois((m[0], m[1]), p, alpha)
        pois = sel.indices
        means = np.stack([m[c][pois] for c in (0, 1)])
        covs = []
        for c in (0, 1):
            V = X[np.ix_(idx[c], pois)]
            cov = np.atleast_2d(np.cov(V, rowvar=False))
            lam = ridge * (np.trace(cov) / len(pois)) + RIDGE_ABS_FLOOR
            covs.append(cov + lam * np.eye(len(pois)))
        templates[bit] = BitTemplate(pois, means, np.stack(covs),
                                     (len(idx[0]), len(idx[1])), sel.shortfall)
    return TemplateSet(_batch_fingerprint(batch), batch.channel, p, alpha, ridge,
                       len(batch), templates)


def _mvn_logpdf(V: np.ndarray, mean: np.ndarray, cov: np.ndarray, bit: str) -> np.ndarray:
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericDomainError(f"singular template covariance for bit {bit!r}") from exc
    d = (V - mean).T
    sol = solve_triangular(L, d, lower=True)
    quad = (sol**2).sum(axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    out = -0.5 * (quad + logdet + cov.shape[0] * math.log(2.0 * math.pi))
    if not np.all(np.isfinite(out)):
        raise NumericDomainError(f"non-finite template density for bit {bit!r}")
    return out


@dataclass
class BitDecision:
    log_likelihoods: tuple  # accumulated, per class
    decided: int
    margin: float


@dataclass
class PosteriorResult:
    bits: dict  # bit_id -> BitDecision

    def decisions(self) -> dict:
        return {b: d.decided for b, d in self.bits.items()}


def tima_attack(templates: TemplateSet, batch: TraceBatch,
                accumulate: str = "log") -> PosteriorResult:
    """Classify each target bit from the accumulated per-class likelihoods.

    accumulate="log" sums log-densities across traces (product of densities,
    as implemented); "prob" sums raw densities instead, for comparison.
    """
    if accumulate not in ("log", "prob"):
        raise ValueError(f"unknown accumulation mode {accumulate!r}")
    if _batch_fingerprint(batch) != templates.grid_fingerprint:
        raise ShapeError("attack batch grid/channel does not match the template set")
    X = batch.channel_matrix()
    results = {}
    for bit, tpl in templates.templates.items():
        V = X[:, tpl.pois]
        acc = []
        for c in (0, 1):
            ld = _mvn_logpdf(V, tpl.means[c], tpl.covs[c], bit)
            acc.append(float(ld.sum()) if accumulate == "log" else float(logsumexp(ld)))
        decided = 1 if acc[1] > acc[0] else 0  # ties go to the lower hypothesis
        results[bit] = BitDecision((acc[0], acc[1]), decided, abs(acc[1] - acc[0]))
    return PosteriorResult(results)


@dataclass
class KeyRecovery:
    key_bytes: dict  # byte index -> recovered key byte
    share_bytes: dict  # byte index -> [share0, share1, share2]


def recover_master_key(decisions, n_shares: int = 3) -> KeyRecovery:
    """Assemble share bytes from per-bit decisions and XOR-fold them."""
    if isinstance(decisions, PosteriorResult):
        decisions = decisions.decisions()
    table = {}
    for bit_id, value in decisions.items():
        if not bit_id.startswith("kshare"):
            continue
        head, _, bitpart = bit_id.rpartition(".bit")
        bit = int(bitpart)
        if ".byte" in head:
            sharepart, _, bytepart = head.partition(".byte")
            share, byte = int(sharepart[len("kshare"):]), int(bytepart)
        else:
            share, byte = int(head[len("kshare"):]), 0
        table[(byte, share, bit)] = int(value)
    if not table:
        raise IncompleteRecoveryError("no key-share bit decisions present")
    bytes_seen = sorted({byte for byte, _, _ in table})
    missing = []
    share_bytes, key_bytes = {}, {}
    for byte in bytes_seen:
        shares = []
        for s in range(n_shares):
            v = 0
            for b in range(8):
                if (byte, s, b) not in table:
                    missing.append(f"byte {byte} share {s} bit {b}")
                    continue
                v |= table[(byte, s, b)] << b
            shares.append(v)
        share_bytes[byte] = shares
        acc = 0
        for v in shares:
            acc ^= v
        key_bytes[byte] = acc
    if missing:
        raise IncompleteRecoveryError("missing bit decisions: " + ", ".join(missing))
    return KeyRecovery(key_bytes, share_bytes)
