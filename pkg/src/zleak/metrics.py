"""Evaluation and reporting: DM curves, per-stamp SNR, key rank, success
rates, and deterministic CSV emission of figure data."""

from __future__ import annotations

import csv
import math

import numpy as np

from .attacks import KeyRanking
from .errors import ConfigurationError, InsufficientDataError
from .scenarios import bit_label_array
from .trace import TraceBatch


def difference_of_means(batch: TraceBatch, label: str) -> np.ndarray:
    """Per-stamp |mean(traces | bit=1) - mean(traces | bit=0)| in the batch channel."""
    labels = bit_label_array(batch, label)
    X = batch.channel_matrix()
    idx0 = np.flatnonzero(labels == 0)
    idx1 = np.flatnonzero(labels == 1)
    if len(idx0) == 0 or len(idx1) == 0:
        raise InsufficientDataError(f"label {label!r}: both classes must be nonempty")
    return np.abs(X[idx1].mean(axis=0) - X[idx0].mean(axis=0))


def snr_per_stamp(batch: TraceBatch, label: str) -> np.ndarray:
    """Variance of class means over mean within-class variance, per stamp.

    Stamps with zero within-class variance come back as +inf (flagged by value).
    """
    labels = bit_label_array(batch, label)
    X = batch.channel_matrix()
    groups = [X[labels == c] for c in (0, 1)]
    for c, g in enumerate(groups):
        if g.shape[0] < 2:
            raise InsufficientDataError(f"label {label!r}: class {c} needs >= 2 traces")
    means = np.stack([g.mean(axis=0) for g in groups])
    signal = means.var(axis=0)
    noise = np.stack([g.var(axis=0, ddof=1) for g in groups]).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(noise == 0, np.inf, signal / noise)
    return out


def key_rank(ranking: KeyRanking, true_key: int) -> int:
    """1-based rank of the true key in the ordered hypothesis list."""
    return ranking.rank_of(true_key)


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple:
    """95% Wilson score interval for a binomial rate."""
    if trials == 0:
        raise ValueError("trials must be > 0")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


def success_rate(outcomes) -> tuple:
    """(rate, (lo, hi)) over per-seed boolean outcomes, with a Wilson 95% CI."""
    outcomes = [bool(o) for o in outcomes]
    n = len(outcomes)
    s = sum(outcomes)
    return s / n, wilson_interval(s, n)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def emit_figure_data(which: str, path, *, batch: TraceBatch | None = None,
                     label: str | None = None, labels: list | None = None,
                     matrix: np.ndarray | None = None, hypotheses: list | None = None,
                     ranking: KeyRanking | None = None, top: int = 10) -> None:
    """Write the data behind a figure as a deterministic CSV.

    Tags: "fanout-dm" (DM curve for one label), "bit-dm" (DM curves for many
    labels), "cima-top-keys" (top hypotheses with score and peak stamp),
    "attack-matrix" (per-key per-stamp DOM or correlation matrix).
    """
    if which == "fanout-dm":
        dm = difference_of_means(batch, label or "fanout")
        _write_rows(path, ["frequency_hz", f"dm_{batch.channel}"],
                    zip(batch.grid.stamps(), dm))
    elif which == "bit-dm":
        curves = {b: difference_of_means(batch, b) for b in (labels or [])}
        header = ["frequency_hz"] + [f"dm_{b}" for b in curves]
        rows = zip(batch.grid.stamps(), *curves.values())
        _write_rows(path, header, rows)
    elif which == "cima-top-keys":
        stamps = batch.grid.stamps() if batch is not None else None
        rows = []
        for hyp, score in ranking.entries[:top]:
            peak = ranking.best_frequency.get(hyp)
            freq = stamps[peak] if (stamps is not None and peak is not None) else peak
            rows.append([f"0x{hyp:02x}", score, freq])
        _write_rows(path, ["key", "score", "peak_frequency_hz"], rows)
    elif which == "attack-matrix":
        header = ["key"] + [f"f{j}" for j in range(matrix.shape[1])]
        rows = [[f"0x{int(h):02x}", *row] for h, row in zip(hypotheses, matrix)]
        _write_rows(path, header, rows)
    else:
        raise ConfigurationError(f"unknown figure tag {which!r}")
