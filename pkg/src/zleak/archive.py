"""Native trace-batch archive: structured-text header + packed binary payload.

Layout: magic, 8-byte little-endian header length, UTF-8 JSON header, then
traces x points x 2 little-endian float64 (re, im) pairs. Unknown header
fields survive a read/write round trip.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ArchiveShapeError, ArchiveTruncatedError, ArchiveVersionError
from .trace import FrequencyGrid, TraceBatch

ARCHIVE_MAGIC = b"ZARC1\n"
ARCHIVE_SCHEMA_VERSION = 1


def write_archive(batch: TraceBatch, path, header_extra: dict | None = None) -> None:
    header = dict(getattr(batch, "header", None) or {})
    header.update(header_extra or {})
    header.update({
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "grid": batch.grid.to_dict(),
        "channel": batch.channel,
        "traces": len(batch),
        "metadata": batch.metadata,
    })
    blob = json.dumps(header).encode("utf-8")
    payload = np.empty((len(batch), batch.grid.points, 2), dtype="<f8")
    payload[:, :, 0] = batch.samples.real
    payload[:, :, 1] = batch.samples.imag
    with open(path, "wb") as fh:
        fh.write(ARCHIVE_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload.tobytes())


def read_archive(path) -> TraceBatch:
    with open(path, "rb") as fh:
        magic = fh.read(len(ARCHIVE_MAGIC))
        if magic != ARCHIVE_MAGIC:
            raise ArchiveVersionError("not a trace archive (bad magic)")
        raw_len = fh.read(8)
        if len(raw_len) < 8:
            raise ArchiveTruncatedError("archive ends inside the header length field")
        (hlen,) = struct.unpack("<Q", raw_len)
        blob = fh.read(hlen)
        if len(blob) < hlen:
            raise ArchiveTruncatedError("archive ends inside the header")
        header = json.loads(blob.decode("utf-8"))
        if header.get("schema_version") != ARCHIVE_SCHEMA_VERSION:
            raise ArchiveVersionError(
                f"unsupported archive schema_version {header.get('schema_version')}")
        grid = FrequencyGrid.from_dict(header["grid"])
        n = int(header["traces"])
        metadata = header.get("metadata", [])
        if len(metadata) != n:
            raise ArchiveShapeError(f"header declares {n} traces but {len(metadata)} metadata rows")
        need = n * grid.points * 2 * 8
        raw = fh.read(need + 1)
        if len(raw) < need:
            raise ArchiveTruncatedError(
                f"payload is {len(raw)} bytes, header-declared shape needs {need}")
        if len(raw) > need:
            raise ArchiveShapeError("payload is longer than the header-declared shape")
        flat = np.frombuffer(raw, dtype="<f8").reshape(n, grid.points, 2)
        samples = flat[:, :, 0] + 1j * flat[:, :, 1]
    batch = TraceBatch(grid, samples, metadata, header.get("channel", "phase_deg"))
    batch.header = header
    return batch
