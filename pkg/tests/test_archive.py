import struct

import numpy as np
import pytest

from zleak.archive import ARCHIVE_MAGIC, read_archive, write_archive
from zleak.errors import ArchiveShapeError, ArchiveTruncatedError, ArchiveVersionError
from zleak.trace import TraceBatch


@pytest.fixture
def batch(grid500):
    rng = np.random.default_rng(1)
    samples = rng.normal(size=(6, grid500.points)) + 1j * rng.normal(size=(6, grid500.points))
    meta = [{"plaintext": f"{i:02x}", "noise_seed": i} for i in range(6)]
    return TraceBatch(grid500, samples, meta, channel="magnitude_db")


class TestRoundTrip:
    def test_bit_exact(self, batch, tmp_path):
        path = tmp_path / "b.zarc"
        write_archive(batch, path)
        back = read_archive(path)
        assert back.grid == batch.grid
        assert back.channel == batch.channel
        assert back.metadata == batch.metadata
        assert np.array_equal(back.samples, batch.samples)

    def test_byte_identical_rewrite(self, batch, tmp_path):
        p1, p2 = tmp_path / "a.zarc", tmp_path / "b.zarc"
        write_archive(batch, p1)
        write_archive(read_archive(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_batch(self, grid500, tmp_path):
        empty = TraceBatch(grid500, np.empty((0, grid500.points)), [])
        path = tmp_path / "e.zarc"
        write_archive(empty, path)
        back = read_archive(path)
        assert len(back) == 0

    def test_unknown_header_field_survives(self, batch, tmp_path):
        p1, p2 = tmp_path / "a.zarc", tmp_path / "b.zarc"
        write_archive(batch, p1, header_extra={"operator_note": "bench 3, cable B"})
        back = read_archive(p1)
        assert back.header["operator_note"] == "bench 3, cable B"
        write_archive(back, p2)
        assert read_archive(p2).header["operator_note"] == "bench 3, cable B"


class TestMalformed:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.zarc"
        path.write_bytes(b"NOPE!\n" + b"\x00" * 32)
        with pytest.raises(ArchiveVersionError):
            read_archive(path)

    def test_wrong_schema_version(self, batch, tmp_path):
        path = tmp_path / "v.zarc"
        write_archive(batch, path)
        blob = bytearray(path.read_bytes())
        (hlen,) = struct.unpack("<Q", blob[6:14])
        header = blob[14:14 + hlen].replace(b'"schema_version": 1', b'"schema_version": 9')
        path.write_bytes(bytes(blob[:14]) + bytes(header) + bytes(blob[14 + hlen:]))
        with pytest.raises(ArchiveVersionError):
            read_archive(path)

    def test_truncated_header_length(self, tmp_path):
        path = tmp_path / "t.zarc"
        path.write_bytes(ARCHIVE_MAGIC + b"\x01\x02")
        with pytest.raises(ArchiveTruncatedError):
            read_archive(path)

    def test_truncated_header(self, batch, tmp_path):
        path = tmp_path / "t.zarc"
        write_archive(batch, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:20])
        with pytest.raises(ArchiveTruncatedError):
            read_archive(path)

    def test_truncated_payload(self, batch, tmp_path):
        path = tmp_path / "t.zarc"
        write_archive(batch, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(ArchiveTruncatedError):
            read_archive(path)

    def test_oversized_payload(self, batch, tmp_path):
        path = tmp_path / "o.zarc"
        write_archive(batch, path)
        with open(path, "ab") as fh:
            fh.write(b"\x00" * 16)
        with pytest.raises(ArchiveShapeError):
            read_archive(path)

    def test_metadata_count_mismatch(self, batch, tmp_path):
        path = tmp_path / "m.zarc"
        write_archive(batch, path)
        blob = bytearray(path.read_bytes())
        (hlen,) = struct.unpack("<Q", blob[6:14])
        header = blob[14:14 + hlen].replace(b'"traces": 6', b'"traces": 7')
        path.write_bytes(bytes(blob[:14]) + bytes(header) + bytes(blob[14 + hlen:]))
        with pytest.raises(ArchiveShapeError):
            read_archive(path)
