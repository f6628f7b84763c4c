import pytest
import numpy as np
import struct

from dynlmi.core import fvecs
from dynlmi.core.fvecs import FormatError
from dynlmi.core.vectors import Dataset, GroundTruth


def records(d, rows):
    out = b""
    for row in rows:
        out += struct.pack("<i", d) + struct.pack(f"<{len(row)}f", *row)
    return out


def test_read_fvecs(tmp_path):
    path = tmp_path / "base.fvecs"
    path.write_bytes(records(3, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))

    ds = fvecs.read_fvecs(path)
    assert len(ds) == 2
    assert ds.dimension == 3
    assert list(ds.ids) == [0, 1]
    assert ds.vectors[1].tolist() == [4.0, 5.0, 6.0]


def test_read_empty_file(tmp_path):
    path = tmp_path / "empty.fvecs"
    path.write_bytes(b"")

    ds = fvecs.read_fvecs(path)
    assert len(ds) == 0
    assert ds.dimension is None


def test_write_is_byte_exact(tmp_path):
    raw = records(2, [[0.5, -1.25], [3.0, 1e-7], [np.pi, 0.0]])
    src = tmp_path / "src.fvecs"
    src.write_bytes(raw)

    dst = tmp_path / "dst.fvecs"
    fvecs.write_fvecs(dst, fvecs.read_fvecs(src))

    assert dst.read_bytes() == raw


def test_ivecs(tmp_path):
    path = tmp_path / "gt.ivecs"
    fvecs.write_ivecs(path, GroundTruth([[3, 1], [0, 2]]))

    truth = fvecs.read_ivecs(path)
    assert truth.k == 2
    assert truth.neighbors.tolist() == [[3, 1], [0, 2]]


def test_truncated_record(tmp_path):
    path = tmp_path / "bad.fvecs"
    path.write_bytes(records(3, [[1.0, 2.0, 3.0]]) + struct.pack("<i", 3) + b"\x00" * 4)

    with pytest.raises(FormatError, match="byte offset 16"):
        fvecs.read_fvecs(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "bad.fvecs"
    path.write_bytes(b"\x03\x00")

    with pytest.raises(FormatError, match="byte offset 0"):
        fvecs.read_fvecs(path)


def test_nonpositive_dimension(tmp_path):
    path = tmp_path / "bad.fvecs"
    path.write_bytes(struct.pack("<i", 0) * 4)

    with pytest.raises(FormatError, match="nonpositive"):
        fvecs.read_fvecs(path)


def test_dimension_mismatch(tmp_path):
    path = tmp_path / "bad.fvecs"
    # second record claims d=1 but has the size of a d=2 record
    path.write_bytes(records(2, [[1.0, 2.0]]) + struct.pack("<i", 1) + struct.pack("<2f", 0, 0))

    with pytest.raises(FormatError, match="byte offset 12"):
        fvecs.read_fvecs(path)


def test_write_from_array(tmp_path):
    path = tmp_path / "arr.fvecs"
    fvecs.write_fvecs(path, np.arange(6, dtype=np.float32).reshape(2, 3))

    assert fvecs.read_fvecs(path).vectors.tolist() == [[0, 1, 2], [3, 4, 5]]

    with pytest.raises(ValueError):
        fvecs.write_fvecs(path, np.zeros(3))


def test_dataset_round_trip_through_ids(tmp_path):
    path = tmp_path / "ids.fvecs"
    fvecs.write_fvecs(path, Dataset([[1.0], [2.0]], ids=[40, 41]))

    # ids are positional, files carry no ids
    assert list(fvecs.read_fvecs(path).ids) == [0, 1]


def test_later_record_with_other_dimension(tmp_path):
    path = tmp_path / "bad.fvecs"
    # a d=1 record appended to a d=2 file leaves an odd-sized tail
    path.write_bytes(records(2, [[1.0, 2.0]]) + records(1, [[3.0]]))

    with pytest.raises(FormatError, match="dimension 1 != 2 at byte offset 12"):
        fvecs.read_fvecs(path)
