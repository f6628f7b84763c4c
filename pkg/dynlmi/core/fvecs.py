"""
Readers and writers for the .fvecs / .ivecs formats of the texmex corpus.

Each record is a 4-byte little-endian int32 dimension d followed by d
little-endian float32 (fvecs) or int32 (ivecs) values. All records share d.
"""

import numpy as np

from .vectors import Dataset, GroundTruth


class FormatError(ValueError):
    pass


def _read_records(path, payload_dtype) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        raw = f.read()

    if len(raw) == 0:
        return np.empty((0, 0), dtype=payload_dtype), None

    if len(raw) < 4:
        raise FormatError(f"{path}: truncated dimension header at byte offset 0")

    d = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if d <= 0:
        raise FormatError(f"{path}: nonpositive dimension {d} at byte offset 0")

    record_size = 4 * (d + 1)
    n, leftover = divmod(len(raw), record_size)

    # a mismatched header is reported ahead of a short tail
    records = np.frombuffer(raw, dtype="<i4", count=n * (d + 1)).reshape(n, d + 1)
    mismatched = np.flatnonzero(records[:, 0] != d)
    if len(mismatched) > 0:
        row = int(mismatched[0])
        raise FormatError(
            f"{path}: dimension {int(records[row, 0])} != {d} "
            f"at byte offset {row * record_size}"
        )

    if leftover:
        offset = n * record_size
        if leftover >= 4:
            tail = int(np.frombuffer(raw, dtype="<i4", count=1, offset=offset)[0])
            if tail != d:
                raise FormatError(f"{path}: dimension {tail} != {d} at byte offset {offset}")
        raise FormatError(f"{path}: truncated record at byte offset {offset}")

    return records[:, 1:].view(payload_dtype).copy(), d


def read_fvecs(path) -> Dataset:
    vectors, _ = _read_records(path, "<f4")
    return Dataset(vectors.astype(np.float32, copy=False))


def read_ivecs(path) -> GroundTruth:
    neighbors, _ = _read_records(path, "<i4")
    return GroundTruth(neighbors)


def _write_records(path, values: np.ndarray, payload_dtype):
    values = np.ascontiguousarray(values, dtype=payload_dtype)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {values.shape}")

    n, d = values.shape
    records = np.empty((n, d + 1), dtype="<i4")
    records[:, 0] = d
    records[:, 1:] = values.view("<i4")

    with open(path, "wb") as f:
        f.write(records.tobytes())


def write_fvecs(path, data):
    vectors = data.vectors if isinstance(data, Dataset) else data
    _write_records(path, vectors, "<f4")


def write_ivecs(path, data):
    neighbors = data.neighbors if isinstance(data, GroundTruth) else data
    _write_records(path, neighbors, "<i4")
