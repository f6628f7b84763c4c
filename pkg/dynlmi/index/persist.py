"""
Versioned binary container for a whole index.

Layout, all little-endian:

    header   magic "DLMI" | version u16 | dimension u32 | node count u32
             | settings length u32 | settings (sorted-key JSON)
    nodes    preorder; per node: depth u16 | pos u32*depth | kind u8
             leaf:  bucket number u32
             inner: model kind u8 | seed u64 | array count u8
                    | per array: name length u8 | name | ndim u8
                    | shape u32*ndim | float64 data
    buckets  bucket count u32 | per bucket: size u32 | ids u64*size
    vectors  count u64 | ids u64*count | float32 rows count*dimension
    checksum crc32 u32 over everything before it
"""

import json
import logging
import numpy as np
import struct
import zlib

from dynlmi.model.classifier import CentroidClassifier, Hyperparams, MLPClassifier

from .tree import Index, IndexSettings, InnerNode, LeafNode


log = logging.getLogger(__name__)

MAGIC = b"DLMI"
VERSION = 1

_KIND_CODES = {"centroid": 0, "mlp": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


class IndexFormatError(ValueError):
    pass


def _settings_bytes(settings: IndexSettings) -> bytes:
    doc = {
        "kind": settings.kind,
        "hyperparams": settings.hyperparams._asdict(),
        "seed": settings.seed,
        "max_depth": settings.max_depth,
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def _settings_from(raw: bytes) -> IndexSettings:
    doc = json.loads(raw.decode("utf-8"))
    return IndexSettings(
        kind=doc["kind"],
        hyperparams=Hyperparams(**doc["hyperparams"]),
        seed=doc["seed"],
        max_depth=doc["max_depth"],
    )


def dumps(index: Index) -> bytes:
    settings = _settings_bytes(index.settings)
    nodes = list(index.nodes())

    out = [
        MAGIC,
        struct.pack("<HIII", VERSION, index.dimension, len(nodes), len(settings)),
        settings,
    ]

    buckets = []
    for node in nodes:
        out.append(struct.pack("<H", len(node.pos)))
        out.append(struct.pack(f"<{len(node.pos)}I", *node.pos))

        if node.is_leaf:
            out.append(struct.pack("<BI", 0, len(buckets)))
            buckets.append(node.objects)
            continue

        arrays = node.model.arrays()
        out.append(
            struct.pack("<BBQB", 1, _KIND_CODES[node.model.kind], node.model.seed, len(arrays))
        )
        for name, values in arrays.items():
            encoded = name.encode("ascii")
            values = np.asarray(values, dtype="<f8")
            out.append(struct.pack("<B", len(encoded)) + encoded)
            out.append(struct.pack(f"<B{values.ndim}I", values.ndim, *values.shape))
            out.append(values.tobytes())

    out.append(struct.pack("<I", len(buckets)))
    for objects in buckets:
        out.append(struct.pack("<I", len(objects)))
        out.append(np.asarray(objects, dtype="<u8").tobytes())

    out.append(struct.pack("<Q", len(index.store)))
    out.append(np.asarray(index.store.ids, dtype="<u8").tobytes())
    out.append(np.asarray(index.store.vectors, dtype="<f4").tobytes())

    body = b"".join(out)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def unpack(self, fmt: str):
        values = struct.unpack_from("<" + fmt, self.raw, self.offset)
        self.offset += struct.calcsize("<" + fmt)
        return values

    def array(self, dtype: str, count: int) -> np.ndarray:
        values = np.frombuffer(self.raw, dtype=dtype, count=count, offset=self.offset)
        self.offset += values.nbytes
        return values.copy()

    def bytes(self, n: int) -> bytes:
        out = self.raw[self.offset : self.offset + n]
        self.offset += n
        return out


def _model(kind: str, seed: int, arrays: dict, hyperparams: Hyperparams):
    if kind == "centroid":
        return CentroidClassifier(arrays["centroids"], seed=seed)
    return MLPClassifier(hyperparams=hyperparams, seed=seed, **arrays)


def loads(raw: bytes) -> Index:
    if raw[:4] != MAGIC:
        raise IndexFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 10:
        raise IndexFormatError("truncated header: missing version")

    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise IndexFormatError(f"unsupported version {version}, expected {VERSION}")

    if len(raw) < 26 or zlib.crc32(raw[:-4]) != struct.unpack_from("<I", raw, len(raw) - 4)[0]:
        raise IndexFormatError("bad checksum: file is truncated or corrupt")

    reader = _Reader(raw[:-4])
    reader.offset = 6
    dimension, node_count, settings_len = reader.unpack("III")
    settings = _settings_from(reader.bytes(settings_len))

    index = Index(dimension, settings)

    leaves = []
    by_pos = {}
    for _ in range(node_count):
        (depth,) = reader.unpack("H")
        pos = tuple(reader.unpack(f"{depth}I"))
        (kind,) = reader.unpack("B")

        if kind == 0:
            (bucket,) = reader.unpack("I")
            node = LeafNode(pos)
            leaves.append((bucket, node))
        else:
            model_kind, seed, n_arrays = reader.unpack("BQB")
            arrays = {}
            for _ in range(n_arrays):
                (name_len,) = reader.unpack("B")
                name = reader.bytes(name_len).decode("ascii")
                (ndim,) = reader.unpack("B")
                shape = reader.unpack(f"{ndim}I")
                arrays[name] = reader.array("<f8", int(np.prod(shape))).reshape(shape)
            model = _model(_KIND_NAMES[model_kind], seed, arrays, settings.hyperparams)
            node = InnerNode(pos, model, [None] * model.n_classes)

        by_pos[pos] = node
        if len(pos) == 0:
            index.root = node
        else:
            by_pos[pos[:-1]].children[pos[-1]] = node

    (bucket_count,) = reader.unpack("I")
    buckets = []
    for _ in range(bucket_count):
        (size,) = reader.unpack("I")
        buckets.append([int(i) for i in reader.array("<u8", size)])
    for bucket, leaf in leaves:
        leaf.objects = buckets[bucket]

    (count,) = reader.unpack("Q")
    ids = reader.array("<u8", count).astype(np.int64)
    vectors = reader.array("<f4", count * dimension).reshape(count, dimension)
    index.store.extend(ids, vectors)

    return index


def save_index(index: Index, path) -> None:
    raw = dumps(index)
    with open(path, "wb") as f:
        f.write(raw)
    log.info("saved index with %d objects to %s (%d bytes)", len(index), path, len(raw))


def load_index(path) -> Index:
    with open(path, "rb") as f:
        raw = f.read()
    index = loads(raw)
    log.info("loaded index with %d objects from %s", len(index), path)
    return index
