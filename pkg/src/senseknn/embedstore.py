"""Binary embedding files keyed by instance id.

Layout (all integers little-endian):

    magic            8 bytes, b"CWEVEC01"
    dim              u32
    count            u64
    model_tag        u32 length + UTF-8 bytes
    layer_policy     u8 (0 = final layer, 1 = concat of last four layers)
    records          count x (u32 id length + UTF-8 id + dim x f32)

Vectors are stored raw (not normalized).  Files are immutable once written;
readers validate framing, record count against byte length, and vector
sanity (finite, not all-zero).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import BinaryIO, Iterable

import numpy as np

from .corpus import Corpus, Instance
from .errors import (
    ConsistencyError,
    EmbeddingFormatError,
    VectorValidationError,
)

MAGIC = b"CWEVEC01"


class LayerPolicy(IntEnum):
    FINAL_LAYER = 0
    CONCAT_LAST4 = 1


@dataclass(frozen=True)
class EmbeddingFileHeader:
    dim: int
    count: int
    model_tag: str
    layer_policy: LayerPolicy = LayerPolicy.FINAL_LAYER

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise EmbeddingFormatError(f"dim must be positive, got {self.dim}")
        if self.count < 0:
            raise EmbeddingFormatError(f"count must be non-negative, got {self.count}")


def header_size(header: EmbeddingFileHeader) -> int:
    return 8 + 4 + 8 + 4 + len(header.model_tag.encode("utf-8")) + 1


def _check_vector(instance_id: str, vector: np.ndarray, dim: int) -> np.ndarray:
    vec = np.asarray(vector, dtype="<f4").reshape(-1)
    if vec.shape[0] != dim:
        raise EmbeddingFormatError(
            f"record {instance_id!r}: vector has length {vec.shape[0]}, "
            f"expected dim {dim}"
        )
    if not np.isfinite(vec).all():
        raise VectorValidationError(
            f"record {instance_id!r}: non-finite vector component"
        )
    if not vec.any():
        raise VectorValidationError(f"record {instance_id!r}: all-zero vector")
    return vec


class EmbeddingWriter:
    """Streaming writer; patches the record count into the header on close.

    Requires a seekable binary sink.  Use :func:`write_embeddings` for
    in-memory record lists.
    """

    def __init__(
        self,
        sink: BinaryIO,
        dim: int,
        model_tag: str,
        layer_policy: LayerPolicy = LayerPolicy.FINAL_LAYER,
    ) -> None:
        if not sink.seekable():
            raise EmbeddingFormatError("EmbeddingWriter needs a seekable sink")
        self._sink = sink
        self._dim = dim
        self._count = 0
        self._seen: set[str] = set()
        self._closed = False
        header = EmbeddingFileHeader(dim, 0, model_tag, layer_policy)
        self._start = sink.tell()
        tag = header.model_tag.encode("utf-8")
        sink.write(MAGIC)
        sink.write(struct.pack("<I", header.dim))
        self._count_offset = sink.tell()
        sink.write(struct.pack("<Q", 0))
        sink.write(struct.pack("<I", len(tag)))
        sink.write(tag)
        sink.write(struct.pack("<B", int(header.layer_policy)))

    def add(self, instance_id: str, vector: np.ndarray) -> None:
        if self._closed:
            raise EmbeddingFormatError("writer already closed")
        if instance_id in self._seen:
            raise ConsistencyError(f"duplicate record id {instance_id!r}")
        vec = _check_vector(instance_id, vector, self._dim)
        self._seen.add(instance_id)
        encoded = instance_id.encode("utf-8")
        self._sink.write(struct.pack("<I", len(encoded)))
        self._sink.write(encoded)
        self._sink.write(vec.tobytes())
        self._count += 1

    def close(self) -> int:
        """Finalize the header; returns total bytes written."""
        if self._closed:
            return self._bytes_written
        end = self._sink.tell()
        self._sink.seek(self._count_offset)
        self._sink.write(struct.pack("<Q", self._count))
        self._sink.seek(end)
        self._closed = True
        self._bytes_written = end - self._start
        return self._bytes_written

    def __enter__(self) -> "EmbeddingWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def write_embeddings(
    header: EmbeddingFileHeader,
    records: Iterable[tuple[str, np.ndarray]],
    sink: BinaryIO,
) -> int:
    """Serialize header then records; the stored count is the records written.

    Returns the number of bytes written.
    """
    materialized = list(records)
    tag = header.model_tag.encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", header.dim)
    out += struct.pack("<Q", len(materialized))
    out += struct.pack("<I", len(tag))
    out += tag
    out += struct.pack("<B", int(header.layer_policy))

    seen: set[str] = set()
    for instance_id, vector in materialized:
        if instance_id in seen:
            raise ConsistencyError(f"duplicate record id {instance_id!r}")
        seen.add(instance_id)
        vec = _check_vector(instance_id, vector, header.dim)
        encoded = instance_id.encode("utf-8")
        out += struct.pack("<I", len(encoded))
        out += encoded
        out += vec.tobytes()

    sink.write(bytes(out))
    return len(out)


def _read_exact(source: BinaryIO, size: int, offset: int, what: str) -> bytes:
    data = source.read(size)
    if len(data) != size:
        raise EmbeddingFormatError(
            f"count mismatch or truncated file: expected {size} bytes for "
            f"{what} at byte offset {offset}, got {len(data)}"
        )
    return data


def read_embeddings(
    source: BinaryIO,
) -> tuple[EmbeddingFileHeader, dict[str, np.ndarray]]:
    """Load a whole embedding file into an id -> float32 vector map."""
    offset = 0
    magic = source.read(8)
    if magic != MAGIC:
        raise EmbeddingFormatError(
            f"bad magic at byte offset 0: expected {MAGIC!r}, got {magic!r}"
        )
    offset += 8
    (dim,) = struct.unpack("<I", _read_exact(source, 4, offset, "dim"))
    offset += 4
    (count,) = struct.unpack("<Q", _read_exact(source, 8, offset, "count"))
    offset += 8
    (tag_len,) = struct.unpack("<I", _read_exact(source, 4, offset, "tag length"))
    offset += 4
    tag = _read_exact(source, tag_len, offset, "model tag").decode("utf-8")
    offset += tag_len
    (policy_byte,) = struct.unpack("<B", _read_exact(source, 1, offset, "layer policy"))
    offset += 1
    try:
        policy = LayerPolicy(policy_byte)
    except ValueError:
        raise EmbeddingFormatError(
            f"unknown layer policy {policy_byte} at byte offset {offset - 1}"
        ) from None
    header = EmbeddingFileHeader(dim, count, tag, policy)

    vectors: dict[str, np.ndarray] = {}
    record_bytes = 4 * dim
    for index in range(count):
        data = _read_exact(source, 4, offset, f"record {index} id length")
        offset += 4
        (id_len,) = struct.unpack("<I", data)
        instance_id = _read_exact(
            source, id_len, offset, f"record {index} id"
        ).decode("utf-8")
        offset += id_len
        raw = _read_exact(source, record_bytes, offset, f"record {instance_id!r}")
        offset += record_bytes
        if instance_id in vectors:
            raise ConsistencyError(f"duplicate record id {instance_id!r}")
        vec = np.frombuffer(raw, dtype="<f4").copy()
        if not np.isfinite(vec).all():
            raise VectorValidationError(
                f"record {instance_id!r}: non-finite vector component"
            )
        if not vec.any():
            raise VectorValidationError(f"record {instance_id!r}: all-zero vector")
        vectors[instance_id] = vec

    trailing = source.read(1)
    if trailing:
        raise EmbeddingFormatError(
            f"count mismatch: trailing data at byte offset {offset} after "
            f"{count} records"
        )
    return header, vectors


def read_embeddings_path(path) -> tuple[EmbeddingFileHeader, dict[str, np.ndarray]]:
    with open(path, "rb") as handle:
        return read_embeddings(handle)


# --------------------------------------------------------------------------
# Line-delimited JSON debug format


def write_debug_jsonl(records: Iterable[tuple[str, np.ndarray]], sink) -> int:
    """One record per line: {"id": ..., "vec": [...]}; returns line count."""
    n = 0
    for instance_id, vector in records:
        vec = np.asarray(vector, dtype="<f4").reshape(-1)
        line = json.dumps(
            {"id": instance_id, "vec": [float(x) for x in vec]}, sort_keys=True
        )
        sink.write(line + "\n")
        n += 1
    return n


def read_debug_jsonl(source) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    for line in source:
        if not line.strip():
            continue
        entry = json.loads(line)
        vectors[entry["id"]] = np.asarray(entry["vec"], dtype="<f4")
    return vectors


# --------------------------------------------------------------------------
# Joining a corpus with a store


@dataclass(frozen=True)
class JoinResult:
    pairs: tuple[tuple[Instance, np.ndarray], ...]
    missing_ids: tuple[str, ...]

    @property
    def coverage(self) -> float:
        total = len(self.pairs) + len(self.missing_ids)
        return 1.0 if total == 0 else len(self.pairs) / total


def join(corpus: Corpus, store: dict[str, np.ndarray]) -> JoinResult:
    """Pair every instance whose id is in the store; report the rest."""
    pairs = []
    missing = []
    for inst in corpus.instances:
        vec = store.get(inst.id)
        if vec is None:
            missing.append(inst.id)
        else:
            pairs.append((inst, vec))
    return JoinResult(tuple(pairs), tuple(missing))
