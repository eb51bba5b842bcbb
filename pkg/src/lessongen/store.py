"""Per-subject vector store: immutable index, exact top-k retrieval, on-disk format.

A store directory holds three files:

- ``manifest.json``   UTF-8 JSON manifest plus a ``digest`` field
- ``chunks.jsonl``    one chunk object per line, in record order
- ``vectors.bin``     ``NLPG`` magic, u32 LE format version / dim / count,
                      then count*dim float32 little-endian values, row-major,
                      rows in chunks.jsonl order

The digest is SHA-256 over the canonical manifest (digest and created_at
excluded), the chunks.jsonl bytes, and the vectors.bin bytes, so any
single-byte corruption of the payload files is detected on load.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .corpus import Chunk
from .embeddings import validate_vector

MAGIC = b"NLPG"
FORMAT_VERSION = 1


class StoreError(ValueError):
    """Raised for invalid store construction or persistence inputs."""


class StoreIntegrityError(StoreError):
    """Raised when a persisted store fails validation on load."""


@dataclass(frozen=True)
class StoreManifest:
    subject: str
    level: str
    edition: str
    dim: int
    record_count: int
    chunk_size: int
    overlap: int
    embedder_id: str
    created_at: str
    format_version: int = FORMAT_VERSION


@dataclass(frozen=True)
class IngestionMeta:
    """Parameters recorded in the manifest for reproducibility."""

    level: str
    edition: str
    chunk_size: int
    overlap: int
    embedder_id: str


@dataclass(frozen=True)
class StoreRecord:
    chunk: Chunk
    vector: np.ndarray


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float


class VectorStore:
    """Immutable index over embedded chunks; safe to share across threads."""

    def __init__(self, subject: str, dim: int, records: tuple[StoreRecord, ...], manifest: StoreManifest):
        if not records:
            raise StoreError("store must contain at least one record")
        seen: set[str] = set()
        for record in records:
            if record.vector.shape[0] != dim:
                raise StoreError(
                    f"mixed dims: record {record.chunk.chunk_id} has dim "
                    f"{record.vector.shape[0]}, store dim {dim}"
                )
            if record.chunk.chunk_id in seen:
                raise StoreError(f"duplicate chunk_id {record.chunk.chunk_id!r}")
            seen.add(record.chunk.chunk_id)
        self.subject = subject
        self.dim = dim
        self.records = records
        self.manifest = manifest
        # float64 scan matrix with precomputed row norms keeps top_k a single
        # matmul per query.
        self._matrix = np.stack([r.vector for r in records]).astype(np.float64)
        self._norms = np.linalg.norm(self._matrix, axis=1)
        if np.any(self._norms == 0.0):
            raise StoreError("store contains an all-zero vector")

    def __len__(self) -> int:
        return len(self.records)


def build_store(
    subject: str,
    chunks: list[Chunk],
    vectors: list[np.ndarray],
    meta: IngestionMeta,
) -> VectorStore:
    """Assemble an immutable store; iteration order equals input order."""
    if len(chunks) != len(vectors):
        raise StoreError(f"length mismatch: {len(chunks)} chunks vs {len(vectors)} vectors")
    if not chunks:
        raise StoreError("cannot build an empty store")
    vecs = [validate_vector(v) for v in vectors]
    dim = vecs[0].shape[0]
    records = tuple(StoreRecord(chunk=c, vector=v) for c, v in zip(chunks, vecs))
    manifest = StoreManifest(
        subject=subject,
        level=meta.level,
        edition=meta.edition,
        dim=dim,
        record_count=len(records),
        chunk_size=meta.chunk_size,
        overlap=meta.overlap,
        embedder_id=meta.embedder_id,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    return VectorStore(subject=subject, dim=dim, records=records, manifest=manifest)


def _manifest_dict(manifest: StoreManifest) -> dict:
    return {
        "subject": manifest.subject,
        "level": manifest.level,
        "edition": manifest.edition,
        "dim": manifest.dim,
        "record_count": manifest.record_count,
        "chunk_size": manifest.chunk_size,
        "overlap": manifest.overlap,
        "embedder_id": manifest.embedder_id,
        "created_at": manifest.created_at,
        "format_version": manifest.format_version,
    }


def _chunks_bytes(records: tuple[StoreRecord, ...]) -> bytes:
    lines = []
    for record in records:
        chunk = record.chunk
        lines.append(
            json.dumps(
                {
                    "chunk_id": chunk.chunk_id,
                    "subject": chunk.subject,
                    "text": chunk.text,
                    "page_start": chunk.page_start,
                    "page_end": chunk.page_end,
                    "char_count": chunk.char_count,
                },
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def _vectors_bytes(store: VectorStore) -> bytes:
    header = MAGIC + struct.pack("<III", FORMAT_VERSION, store.dim, len(store.records))
    body = np.stack([r.vector for r in store.records]).astype("<f4").tobytes()
    return header + body


def _digest(manifest: StoreManifest, chunks_data: bytes, vectors_data: bytes) -> str:
    # created_at is excluded so re-persisting an identical store yields an
    # identical digest.
    hashed_manifest = {
        k: v for k, v in _manifest_dict(manifest).items() if k != "created_at"
    }
    hasher = hashlib.sha256()
    hasher.update(json.dumps(hashed_manifest, sort_keys=True, separators=(",", ":")).encode("utf-8"))
    hasher.update(chunks_data)
    hasher.update(vectors_data)
    return hasher.hexdigest()


def persist_store(store: VectorStore, directory: str | Path) -> str:
    """Write manifest.json, chunks.jsonl and vectors.bin; return the content digest."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if manifest_path.exists():
        try:
            existing = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"unreadable pre-existing manifest at {manifest_path}: {exc}") from exc
        if existing.get("format_version") != FORMAT_VERSION:
            raise StoreError(
                f"refusing to overwrite store with format_version "
                f"{existing.get('format_version')} (this writer is v{FORMAT_VERSION})"
            )
    directory.mkdir(parents=True, exist_ok=True)

    chunks_data = _chunks_bytes(store.records)
    vectors_data = _vectors_bytes(store)
    digest = _digest(store.manifest, chunks_data, vectors_data)

    manifest_obj = _manifest_dict(store.manifest)
    manifest_obj["digest"] = digest
    (directory / "chunks.jsonl").write_bytes(chunks_data)
    (directory / "vectors.bin").write_bytes(vectors_data)
    manifest_path.write_text(json.dumps(manifest_obj, indent=2) + "\n", encoding="utf-8")
    return digest


def load_store(directory: str | Path) -> VectorStore:
    """Inverse of :func:`persist_store`; verifies the digest before parsing payloads."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise StoreIntegrityError(f"missing manifest: {manifest_path}")
    try:
        manifest_obj = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StoreIntegrityError(f"corrupt manifest {manifest_path}: {exc}") from exc

    stored_digest = manifest_obj.pop("digest", None)
    if stored_digest is None:
        raise StoreIntegrityError(f"manifest {manifest_path} lacks a digest")
    if manifest_obj.get("format_version") != FORMAT_VERSION:
        raise StoreIntegrityError(
            f"format_version mismatch: store is "
            f"{manifest_obj.get('format_version')}, reader supports {FORMAT_VERSION}"
        )
    try:
        manifest = StoreManifest(**manifest_obj)
    except TypeError as exc:
        raise StoreIntegrityError(f"manifest {manifest_path} has unexpected fields: {exc}") from exc

    chunks_path = directory / "chunks.jsonl"
    vectors_path = directory / "vectors.bin"
    for path in (chunks_path, vectors_path):
        if not path.is_file():
            raise StoreIntegrityError(f"missing store file: {path}")
    chunks_data = chunks_path.read_bytes()
    vectors_data = vectors_path.read_bytes()

    if _digest(manifest, chunks_data, vectors_data) != stored_digest:
        raise StoreIntegrityError(f"digest mismatch for store at {directory}")

    chunks: list[Chunk] = []
    for lineno, line in enumerate(chunks_data.decode("utf-8").splitlines(), start=1):
        if not line:
            continue
        obj = json.loads(line)
        chunks.append(Chunk(**obj))

    if len(vectors_data) < 16 or vectors_data[:4] != MAGIC:
        raise StoreIntegrityError(f"bad magic in {vectors_path}")
    version, dim, count = struct.unpack("<III", vectors_data[4:16])
    if version != FORMAT_VERSION:
        raise StoreIntegrityError(f"vectors.bin format_version {version} unsupported")
    expected = 16 + count * dim * 4
    if len(vectors_data) != expected:
        raise StoreIntegrityError(
            f"vectors.bin size {len(vectors_data)} does not match header ({expected})"
        )
    if count != manifest.record_count or count != len(chunks):
        raise StoreIntegrityError(
            f"record-count mismatch: manifest {manifest.record_count}, "
            f"chunks {len(chunks)}, vectors {count}"
        )
    if dim != manifest.dim:
        raise StoreIntegrityError(f"dim mismatch: manifest {manifest.dim}, vectors {dim}")

    matrix = np.frombuffer(vectors_data, dtype="<f4", offset=16).reshape(count, dim)
    records = tuple(
        StoreRecord(chunk=c, vector=np.array(matrix[i], dtype=np.float32))
        for i, c in enumerate(chunks)
    )
    return VectorStore(subject=manifest.subject, dim=dim, records=records, manifest=manifest)


class StoreRegistry:
    """All deployed subject stores, resolved by subject identifier."""

    def __init__(self, stores: dict[str, VectorStore]):
        self._stores = dict(stores)

    @classmethod
    def from_directory(cls, root: str | Path) -> "StoreRegistry":
        """Load every store subdirectory under ``root``; duplicate subjects are fatal."""
        root = Path(root)
        if not root.is_dir():
            raise StoreError(f"store directory not found: {root}")
        stores: dict[str, VectorStore] = {}
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            if not (sub / "manifest.json").is_file():
                continue
            store = load_store(sub)
            if store.subject in stores:
                raise StoreError(f"duplicate subject {store.subject!r} (directory {sub})")
            stores[store.subject] = store
        return cls(stores)

    def get(self, subject: str) -> VectorStore | None:
        return self._stores.get(subject)

    def subjects(self) -> list[StoreManifest]:
        return [self._stores[name].manifest for name in sorted(self._stores)]

    def as_mapping(self) -> dict[str, VectorStore]:
        return dict(self._stores)

    def __len__(self) -> int:
        return len(self._stores)


def top_k(store: VectorStore, query: np.ndarray, k: int, min_sim: float = 0.0) -> list[ScoredChunk]:
    """Exact top-k by cosine similarity, descending; ties broken by ascending chunk_id."""
    if k < 1:
        raise StoreError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != store.dim:
        raise StoreError(f"query dim {q.shape} does not match store dim {store.dim}")
    q_norm = float(np.linalg.norm(q))
    if q_norm == 0.0:
        raise StoreError("query vector is all-zero")

    sims = (store._matrix @ q) / (store._norms * q_norm)
    np.clip(sims, -1.0, 1.0, out=sims)

    candidates = [
        (-float(sims[i]), store.records[i].chunk.chunk_id, i)
        for i in np.flatnonzero(sims >= min_sim)
    ]
    candidates.sort()
    return [
        ScoredChunk(chunk=store.records[i].chunk, score=-neg)
        for neg, _, i in candidates[:k]
    ]
