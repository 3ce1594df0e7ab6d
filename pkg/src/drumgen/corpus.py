"""Annotated-song corpus: ingestion, embedding plumbing, dataset persistence.

Annotations are JSON Lines, one record per song with artist/title/phrases
and an audio path.  Phrase embeddings come from a JSON file mapping exact
phrase text to a 768-number array; the loader also accepts the exporter's
wrapped form ``{"metadata": ..., "embeddings": {...}}`` so exporter output
is ingested without modification.  A deterministic pseudo-embedding
generator is built in so the whole pipeline can run without any exporter.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import AnnotationError, DomainError, EmbeddingError, InputError

EMBEDDING_DIM = 768
DATASET_SCHEMA_VERSION = 1


@dataclass
class SongAnnotation:
    artist: str
    title: str
    phrases: list[str]
    audio_path: str | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.artist, self.title)


@dataclass
class DatasetRecord:
    annotation: SongAnnotation
    embedding: np.ndarray  # 768, averaged over the song's phrases
    target: np.ndarray  # 129 rhythm vector


def load_annotations(path) -> list[SongAnnotation]:
    """Parse a JSON Lines annotation file; duplicates and empty phrase lists fail."""
    annotations: list[SongAnnotation] = []
    seen: dict[tuple[str, str], int] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"line {lineno}: invalid JSON ({exc})") from exc
            if not isinstance(payload, dict):
                raise AnnotationError(f"line {lineno}: expected an object")
            try:
                artist = payload["artist"]
                title = payload["title"]
                phrases = payload["phrases"]
            except KeyError as exc:
                raise AnnotationError(f"line {lineno}: missing field {exc}") from exc
            if not isinstance(artist, str) or not artist:
                raise AnnotationError(f"line {lineno}: artist must be a non-empty string")
            if not isinstance(title, str) or not title:
                raise AnnotationError(f"line {lineno}: title must be a non-empty string")
            if (
                not isinstance(phrases, list)
                or not phrases
                or not all(isinstance(p, str) and p for p in phrases)
            ):
                raise AnnotationError(f"line {lineno}: phrases must be a non-empty list of strings")
            audio_path = payload.get("audio_path")
            if audio_path is not None and not isinstance(audio_path, str):
                raise AnnotationError(f"line {lineno}: audio_path must be a string")
            record = SongAnnotation(artist, title, list(phrases), audio_path)
            if record.key in seen:
                raise AnnotationError(
                    f"line {lineno}: duplicate song {artist!r} - {title!r} "
                    f"(first seen on line {seen[record.key]})"
                )
            seen[record.key] = lineno
            annotations.append(record)
    return annotations


def average_embeddings(per_phrase: list[np.ndarray]) -> np.ndarray:
    """Elementwise mean of the phrase embeddings assigned to one song."""
    if not per_phrase:
        raise EmbeddingError("cannot average an empty embedding list")
    vectors = [np.asarray(v, dtype=np.float64) for v in per_phrase]
    if any(v.ndim != 1 or v.shape != vectors[0].shape for v in vectors):
        raise EmbeddingError("embeddings must share one dimension")
    return np.stack(vectors).mean(axis=0)


def pseudo_embedding(phrase: str, seed: int = 0, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Deterministic stand-in embedding: seeded hash expanded to a unit vector.

    Stable across platforms and library versions (pure SHA-256 expansion),
    so tests and demos never need a real language model.
    """
    base = hashlib.sha256(f"{seed}:{phrase}".encode("utf-8")).digest()
    blocks = []
    for counter in range((dim * 8 + 31) // 32):
        blocks.append(hashlib.sha256(base + counter.to_bytes(4, "little")).digest())
    raw = b"".join(blocks)[: dim * 8]
    u = np.frombuffer(raw, dtype="<u8").astype(np.float64) / float(1 << 64)
    v = 2.0 * u - 1.0
    return v / np.linalg.norm(v)


def pseudo_embedding_table(phrases, seed: int = 0) -> dict[str, np.ndarray]:
    return {p: pseudo_embedding(p, seed) for p in dict.fromkeys(phrases)}


def load_embeddings(path) -> dict[str, np.ndarray]:
    """Load a phrase-embedding JSON file (bare mapping or wrapped form)."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise EmbeddingError(f"cannot read embedding file {path}: {exc}") from exc
    if isinstance(payload, dict) and isinstance(payload.get("embeddings"), dict):
        payload = payload["embeddings"]
    if not isinstance(payload, dict):
        raise EmbeddingError(f"embedding file must be a JSON object: {path}")
    table = {}
    for phrase, values in payload.items():
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (EMBEDDING_DIM,):
            raise EmbeddingError(
                f"embedding for {phrase!r} must have {EMBEDDING_DIM} values, got {vec.shape}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"embedding for {phrase!r} contains non-finite values")
        table[phrase] = vec
    return table


def song_embedding(annotation: SongAnnotation, table: Mapping[str, np.ndarray]) -> np.ndarray:
    missing = [p for p in annotation.phrases if p not in table]
    if missing:
        raise EmbeddingError(
            f"no embedding for phrase {missing[0]!r} "
            f"({annotation.artist} - {annotation.title})"
        )
    return average_embeddings([table[p] for p in annotation.phrases])


def build_dataset(
    annotations: list[SongAnnotation],
    table: Mapping[str, np.ndarray],
    audio_root,
    extract_fn: Callable[[str], np.ndarray],
    skip_stream=None,
) -> tuple[list[DatasetRecord], list[tuple[SongAnnotation, str]]]:
    """Join annotations, embeddings, and per-song extraction into records.

    Missing phrase embeddings or unresolvable audio paths are hard errors;
    songs whose extraction fails are skipped with a report line
    ``SKIP <artist> - <title>: <reason>`` on ``skip_stream`` (stderr by
    default).
    """
    skip_stream = skip_stream if skip_stream is not None else sys.stderr
    root = Path(audio_root)

    resolved = []
    for annotation in annotations:
        embedding = song_embedding(annotation, table)  # hard error if missing
        if not annotation.audio_path:
            raise AnnotationError(
                f"no audio path for {annotation.artist} - {annotation.title}"
            )
        audio = root / annotation.audio_path
        if not audio.is_file():
            raise InputError(f"missing audio file: {audio}")
        resolved.append((annotation, embedding, audio))

    records: list[DatasetRecord] = []
    skipped: list[tuple[SongAnnotation, str]] = []
    for annotation, embedding, audio in resolved:
        try:
            target = extract_fn(str(audio))
        except DomainError as exc:
            skipped.append((annotation, str(exc)))
            print(f"SKIP {annotation.artist} - {annotation.title}: {exc}", file=skip_stream)
            continue
        records.append(DatasetRecord(annotation, embedding, np.asarray(target, dtype=np.float64)))
    return records, skipped


def save_dataset(path, records: list[DatasetRecord]) -> None:
    payload = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "records": [
            {
                "annotation": {
                    "artist": r.annotation.artist,
                    "title": r.annotation.title,
                    "phrases": r.annotation.phrases,
                    "audio_path": r.annotation.audio_path,
                },
                "embedding": r.embedding.tolist(),
                "target": r.target.tolist(),
            }
            for r in records
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_dataset(path) -> list[DatasetRecord]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload["schema_version"] != DATASET_SCHEMA_VERSION:
            raise InputError(f"unsupported dataset schema: {payload['schema_version']}")
        records = []
        for item in payload["records"]:
            ann = item["annotation"]
            records.append(
                DatasetRecord(
                    SongAnnotation(
                        ann["artist"], ann["title"], list(ann["phrases"]), ann.get("audio_path")
                    ),
                    np.asarray(item["embedding"], dtype=np.float64),
                    np.asarray(item["target"], dtype=np.float64),
                )
            )
        return records
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from exc
