"""Persistent speaker-embedding store, similarity search and enrollment timing."""

from __future__ import annotations

import json
import os
import statistics
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, load_wav
from .config import config_digest
from .dsp import DspConfig
from .encoder import EncoderConfig, EncoderParams, encode_speaker
from .enhancement import EnhancementMethod, enhance
from .errors import (
    AudioFileError,
    ConfigMismatch,
    CorruptHeader,
    DuplicateSpeaker,
    EmptyInput,
    EmptyStore,
    LengthMismatch,
    SampleRateMismatch,
    SampleTooShort,
    TooManySamples,
    UnsupportedFormat,
    ZeroVector,
)

FORMAT_VERSION = 1

# enrollment cost as published, kept as context for the benchmark report
REFERENCE_ENROLL_TIME = {"adaptation": "15 min.", "speaker_encoder": "11 sec."}
REFERENCE_ENROLL_SECONDS = {"adaptation": 15 * 60.0, "speaker_encoder": 11.0}


@dataclass
class EnrollmentRecord:
    speaker_id: str
    embedding: np.ndarray
    sample_count: int
    created_at: str
    config_digest: str = ""

    def to_json(self) -> dict:
        return {
            "speaker_id": self.speaker_id,
            "embedding": [float(x) for x in self.embedding],
            "sample_count": self.sample_count,
            "created_at": self.created_at,
            "config_digest": self.config_digest,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EnrollmentRecord":
        return cls(d["speaker_id"], np.asarray(d["embedding"], dtype=np.float64), int(d["sample_count"]),
                   d["created_at"], d.get("config_digest", ""))


@dataclass
class EmbeddingStore:
    d_embedding: int
    config_digest: str
    records: dict = field(default_factory=dict)  # speaker_id -> EnrollmentRecord
    path: Path | None = None
    format_version: int = FORMAT_VERSION

    def __len__(self):
        return len(self.records)

    def __contains__(self, speaker_id):
        return speaker_id in self.records

    def to_json(self) -> dict:
        return {
            "format_version": self.format_version,
            "d_embedding": self.d_embedding,
            "config_digest": self.config_digest,
            "records": [self.records[k].to_json() for k in sorted(self.records)],
        }

    @classmethod
    def from_json(cls, d: dict, path=None) -> "EmbeddingStore":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported store format_version {d.get('format_version')!r}")
        store = cls(int(d["d_embedding"]), d["config_digest"], path=Path(path) if path else None)
        for rec in d["records"]:
            r = EnrollmentRecord.from_json(rec)
            if r.embedding.shape != (store.d_embedding,):
                raise LengthMismatch(f"record {r.speaker_id} has {r.embedding.size} dims, store declares {store.d_embedding}")
            store.add(r)
        return store

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        with open(path) as fh:
            return cls.from_json(json.load(fh), path)

    @classmethod
    def open(cls, path, enc_cfg: EncoderConfig, dsp_cfg: DspConfig) -> "EmbeddingStore":
        """Load ``path`` if it exists, otherwise start an empty store bound to it."""
        digest = config_digest(enc_cfg, dsp_cfg)
        if Path(path).exists():
            store = cls.load(path)
            if store.config_digest != digest:
                raise ConfigMismatch(
                    f"store {path} was built with config {store.config_digest}, current config is {digest}"
                )
            return store
        return cls(enc_cfg.d_embedding, digest, path=Path(path))

    def save(self, path=None) -> None:
        """Atomic write: temp file in the same directory, then rename over the target."""
        target = Path(path or self.path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(self.to_json(), fh, indent=1)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def add(self, record: EnrollmentRecord) -> None:
        if record.speaker_id in self.records:
            raise DuplicateSpeaker(record.speaker_id)
        if record.embedding.shape != (self.d_embedding,):
            raise LengthMismatch(f"embedding has {record.embedding.size} dims, store declares {self.d_embedding}")
        if not record.config_digest:
            record.config_digest = self.config_digest
        elif record.config_digest != self.config_digest:
            raise ConfigMismatch(f"record {record.speaker_id} built with config {record.config_digest}, store uses {self.config_digest}")
        self.records[record.speaker_id] = record


def load_samples(paths) -> list[AudioClip]:
    clips = []
    for p in paths:
        try:
            clips.append(load_wav(p))
        except (OSError, UnsupportedFormat, CorruptHeader) as exc:
            raise AudioFileError(p, exc) from exc
    return clips


def embed_clips(clips, names, enc_cfg, dsp_cfg, params, enhance_method=None) -> np.ndarray:
    """Enhance and encode cloning samples; errors name the offending sample."""
    method = enhance_method or EnhancementMethod()
    names = [str(n) for n in names]
    if not clips:
        raise EmptyInput("at least one cloning sample is required")
    if len(clips) > enc_cfg.max_cloning_samples:
        raise TooManySamples(f"{len(clips)} samples exceeds the limit of {enc_cfg.max_cloning_samples}")
    enhanced = []
    for clip, name in zip(clips, names):
        if clip.sample_rate != dsp_cfg.sample_rate:
            raise AudioFileError(name, SampleRateMismatch(f"{clip.sample_rate} Hz, config expects {dsp_cfg.sample_rate} Hz"))
        try:
            enhanced.append(enhance(clip, method, dsp_cfg))
        except ValueError as exc:
            raise AudioFileError(name, exc) from exc
    try:
        return encode_speaker(enhanced, dsp_cfg, enc_cfg, params, names=names)
    except SampleTooShort as exc:
        raise AudioFileError(exc.source, exc) from exc


def embed_files(paths, enc_cfg, dsp_cfg, params, enhance_method=None) -> np.ndarray:
    paths = [str(p) for p in paths]
    if len(paths) > enc_cfg.max_cloning_samples:
        raise TooManySamples(f"{len(paths)} samples exceeds the limit of {enc_cfg.max_cloning_samples}")
    return embed_clips(load_samples(paths), paths, enc_cfg, dsp_cfg, params, enhance_method)


def enroll_clips(
    store: EmbeddingStore,
    speaker_id: str,
    clips,
    names,
    enc_cfg: EncoderConfig,
    dsp_cfg: DspConfig,
    params: EncoderParams,
    enhance_method: EnhancementMethod | None = None,
    persist: bool = True,
) -> EnrollmentRecord:
    if not speaker_id:
        raise ValueError("speaker_id must be non-empty")
    if speaker_id in store:
        raise DuplicateSpeaker(speaker_id)
    digest = config_digest(enc_cfg, dsp_cfg)
    if digest != store.config_digest:
        raise ConfigMismatch(f"store config {store.config_digest} differs from current config {digest}")
    embedding = embed_clips(clips, names, enc_cfg, dsp_cfg, params, enhance_method)
    record = EnrollmentRecord(
        speaker_id, embedding, len(clips), datetime.now(timezone.utc).isoformat(timespec="seconds"), digest
    )
    store.add(record)
    if persist and store.path is not None:
        try:
            store.save()
        except BaseException:
            del store.records[speaker_id]
            raise
    return record


def enroll(
    store: EmbeddingStore,
    speaker_id: str,
    sample_paths,
    enc_cfg: EncoderConfig,
    dsp_cfg: DspConfig,
    params: EncoderParams,
    enhance_method: EnhancementMethod | None = None,
    persist: bool = True,
) -> EnrollmentRecord:
    """Encode the samples at ``sample_paths`` and add them to ``store`` under ``speaker_id``."""
    if speaker_id in store:
        raise DuplicateSpeaker(speaker_id)
    paths = [str(p) for p in sample_paths]
    if len(paths) > enc_cfg.max_cloning_samples:
        raise TooManySamples(f"{len(paths)} samples exceeds the limit of {enc_cfg.max_cloning_samples}")
    return enroll_clips(store, speaker_id, load_samples(paths), paths, enc_cfg, dsp_cfg, params,
                        enhance_method, persist)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine similarity with an all-zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def nearest(store: EmbeddingStore, query, k: int = 5) -> list[tuple[str, float]]:
    """Top-``k`` speakers by cosine similarity; ties go to the smaller speaker_id."""
    if len(store) == 0:
        raise EmptyStore("the store has no enrolled speakers")
    if k < 1:
        raise ValueError("k must be positive")
    scored = [(sid, cosine_similarity(rec.embedding, query)) for sid, rec in store.records.items()]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


@dataclass
class BenchReport:
    timings: list
    sample_count: int
    total_audio_seconds: float

    @property
    def min(self):
        return min(self.timings)

    @property
    def median(self):
        return statistics.median(self.timings)

    @property
    def max(self):
        return max(self.timings)

    def to_json(self) -> dict:
        return {
            "repetitions": len(self.timings),
            "min_s": self.min,
            "median_s": self.median,
            "max_s": self.max,
            "sample_count": self.sample_count,
            "total_audio_s": self.total_audio_seconds,
            "reference": dict(REFERENCE_ENROLL_TIME),
            "note": "adaptation-based enrollment is not implemented; its time is quoted for context only",
        }


def bench_enroll(sample_paths, enc_cfg, dsp_cfg, params, repetitions: int = 5, enhance_method=None) -> BenchReport:
    """Wall-clock of load + enhance + encode, excluding store persistence."""
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    timings = []
    for _ in range(repetitions):
        start = time.perf_counter()
        embed_files(sample_paths, enc_cfg, dsp_cfg, params, enhance_method)
        timings.append(time.perf_counter() - start)
    total = 0.0
    for p in sample_paths:
        clip: AudioClip = load_wav(p)
        total += clip.duration
    return BenchReport(timings, len(list(sample_paths)), total)
