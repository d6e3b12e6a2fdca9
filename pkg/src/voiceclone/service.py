"""HTTP front end over one embedding store.

Encoding is pure given the loaded parameters, so requests run concurrently;
only enrollment touches the store and it is serialised behind a lock.
"""

from __future__ import annotations

import base64
import binascii
import threading
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException

from .audio_io import decode_wav
from .dsp import DspConfig
from .encoder import EncoderConfig, EncoderParams
from .enhancement import EnhancementMethod
from .enrollment import EmbeddingStore, embed_clips, enroll_clips, nearest
from .errors import (
    AudioFileError,
    ConfigMismatch,
    CorruptHeader,
    DuplicateSpeaker,
    EmptyStore,
    UnsupportedFormat,
    VoiceCloneError,
)
from .schemas import (
    EmbedResponse,
    EnrollRequest,
    EnrollResponse,
    HealthResponse,
    Match,
    SamplesRequest,
    SimilarRequest,
    SimilarResponse,
    SpeakerList,
)


@dataclass
class ServiceState:
    store: EmbeddingStore
    enc_cfg: EncoderConfig
    dsp_cfg: DspConfig
    params: EncoderParams
    lock: threading.Lock


def _decode(samples):
    clips, names = [], []
    for i, s in enumerate(samples):
        name = s.filename or f"sample{i}"
        try:
            clips.append(decode_wav(base64.b64decode(s.wav_base64, validate=True)))
        except (binascii.Error, ValueError, CorruptHeader, UnsupportedFormat) as exc:
            raise HTTPException(status_code=422, detail=f"{name}: {exc}") from exc
        names.append(name)
    return clips, names


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, DuplicateSpeaker):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, EmptyStore):
        return HTTPException(status_code=404, detail=str(exc))
    if isinstance(exc, ConfigMismatch):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, (AudioFileError, VoiceCloneError, ValueError)):
        return HTTPException(status_code=422, detail=str(exc))
    raise exc


def create_app(store: EmbeddingStore, enc_cfg: EncoderConfig, dsp_cfg: DspConfig, params: EncoderParams) -> FastAPI:
    params.check(enc_cfg)
    state = ServiceState(store, enc_cfg, dsp_cfg, params, threading.Lock())
    app = FastAPI(title="voiceclone enrollment service")
    app.state.voiceclone = state

    def embed(req: SamplesRequest):
        clips, names = _decode(req.samples)
        try:
            return embed_clips(clips, names, state.enc_cfg, state.dsp_cfg, state.params,
                               EnhancementMethod.from_cli(req.enhance)), len(clips)
        except Exception as exc:
            raise _http_error(exc) from exc

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", variant=state.enc_cfg.variant,
                              d_embedding=state.enc_cfg.d_embedding, enrolled=len(state.store))

    @app.get("/speakers", response_model=SpeakerList)
    def speakers():
        return SpeakerList(speakers=sorted(state.store.records), d_embedding=state.store.d_embedding,
                           config_digest=state.store.config_digest)

    @app.post("/embed", response_model=EmbedResponse)
    def embed_endpoint(req: SamplesRequest):
        vec, count = embed(req)
        return EmbedResponse(embedding=vec.tolist(), d_embedding=vec.size, sample_count=count)

    @app.post("/enroll", response_model=EnrollResponse, status_code=201)
    def enroll_endpoint(req: EnrollRequest):
        clips, names = _decode(req.samples)
        with state.lock:
            try:
                record = enroll_clips(state.store, req.speaker_id, clips, names, state.enc_cfg, state.dsp_cfg,
                                      state.params, EnhancementMethod.from_cli(req.enhance))
            except Exception as exc:
                raise _http_error(exc) from exc
        return EnrollResponse(speaker_id=record.speaker_id, sample_count=record.sample_count,
                              created_at=record.created_at, config_digest=state.store.config_digest)

    @app.post("/similar", response_model=SimilarResponse)
    def similar_endpoint(req: SimilarRequest):
        vec, _ = embed(req)
        with state.lock:
            snapshot = EmbeddingStore(state.store.d_embedding, state.store.config_digest, dict(state.store.records))
        try:
            ranked = nearest(snapshot, vec, req.k)
        except Exception as exc:
            raise _http_error(exc) from exc
        return SimilarResponse(matches=[Match(speaker_id=s, similarity=v) for s, v in ranked])

    return app
