"""Request/response models for the enrollment service."""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field


class AudioPayload(BaseModel):
    wav_base64: str = Field(description="RIFF/WAVE file contents, base64 encoded")
    filename: Optional[str] = None


class SamplesRequest(BaseModel):
    samples: List[AudioPayload] = Field(min_length=1)
    enhance: Literal["none", "gate"] = "none"


class EnrollRequest(SamplesRequest):
    speaker_id: str = Field(min_length=1)


class SimilarRequest(SamplesRequest):
    k: int = Field(default=5, ge=1)


class EmbedResponse(BaseModel):
    embedding: List[float]
    d_embedding: int
    sample_count: int


class EnrollResponse(BaseModel):
    speaker_id: str
    sample_count: int
    created_at: str
    config_digest: str


class Match(BaseModel):
    speaker_id: str
    similarity: float


class SimilarResponse(BaseModel):
    matches: List[Match]


class SpeakerList(BaseModel):
    speakers: List[str]
    d_embedding: int
    config_digest: str


class HealthResponse(BaseModel):
    status: str
    variant: str
    d_embedding: int
    enrolled: int
