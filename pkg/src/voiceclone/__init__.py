"""Few-shot speaker embedding: feature extraction, attention encoder, enrollment store."""

from .audio_io import AudioClip, load_wav, resample, save_wav
from .config import load_hparams
from .dsp import DspConfig, MelSpectrogram, melspectrogram, trim_silence
from .encoder import EncoderConfig, EncoderParams, encode_speaker
from .enhancement import EnhancementMethod, enhance
from .enrollment import EmbeddingStore, cosine_similarity, enroll, nearest
from .vocoder import griffin_lim, mel_to_audio

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "DspConfig",
    "EmbeddingStore",
    "EncoderConfig",
    "EncoderParams",
    "EnhancementMethod",
    "MelSpectrogram",
    "cosine_similarity",
    "encode_speaker",
    "enhance",
    "enroll",
    "griffin_lim",
    "load_hparams",
    "load_wav",
    "mel_to_audio",
    "melspectrogram",
    "nearest",
    "resample",
    "save_wav",
    "trim_silence",
]
