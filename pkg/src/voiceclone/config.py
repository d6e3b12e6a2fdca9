"""Hyperparameter files in the Deep Voice 3 ``hparams`` key vocabulary.

The bundled files are kept byte-for-byte as published, which means they are
not strict JSON: they may be wrapped in markdown fences, carry trailing
commas, and be split into a braced object followed by a brace-less
continuation. :func:`parse_hparams` stitches such fragments into one dict.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from importlib import resources
from pathlib import Path

from .dsp import DspConfig
from .encoder import EncoderConfig
from .errors import ConfigError

logger = logging.getLogger(__name__)

BUNDLED = {
    "vctk": "vctk.json",
    "libritts_tts": "libritts_tts.json",
    "libritts_encoder": "libritts_encoder.json",
}

DSP_KEYS = {
    "num_mels": "num_mels",
    "fmin": "fmin",
    "fmax": "fmax",
    "fft_size": "fft_size",
    "hop_size": "hop_size",
    "sample_rate": "sample_rate",
    "preemphasis": "preemphasis",
    "min_level_db": "min_level_db",
    "ref_level_db": "ref_level_db",
    "vad_threshold_db": "vad_threshold_db",
}
ENCODER_KEYS = {
    "num_mels": "d_mel",
    "f_mapped": "f_mapped",
    "speaker_encoder_attention_dim": "d_attn",
    "speaker_encoder_attention_num_heads": "num_heads",
    "speaker_embed_dim": "d_embedding",
    "cloning_sample_size": "max_cloning_samples",
}
OPTIMIZER_KEYS = {
    "adam_beta1": "beta1",
    "adam_beta2": "beta2",
    "adam_eps": "eps",
    "initial_learning_rate": "learning_rate",
    "lr_schedule": "lr_schedule",
}
VOCODER_KEYS = {"power"}
KNOWN_KEYS = set(DSP_KEYS) | set(ENCODER_KEYS) | set(OPTIMIZER_KEYS) | VOCODER_KEYS

_FENCE = re.compile(r"^\s*```[^\n]*$", re.M)
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


def parse_hparams(text: str) -> dict:
    fragments = [f.strip() for f in _FENCE.split(text)]
    bodies = []
    for frag in fragments:
        if not frag:
            continue
        if frag.startswith("{"):
            frag = frag[1:]
        if frag.endswith("}"):
            frag = frag[:-1]
        frag = frag.strip().rstrip(",").strip()
        if frag:
            bodies.append(frag)
    joined = "{" + ",\n".join(bodies) + "}"
    joined = _TRAILING_COMMA.sub(r"\1", joined)
    try:
        data = json.loads(joined)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse hyperparameters: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("hyperparameters must be a key/value object")
    return data


def load_hparams(source) -> dict:
    """Load from a path, or from one of the bundled names in :data:`BUNDLED`."""
    if isinstance(source, str) and source in BUNDLED:
        text = resources.files("voiceclone.hparams").joinpath(BUNDLED[source]).read_text()
    else:
        text = Path(source).read_text()
    data = parse_hparams(text)
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        logger.warning("ignoring %d hyperparameter keys not used here: %s", len(unknown), ", ".join(unknown))
    return data


def _pick(hp: dict, mapping: dict) -> dict:
    return {dst: hp[src] for src, dst in mapping.items() if src in hp}


def dsp_config_from_hparams(hp: dict, **overrides) -> DspConfig:
    kw = _pick(hp, DSP_KEYS)
    for key in ("num_mels", "fft_size", "hop_size", "sample_rate"):
        if key in kw:
            kw[key] = int(kw[key])
    for key in ("fmin", "fmax", "preemphasis", "min_level_db", "ref_level_db", "vad_threshold_db"):
        if key in kw:
            kw[key] = float(kw[key])
    kw.update(overrides)
    return DspConfig(**kw)


def encoder_config_from_hparams(hp: dict, variant: str = "t2", **overrides) -> EncoderConfig:
    kw = {k: int(v) for k, v in _pick(hp, ENCODER_KEYS).items()}
    kw["variant"] = variant
    kw.update(overrides)
    return EncoderConfig(**kw)


def optimizer_settings_from_hparams(hp: dict) -> dict:
    return _pick(hp, OPTIMIZER_KEYS)


def config_digest(enc_cfg: EncoderConfig, dsp_cfg: DspConfig) -> str:
    """Stable hash over every field of both configs."""
    payload = json.dumps({"encoder": enc_cfg.to_dict(), "dsp": dsp_cfg.to_dict()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
