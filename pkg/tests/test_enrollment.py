import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from voiceclone.audio_io import AudioClip, save_wav
from voiceclone.encoder import EncoderConfig, EncoderParams
from voiceclone.enrollment import (
    REFERENCE_ENROLL_TIME,
    EmbeddingStore,
    EnrollmentRecord,
    bench_enroll,
    cosine_similarity,
    enroll,
    nearest,
)
from voiceclone.errors import (
    AudioFileError,
    ConfigMismatch,
    DuplicateSpeaker,
    EmptyStore,
    LengthMismatch,
    TooManySamples,
    ZeroVector,
)

ENC = EncoderConfig(d_embedding=32)
vectors = arrays(np.float64, 8, elements=st.floats(-10, 10)).filter(lambda v: np.linalg.norm(v) > 1e-3)


@pytest.fixture
def params():
    return EncoderParams.init(ENC, seed=1)


@pytest.fixture
def store(tmp_path, dsp_cfg):
    return EmbeddingStore.open(tmp_path / "store.json", ENC, dsp_cfg)


def test_enroll_six_and_reload_bitwise(store, wav_files, dsp_cfg, params):
    rec = enroll(store, "spk1", wav_files, ENC, dsp_cfg, params)
    assert rec.sample_count == 6
    reloaded = EmbeddingStore.open(store.path, ENC, dsp_cfg)
    assert np.array_equal(reloaded.records["spk1"].embedding, rec.embedding)
    assert reloaded.records["spk1"].config_digest == store.config_digest


def test_duplicate_leaves_store_unchanged(store, wav_files, dsp_cfg, params):
    enroll(store, "spk1", wav_files[:2], ENC, dsp_cfg, params)
    before = store.path.read_bytes()
    with pytest.raises(DuplicateSpeaker):
        enroll(store, "spk1", wav_files[2:4], ENC, dsp_cfg, params)
    assert store.path.read_bytes() == before
    assert len(store) == 1


def test_failed_enroll_names_path_and_keeps_disk(store, wav_files, dsp_cfg, params, tmp_path):
    enroll(store, "a", wav_files[:1], ENC, dsp_cfg, params)
    before = store.path.read_bytes()
    bad = tmp_path / "broken.wav"
    bad.write_bytes(b"RIFF\x00\x00")
    with pytest.raises(AudioFileError) as info:
        enroll(store, "b", [wav_files[0], bad], ENC, dsp_cfg, params)
    assert "broken.wav" in str(info.value)
    short = tmp_path / "short.wav"
    save_wav(AudioClip(np.full(300, 0.2), 22050), short)
    with pytest.raises(AudioFileError) as info:
        enroll(store, "b", [short], ENC, dsp_cfg, params)
    assert "short.wav" in str(info.value)
    assert store.path.read_bytes() == before and "b" not in store


def test_too_many_samples(store, wav_files, dsp_cfg, params):
    with pytest.raises(TooManySamples):
        enroll(store, "x", wav_files + wav_files[:1], ENC, dsp_cfg, params)


def test_save_failure_rolls_back(store, wav_files, dsp_cfg, params, monkeypatch):
    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(EmbeddingStore, "save", boom)
    with pytest.raises(OSError):
        enroll(store, "x", wav_files[:1], ENC, dsp_cfg, params)
    assert "x" not in store
    assert not store.path.exists()


def test_store_config_mismatch(store, wav_files, dsp_cfg, params):
    enroll(store, "a", wav_files[:1], ENC, dsp_cfg, params)
    with pytest.raises(ConfigMismatch):
        EmbeddingStore.open(store.path, ENC.with_variant("t1"), dsp_cfg)


def test_store_rejects_wrong_dimension():
    s = EmbeddingStore(4, "abc")
    with pytest.raises(LengthMismatch):
        s.add(EnrollmentRecord("a", np.ones(3), 1, "t"))


def test_store_json_layout(store, wav_files, dsp_cfg, params):
    enroll(store, "b", wav_files[:1], ENC, dsp_cfg, params)
    enroll(store, "a", wav_files[1:2], ENC, dsp_cfg, params)
    doc = json.loads(store.path.read_text())
    assert set(doc) == {"format_version", "d_embedding", "config_digest", "records"}
    assert [r["speaker_id"] for r in doc["records"]] == ["a", "b"]
    assert not list(store.path.parent.glob(".store.json.*"))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 16, elements=st.floats(-1e6, 1e6)))
def test_json_roundtrip_is_bit_exact(v):
    s = EmbeddingStore(16, "d")
    s.add(EnrollmentRecord("a", v, 1, "t"))
    back = EmbeddingStore.from_json(json.loads(json.dumps(s.to_json())))
    assert np.array_equal(back.records["a"].embedding, v)


@settings(max_examples=60, deadline=None)
@given(vectors, st.floats(0.01, 100))
def test_cosine_properties(v, c):
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)
    assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-12)
    assert cosine_similarity(v, c * v) == pytest.approx(1.0, abs=1e-12)


def test_cosine_errors():
    with pytest.raises(ZeroVector):
        cosine_similarity(np.zeros(3), np.ones(3))
    with pytest.raises(LengthMismatch):
        cosine_similarity(np.ones(2), np.ones(3))


def _store(vecs):
    s = EmbeddingStore(3, "d")
    for sid, v in vecs.items():
        s.add(EnrollmentRecord(sid, np.asarray(v, float), 1, "t"))
    return s


def test_nearest_examples():
    s = _store({"zed": [1, 0, 0], "amy": [1, 0, 0], "bob": [0, 1, 0], "cat": [1, 1, 0]})
    ranked = nearest(s, np.array([1.0, 0, 0]), k=10)
    assert [sid for sid, _ in ranked] == ["amy", "zed", "cat", "bob"]
    assert ranked[0][1] == 1.0
    assert len(nearest(s, np.array([0, 1.0, 0]), k=2)) == 2
    with pytest.raises(EmptyStore):
        nearest(EmbeddingStore(3, "d"), np.ones(3))


@settings(max_examples=40, deadline=None)
@given(st.lists(arrays(np.float64, 3, elements=st.floats(-5, 5)).filter(lambda v: np.linalg.norm(v) > 1e-3),
                min_size=1, max_size=8), st.integers(1, 10))
def test_nearest_sorted_and_sized(vecs, k):
    s = _store({f"s{i}": v for i, v in enumerate(vecs)})
    ranked = nearest(s, np.array([1.0, 0.5, -0.2]), k)
    assert len(ranked) == min(k, len(vecs))
    sims = [v for _, v in ranked]
    assert sims == sorted(sims, reverse=True)


def test_bench_report(wav_files, dsp_cfg, params):
    report = bench_enroll(wav_files, ENC, dsp_cfg, params, repetitions=3)
    assert report.min <= report.median <= report.max
    doc = report.to_json()
    assert doc["reference"] == {"adaptation": "15 min.", "speaker_encoder": "11 sec."}
    assert REFERENCE_ENROLL_TIME["speaker_encoder"] == "11 sec."
    assert report.sample_count == 6
    with pytest.raises(ValueError):
        bench_enroll(wav_files, ENC, dsp_cfg, params, repetitions=2)
