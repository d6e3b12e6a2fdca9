"""Acceptance harness: runs every exit criterion and collects a report."""

from __future__ import annotations

import itertools
import json
import math
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import reference
from .attention import AttentionConfig, AttentionParams, attention_pool
from .audio_io import AudioClip, load_wav, save_wav
from .config import dsp_config_from_hparams, encoder_config_from_hparams, load_hparams, optimizer_settings_from_hparams
from .dsp import DspConfig, deemphasize, melspectrogram, mel_filterbank, preemphasize, stft_magnitude, trim_silence
from .encoder import EncoderConfig, EncoderParams, cross_sample_aggregate, encode_speaker, temporal_aggregate
from .enhancement import EnhancementMethod, enhance, spectral_gate
from .enrollment import REFERENCE_ENROLL_SECONDS, REFERENCE_ENROLL_TIME, bench_enroll
from .errors import ConfigError
from .training import OptimizerState, gradient_check_suite, synth_voice, synthetic_speakers, train_toy
from .vocoder import LinearSpectrogram, griffin_lim_trace

TOY_ENCODER = EncoderConfig(d_mel=80, f_mapped=16, d_attn=8, num_heads=2, d_embedding=16, max_cloning_samples=6)


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    measured: dict
    tolerance: dict
    elapsed_s: float = 0.0
    deterministic: bool = True

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.id:2d} {self.name}: {shown} ({self.elapsed_s:.2f}s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


@dataclass
class ReproReport:
    seed: int
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "criteria": [asdict(r) for r in self.results]}

    def deterministic_view(self) -> dict:
        """Report content that must not vary between runs with the same seed.

        Wall-clock fields (elapsed time, and the measured values of timing
        criteria) are dropped.
        """
        out = []
        for r in self.results:
            d = asdict(r)
            d.pop("elapsed_s")
            if not r.deterministic:
                d.pop("measured")
            out.append(d)
        return {"seed": self.seed, "criteria": out}


def _timed(fn, *args):
    start = time.perf_counter()
    result = fn(*args)
    return result, time.perf_counter() - start


# ---------------------------------------------------------------------------
# criteria


def c1_gradient_fidelity(seed):
    reports, elapsed = _timed(gradient_check_suite, EncoderConfig(
        d_mel=5, f_mapped=3, d_attn=4, num_heads=2, d_embedding=3, max_cloning_samples=2), seed)
    worst = {v: r.worst for v, r in reports.items()}
    ok = all(w <= 1e-4 for w in worst.values()) and elapsed < 5.0
    return ok, {"worst_rel_t1": worst["t1"], "worst_rel_t2": worst["t2"], "runtime_s": elapsed}, {
        "rel_error": 1e-4, "runtime_s": 5.0}


def c2_oracle_equivalence(seed):
    def run():
        rng = np.random.default_rng(seed)
        worst_pool = worst_cross = 0.0
        for _ in range(100):
            t, d_in = int(rng.integers(1, 8)), int(rng.integers(1, 6))
            heads = int(rng.integers(1, 4))
            cfg = AttentionConfig(d_in, heads * int(rng.integers(1, 4)), heads)
            params = AttentionParams.init(cfg, rng)
            y = rng.normal(size=(t, d_in))
            weights, pooled = attention_pool(y, params, cfg)
            ref_w, ref_pooled = reference.attention_pool(y, params)
            worst_pool = max(worst_pool, np.abs(pooled - ref_pooled).max(), np.abs(weights - ref_w).max())

            j = int(rng.integers(1, 7))
            enc = EncoderConfig(d_mel=4, f_mapped=d_in, d_attn=cfg.d_attn, num_heads=heads,
                                d_embedding=int(rng.integers(1, 9)), max_cloning_samples=6)
            ep = EncoderParams.init(enc, seed=int(rng.integers(2**31)))
            e = rng.normal(size=(j, d_in))
            got = cross_sample_aggregate(e, ep, enc)
            want = reference.cross_sample_aggregate(e, ep.cross, ep.w_s)
            worst_cross = max(worst_cross, np.abs(got - want).max())
        return worst_pool, worst_cross

    (worst_pool, worst_cross), elapsed = _timed(run)
    ok = worst_pool <= 1e-10 and worst_cross <= 1e-10 and elapsed < 10.0
    return ok, {"max_abs_pool": worst_pool, "max_abs_cross": worst_cross, "instances": 100, "runtime_s": elapsed}, {
        "max_abs": 1e-10, "runtime_s": 10.0}


def _voice_clips(seed, count, duration, sr=22050):
    rng = np.random.default_rng(seed)
    clips = []
    for _ in range(count):
        f0 = rng.uniform(90, 250)
        formants = [(rng.uniform(300, 900), 80.0), (rng.uniform(1000, 2400), 120.0), (rng.uniform(2500, 3800), 160.0)]
        clips.append(AudioClip(synth_voice(rng, f0, formants, sr, duration), sr))
    return clips


def c3_permutation_invariance(seed):
    dsp = DspConfig()
    enc = EncoderConfig(d_mel=80, f_mapped=30, d_attn=16, num_heads=8, d_embedding=64, variant="t2")
    params = EncoderParams.init(enc, seed)
    clips = _voice_clips(seed, 6, 0.4)

    def run():
        base = encode_speaker(clips, dsp, enc, params)
        worst = 0.0
        count = 0
        for perm in itertools.permutations(range(6)):
            out = encode_speaker([clips[i] for i in perm], dsp, enc, params)
            worst = max(worst, float(np.abs(out - base).max()))
            count += 1
        return worst, count

    (worst, count), elapsed = _timed(run)
    ok = worst <= 1e-9 and count == 720 and elapsed < 30.0
    return ok, {"max_abs_change": worst, "permutations": count, "runtime_s": elapsed}, {
        "max_abs": 1e-9, "runtime_s": 30.0}


def c4_degeneracy(seed):
    rng = np.random.default_rng(seed)
    enc = EncoderConfig(d_mel=80, f_mapped=30, d_attn=16, num_heads=8, d_embedding=32, variant="t2")
    params = EncoderParams.init(enc, seed)
    params.temporal.w_out[...] = 0.0
    worst = 0.0
    for _ in range(20):
        y = rng.normal(size=(int(rng.integers(1, 50)), 30))
        t1 = temporal_aggregate(y, params, enc.with_variant("t1"))
        t2 = temporal_aggregate(y, params, enc)
        worst = max(worst, float(np.abs(t1 - t2).max()))
    mels = [rng.uniform(0, 1, size=(int(rng.integers(1, 30)), 80)) for _ in range(6)]
    from .encoder import encode_features

    full = float(np.abs(encode_features(mels, params, enc) - encode_features(mels, params, enc.with_variant("t1"))).max())
    worst = max(worst, full)
    return worst <= 1e-12, {"max_abs": worst}, {"max_abs": 1e-12}


def c5_config_fidelity(seed):
    vctk = load_hparams("vctk")
    libri = load_hparams("libritts_encoder")
    dsp_d = dsp_config_from_hparams(vctk)
    enc_d = encoder_config_from_hparams(vctk)
    enc_f = encoder_config_from_hparams(libri)
    opt = optimizer_settings_from_hparams(vctk)
    try:
        AttentionConfig(30, 15, 2)
        rejected = False
    except ConfigError:
        rejected = True
    measured = {
        "filterbank_shape": list(mel_filterbank(dsp_d).shape),
        "d_embedding": enc_f.d_embedding,
        "J": enc_f.max_cloning_samples,
        "libritts_encoder_heads": enc_f.num_heads,
        "libritts_encoder_d_attn": enc_f.d_attn,
        "libritts_encoder_d_t": enc_f.temporal_attention.d_t,
        "vctk_heads": enc_d.num_heads,
        "vctk_d_attn": enc_d.d_attn,
        "vctk_d_t": enc_d.temporal_attention.d_t,
        "adam": [opt["learning_rate"], opt["beta1"], opt["beta2"], opt["eps"]],
        "d_attn_15_heads_2_rejected": rejected,
    }
    expected = {
        "filterbank_shape": [80, 513],
        "d_embedding": 256,
        "J": 6,
        "libritts_encoder_heads": 2,
        "libritts_encoder_d_attn": 128,
        "libritts_encoder_d_t": 64,
        "vctk_heads": 8,
        "vctk_d_attn": 16,
        "vctk_d_t": 2,
        "adam": [0.0005, 0.5, 0.9, 1e-06],
        "d_attn_15_heads_2_rejected": True,
    }
    return measured == expected, measured, expected


def c6_griffin_lim(seed):
    sr, fft, hop = 22050, 1024, 256
    t = np.arange(2 * sr) / sr
    clip = AudioClip(0.5 * np.sin(2 * np.pi * 440.0 * t), sr)
    mag = LinearSpectrogram.from_clip(clip, fft, hop)
    result, elapsed = _timed(griffin_lim_trace, mag, 60, 1.4)
    errors = np.asarray(result.errors)
    increases = int(np.sum(np.diff(errors) > 0))
    rebuilt = stft_magnitude(result.clip.samples, fft, hop)
    mismatched = int(np.sum(rebuilt.argmax(axis=1) != mag.values.argmax(axis=1)))
    ok = increases == 0 and mismatched == 0 and len(errors) == 60 and elapsed < 5.0
    return ok, {
        "error_first": float(errors[0]),
        "error_last": float(errors[-1]),
        "increases": increases,
        "frames_bin_mismatch": mismatched,
        "runtime_s": elapsed,
    }, {"increases": 0, "frames_bin_mismatch": 0, "runtime_s": 5.0}


def c7_toy_separability(seed):
    def run():
        dataset = synthetic_speakers(n_speakers=8, clips_per_speaker=6, seed=seed)
        margins = {}
        for variant in ("t1", "t2"):
            opt = OptimizerState(learning_rate=5e-4, beta1=0.5, beta2=0.9, eps=1e-6)
            _, metrics = train_toy(dataset, TOY_ENCODER.with_variant(variant), DspConfig(), 40, seed, opt)
            margins[variant] = metrics[-1].margin
        return margins

    margins, elapsed = _timed(run)
    ok = all(m >= 0.2 for m in margins.values()) and elapsed < 180.0
    return ok, {"margin_t1": margins["t1"], "margin_t2": margins["t2"], "runtime_s": elapsed}, {
        "min_margin": 0.2, "runtime_s": 180.0}


def c8_enrollment_latency(seed):
    hp = load_hparams("libritts_encoder")
    dsp = dsp_config_from_hparams(hp)
    enc = encoder_config_from_hparams(hp)
    params = EncoderParams.init(enc, seed)
    with tempfile.TemporaryDirectory() as tmp:
        paths = []
        for i, clip in enumerate(_voice_clips(seed, 6, 5.0, dsp.sample_rate)):
            p = Path(tmp) / f"sample{i}.wav"
            save_wav(clip, p)
            paths.append(p)
        report = bench_enroll(paths, enc, dsp, params, repetitions=3)
    ok = report.median < REFERENCE_ENROLL_SECONDS["speaker_encoder"] and report.min <= report.median <= report.max
    return ok, {
        "median_s": report.median,
        "min_s": report.min,
        "max_s": report.max,
        "audio_s": report.total_audio_seconds,
        "reference": dict(REFERENCE_ENROLL_TIME),
    }, {"median_s_below": REFERENCE_ENROLL_SECONDS["speaker_encoder"]}


def c9_dsp_roundtrips(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=22050)
    pre_err = float(np.abs(deemphasize(preemphasize(x, 0.97), 0.97) - x).max())

    clip = AudioClip(rng.uniform(-1, 1, size=4000), 22050)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "rt.wav"
        save_wav(clip, path)
        back = load_wav(path)
    wav_err = float(np.abs(back.samples - clip.samples).max())
    sr_ok = back.sample_rate == clip.sample_rate

    voiced = _voice_clips(seed, 1, 1.0)[0].samples
    padded = np.concatenate([np.zeros(8000), voiced, 1e-5 * rng.normal(size=6000)])
    trimmed = trim_silence(AudioClip(padded, 22050), 60.0)
    twice = trim_silence(trimmed, 60.0)
    idempotent = np.array_equal(trimmed.samples, twice.samples)

    cfg = DspConfig()
    lo, hi = 1.0, 0.0
    for _ in range(8):
        noise = AudioClip(rng.normal(scale=10 ** rng.uniform(-3, -0.5), size=8000).clip(-1, 1), 22050)
        m = melspectrogram(noise, cfg).values
        lo, hi = min(lo, float(m.min())), max(hi, float(m.max()))
    ok = pre_err <= 1e-12 and wav_err <= 1 / 32768 and sr_ok and idempotent and lo >= 0.0 and hi <= 1.0
    return ok, {
        "preemphasis_inverse_err": pre_err,
        "wav_roundtrip_err": wav_err,
        "trim_idempotent": idempotent,
        "mel_min": lo,
        "mel_max": hi,
    }, {"preemphasis_inverse_err": 1e-12, "wav_roundtrip_err": 1 / 32768, "mel_range": [0.0, 1.0]}


def noisy_tone_fixture(seed, sr=22050, fft_size=1024, bin_index=40, snr_db=10.0, lead_s=0.5, duration=3.0):
    """Bin-centred tone after a silent lead, plus white noise whose per-bin
    power sits ``snr_db`` below the tone's bin power."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(duration * sr)) / sr
    amp = 0.3
    tone = amp * np.sin(2 * np.pi * bin_index * sr / fft_size * t)
    tone[: int(lead_s * sr)] = 0.0
    w = np.hanning(fft_size + 1)[:-1]
    tone_bin_power = (amp * w.sum() / 2) ** 2
    sigma = math.sqrt(tone_bin_power / 10 ** (snr_db / 10) / np.sum(w**2))
    return tone, rng.normal(0.0, sigma, size=t.size)


def tone_snr_db(signal, sr=22050, fft_size=1024, hop=256, bin_index=40, skip_s=1.0):
    power = stft_magnitude(signal[int(skip_s * sr):], fft_size, hop) ** 2
    noise = np.delete(power, range(bin_index - 2, bin_index + 3), axis=1)
    return 10 * math.log10(power[:, bin_index].mean() / noise.mean())


def c10_enhancement(seed):
    cfg = DspConfig()
    tone, noise = noisy_tone_fixture(seed)
    noisy = AudioClip(tone + noise, 22050)
    passthrough = enhance(noisy, EnhancementMethod("passthrough"), cfg)
    identity = passthrough.samples is noisy.samples or np.array_equal(passthrough.samples, noisy.samples)
    gated = enhance(noisy, EnhancementMethod("spectral_gate"), cfg)
    improvement = tone_snr_db(gated.samples) - tone_snr_db(noisy.samples)

    rng = np.random.default_rng(seed)
    worst_ratio = 0.0
    for _ in range(10):
        x = AudioClip(rng.normal(size=12000) * rng.uniform(0.01, 0.5), 22050)
        out = spectral_gate(x, cfg.fft_size, float(rng.uniform(-3, 12)), int(rng.integers(1, 8)))
        worst_ratio = max(worst_ratio, float(np.sum(out.samples**2) / np.sum(x.samples**2)))
    energy_ratio = float(np.sum(gated.samples**2) / np.sum(noisy.samples**2))
    worst_ratio = max(worst_ratio, energy_ratio)
    ok = identity and improvement >= 6.0 and worst_ratio <= 1.0 + 1e-12
    return ok, {"passthrough_identity": identity, "snr_improvement_db": improvement, "max_energy_ratio": worst_ratio}, {
        "snr_improvement_db": 6.0, "max_energy_ratio": 1.0}


CRITERIA = {
    1: ("gradient fidelity", c1_gradient_fidelity, True),
    2: ("attention oracle equivalence", c2_oracle_equivalence, True),
    3: ("permutation invariance", c3_permutation_invariance, True),
    4: ("t1/t2 degeneracy", c4_degeneracy, True),
    5: ("configuration fidelity", c5_config_fidelity, True),
    6: ("griffin-lim", c6_griffin_lim, True),
    7: ("toy separability", c7_toy_separability, True),
    8: ("enrollment latency", c8_enrollment_latency, False),
    9: ("dsp round-trips", c9_dsp_roundtrips, True),
    10: ("enhancement contract", c10_enhancement, True),
}


def _strip_runtime(measured: dict) -> dict:
    return {k: v for k, v in measured.items() if k != "runtime_s"}


def run_acceptance(seed: int = 0, only=None, echo=None) -> ReproReport:
    report = ReproReport(seed)
    for cid, (name, fn, deterministic) in CRITERIA.items():
        if only is not None and cid not in only:
            continue
        start = time.perf_counter()
        try:
            ok, measured, tolerance = fn(seed)
        except Exception as exc:  # a crash is a failed criterion, not a crashed report
            ok, measured, tolerance = False, {"error": f"{type(exc).__name__}: {exc}"}, {}
        elapsed = time.perf_counter() - start
        if deterministic:
            runtime = measured.get("runtime_s")
            measured = _strip_runtime(measured)
            if runtime is not None:
                tolerance = dict(tolerance, runtime_checked=True)
        result = CriterionResult(cid, name, bool(ok), _jsonable(measured), _jsonable(tolerance), elapsed, deterministic)
        report.results.append(result)
        if echo is not None:
            echo(result.line())
    return report


def _jsonable(d):
    return json.loads(json.dumps(d, default=lambda o: o.item() if hasattr(o, "item") else str(o)))
