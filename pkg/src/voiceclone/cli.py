"""Command-line entry point.

Store locations given as ``http://`` URLs make ``enroll``/``similar`` talk to
a running ``voiceclone serve`` instance; ``embed`` does the same with
``--server``. Everything else runs in-process.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from .audio_io import load_wav, save_wav
from .config import (
    dsp_config_from_hparams,
    encoder_config_from_hparams,
    load_hparams,
    optimizer_settings_from_hparams,
)
from .dsp import melspectrogram, trim_silence
from .encoder import EncoderParams
from .enhancement import EnhancementMethod
from .enrollment import EmbeddingStore, bench_enroll, embed_files, enroll, nearest
from .errors import VoiceCloneError


def _configs(args):
    hp = load_hparams(args.config)
    dsp = dsp_config_from_hparams(hp)
    enc = encoder_config_from_hparams(hp, variant=getattr(args, "variant", "t2"))
    return hp, dsp, enc


def _params(args, enc):
    if getattr(args, "params", None):
        params = EncoderParams.load(args.params)
        params.check(enc)
        return params
    return EncoderParams.init(enc, seed=args.init_seed)


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_preprocess(args):
    _, dsp, _ = _configs(args)
    clip = load_wav(args.wav)
    trimmed = trim_silence(clip, dsp.vad_threshold_db)
    mel = melspectrogram(trimmed, dsp)
    out = Path(args.out or Path(args.wav).with_suffix(".mel.npy"))
    np.save(out, mel.values)
    _emit({
        "input": str(args.wav),
        "output": str(out),
        "sample_rate": clip.sample_rate,
        "samples": len(clip),
        "samples_after_trim": len(trimmed),
        "frames": mel.frame_count,
        "num_mels": mel.num_mels,
        "min": float(mel.values.min()),
        "max": float(mel.values.max()),
        "mean": float(mel.values.mean()),
    })


def cmd_embed(args):
    if args.server:
        from .client import Client

        _emit(Client(args.server).embed(args.wavs, args.enhance))
        return
    _, dsp, enc = _configs(args)
    vec = embed_files(args.wavs, enc, dsp, _params(args, enc), EnhancementMethod.from_cli(args.enhance))
    _emit({"embedding": vec.tolist(), "d_embedding": int(vec.size), "sample_count": len(args.wavs)})


def cmd_enroll(args):
    from .client import Client, is_url

    if is_url(args.store):
        _emit(Client(args.store).enroll(args.speaker_id, args.wavs, args.enhance))
        return
    _, dsp, enc = _configs(args)
    store = EmbeddingStore.open(args.store, enc, dsp)
    record = enroll(store, args.speaker_id, args.wavs, enc, dsp, _params(args, enc),
                    EnhancementMethod.from_cli(args.enhance))
    _emit({"speaker_id": record.speaker_id, "sample_count": record.sample_count,
           "created_at": record.created_at, "store": str(args.store)})


def cmd_similar(args):
    from .client import Client, is_url

    if is_url(args.store):
        _emit(Client(args.store).similar(args.wavs, args.k, args.enhance))
        return
    _, dsp, enc = _configs(args)
    store = EmbeddingStore.open(args.store, enc, dsp)
    vec = embed_files(args.wavs, enc, dsp, _params(args, enc), EnhancementMethod.from_cli(args.enhance))
    _emit({"matches": [{"speaker_id": s, "similarity": v} for s, v in nearest(store, vec, args.k)]})


def cmd_vocode(args):
    from .vocoder import mel_to_audio

    hp, dsp, _ = _configs(args)
    mel = np.load(args.melfile)
    power = args.power if args.power is not None else float(hp.get("power", 1.4))
    clip = mel_to_audio(mel, dsp, iterations=args.iterations, power=power)
    out = Path(args.out or Path(args.melfile).with_suffix(".wav"))
    save_wav(clip, out)
    _emit({"output": str(out), "samples": len(clip), "sample_rate": clip.sample_rate,
           "iterations": args.iterations, "power": power})


def cmd_train_toy(args):
    from .repro import TOY_ENCODER
    from .training import OptimizerState, synthetic_speakers, train_toy
    from .dsp import DspConfig

    hp = load_hparams(args.config)
    opt = OptimizerState.from_hparams(optimizer_settings_from_hparams(hp), noam=args.noam)
    dataset = synthetic_speakers(n_speakers=args.speakers, clips_per_speaker=args.clips, seed=args.seed)
    sink = open(args.metrics, "w") if args.metrics else sys.stdout

    def emit(m):
        sink.write(m.to_json() + "\n")
        sink.flush()

    try:
        params, _ = train_toy(dataset, TOY_ENCODER.with_variant(args.variant), DspConfig(), args.epochs,
                              args.seed, opt, callback=emit)
    finally:
        if sink is not sys.stdout:
            sink.close()
    if args.out_params:
        params.save(args.out_params)


def cmd_gradcheck(args):
    from .training import gradient_check_suite

    reports = gradient_check_suite(seed=args.seed)
    ok = all(r.worst <= args.tolerance for r in reports.values())
    _emit({v: {"max_rel_error": r.max_rel_error, "worst": r.worst} for v, r in reports.items()} | {"passed": ok})
    return 0 if ok else 1


def cmd_bench(args):
    from .repro import _voice_clips

    hp = load_hparams(args.config)
    dsp = dsp_config_from_hparams(hp)
    enc = encoder_config_from_hparams(hp, variant=args.variant)
    params = _params(args, enc)
    with tempfile.TemporaryDirectory() as tmp:
        paths = args.wavs
        if not paths:
            paths = []
            for i, clip in enumerate(_voice_clips(args.init_seed, enc.max_cloning_samples, 5.0, dsp.sample_rate)):
                p = Path(tmp) / f"sample{i}.wav"
                save_wav(clip, p)
                paths.append(p)
        report = bench_enroll(paths, enc, dsp, params, args.repetitions, EnhancementMethod.from_cli(args.enhance))
    _emit(report.to_json())


def cmd_repro(args):
    from .repro import run_acceptance

    report = run_acceptance(args.seed, echo=lambda line: print(line, file=sys.stderr))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2))
    print("ALL PASS" if report.passed else "FAILURES", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    _, dsp, enc = _configs(args)
    store = EmbeddingStore.open(args.store, enc, dsp)
    uvicorn.run(create_app(store, enc, dsp, _params(args, enc)), host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voiceclone", description="Speaker embedding, enrollment and resynthesis tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_opts(p, variant=True):
        p.add_argument("--config", default="vctk",
                       help="hyperparameter file, or one of: vctk, libritts_tts, libritts_encoder")
        if variant:
            p.add_argument("--variant", choices=("t1", "t2"), default="t2")
        p.add_argument("--params", help="trained encoder weights (.npz); default is a seeded init")
        p.add_argument("--init-seed", type=int, default=0)

    def enhance_opt(p):
        p.add_argument("--enhance", choices=("none", "gate"), default="none")

    p = sub.add_parser("preprocess", help="trim + mel spectrogram, saved as .npy")
    p.add_argument("wav")
    p.add_argument("--config", default="vctk")
    p.add_argument("--out")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("enroll", help="enroll a speaker into a store file or service URL")
    p.add_argument("speaker_id")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--store", required=True)
    model_opts(p)
    enhance_opt(p)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("embed", help="print the speaker embedding of 1..J samples")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--server", help="service URL; when given, encoding happens remotely")
    model_opts(p)
    enhance_opt(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("similar", help="rank enrolled speakers against new samples")
    p.add_argument("store")
    p.add_argument("wavs", nargs="+")
    p.add_argument("-k", type=int, default=5)
    model_opts(p)
    enhance_opt(p)
    p.set_defaults(func=cmd_similar)

    p = sub.add_parser("vocode", help="Griffin-Lim resynthesis of a .npy mel file")
    p.add_argument("melfile")
    p.add_argument("--config", default="vctk")
    p.add_argument("--out")
    p.add_argument("--iterations", type=int, default=60)
    p.add_argument("--power", type=float)
    p.set_defaults(func=cmd_vocode)

    p = sub.add_parser("train-toy", help="train on the synthetic speaker corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--variant", choices=("t1", "t2"), default="t2")
    p.add_argument("--speakers", type=int, default=8)
    p.add_argument("--clips", type=int, default=6)
    p.add_argument("--config", default="vctk", help="source of the Adam constants")
    p.add_argument("--noam", action="store_true", help="apply the noam learning-rate schedule")
    p.add_argument("--metrics", help="write JSON lines here instead of stdout")
    p.add_argument("--out-params")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("gradcheck", help="finite-difference check of the encoder gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="time enrollment (synthetic 5 s clips unless wavs are given)")
    p.add_argument("wavs", nargs="*")
    p.add_argument("--repetitions", type=int, default=5)
    model_opts(p)
    enhance_opt(p)
    p.set_defaults(func=cmd_bench, config="libritts_encoder")

    p = sub.add_parser("repro", help="run every acceptance criterion")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("serve", help="run the enrollment HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    model_opts(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        logging.getLogger("voiceclone.config").setLevel(logging.ERROR)
    try:
        return args.func(args) or 0
    except (VoiceCloneError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        from .client import ServiceError

        if isinstance(exc, ServiceError):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
