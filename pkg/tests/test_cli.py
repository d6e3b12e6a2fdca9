import json

import numpy as np
import pytest

from voiceclone.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_preprocess_and_vocode(capsys, wav_files, tmp_path):
    mel_path = tmp_path / "m.npy"
    code, out, _ = run(capsys, "preprocess", wav_files[0], "--out", mel_path)
    assert code == 0
    summary = json.loads(out)
    mel = np.load(mel_path)
    assert mel.shape == (summary["frames"], 80)
    assert 0 <= summary["min"] <= summary["max"] <= 1
    code, out, _ = run(capsys, "vocode", mel_path, "--out", tmp_path / "r.wav", "--iterations", 5)
    assert code == 0 and json.loads(out)["power"] == 1.4
    assert (tmp_path / "r.wav").exists()


def test_enroll_similar_embed(capsys, wav_files, tmp_path):
    store = tmp_path / "store.json"
    code, out, _ = run(capsys, "enroll", "amy", *wav_files[:3], "--store", store)
    assert code == 0 and json.loads(out)["sample_count"] == 3
    code, _, err = run(capsys, "enroll", "amy", wav_files[3], "--store", store)
    assert code == 2 and "already enrolled" in err
    run(capsys, "enroll", "bob", *wav_files[3:], "--store", store, "--enhance", "gate")
    code, out, _ = run(capsys, "similar", store, *wav_files[:3], "-k", "1")
    assert json.loads(out)["matches"][0] == {"speaker_id": "amy", "similarity": pytest.approx(1.0)}
    code, out, _ = run(capsys, "embed", wav_files[0])
    assert len(json.loads(out)["embedding"]) == 256


def test_variant_changes_store_digest(capsys, wav_files, tmp_path):
    store = tmp_path / "s.json"
    run(capsys, "enroll", "a", wav_files[0], "--store", store, "--variant", "t1")
    code, _, err = run(capsys, "enroll", "b", wav_files[1], "--store", store, "--variant", "t2")
    assert code == 2 and "config" in err


def test_missing_file_reports_error(capsys, tmp_path):
    code, _, err = run(capsys, "embed", tmp_path / "nope.wav")
    assert code == 2 and "nope.wav" in err


def test_train_toy_jsonl(capsys, tmp_path):
    metrics = tmp_path / "m.jsonl"
    code, _, _ = run(capsys, "train-toy", "--epochs", 2, "--speakers", 2, "--clips", 3, "--metrics", metrics,
                     "--out-params", tmp_path / "p.npz")
    assert code == 0
    rows = [json.loads(line) for line in metrics.read_text().splitlines()]
    assert [r["epoch"] for r in rows] == [1, 2]
    assert set(rows[0]) == {"epoch", "loss", "intra_cos", "inter_cos"}
    assert (tmp_path / "p.npz").exists()


def test_gradcheck_command(capsys):
    code, out, _ = run(capsys, "gradcheck")
    assert code == 0 and json.loads(out)["passed"] is True


def test_bench_command(capsys):
    code, out, _ = run(capsys, "bench", "--repetitions", 3)
    doc = json.loads(out)
    assert code == 0 and doc["sample_count"] == 6
    assert doc["total_audio_s"] == pytest.approx(30.0)
    assert doc["reference"]["adaptation"] == "15 min."


def test_repro_subset_writes_report(capsys, tmp_path, monkeypatch):
    import voiceclone.repro as repro

    real = repro.run_acceptance
    monkeypatch.setattr(repro, "run_acceptance", lambda seed, echo=None: real(seed, only={4, 5}, echo=echo))
    out = tmp_path / "report.json"
    code, _, err = run(capsys, "repro", "--seed", 3, "--out", out)
    assert code == 0 and "[PASS]" in err
    assert [c["id"] for c in json.loads(out.read_text())["criteria"]] == [4, 5]
