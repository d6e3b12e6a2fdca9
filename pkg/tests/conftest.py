import numpy as np
import pytest

from voiceclone import AudioClip, DspConfig, save_wav
from voiceclone.repro import _voice_clips
from voiceclone.training import GRADCHECK_CONFIG

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def dsp_cfg():
    return DspConfig()


@pytest.fixture(scope="session")
def small_enc():
    return GRADCHECK_CONFIG


@pytest.fixture(scope="session")
def voice_clips():
    return _voice_clips(7, 6, 0.8, 22050)


@pytest.fixture
def wav_files(tmp_path, voice_clips):
    paths = []
    for i, clip in enumerate(voice_clips):
        p = tmp_path / f"clip{i}.wav"
        save_wav(clip, p)
        paths.append(p)
    return paths


def tone(freq, seconds=1.0, sr=22050, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), sr)
