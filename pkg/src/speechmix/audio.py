"""Mono 16-bit PCM WAV I/O at a fixed sample rate."""

from __future__ import annotations

import os
import wave
from pathlib import Path

import numpy as np


class AudioError(ValueError):
    """Unsupported or malformed audio file."""


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit PCM WAV file.

    Returns (samples in [-1, 1] as float32, sample rate).
    """
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        channels = wf.getnchannels()
        width = wf.getsampwidth()
        rate = wf.getframerate()
        frames = wf.readframes(wf.getnframes())
    if channels != 1:
        raise AudioError(f"{path}: expected mono audio, got {channels} channels")
    if width != 2:
        raise AudioError(f"{path}: expected 16-bit PCM, got sample width {width}")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    return samples, rate


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int = 16000) -> None:
    """Write float samples in [-1, 1] as mono 16-bit PCM (atomic temp+rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2")
    tmp = path.with_name(path.name + ".tmp")
    with wave.open(str(tmp), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())
    os.replace(tmp, path)


def wav_duration_s(path: str | Path) -> float:
    """Duration from the WAV header without decoding samples."""
    with wave.open(str(Path(path)), "rb") as wf:
        return wf.getnframes() / wf.getframerate()
