"""Log-mel spectrogram extraction and speech-rate computation.

Feature convention (the on-disk format contract depends on all of these):
frames start at sample 0 with no center padding, periodic Hann window,
magnitude-squared (power) spectrum, Slaney-style mel filterbank (linear
below 1 kHz, log above) without area normalization, natural log with a
1e-10 power floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .textnorm import NormMode, normalize

POWER_FLOOR = 1e-10
LOG_FLOOR = math.log(POWER_FLOOR)

# Slaney mel scale: linear up to 1 kHz, logarithmic above.
_MEL_BREAK_HZ = 1000.0
_MEL_HZ_PER_MEL = 200.0 / 3.0
_MEL_BREAK = _MEL_BREAK_HZ / _MEL_HZ_PER_MEL
_MEL_LOGSTEP = math.log(6.4) / 27.0


class DspError(ValueError):
    """Invalid feature-extraction input."""


@dataclass(frozen=True)
class MelParams:
    sample_rate_hz: int = 16000
    hop: int = 256
    win: int = 1024
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0
    n_mels: int = 80
    fft_size: int = 1024

    def __post_init__(self) -> None:
        if self.fmax_hz > self.sample_rate_hz / 2:
            raise DspError(f"fmax_hz {self.fmax_hz} exceeds Nyquist {self.sample_rate_hz / 2}")
        if not (self.hop <= self.win <= self.fft_size):
            raise DspError(f"need hop <= win <= fft_size, got {self.hop}/{self.win}/{self.fft_size}")
        if self.fft_size & (self.fft_size - 1):
            raise DspError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.n_mels < 1 or self.hop < 1:
            raise DspError("n_mels and hop must be positive")

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "hop": self.hop,
            "win": self.win,
            "fmin_hz": self.fmin_hz,
            "fmax_hz": self.fmax_hz,
            "n_mels": self.n_mels,
            "fft_size": self.fft_size,
        }


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-mel matrix, frames on axis 0 and mel channels on axis 1."""

    values: np.ndarray
    params: MelParams

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


def hz_to_mel(freq_hz):
    freq_hz = np.asarray(freq_hz, dtype=np.float64)
    mels = freq_hz / _MEL_HZ_PER_MEL
    above = freq_hz >= _MEL_BREAK_HZ
    mels = np.where(above, _MEL_BREAK + np.log(np.maximum(freq_hz, _MEL_BREAK_HZ) / _MEL_BREAK_HZ) / _MEL_LOGSTEP, mels)
    return mels


def mel_to_hz(mels):
    mels = np.asarray(mels, dtype=np.float64)
    freqs = mels * _MEL_HZ_PER_MEL
    above = mels >= _MEL_BREAK
    freqs = np.where(above, _MEL_BREAK_HZ * np.exp(_MEL_LOGSTEP * (mels - _MEL_BREAK)), freqs)
    return freqs


def mel_band_edges(params: MelParams) -> np.ndarray:
    """n_mels + 2 edge frequencies, evenly spaced on the mel scale."""
    mel_edges = np.linspace(hz_to_mel(params.fmin_hz), hz_to_mel(params.fmax_hz), params.n_mels + 2)
    return mel_to_hz(mel_edges)


def mel_band_centers(params: MelParams) -> np.ndarray:
    return mel_band_edges(params)[1:-1]


def mel_filterbank(params: MelParams) -> np.ndarray:
    """Triangular filter matrix [n_mels, fft_size // 2 + 1], peak weight 1."""
    n_bins = params.fft_size // 2 + 1
    fft_freqs = np.linspace(0.0, params.sample_rate_hz / 2.0, n_bins)
    edges = mel_band_edges(params)
    weights = np.zeros((params.n_mels, n_bins))
    for band in range(params.n_mels):
        lower, center, upper = edges[band], edges[band + 1], edges[band + 2]
        rising = (fft_freqs - lower) / (center - lower)
        falling = (upper - fft_freqs) / (upper - center)
        weights[band] = np.maximum(0.0, np.minimum(rising, falling))
    return weights


def frame_count(num_samples: int, params: MelParams) -> int:
    """Frames produced for ``num_samples`` of audio (no center padding)."""
    if num_samples < params.win:
        raise DspError(f"audio too short: {num_samples} samples < window {params.win}")
    return 1 + (num_samples - params.win) // params.hop


def _hann_periodic(win: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)


def mel_spectrogram(audio, params: MelParams, sample_rate: int | None = None) -> MelSpectrogram:
    """Extract log-mel features from mono float samples in [-1, 1].

    ``sample_rate``, when given, must match ``params.sample_rate_hz``; pass
    the decoded file's rate here to catch mismatched inputs.  Deterministic:
    identical input yields bit-identical output.
    """
    if sample_rate is not None and sample_rate != params.sample_rate_hz:
        raise DspError(f"expected {params.sample_rate_hz} Hz input, got {sample_rate} Hz")
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise DspError(f"expected 1-D audio, got shape {audio.shape}")
    n_frames = frame_count(audio.shape[0], params)
    offsets = params.hop * np.arange(n_frames)[:, None] + np.arange(params.win)[None, :]
    frames = audio[offsets] * _hann_periodic(params.win)[None, :]
    spectrum = np.fft.rfft(frames, n=params.fft_size, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    mel_energy = power @ mel_filterbank(params).T
    values = np.log(np.maximum(mel_energy, POWER_FLOOR))
    return MelSpectrogram(values=values, params=params)


def speech_rate(utt) -> float:
    """Non-space scoring-normalized characters per second for an utterance.

    The rate is computable from the manifest alone, independent of any
    tokenizer; used by prompt filtering.
    """
    normalized = normalize(utt.text, NormMode.SCORING).replace(" ", "")
    if not normalized:
        raise DspError(f"no speech content in utterance {utt.id!r}")
    if utt.duration_s <= 0:
        raise DspError(f"non-positive duration for utterance {utt.id!r}")
    return len(normalized) / utt.duration_s
