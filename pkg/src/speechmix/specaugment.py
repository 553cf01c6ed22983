"""Time and frequency masking for precomputed log-mel spectrograms.

Time warping is deliberately not implemented.  Mask positions derive from
(policy seed, utterance id), so results are reproducible regardless of
worker scheduling.  Default widths/counts are a common recipe, not a
normative choice.
"""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import features
from .dsp import MelSpectrogram
from .seeding import derive_rng


class FillMode(Enum):
    ZERO = "zero"
    MEAN = "per-utterance-mean"


@dataclass(frozen=True)
class MaskPolicy:
    n_freq_masks: int = 2
    max_freq_width: int = 27
    n_time_masks: int = 2
    max_time_width: int = 100
    fill: FillMode = FillMode.ZERO
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "n_freq_masks": self.n_freq_masks,
            "max_freq_width": self.max_freq_width,
            "n_time_masks": self.n_time_masks,
            "max_time_width": self.max_time_width,
            "fill": self.fill.value,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Mask:
    axis: str  # "freq" masks mel bands, "time" masks frames
    start: int
    width: int


def draw_masks(policy: MaskPolicy, n_frames: int, n_mels: int, utt_id: str) -> list[Mask]:
    """Sample mask rectangles for one utterance.

    Widths are uniform on {0..max}, starts uniform over the valid range.
    Maximum widths larger than the axis are clamped with a warning.  Freq
    masks are drawn before time masks; tests re-derive coordinates from the
    same (seed, id) stream.
    """
    rng = derive_rng(policy.seed, "specaugment", utt_id)
    max_f = policy.max_freq_width
    if max_f > n_mels:
        warnings.warn(f"max_freq_width {max_f} > {n_mels} mel bands; clamping", RuntimeWarning, stacklevel=2)
        max_f = n_mels
    max_t = policy.max_time_width
    if max_t > n_frames:
        warnings.warn(f"max_time_width {max_t} > {n_frames} frames; clamping", RuntimeWarning, stacklevel=2)
        max_t = n_frames
    masks = []
    for _ in range(policy.n_freq_masks):
        width = int(rng.integers(0, max_f + 1))
        start = int(rng.integers(0, n_mels - width + 1))
        masks.append(Mask("freq", start, width))
    for _ in range(policy.n_time_masks):
        width = int(rng.integers(0, max_t + 1))
        start = int(rng.integers(0, n_frames - width + 1))
        masks.append(Mask("time", start, width))
    return masks


def apply_masks(spec: MelSpectrogram, policy: MaskPolicy, utt_id: str) -> MelSpectrogram:
    """Masked copy of a spectrogram; positions outside masks are untouched.

    The per-utterance-mean fill uses the mean of the unmasked input.
    """
    if spec.values.size == 0:
        raise ValueError("empty spectrogram")
    values = np.array(spec.values, copy=True)
    fill = 0.0 if policy.fill is FillMode.ZERO else float(spec.values.mean())
    for mask in draw_masks(policy, spec.n_frames, spec.n_mels, utt_id):
        if mask.axis == "freq":
            values[:, mask.start : mask.start + mask.width] = fill
        else:
            values[mask.start : mask.start + mask.width, :] = fill
    return MelSpectrogram(values=values, params=spec.params)


def mask_directory(in_dir: str | Path, out_dir: str | Path, policy: MaskPolicy, workers: int = 1) -> list[Path]:
    """Mask every feature file in ``in_dir`` into ``out_dir``.

    The policy is serialized alongside the output for provenance.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*" + features.SUFFIX))

    def mask_one(path: Path) -> Path:
        utt_id, spec = features.read_features(path)
        masked = apply_masks(spec, policy, utt_id)
        out_path = out_dir / path.name
        features.write_features(out_path, utt_id, masked)
        return out_path

    if workers <= 1:
        written = [mask_one(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            written = list(pool.map(mask_one, paths))

    policy_path = out_dir / "mask_policy.json"
    tmp = policy_path.with_name(policy_path.name + ".tmp")
    tmp.write_text(json.dumps(policy.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, policy_path)
    return written
