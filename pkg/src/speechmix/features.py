"""On-disk feature blobs and batch extraction over a manifest.

File layout: ``MELF`` magic, u32 version, u32 header length, UTF-8 JSON
header (utterance id, shape, extraction params), then the row-major
little-endian float32 matrix.  One file per utterance; the filename is the
percent-encoded utterance id, so arbitrary ids stay collision-free.
"""

from __future__ import annotations

import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from urllib.parse import quote, unquote

import numpy as np

from . import audio
from .corpus import Manifest, resolve_audio_path
from .dsp import MelParams, MelSpectrogram, mel_spectrogram

MAGIC = b"MELF"
VERSION = 1
SUFFIX = ".melf"


class FeatureError(ValueError):
    """Malformed feature file."""


def feature_path(root: str | Path, utt_id: str) -> Path:
    return Path(root) / (quote(utt_id, safe="") + SUFFIX)


def id_from_path(path: str | Path) -> str:
    return unquote(Path(path).name[: -len(SUFFIX)])


def write_features(path: str | Path, utt_id: str, spec: MelSpectrogram) -> None:
    """Serialize one spectrogram (atomic temp+rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(
        {
            "id": utt_id,
            "n_frames": spec.n_frames,
            "n_mels": spec.n_mels,
            "params": spec.params.to_dict(),
        },
        ensure_ascii=False,
        sort_keys=True,
    ).encode("utf-8")
    data = np.ascontiguousarray(spec.values, dtype="<f4").tobytes()
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        fh.write(data)
    os.replace(tmp, path)


def read_features(path: str | Path) -> tuple[str, MelSpectrogram]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FeatureError(f"{path}: bad magic {magic!r}")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise FeatureError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        n_frames, n_mels = header["n_frames"], header["n_mels"]
        data = fh.read(n_frames * n_mels * 4)
    if len(data) != n_frames * n_mels * 4:
        raise FeatureError(f"{path}: truncated data section")
    values = np.frombuffer(data, dtype="<f4").reshape(n_frames, n_mels)
    params = MelParams(**header["params"])
    return header["id"], MelSpectrogram(values=values, params=params)


def extract_utterance(manifest: Manifest, utt, params: MelParams, out_dir: Path) -> Path:
    wav_path = resolve_audio_path(manifest, utt)
    samples, rate = audio.read_wav(wav_path)
    spec = mel_spectrogram(samples, params, sample_rate=rate)
    path = feature_path(out_dir, utt.id)
    write_features(path, utt.id, spec)
    return path


def extract_manifest(manifest: Manifest, out_dir: str | Path, params: MelParams, workers: int = 1) -> list[Path]:
    """Extract features for every manifest row, one file per utterance.

    Independent per-file work; ``workers`` bounds the thread pool.  Writes
    are atomic, so parallel runs never leave partial files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers <= 1:
        return [extract_utterance(manifest, utt, params, out_dir) for utt in manifest]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(extract_utterance, manifest, utt, params, out_dir) for utt in manifest]
        return [f.result() for f in futures]
