"""Shared fixtures: tiny Polish corpora with real WAV files."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from speechmix import audio
from speechmix.corpus import Manifest, Source, Split, Utterance

POLISH_SENTENCES = [
    "Ala ma kota",
    "Żółta łódź płynie wzdłuż brzegu",
    "Dziś jest piękna pogoda",
    "Cześć, jak się masz?",
    "Pójdźmy jutro do kina",
    "Świerszcz ćwierka głośno w trawie",
    "Mały książę czyta książkę",
    "Wrócę późnym wieczorem do domu",
    "Gęś zjadła świeży chleb",
    "Północny wiatr przyniósł śnieg",
]


def make_utterance(
    uid: str = "utt1",
    text: str = "Ala ma kota",
    duration_s: float = 1.0,
    source: Source = Source.BIGOS,
    subset: str = "bigos-sub",
    split: Split = Split.TRAIN,
    audio_path: str = "audio/utt1.wav",
    extras: tuple = (),
) -> Utterance:
    return Utterance(
        id=uid,
        audio_path=audio_path,
        text=text,
        duration_s=duration_s,
        source=source,
        subset=subset,
        split=split,
        extras=extras,
    )


def write_sine_wav(path: Path, duration_s: float, freq: float = 330.0, amplitude: float = 0.4) -> Path:
    n = round(duration_s * 16000)
    t = np.arange(n) / 16000.0
    audio.write_wav(path, amplitude * np.sin(2 * np.pi * freq * t), sample_rate=16000)
    return path


def write_manifest_lines(path: Path, records: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def build_corpus(
    root: Path,
    n: int,
    split: Split = Split.TRAIN,
    prefix: str = "utt",
    with_audio: bool = True,
    rate_outlier_ids: set[str] | None = None,
) -> Path:
    """Write a small manifest (and WAVs) under ``root``; returns its path.

    Utterances alternate BIGOS/PELCRA with two subsets per source.  Ids in
    ``rate_outlier_ids`` get a much shorter duration, producing an extreme
    speech rate.
    """
    rate_outlier_ids = rate_outlier_ids or set()
    records = []
    for i in range(n):
        uid = f"{prefix}{i:03d}"
        text = POLISH_SENTENCES[i % len(POLISH_SENTENCES)]
        chars = len([c for c in text.lower() if c.isalpha()])
        duration = round(chars / 3.0, 3) if uid not in rate_outlier_ids else 0.125
        n_samples = round(duration * 16000)
        duration = n_samples / 16000.0
        wav_rel = f"audio/{uid}.wav"
        if with_audio:
            write_sine_wav(root / wav_rel, duration, freq=220.0 + 10 * i)
        records.append(
            {
                "id": uid,
                "audio_path": wav_rel,
                "text": text,
                "duration_s": duration,
                "source": ("BIGOS" if i % 2 == 0 else "PELCRA"),
                "subset": f"{'bigos' if i % 2 == 0 else 'pelcra'}-{i % 4 // 2}",
                "split": split.value,
            }
        )
    return write_manifest_lines(root / f"{prefix.rstrip('-')}_{split.value}.jsonl", records)


@pytest.fixture
def small_manifest() -> Manifest:
    utts = [
        make_utterance(uid=f"u{i}", text=POLISH_SENTENCES[i], duration_s=1.0 + i, audio_path=f"audio/u{i}.wav")
        for i in range(4)
    ]
    return Manifest(name="small", utterances=tuple(utts))


def write_pipeline_config(
    path: Path,
    workspace: Path,
    train: Path,
    dev: Path,
    seed: int = 1234,
    workers: int = 2,
    synth_counts: tuple[int, int] = (4, 8),
    with_tools: bool = True,
) -> Path:
    """Full-pipeline config with mock tools; all paths absolute."""
    recognizer = [
        sys.executable, "-m", "speechmix.tools.mock_recognizer",
        "--manifest", str(train), "--manifest", str(dev),
        "--cer-target", "0.1", "--seed", "3",
    ]
    synthesizer = [
        sys.executable, "-m", "speechmix.tools.mock_synthesizer",
        "--manifest", str(train), "--seed", "5",
    ]
    cfg = {
        "workspace": str(workspace),
        "seed": seed,
        "workers": workers,
        "manifests": {"train": str(train), "dev": str(dev)},
        "tools": {"timeout_s": 120},
        "summarize": {"manifest": "train"},
        "scoring": {"manifest": "dev", "label": "mock-system"},
        "filter": {"manifest": "train", "max_cer": 0.25, "max_rate_sigma": 2.5},
        "synthesis": {
            "seed": 7,
            "batches": [
                {"name": "synth-00", "count": synth_counts[0]},
                {"name": "synth-01", "count": synth_counts[1]},
            ],
        },
        "mixes": [
            {"name": "baseline", "parts": ["train"]},
            {"name": "mix-00", "parts": ["train", "synth-00"]},
            {"name": "mix-01", "parts": ["train", "synth-00", "synth-01"]},
        ],
        "features": {"manifest": "mix-01"},
        "masking": {"n_freq_masks": 2, "max_freq_width": 27, "n_time_masks": 2, "max_time_width": 20, "seed": 9},
        "report": {"scores": ["mock-system"]},
    }
    if with_tools:
        cfg["tools"]["recognizer"] = recognizer
        cfg["tools"]["synthesizer"] = synthesizer
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


def build_pipeline_fixture(root: Path, n_train: int = 12, n_dev: int = 6, **config_kwargs) -> Path:
    """Corpus plus config under ``root``; returns the config path.

    One train utterance is a speech-rate outlier so the filter stage
    exercises the rate rejection path.
    """
    data = root / "data"
    train = build_corpus(data, n=n_train, split=Split.TRAIN, prefix="tr", rate_outlier_ids={"tr001"})
    dev = build_corpus(data, n=n_dev, split=Split.DEV0, prefix="dv")
    return write_pipeline_config(
        root / "config.yaml", workspace=root / "workspace", train=train, dev=dev, **config_kwargs
    )
