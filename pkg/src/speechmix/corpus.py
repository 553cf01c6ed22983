"""Manifest data model: ingestion, validation, and split/source statistics.

A manifest is a UTF-8 line-delimited JSON file with one utterance record per
line.  Required fields: ``id``, ``audio_path``, ``text``, ``duration_s``,
``source``, ``subset``, ``split``.  Unknown fields are preserved on a
load/save round-trip.  Relative ``audio_path`` values are resolved against
the directory of the manifest file they were loaded from.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator

MANIFEST_FIELDS = ("id", "audio_path", "text", "duration_s", "source", "subset", "split")


class ManifestError(ValueError):
    """Malformed manifest file or record."""


class Source(Enum):
    BIGOS = "BIGOS"
    PELCRA = "PELCRA"
    SYNTH = "SYNTH"


class Split(Enum):
    TRAIN = "train"
    DEV0 = "dev-0"
    TEST_A = "test-A"
    TEST_B = "test-B"


@dataclass(frozen=True, slots=True)
class Utterance:
    """One audio sample with transcript and provenance labels.

    ``extras`` holds unknown manifest fields as (key, value) pairs in their
    original order so round-trips are lossless.
    """

    id: str
    audio_path: str
    text: str
    duration_s: float
    source: Source
    subset: str
    split: Split
    extras: tuple[tuple[str, object], ...] = ()


@dataclass(frozen=True)
class Manifest:
    """Ordered, immutable collection of utterances.

    ``base_dir`` is the directory relative audio paths resolve against;
    it is set by :func:`load_manifest` and by pipeline stages that write
    manifests, and is ``None`` for purely in-memory manifests.
    """

    name: str
    utterances: tuple[Utterance, ...]
    base_dir: Path | None = None

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)

    def ids(self) -> list[str]:
        return [u.id for u in self.utterances]

    def duration_s(self) -> float:
        return math.fsum(u.duration_s for u in self.utterances)


def _parse_record(record: dict, lineno: int) -> Utterance:
    for name in MANIFEST_FIELDS:
        if name not in record:
            raise ManifestError(f"line {lineno}: missing required field {name!r}")
    if not isinstance(record["id"], str) or not record["id"]:
        raise ManifestError(f"line {lineno}: field 'id' must be a non-empty string")
    text = record["text"]
    if not isinstance(text, str) or not text.strip():
        raise ManifestError(f"line {lineno}: field 'text' must be non-empty")
    duration = record["duration_s"]
    if not isinstance(duration, (int, float)) or isinstance(duration, bool) or duration <= 0:
        raise ManifestError(f"line {lineno}: field 'duration_s' must be a positive number")
    try:
        source = Source(record["source"])
    except ValueError:
        raise ManifestError(f"line {lineno}: field 'source' has unknown value {record['source']!r}") from None
    try:
        split = Split(record["split"])
    except ValueError:
        raise ManifestError(f"line {lineno}: field 'split' has unknown value {record['split']!r}") from None
    extras = tuple((k, v) for k, v in record.items() if k not in MANIFEST_FIELDS)
    return Utterance(
        id=record["id"],
        audio_path=str(record["audio_path"]),
        text=text,
        duration_s=float(duration),
        source=source,
        subset=str(record["subset"]),
        split=split,
        extras=extras,
    )


def utterance_to_record(utt: Utterance) -> dict:
    record = {
        "id": utt.id,
        "audio_path": utt.audio_path,
        "text": utt.text,
        "duration_s": utt.duration_s,
        "source": utt.source.value,
        "subset": utt.subset,
        "split": utt.split.value,
    }
    for key, value in utt.extras:
        record[key] = value
    return record


def load_manifest(path: str | Path, name: str | None = None) -> Manifest:
    """Parse a manifest file, preserving record order.

    Raises :class:`ManifestError` naming the offending line for malformed
    JSON, missing/invalid fields, and duplicate ids.
    """
    path = Path(path)
    utterances: list[Utterance] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: line {lineno}: malformed record: {exc.msg}") from None
            if not isinstance(record, dict):
                raise ManifestError(f"{path}: line {lineno}: record must be a JSON object")
            try:
                utt = _parse_record(record, lineno)
            except ManifestError as exc:
                raise ManifestError(f"{path}: {exc}") from None
            if utt.id in seen:
                raise ManifestError(
                    f"{path}: line {lineno}: duplicate id {utt.id!r} (first seen on line {seen[utt.id]})"
                )
            seen[utt.id] = lineno
            utterances.append(utt)
    return Manifest(
        name=name if name is not None else path.stem,
        utterances=tuple(utterances),
        base_dir=path.parent,
    )


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write the canonical line-delimited form (atomic temp+rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for utt in manifest.utterances:
            fh.write(json.dumps(utterance_to_record(utt), ensure_ascii=False))
            fh.write("\n")
    os.replace(tmp, path)


def resolve_audio_path(manifest: Manifest, utt: Utterance) -> Path:
    """Absolute path of an utterance's audio file."""
    p = Path(utt.audio_path)
    if p.is_absolute() or manifest.base_dir is None:
        return p
    return manifest.base_dir / p


def rebase_manifest(manifest: Manifest, new_base: Path) -> Manifest:
    """Rewrite relative audio paths so they resolve from ``new_base``.

    Absolute paths are left untouched.  Used when a manifest is saved to a
    different directory than it was loaded from.
    """
    rewritten = []
    for utt in manifest.utterances:
        p = Path(utt.audio_path)
        if p.is_absolute() or manifest.base_dir is None:
            rewritten.append(utt)
            continue
        rel = os.path.relpath(manifest.base_dir / p, new_base)
        rewritten.append(
            Utterance(
                id=utt.id,
                audio_path=rel,
                text=utt.text,
                duration_s=utt.duration_s,
                source=utt.source,
                subset=utt.subset,
                split=utt.split,
                extras=utt.extras,
            )
        )
    return Manifest(name=manifest.name, utterances=tuple(rewritten), base_dir=new_base)


@dataclass(frozen=True)
class SummaryCell:
    sample_count: int = 0
    duration_s: float = 0.0

    @property
    def duration_h(self) -> float:
        return self.duration_s / 3600.0


@dataclass(frozen=True)
class SplitSummary:
    """Sample counts and duration sums grouped by (split, source).

    Totals are marginal sums over the stored cells.
    """

    cells: dict[tuple[Split, Source], SummaryCell] = field(default_factory=dict)

    def cell(self, split: Split, source: Source) -> SummaryCell:
        return self.cells.get((split, source), SummaryCell())

    def split_total(self, split: Split) -> SummaryCell:
        return self._total(lambda key: key[0] is split)

    def source_total(self, source: Source) -> SummaryCell:
        return self._total(lambda key: key[1] is source)

    def grand_total(self) -> SummaryCell:
        return self._total(lambda key: True)

    def _total(self, keep) -> SummaryCell:
        picked = [cell for key, cell in self.cells.items() if keep(key)]
        return SummaryCell(
            sample_count=sum(c.sample_count for c in picked),
            duration_s=math.fsum(c.duration_s for c in picked),
        )

    def sources(self) -> list[Source]:
        present = {key[1] for key in self.cells}
        return [s for s in Source if s in present]

    def to_dict(self) -> dict:
        sources = self.sources()
        rows = {}
        for split in Split:
            row = {}
            for source in sources:
                c = self.cell(split, source)
                row[source.value] = {"samples": c.sample_count, "duration_h": c.duration_h}
            total = self.split_total(split)
            row["Total"] = {"samples": total.sample_count, "duration_h": total.duration_h}
            rows[split.value] = row
        grand = self.grand_total()
        return {
            "splits": rows,
            "total": {"samples": grand.sample_count, "duration_h": grand.duration_h},
        }

    def render_text(self) -> str:
        sources = self.sources()
        headers = ["Split"] + [s.value for s in sources] + ["Total"]
        count_rows, hour_rows = [], []
        for split in Split:
            counts = [str(self.cell(split, s).sample_count) for s in sources]
            hours = [f"{self.cell(split, s).duration_h:.2f}" for s in sources]
            total = self.split_total(split)
            count_rows.append([split.value] + counts + [str(total.sample_count)])
            hour_rows.append([split.value] + hours + [f"{total.duration_h:.2f}"])
        lines = ["Number of samples", _format_table(headers, count_rows), "", "Duration [h]", _format_table(headers, hour_rows)]
        return "\n".join(lines) + "\n"


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    def fmt(cells: list[str]) -> str:
        return "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))
    out = [fmt(headers), fmt(["-" * w for w in widths])]
    out.extend(fmt(r) for r in rows)
    return "\n".join(out)


def summarize(manifest: Manifest) -> SplitSummary:
    """Group sample counts and duration sums by (split, source)."""
    counts: dict[tuple[Split, Source], int] = {}
    durations: dict[tuple[Split, Source], list[float]] = {}
    for utt in manifest.utterances:
        key = (utt.split, utt.source)
        counts[key] = counts.get(key, 0) + 1
        durations.setdefault(key, []).append(utt.duration_s)
    cells = {
        key: SummaryCell(sample_count=counts[key], duration_s=math.fsum(durations[key]))
        for key in counts
    }
    return SplitSummary(cells=cells)


@dataclass(frozen=True)
class DurationMismatch:
    id: str
    stored_s: float
    decoded_s: float


def verify_durations(manifest: Manifest, tol_s: float = 0.001) -> list[DurationMismatch]:
    """Compare stored durations against decoded audio headers.

    Optional pass; scanning audio on every load would be wasteful, so this
    is only invoked on demand.
    """
    from . import audio

    mismatches = []
    for utt in manifest.utterances:
        decoded = audio.wav_duration_s(resolve_audio_path(manifest, utt))
        if abs(decoded - utt.duration_s) > tol_s:
            mismatches.append(DurationMismatch(utt.id, utt.duration_s, decoded))
    return mismatches
