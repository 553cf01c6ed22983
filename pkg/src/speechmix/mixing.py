"""Compose training datasets from real and synthetic manifests.

Composition is plain concatenation in recipe order; shuffling is the
trainer's job.  Parts must be id-disjoint (synthetic ids carry a batch
prefix for this reason).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import Manifest


class MixError(ValueError):
    pass


@dataclass(frozen=True)
class MixPart:
    name: str
    manifest: Manifest


@dataclass(frozen=True)
class MixRecipe:
    name: str
    parts: tuple[MixPart, ...]


@dataclass(frozen=True)
class PartSummary:
    name: str
    sample_count: int
    duration_h: float


@dataclass(frozen=True)
class Composition:
    manifest: Manifest
    parts: tuple[PartSummary, ...]

    @property
    def sample_count(self) -> int:
        return sum(p.sample_count for p in self.parts)

    @property
    def duration_h(self) -> float:
        return math.fsum(p.duration_h for p in self.parts)

    def record(self) -> dict:
        """Sidecar composition record: part names, counts, durations."""
        return {
            "name": self.manifest.name,
            "parts": [
                {"name": p.name, "samples": p.sample_count, "duration_h": p.duration_h}
                for p in self.parts
            ],
            "total_samples": self.sample_count,
            "total_duration_h": self.duration_h,
        }


def compose_dataset(recipe: MixRecipe) -> Composition:
    """Concatenate recipe parts into one manifest.

    Raises on duplicate part names and on any id collision across parts,
    naming the offending id.
    """
    names = [p.name for p in recipe.parts]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise MixError(f"duplicate part name {dup!r} in recipe {recipe.name!r}")
    seen: set[str] = set()
    merged = []
    summaries = []
    for part in recipe.parts:
        for utt in part.manifest:
            if utt.id in seen:
                raise MixError(f"id collision across parts: {utt.id!r} (while adding part {part.name!r})")
            seen.add(utt.id)
        merged.extend(part.manifest.utterances)
        summaries.append(
            PartSummary(
                name=part.name,
                sample_count=len(part.manifest),
                duration_h=part.manifest.duration_s() / 3600.0,
            )
        )
    manifest = Manifest(name=recipe.name, utterances=tuple(merged))
    return Composition(manifest=manifest, parts=tuple(summaries))
