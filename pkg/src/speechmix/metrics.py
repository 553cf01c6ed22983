"""Edit-distance WER/CER and sample-weighted aggregation.

Rates follow the usual convention: Levenshtein edits (unit-cost
substitution/insertion/deletion) divided by reference length, scaled x100.
Aggregation across subsets weights by sample count, not duration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .corpus import Manifest
from .textnorm import NormMode, normalize


class ScoringError(ValueError):
    """Bad scoring input (missing hypothesis, empty aggregation, ...)."""


class Unit(Enum):
    WORD = "word"
    CHAR = "char"


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Minimal number of unit-cost edits turning ``ref`` into ``hyp``."""
    if ref == hyp:
        return 0
    m, n = len(ref), len(hyp)
    if m == 0:
        return n
    if n == 0:
        return m
    previous = list(range(n + 1))
    current = [0] * (n + 1)
    for i in range(1, m + 1):
        current[0] = i
        ref_tok = ref[i - 1]
        for j in range(1, n + 1):
            cost = 0 if ref_tok == hyp[j - 1] else 1
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
        previous, current = current, previous
    return previous[n]


@dataclass(frozen=True)
class ErrorRate:
    """Edit errors against a reference, as count and x100 rate.

    ``degenerate`` marks the empty-reference/non-empty-hypothesis case,
    which is defined (rate = 100 * hypothesis length) rather than a crash so
    corpus noise cannot abort batch scoring.
    """

    unit: Unit
    errors: int
    reference_len: int
    rate_x100: float
    degenerate: bool = False


def _tokens(text: str, unit: Unit) -> list[str]:
    if unit is Unit.WORD:
        return text.split()
    return list(text)


def error_rate(ref: str, hyp: str, unit: Unit) -> ErrorRate:
    """WER/CER between two scoring-normalized strings.

    Word unit tokenizes on spaces; char unit scores the full character
    sequence including inter-word spaces.
    """
    ref_tokens = _tokens(ref, unit)
    hyp_tokens = _tokens(hyp, unit)
    errors = edit_distance(ref_tokens, hyp_tokens)
    if not ref_tokens:
        if not hyp_tokens:
            return ErrorRate(unit=unit, errors=0, reference_len=0, rate_x100=0.0)
        return ErrorRate(
            unit=unit,
            errors=errors,
            reference_len=0,
            rate_x100=100.0 * len(hyp_tokens),
            degenerate=True,
        )
    return ErrorRate(
        unit=unit,
        errors=errors,
        reference_len=len(ref_tokens),
        rate_x100=100.0 * errors / len(ref_tokens),
    )


def aggregate_weighted(groups: Iterable[tuple[float, int]]) -> float:
    """Sample-count-weighted mean of (rate_x100, sample_count) groups."""
    groups = list(groups)
    if not groups:
        raise ScoringError("nothing to aggregate")
    for rate, n in groups:
        if n <= 0:
            raise ScoringError(f"sample count must be positive, got {n}")
    total_n = sum(n for _, n in groups)
    return math.fsum(rate * n for rate, n in groups) / total_n


@dataclass(frozen=True)
class SubsetScore:
    source: str
    subset: str
    n: int
    wer: ErrorRate
    cer: ErrorRate


@dataclass(frozen=True)
class ScoreReport:
    """Per-subset WER/CER plus per-source and overall weighted means."""

    label: str
    cells: tuple[SubsetScore, ...]
    degenerate_ids: tuple[str, ...] = ()

    def sources(self) -> list[str]:
        seen: list[str] = []
        for cell in self.cells:
            if cell.source not in seen:
                seen.append(cell.source)
        return seen

    def _weighted(self, unit: Unit, source: str | None) -> float:
        picked = [c for c in self.cells if source is None or c.source == source]
        if not picked:
            raise ScoringError("nothing to aggregate")
        rate = lambda c: c.wer.rate_x100 if unit is Unit.WORD else c.cer.rate_x100
        return aggregate_weighted([(rate(c), c.n) for c in picked])

    def source_wer(self, source: str) -> float:
        return self._weighted(Unit.WORD, source)

    def source_cer(self, source: str) -> float:
        return self._weighted(Unit.CHAR, source)

    def total_wer(self) -> float:
        return self._weighted(Unit.WORD, None)

    def total_cer(self) -> float:
        return self._weighted(Unit.CHAR, None)

    def total_samples(self) -> int:
        return sum(c.n for c in self.cells)

    def to_dict(self) -> dict:
        by_source = {
            source: {
                "wer": round(self.source_wer(source), 2),
                "cer": round(self.source_cer(source), 2),
                "samples": sum(c.n for c in self.cells if c.source == source),
            }
            for source in self.sources()
        }
        return {
            "label": self.label,
            "subsets": [
                {
                    "source": c.source,
                    "subset": c.subset,
                    "samples": c.n,
                    "wer": round(c.wer.rate_x100, 2),
                    "cer": round(c.cer.rate_x100, 2),
                    "word_errors": c.wer.errors,
                    "word_count": c.wer.reference_len,
                    "char_errors": c.cer.errors,
                    "char_count": c.cer.reference_len,
                }
                for c in self.cells
            ],
            "sources": by_source,
            "total": {
                "wer": round(self.total_wer(), 2),
                "cer": round(self.total_cer(), 2),
                "samples": self.total_samples(),
            },
            "degenerate_ids": list(self.degenerate_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def score_manifest(manifest: Manifest, hypotheses: Mapping[str, str], label: str = "") -> ScoreReport:
    """Score every utterance against its hypothesis, grouped by (source, subset).

    Both sides are scoring-normalized here; rates within a group are
    corpus-level (summed errors over summed reference lengths).
    """
    acc: dict[tuple[str, str], dict[str, int]] = {}
    order: list[tuple[str, str]] = []
    degenerate: list[str] = []
    for utt in manifest:
        if utt.id not in hypotheses:
            raise ScoringError(f"missing hypothesis for id {utt.id!r}")
        ref = normalize(utt.text, NormMode.SCORING)
        hyp = normalize(hypotheses[utt.id], NormMode.SCORING)
        wer = error_rate(ref, hyp, Unit.WORD)
        cer = error_rate(ref, hyp, Unit.CHAR)
        if wer.degenerate or cer.degenerate:
            degenerate.append(utt.id)
        key = (utt.source.value, utt.subset)
        if key not in acc:
            acc[key] = {"n": 0, "we": 0, "wl": 0, "ce": 0, "cl": 0}
            order.append(key)
        cell = acc[key]
        cell["n"] += 1
        cell["we"] += wer.errors
        cell["wl"] += wer.reference_len
        cell["ce"] += cer.errors
        cell["cl"] += cer.reference_len
    cells = []
    for key in order:
        source, subset = key
        cell = acc[key]
        cells.append(
            SubsetScore(
                source=source,
                subset=subset,
                n=cell["n"],
                wer=_accumulated_rate(Unit.WORD, cell["we"], cell["wl"]),
                cer=_accumulated_rate(Unit.CHAR, cell["ce"], cell["cl"]),
            )
        )
    return ScoreReport(label=label, cells=tuple(cells), degenerate_ids=tuple(degenerate))


def _accumulated_rate(unit: Unit, errors: int, reference_len: int) -> ErrorRate:
    if reference_len == 0:
        return ErrorRate(
            unit=unit,
            errors=errors,
            reference_len=0,
            rate_x100=100.0 * errors,
            degenerate=errors > 0,
        )
    return ErrorRate(unit=unit, errors=errors, reference_len=reference_len, rate_x100=100.0 * errors / reference_len)


def report_from_dict(payload: dict) -> ScoreReport:
    """Rebuild a ScoreReport from its serialized form (lossless: the dict
    keeps raw error and reference counts)."""
    cells = tuple(
        SubsetScore(
            source=c["source"],
            subset=c["subset"],
            n=c["samples"],
            wer=_accumulated_rate(Unit.WORD, c["word_errors"], c["word_count"]),
            cer=_accumulated_rate(Unit.CHAR, c["char_errors"], c["char_count"]),
        )
        for c in payload["subsets"]
    )
    return ScoreReport(
        label=payload["label"],
        cells=cells,
        degenerate_ids=tuple(payload.get("degenerate_ids", [])),
    )


def render_score_table(reports: Sequence[ScoreReport], unit: Unit = Unit.WORD) -> str:
    """Text table with one row per report label and per-source + total columns."""
    if not reports:
        raise ScoringError("nothing to render")
    sources: list[str] = []
    for report in reports:
        for source in report.sources():
            if source not in sources:
                sources.append(source)
    headers = ["Model"] + sources + ["Total"]
    rows = []
    for report in reports:
        row = [report.label or "(unlabeled)"]
        for source in sources:
            try:
                value = report.source_wer(source) if unit is Unit.WORD else report.source_cer(source)
                row.append(f"{value:.2f}")
            except ScoringError:
                row.append("-")
        total = report.total_wer() if unit is Unit.WORD else report.total_cer()
        row.append(f"{total:.2f}")
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    def fmt(cells: list[str]) -> str:
        return "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines) + "\n"
