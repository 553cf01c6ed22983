"""Transcript normalization for scoring (lowercase, strip punctuation) and
for synthesis input (lowercase only)."""

from __future__ import annotations

import re
import unicodedata
from enum import Enum

_WS_RUN = re.compile(r"\s+")

# Both are Unicode category Po already, but the scoring contract names them
# explicitly, so keep them pinned here.
_EXTRA_PUNCT = frozenset({'"', "'"})


class NormMode(Enum):
    SCORING = "scoring"
    TTS = "tts"


def is_punctuation(ch: str) -> bool:
    """True for any Unicode P* character, plus straight quotes."""
    return ch in _EXTRA_PUNCT or unicodedata.category(ch).startswith("P")


def normalize(text: str, mode: NormMode) -> str:
    """Normalize a transcript.

    Scoring mode lowercases, replaces every punctuation character with a
    space (so hyphenated words split rather than merge), collapses
    whitespace runs, and trims.  TTS mode only lowercases; punctuation and
    spacing are kept for the synthesizer.  Lowercasing is Unicode-aware and
    preserves Polish diacritics.
    """
    lowered = text.lower()
    if mode is NormMode.TTS:
        return lowered
    stripped = "".join(" " if is_punctuation(ch) else ch for ch in lowered)
    return _WS_RUN.sub(" ", stripped).strip()
