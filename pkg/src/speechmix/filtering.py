"""Synthesis prompt selection by recognizer CER and speech-rate deviation.

An utterance is kept when its hypothesis CER stays at or below the policy
threshold and its speech rate lies within ``max_rate_sigma`` standard
deviations of the corpus mean (two-sided).  Rate statistics are computed
over the full input, before any filtering.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Mapping

from .corpus import Manifest
from .dsp import speech_rate
from .metrics import Unit, error_rate
from .seeding import derive_rng
from .textnorm import NormMode, normalize


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class RateStats:
    """Mean and population standard deviation of speech rates."""

    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class FilterPolicy:
    max_cer: float = 0.25
    max_rate_sigma: float = 2.5

    def __post_init__(self) -> None:
        if self.max_cer < 0:
            raise FilterError(f"max_cer must be non-negative, got {self.max_cer}")
        if self.max_rate_sigma < 0:
            raise FilterError(f"max_rate_sigma must be non-negative, got {self.max_rate_sigma}")


@dataclass(frozen=True)
class SelectionReport:
    input: int
    kept: int
    rejected_cer: int
    rejected_rate: int
    stats: RateStats
    policy: FilterPolicy

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "kept": self.kept,
            "rejected_cer": self.rejected_cer,
            "rejected_rate": self.rejected_rate,
            "rate_stats": {"mean": self.stats.mean, "std": self.stats.std, "n": self.stats.n},
            "policy": {"max_cer": self.policy.max_cer, "max_rate_sigma": self.policy.max_rate_sigma},
            "stats_computed": "pre-filter, full input manifest",
        }


@dataclass(frozen=True)
class Selection:
    manifest: Manifest
    report: SelectionReport
    reasons: Mapping[str, str]  # rejected id -> "cer" | "rate"


def compute_rate_stats(manifest: Manifest) -> RateStats:
    """Population mean/std of speech rate over all utterances."""
    if len(manifest) == 0:
        raise FilterError("cannot compute rate statistics of an empty manifest")
    rates = [speech_rate(u) for u in manifest]
    return RateStats(mean=statistics.fmean(rates), std=statistics.pstdev(rates), n=len(rates))


def hypothesis_cer(ref_text: str, hyp_text: str) -> float:
    """Character error rate as a fraction, both sides scoring-normalized."""
    ref = normalize(ref_text, NormMode.SCORING)
    hyp = normalize(hyp_text, NormMode.SCORING)
    rate = error_rate(ref, hyp, Unit.CHAR)
    if rate.reference_len == 0:
        return 0.0 if rate.errors == 0 else 1.0
    return rate.errors / rate.reference_len


def select_prompts(
    manifest: Manifest,
    hypotheses: Mapping[str, str],
    stats: RateStats,
    policy: FilterPolicy,
) -> Selection:
    """Filter prompts, preserving order; CER failures are counted first.

    CER is rounded to 6 decimals before the comparison so values landing
    exactly on the threshold don't flap on float noise; the rate band gets
    an epsilon for the same reason (the sigma=0 band must accept rates
    that equal the mean).
    """
    kept = []
    reasons: dict[str, str] = {}
    rejected_cer = rejected_rate = 0
    band = policy.max_rate_sigma * stats.std
    eps = 1e-9 * max(1.0, abs(stats.mean))
    for utt in manifest:
        if utt.id not in hypotheses:
            raise FilterError(f"missing hypothesis for id {utt.id!r}")
        cer = round(hypothesis_cer(utt.text, hypotheses[utt.id]), 6)
        if cer > policy.max_cer:
            rejected_cer += 1
            reasons[utt.id] = "cer"
            continue
        rate_ok = math.isinf(policy.max_rate_sigma) or abs(speech_rate(utt) - stats.mean) <= band + eps
        if not rate_ok:
            rejected_rate += 1
            reasons[utt.id] = "rate"
            continue
        kept.append(utt)
    report = SelectionReport(
        input=len(manifest),
        kept=len(kept),
        rejected_cer=rejected_cer,
        rejected_rate=rejected_rate,
        stats=stats,
        policy=policy,
    )
    selected = Manifest(name=manifest.name + "-selected", utterances=tuple(kept), base_dir=manifest.base_dir)
    return Selection(manifest=selected, report=report, reasons=reasons)


def sample_prompts(manifest: Manifest, k: int, seed: int, label: str = "prompts") -> list:
    """Seeded shuffle of the manifest, cycled when more samples are needed
    than the manifest holds."""
    if len(manifest) == 0:
        raise FilterError("cannot sample from an empty manifest")
    if k < 0:
        raise FilterError(f"sample count must be non-negative, got {k}")
    rng = derive_rng(seed, "sample", label)
    order = list(manifest.utterances)
    picked = []
    while len(picked) < k:
        perm = rng.permutation(len(order))
        for idx in perm:
            picked.append(order[idx])
            if len(picked) == k:
                break
    return picked
