"""Pipeline orchestration: configuration, stages, provenance, and skipping.

Stages run in dependency order: summarize, score, filter-prompts,
synthesize, compose, extract-features, mask, report.  Each stage writes its
artifacts plus a provenance record (input digests, config slice, seed,
version); re-runs skip a stage when that fingerprint is unchanged, so an
unchanged pipeline performs no writes.  A lock file prevents concurrent
runs on one workspace.

Configuration is a single YAML file; relative paths resolve against the
config file's directory.  Tool commands are argv lists used verbatim.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

import yaml

from . import __version__, exttools, features, metrics, mixing, specaugment
from .corpus import (
    Manifest,
    Source,
    Split,
    Utterance,
    load_manifest,
    rebase_manifest,
    resolve_audio_path,
    save_manifest,
    summarize,
)
from .dsp import MelParams
from .filtering import FilterPolicy, compute_rate_stats, sample_prompts, select_prompts
from .specaugment import FillMode, MaskPolicy
from .textnorm import NormMode, normalize

log = logging.getLogger("speechmix.pipeline")


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


class PipelineError(RuntimeError):
    """Unmet dependency or workspace-level failure detected before work."""


class StageError(RuntimeError):
    """A stage failed while running; earlier artifacts are retained."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SynthBatch:
    name: str
    count: int


@dataclass(frozen=True)
class MixSpec:
    name: str
    parts: tuple[str, ...]


@dataclass(frozen=True)
class PipelineConfig:
    workspace: Path
    seed: int
    workers: int
    manifests: dict[str, Path]
    recognizer: tuple[str, ...] | None
    synthesizer: tuple[str, ...] | None
    tool_timeout_s: float
    summarize_manifest: str
    scoring_manifest: str
    scoring_hypotheses: Path | None
    scoring_label: str
    filter_manifest: str
    filter_hypotheses: Path | None
    filter_policy: FilterPolicy
    synthesis_seed: int
    synthesis_batches: tuple[SynthBatch, ...]
    mixes: tuple[MixSpec, ...]
    mel: MelParams
    mask_policy: MaskPolicy
    features_manifest: str
    report_scores: tuple[str, ...]


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path: str | Path, seed: int | None = None, workers: int | None = None) -> PipelineConfig:
    """Parse and validate a pipeline config file.

    ``seed``/``workers`` are CLI overrides for the global values; section
    seeds left unset in the file follow the global seed.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    base = path.parent
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    global_seed = int(seed if seed is not None else raw.get("seed", 0))
    global_workers = int(workers if workers is not None else raw.get("workers", 1))
    if global_workers < 1:
        raise ConfigError(f"workers must be >= 1, got {global_workers}")

    manifests_raw = raw.get("manifests", {})
    if not isinstance(manifests_raw, dict):
        raise ConfigError("manifests section must map names to paths")
    manifests = {str(name): _resolve(base, str(p)) for name, p in manifests_raw.items()}
    for name, p in manifests.items():
        if not p.exists():
            raise ConfigError(f"manifest {name!r} not found: {p}")

    tools = raw.get("tools", {}) or {}
    recognizer = tuple(str(a) for a in tools["recognizer"]) if tools.get("recognizer") else None
    synthesizer = tuple(str(a) for a in tools["synthesizer"]) if tools.get("synthesizer") else None
    timeout_s = float(tools.get("timeout_s", 300.0))

    scoring = raw.get("scoring", {}) or {}
    scoring_hyp = scoring.get("hypotheses")
    scoring_hyp_path = _resolve(base, str(scoring_hyp)) if scoring_hyp else None
    if scoring_hyp_path is not None and not scoring_hyp_path.exists():
        raise ConfigError(f"scoring hypotheses file not found: {scoring_hyp_path}")

    filt = raw.get("filter", {}) or {}
    filter_hyp = filt.get("hypotheses")
    filter_hyp_path = _resolve(base, str(filter_hyp)) if filter_hyp else None
    if filter_hyp_path is not None and not filter_hyp_path.exists():
        raise ConfigError(f"filter hypotheses file not found: {filter_hyp_path}")
    try:
        filter_policy = FilterPolicy(
            max_cer=float(filt.get("max_cer", 0.25)),
            max_rate_sigma=float(filt.get("max_rate_sigma", 2.5)),
        )
    except ValueError as exc:
        raise ConfigError(f"filter section: {exc}") from None

    synthesis = raw.get("synthesis", {}) or {}
    batches = []
    for item in synthesis.get("batches", []) or []:
        if not isinstance(item, dict) or "name" not in item or "count" not in item:
            raise ConfigError(f"synthesis batch entries need name and count, got {item!r}")
        batches.append(SynthBatch(name=str(item["name"]), count=int(item["count"])))
    if len({b.name for b in batches}) != len(batches):
        raise ConfigError("synthesis batch names must be unique")

    mixes = []
    for item in raw.get("mixes", []) or []:
        if not isinstance(item, dict) or "name" not in item or "parts" not in item:
            raise ConfigError(f"mix entries need name and parts, got {item!r}")
        mixes.append(MixSpec(name=str(item["name"]), parts=tuple(str(p) for p in item["parts"])))
    if len({m.name for m in mixes}) != len(mixes):
        raise ConfigError("mix names must be unique")

    mel_raw = raw.get("mel", {}) or {}
    try:
        mel = MelParams(**{k: mel_raw[k] for k in mel_raw})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"mel section: {exc}") from None

    masking = raw.get("masking", {}) or {}
    try:
        fill = FillMode(masking.get("fill", "zero"))
    except ValueError:
        raise ConfigError(f"masking fill must be one of {[m.value for m in FillMode]}") from None
    mask_policy = MaskPolicy(
        n_freq_masks=int(masking.get("n_freq_masks", 2)),
        max_freq_width=int(masking.get("max_freq_width", 27)),
        n_time_masks=int(masking.get("n_time_masks", 2)),
        max_time_width=int(masking.get("max_time_width", 100)),
        fill=fill,
        seed=int(masking.get("seed", global_seed)),
    )

    report = raw.get("report", {}) or {}
    scoring_label = str(scoring.get("label", "system"))
    report_scores = tuple(str(s) for s in report.get("scores", [scoring_label]))

    return PipelineConfig(
        workspace=_resolve(base, str(raw.get("workspace", "workspace"))),
        seed=global_seed,
        workers=global_workers,
        manifests=manifests,
        recognizer=recognizer,
        synthesizer=synthesizer,
        tool_timeout_s=timeout_s,
        summarize_manifest=str((raw.get("summarize", {}) or {}).get("manifest", "train")),
        scoring_manifest=str(scoring.get("manifest", "dev")),
        scoring_hypotheses=scoring_hyp_path,
        scoring_label=scoring_label,
        filter_manifest=str(filt.get("manifest", "train")),
        filter_hypotheses=filter_hyp_path,
        filter_policy=filter_policy,
        synthesis_seed=int(synthesis.get("seed", global_seed)),
        synthesis_batches=tuple(batches),
        mixes=tuple(mixes),
        mel=mel,
        mask_policy=mask_policy,
        features_manifest=str((raw.get("features", {}) or {}).get("manifest", "train")),
        report_scores=report_scores,
    )


# ---------------------------------------------------------------------------
# workspace layout


class Workspace:
    def __init__(self, root: Path):
        self.root = Path(root)

    @property
    def summary_json(self) -> Path:
        return self.root / "summary.json"

    @property
    def summary_txt(self) -> Path:
        return self.root / "summary.txt"

    def hypotheses(self, name: str) -> Path:
        return self.root / "hypotheses" / f"{name}.jsonl"

    @property
    def prompts_manifest(self) -> Path:
        return self.root / "prompts" / "selected.jsonl"

    @property
    def selection_report(self) -> Path:
        return self.root / "prompts" / "selection_report.json"

    @property
    def synth_dir(self) -> Path:
        return self.root / "synth"

    def synth_manifest(self, batch: str) -> Path:
        return self.synth_dir / f"{batch}.jsonl"

    def synth_wav_dir(self, batch: str) -> Path:
        return self.synth_dir / "wavs" / batch

    @property
    def mixes_dir(self) -> Path:
        return self.root / "mixes"

    def mix_manifest(self, name: str) -> Path:
        return self.mixes_dir / f"{name}.jsonl"

    def mix_record(self, name: str) -> Path:
        return self.mixes_dir / f"{name}.composition.json"

    @property
    def features_dir(self) -> Path:
        return self.root / "features"

    @property
    def masked_dir(self) -> Path:
        return self.root / "features_masked"

    def score_json(self, label: str) -> Path:
        return self.root / "scores" / f"{label}.json"

    def score_txt(self, label: str) -> Path:
        return self.root / "scores" / f"{label}.txt"

    @property
    def report_json(self) -> Path:
        return self.root / "report.json"

    @property
    def report_txt(self) -> Path:
        return self.root / "report.txt"

    def provenance(self, stage: str) -> Path:
        return self.root / "provenance" / f"{stage}.json"

    @property
    def lock_path(self) -> Path:
        return self.root / ".pipeline.lock"


@dataclass
class PipelineContext:
    cfg: PipelineConfig
    ws: Workspace


# ---------------------------------------------------------------------------
# small file helpers


def _write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json_atomic(path: Path, payload) -> None:
    _write_text_atomic(path, json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _tree_digest(path: Path) -> str:
    h = hashlib.sha256()
    for sub in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(sub.relative_to(path).as_posix().encode("utf-8"))
        h.update(_file_digest(sub).encode("ascii"))
    return h.hexdigest()


def _digest_inputs(paths: Iterable[Path]) -> dict[str, str]:
    digests = {}
    for p in paths:
        if p.is_dir():
            digests[str(p)] = _tree_digest(p)
        elif p.exists():
            digests[str(p)] = _file_digest(p)
        else:
            digests[str(p)] = "missing"
    return digests


@contextmanager
def workspace_lock(ws: Workspace):
    ws.root.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(ws.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise PipelineError(
            f"workspace {ws.root} is locked by another run; remove {ws.lock_path} if stale"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode("ascii"))
        os.close(fd)
        yield
    finally:
        try:
            ws.lock_path.unlink()
        except FileNotFoundError:
            pass


# ---------------------------------------------------------------------------
# manifest references


def manifest_ref_path(ctx: PipelineContext, ref: str) -> Path:
    """Map a manifest reference (config name, artifact name, or path) to a file."""
    cfg, ws = ctx.cfg, ctx.ws
    if ref in cfg.manifests:
        return cfg.manifests[ref]
    if any(b.name == ref for b in cfg.synthesis_batches):
        return ws.synth_manifest(ref)
    if any(m.name == ref for m in cfg.mixes):
        return ws.mix_manifest(ref)
    if ref == "prompts":
        return ws.prompts_manifest
    return Path(ref)


def _ref_available(ctx: PipelineContext, ref: str, produced: set[str]) -> bool:
    return ref in produced or manifest_ref_path(ctx, ref).exists()


def _load_ref(ctx: PipelineContext, ref: str) -> Manifest:
    path = manifest_ref_path(ctx, ref)
    if not path.exists():
        raise PipelineError(f"manifest reference {ref!r} resolves to missing file {path}")
    return load_manifest(path, name=ref)


# ---------------------------------------------------------------------------
# hypotheses (shared by score and filter-prompts)


def _load_hypotheses(path: Path) -> dict[str, str]:
    hyps = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "id" not in record or "hypothesis" not in record:
                raise PipelineError(f"{path}: line {lineno}: hypothesis records need id and hypothesis")
            hyps[record["id"]] = record["hypothesis"]
    return hyps


def _obtain_hypotheses(
    ctx: PipelineContext, manifest: Manifest, explicit: Path | None, cache_name: str
) -> dict[str, str]:
    """Hypotheses from an explicit file, or by running the recognizer tool
    (cached as a workspace artifact)."""
    if explicit is not None:
        return _load_hypotheses(explicit)
    if ctx.cfg.recognizer is None:
        raise PipelineError("no hypotheses file configured and no recognizer tool available")
    requests = [
        {"id": u.id, "audio_path": str(resolve_audio_path(manifest, u))} for u in manifest
    ]
    responses = exttools.run_tool_sharded(
        ctx.cfg.recognizer, requests, workers=ctx.cfg.workers, timeout_s=ctx.cfg.tool_timeout_s
    )
    cache = ctx.ws.hypotheses(cache_name)
    _write_text_atomic(cache, "".join(exttools.encode_record(r) + "\n" for r in responses))
    return {r["id"]: r["hypothesis"] for r in responses}


# ---------------------------------------------------------------------------
# stage implementations


def _stage_summarize(ctx: PipelineContext) -> None:
    manifest = _load_ref(ctx, ctx.cfg.summarize_manifest)
    summary = summarize(manifest)
    _write_json_atomic(ctx.ws.summary_json, summary.to_dict())
    _write_text_atomic(ctx.ws.summary_txt, summary.render_text())


def _stage_score(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    manifest = _load_ref(ctx, cfg.scoring_manifest)
    hyps = _obtain_hypotheses(ctx, manifest, cfg.scoring_hypotheses, cfg.scoring_manifest)
    report = metrics.score_manifest(manifest, hyps, label=cfg.scoring_label)
    _write_text_atomic(ws.score_json(cfg.scoring_label), report.to_json())
    text = (
        "WER\n" + metrics.render_score_table([report], metrics.Unit.WORD)
        + "\nCER\n" + metrics.render_score_table([report], metrics.Unit.CHAR)
    )
    _write_text_atomic(ws.score_txt(cfg.scoring_label), text)


def _stage_filter_prompts(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    manifest = _load_ref(ctx, cfg.filter_manifest)
    hyps = _obtain_hypotheses(ctx, manifest, cfg.filter_hypotheses, cfg.filter_manifest)
    stats = compute_rate_stats(manifest)
    selection = select_prompts(manifest, hyps, stats, cfg.filter_policy)
    rebased = rebase_manifest(selection.manifest, ws.prompts_manifest.parent)
    save_manifest(rebased, ws.prompts_manifest)
    _write_json_atomic(ws.selection_report, selection.report.to_dict())


def _stage_synthesize(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    prompts = load_manifest(ws.prompts_manifest, name="prompts")
    if len(prompts) == 0:
        raise PipelineError("prompt selection is empty; nothing to synthesize")
    for batch in cfg.synthesis_batches:
        texts = sample_prompts(prompts, batch.count, cfg.synthesis_seed, label=f"{batch.name}/texts")
        voices = sample_prompts(prompts, batch.count, cfg.synthesis_seed, label=f"{batch.name}/voices")
        requests = []
        for i, (text_utt, voice_utt) in enumerate(zip(texts, voices)):
            requests.append(
                {
                    "id": f"{batch.name}/{i:06d}",
                    "text": normalize(text_utt.text, NormMode.TTS),
                    "prompt_audio_path": str(resolve_audio_path(prompts, voice_utt)),
                }
            )
        wav_dir = ws.synth_wav_dir(batch.name)
        wav_dir.mkdir(parents=True, exist_ok=True)
        command = tuple(cfg.synthesizer) + ("--out-dir", str(wav_dir))
        responses = exttools.run_tool_sharded(
            command, requests, workers=cfg.workers, timeout_s=cfg.tool_timeout_s
        )
        utterances = []
        for req, resp in zip(requests, responses):
            audio_path = Path(resp["audio_path"])
            rel = os.path.relpath(audio_path, ws.synth_dir)
            utterances.append(
                Utterance(
                    id=req["id"],
                    audio_path=rel,
                    text=req["text"],
                    duration_s=float(resp["duration_s"]),
                    source=Source.SYNTH,
                    subset=batch.name,
                    split=Split.TRAIN,
                )
            )
        manifest = Manifest(name=batch.name, utterances=tuple(utterances), base_dir=ws.synth_dir)
        save_manifest(manifest, ws.synth_manifest(batch.name))


def _stage_compose(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    for mix in cfg.mixes:
        parts = []
        for ref in mix.parts:
            part = _load_ref(ctx, ref)
            parts.append(mixing.MixPart(name=ref, manifest=rebase_manifest(part, ws.mixes_dir)))
        composition = mixing.compose_dataset(mixing.MixRecipe(name=mix.name, parts=tuple(parts)))
        manifest = Manifest(
            name=mix.name, utterances=composition.manifest.utterances, base_dir=ws.mixes_dir
        )
        save_manifest(manifest, ws.mix_manifest(mix.name))
        _write_json_atomic(ws.mix_record(mix.name), composition.record())


def _stage_extract_features(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    manifest = _load_ref(ctx, cfg.features_manifest)
    features.extract_manifest(manifest, ws.features_dir, cfg.mel, workers=cfg.workers)


def _stage_mask(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    if not ws.features_dir.exists():
        raise PipelineError(f"features directory missing: {ws.features_dir}")
    specaugment.mask_directory(ws.features_dir, ws.masked_dir, cfg.mask_policy, workers=cfg.workers)


def _stage_report(ctx: PipelineContext) -> None:
    cfg, ws = ctx.cfg, ctx.ws
    reports = []
    for label in cfg.report_scores:
        path = ws.score_json(label)
        if not path.exists():
            raise PipelineError(f"score artifact for label {label!r} missing: {path}")
        reports.append(metrics.report_from_dict(json.loads(path.read_text(encoding="utf-8"))))
    _write_json_atomic(ws.report_json, {"reports": [r.to_dict() for r in reports]})
    text = (
        "WER\n" + metrics.render_score_table(reports, metrics.Unit.WORD)
        + "\nCER\n" + metrics.render_score_table(reports, metrics.Unit.CHAR)
    )
    _write_text_atomic(ws.report_txt, text)


# ---------------------------------------------------------------------------
# stage registry


@dataclass(frozen=True)
class Stage:
    name: str
    run: Callable[[PipelineContext], None]
    config_slice: Callable[[PipelineConfig], dict]
    inputs: Callable[[PipelineContext], list[Path]]
    outputs: Callable[[PipelineContext], list[Path]]
    provides: Callable[[PipelineContext], set[str]]
    missing_deps: Callable[[PipelineContext, set[str]], list[str]]


def _mask_policy_slice(cfg: PipelineConfig) -> dict:
    return cfg.mask_policy.to_dict()


def _score_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    cfg = ctx.cfg
    missing = []
    if not _ref_available(ctx, cfg.scoring_manifest, produced):
        missing.append(f"scoring manifest {cfg.scoring_manifest!r}")
    if cfg.scoring_hypotheses is None and cfg.recognizer is None:
        missing.append("hypotheses file or recognizer tool")
    return missing


def _filter_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    cfg = ctx.cfg
    missing = []
    if not _ref_available(ctx, cfg.filter_manifest, produced):
        missing.append(f"filter manifest {cfg.filter_manifest!r}")
    if cfg.filter_hypotheses is None and cfg.recognizer is None:
        missing.append("hypotheses file or recognizer tool")
    return missing


def _synthesize_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    missing = []
    if ctx.cfg.synthesizer is None:
        missing.append("synthesizer tool")
    if not ("prompts" in produced or ctx.ws.prompts_manifest.exists()):
        missing.append("prompt selection (run filter-prompts first)")
    return missing


def _compose_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    missing = []
    for mix in ctx.cfg.mixes:
        for ref in mix.parts:
            if not _ref_available(ctx, ref, produced):
                missing.append(f"mix {mix.name!r} part {ref!r}")
    return missing


def _features_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    if not _ref_available(ctx, ctx.cfg.features_manifest, produced):
        return [f"features manifest {ctx.cfg.features_manifest!r}"]
    return []


def _mask_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    if not ("features" in produced or ctx.ws.features_dir.exists()):
        return ["features directory (run extract-features first)"]
    return []


def _report_deps(ctx: PipelineContext, produced: set[str]) -> list[str]:
    missing = []
    for label in ctx.cfg.report_scores:
        if not (f"score:{label}" in produced or ctx.ws.score_json(label).exists()):
            missing.append(f"score artifact {label!r}")
    return missing


STAGES: tuple[Stage, ...] = (
    Stage(
        name="summarize",
        run=_stage_summarize,
        config_slice=lambda cfg: {"manifest": cfg.summarize_manifest},
        inputs=lambda ctx: [manifest_ref_path(ctx, ctx.cfg.summarize_manifest)],
        outputs=lambda ctx: [ctx.ws.summary_json, ctx.ws.summary_txt],
        provides=lambda ctx: {"summary"},
        missing_deps=lambda ctx, produced: (
            [] if _ref_available(ctx, ctx.cfg.summarize_manifest, produced)
            else [f"summarize manifest {ctx.cfg.summarize_manifest!r}"]
        ),
    ),
    Stage(
        name="score",
        run=_stage_score,
        config_slice=lambda cfg: {
            "manifest": cfg.scoring_manifest,
            "hypotheses": str(cfg.scoring_hypotheses) if cfg.scoring_hypotheses else None,
            "label": cfg.scoring_label,
            "recognizer": cfg.recognizer,
        },
        inputs=lambda ctx: [
            manifest_ref_path(ctx, ctx.cfg.scoring_manifest),
            *( [ctx.cfg.scoring_hypotheses] if ctx.cfg.scoring_hypotheses else [] ),
        ],
        outputs=lambda ctx: [
            ctx.ws.score_json(ctx.cfg.scoring_label),
            ctx.ws.score_txt(ctx.cfg.scoring_label),
        ],
        provides=lambda ctx: {f"score:{ctx.cfg.scoring_label}"},
        missing_deps=_score_deps,
    ),
    Stage(
        name="filter-prompts",
        run=_stage_filter_prompts,
        config_slice=lambda cfg: {
            "manifest": cfg.filter_manifest,
            "hypotheses": str(cfg.filter_hypotheses) if cfg.filter_hypotheses else None,
            "max_cer": cfg.filter_policy.max_cer,
            "max_rate_sigma": cfg.filter_policy.max_rate_sigma,
            "recognizer": cfg.recognizer,
        },
        inputs=lambda ctx: [
            manifest_ref_path(ctx, ctx.cfg.filter_manifest),
            *( [ctx.cfg.filter_hypotheses] if ctx.cfg.filter_hypotheses else [] ),
        ],
        outputs=lambda ctx: [ctx.ws.prompts_manifest, ctx.ws.selection_report],
        provides=lambda ctx: {"prompts"},
        missing_deps=_filter_deps,
    ),
    Stage(
        name="synthesize",
        run=_stage_synthesize,
        config_slice=lambda cfg: {
            "seed": cfg.synthesis_seed,
            "batches": [{"name": b.name, "count": b.count} for b in cfg.synthesis_batches],
            "synthesizer": cfg.synthesizer,
        },
        inputs=lambda ctx: [ctx.ws.prompts_manifest],
        outputs=lambda ctx: [ctx.ws.synth_manifest(b.name) for b in ctx.cfg.synthesis_batches],
        provides=lambda ctx: {b.name for b in ctx.cfg.synthesis_batches},
        missing_deps=_synthesize_deps,
    ),
    Stage(
        name="compose",
        run=_stage_compose,
        config_slice=lambda cfg: {
            "mixes": [{"name": m.name, "parts": list(m.parts)} for m in cfg.mixes]
        },
        inputs=lambda ctx: [
            manifest_ref_path(ctx, ref) for mix in ctx.cfg.mixes for ref in mix.parts
        ],
        outputs=lambda ctx: [
            p for m in ctx.cfg.mixes for p in (ctx.ws.mix_manifest(m.name), ctx.ws.mix_record(m.name))
        ],
        provides=lambda ctx: {m.name for m in ctx.cfg.mixes},
        missing_deps=_compose_deps,
    ),
    Stage(
        name="extract-features",
        run=_stage_extract_features,
        config_slice=lambda cfg: {"manifest": cfg.features_manifest, "mel": cfg.mel.to_dict()},
        inputs=lambda ctx: [manifest_ref_path(ctx, ctx.cfg.features_manifest)],
        outputs=lambda ctx: [ctx.ws.features_dir],
        provides=lambda ctx: {"features"},
        missing_deps=_features_deps,
    ),
    Stage(
        name="mask",
        run=_stage_mask,
        config_slice=_mask_policy_slice,
        inputs=lambda ctx: [ctx.ws.features_dir],
        outputs=lambda ctx: [ctx.ws.masked_dir],
        provides=lambda ctx: {"masked"},
        missing_deps=_mask_deps,
    ),
    Stage(
        name="report",
        run=_stage_report,
        config_slice=lambda cfg: {"scores": list(cfg.report_scores)},
        inputs=lambda ctx: [ctx.ws.score_json(label) for label in ctx.cfg.report_scores],
        outputs=lambda ctx: [ctx.ws.report_json, ctx.ws.report_txt],
        provides=lambda ctx: {"report"},
        missing_deps=_report_deps,
    ),
)

STAGE_NAMES = tuple(s.name for s in STAGES)


# ---------------------------------------------------------------------------
# runner


def _fingerprint(stage: Stage, ctx: PipelineContext, input_digests: Mapping[str, str]) -> str:
    h = hashlib.sha256()
    h.update(__version__.encode("ascii"))
    h.update(stage.name.encode("ascii"))
    h.update(json.dumps(stage.config_slice(ctx.cfg), sort_keys=True).encode("utf-8"))
    h.update(json.dumps({"seed": ctx.cfg.seed}).encode("utf-8"))
    for key in sorted(input_digests):
        h.update(key.encode("utf-8"))
        h.update(input_digests[key].encode("ascii"))
    return h.hexdigest()


def _should_skip(stage: Stage, ctx: PipelineContext, fingerprint: str) -> bool:
    prov_path = ctx.ws.provenance(stage.name)
    if not prov_path.exists():
        return False
    try:
        prov = json.loads(prov_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    if prov.get("fingerprint") != fingerprint:
        return False
    return all(p.exists() for p in stage.outputs(ctx))


def run_pipeline(cfg: PipelineConfig, stage_names: Iterable[str] | None = None) -> list[str]:
    """Run the requested stages (all by default) in dependency order.

    Validates dependencies for the whole selection before any stage runs.
    Returns the names of stages that actually executed (skipped stages are
    omitted).
    """
    requested = list(stage_names) if stage_names is not None else list(STAGE_NAMES)
    unknown = [name for name in requested if name not in STAGE_NAMES]
    if unknown:
        raise PipelineError(f"unknown stage(s): {', '.join(unknown)}; valid: {', '.join(STAGE_NAMES)}")
    selected = [s for s in STAGES if s.name in requested]

    ctx = PipelineContext(cfg=cfg, ws=Workspace(cfg.workspace))
    produced: set[str] = set()
    for stage in selected:
        missing = stage.missing_deps(ctx, produced)
        if missing:
            raise PipelineError(f"stage {stage.name}: missing dependencies: {'; '.join(missing)}")
        produced |= stage.provides(ctx)

    executed: list[str] = []
    with workspace_lock(ctx.ws):
        for stage in selected:
            input_digests = _digest_inputs(stage.inputs(ctx))
            fingerprint = _fingerprint(stage, ctx, input_digests)
            if _should_skip(stage, ctx, fingerprint):
                log.info("stage %s: up to date, skipping", stage.name)
                continue
            log.info("stage %s: running", stage.name)
            try:
                stage.run(ctx)
            except Exception as exc:
                raise StageError(stage.name, exc) from exc
            _write_json_atomic(
                ctx.ws.provenance(stage.name),
                {
                    "stage": stage.name,
                    "fingerprint": fingerprint,
                    "inputs": dict(input_digests),
                    "config": stage.config_slice(cfg),
                    "seed": cfg.seed,
                    "version": __version__,
                },
            )
            executed.append(stage.name)
            log.info("stage %s: done", stage.name)
    return executed
