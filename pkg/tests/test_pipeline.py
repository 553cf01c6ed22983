import dataclasses
import json

import pytest

from speechmix.cli import main
from speechmix.corpus import load_manifest
from speechmix.pipeline import (
    ConfigError,
    PipelineError,
    StageError,
    Workspace,
    load_config,
    run_pipeline,
)
from tests.conftest import build_pipeline_fixture


def workspace_snapshot(root):
    """All artifact files with mtimes (lock file excluded; it is transient)."""
    return {
        str(p.relative_to(root)): p.stat().st_mtime_ns
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != ".pipeline.lock"
    }


def test_load_config_validates_paths(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("manifests:\n  train: missing.jsonl\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="missing.jsonl"):
        load_config(config)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")


def test_seed_and_worker_overrides(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path, seed=99, workers=4)
    assert cfg.seed == 99
    assert cfg.workers == 4
    # masking seed was set explicitly in the file and stays
    assert cfg.mask_policy.seed == 9


def test_summarize_stage_writes_summary(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    executed = run_pipeline(cfg, ["summarize"])
    assert executed == ["summarize"]
    ws = Workspace(cfg.workspace)
    payload = json.loads(ws.summary_json.read_text())
    manifest = load_manifest(cfg.manifests["train"])
    assert payload["total"]["samples"] == len(manifest)
    expected_h = manifest.duration_s() / 3600.0
    assert payload["total"]["duration_h"] == pytest.approx(expected_h, rel=1e-9)


def test_score_without_hypotheses_is_dependency_error(tmp_path):
    config_path = build_pipeline_fixture(tmp_path, with_tools=False)
    cfg = load_config(config_path)
    with pytest.raises(PipelineError, match="hypotheses"):
        run_pipeline(cfg, ["score"])
    # validation happens before any work
    assert not Workspace(cfg.workspace).score_json("mock-system").exists()


def test_unknown_stage_rejected(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    with pytest.raises(PipelineError, match="unknown stage"):
        run_pipeline(cfg, ["transmogrify"])


def test_mask_requires_features(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    with pytest.raises(PipelineError, match="features"):
        run_pipeline(cfg, ["mask"])


def test_full_pipeline_and_idempotent_rerun(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    executed = run_pipeline(cfg)
    assert executed == [
        "summarize", "score", "filter-prompts", "synthesize",
        "compose", "extract-features", "mask", "report",
    ]
    ws = Workspace(cfg.workspace)

    # artifacts exist and are consistent
    selection = json.loads(ws.selection_report.read_text())
    assert selection["input"] == 12
    assert selection["rejected_rate"] == 1  # the planted outlier
    assert selection["kept"] == 11
    prompts = load_manifest(ws.prompts_manifest)
    assert len(prompts) == 11

    for batch, count in (("synth-00", 4), ("synth-01", 8)):
        synth = load_manifest(ws.synth_manifest(batch))
        assert len(synth) == count
        assert all(u.id.startswith(batch + "/") for u in synth)

    mix01 = load_manifest(ws.mix_manifest("mix-01"))
    assert len(mix01) == 12 + 4 + 8
    record = json.loads(ws.mix_record("mix-01").read_text())
    assert record["total_samples"] == 24
    assert [p["name"] for p in record["parts"]] == ["train", "synth-00", "synth-01"]

    melf_files = list(ws.features_dir.glob("*.melf"))
    assert len(melf_files) == 24
    masked_files = list(ws.masked_dir.glob("*.melf"))
    assert len(masked_files) == 24
    assert (ws.masked_dir / "mask_policy.json").exists()

    score = json.loads(ws.score_json("mock-system").read_text())
    assert score["total"]["samples"] == 6
    assert score["total"]["wer"] > 0  # cer-target 0.1 injects errors
    report = json.loads(ws.report_json.read_text())
    assert report["reports"][0]["label"] == "mock-system"
    assert "mock-system" in ws.report_txt.read_text()

    # unchanged rerun: nothing executes, nothing is written
    before = workspace_snapshot(cfg.workspace)
    assert run_pipeline(cfg) == []
    assert workspace_snapshot(cfg.workspace) == before


def test_config_change_triggers_stage_rerun(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    run_pipeline(cfg, ["summarize"])
    assert run_pipeline(cfg, ["summarize"]) == []
    changed = load_config(config_path, seed=4321)
    assert run_pipeline(changed, ["summarize"]) == ["summarize"]


def test_stage_failure_names_stage_and_keeps_artifacts(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = dataclasses.replace(load_config(config_path), synthesizer=("false",))
    with pytest.raises(StageError, match="synthesize"):
        run_pipeline(cfg, ["summarize", "filter-prompts", "synthesize"])
    ws = Workspace(cfg.workspace)
    assert ws.summary_json.exists()
    assert ws.prompts_manifest.exists()


def test_lock_prevents_concurrent_runs(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    cfg.workspace.mkdir(parents=True, exist_ok=True)
    lock = Workspace(cfg.workspace).lock_path
    lock.write_text("12345\n")
    with pytest.raises(PipelineError, match="locked"):
        run_pipeline(cfg, ["summarize"])
    lock.unlink()
    assert run_pipeline(cfg, ["summarize"]) == ["summarize"]


def test_provenance_records_are_written(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    cfg = load_config(config_path)
    run_pipeline(cfg, ["summarize"])
    prov = json.loads(Workspace(cfg.workspace).provenance("summarize").read_text())
    assert prov["stage"] == "summarize"
    assert prov["seed"] == cfg.seed
    assert prov["version"]
    assert prov["inputs"]  # digest of the input manifest
    assert prov["fingerprint"]


def test_cli_runs_single_stage(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    assert main(["summarize", "--config", str(config_path), "-q"]) == 0
    cfg = load_config(config_path)
    assert Workspace(cfg.workspace).summary_json.exists()


def test_cli_validation_error_exit_code(tmp_path):
    config_path = build_pipeline_fixture(tmp_path, with_tools=False)
    assert main(["score", "--config", str(config_path), "-q"]) == 2


def test_cli_stage_failure_exit_code(tmp_path):
    config_path = build_pipeline_fixture(tmp_path)
    # break the synthesizer tool by rewriting the config
    text = config_path.read_text().replace("mock_synthesizer", "mock_missing_tool")
    config_path.write_text(text)
    assert main(["run", "--config", str(config_path), "-q",
                 "--stages", "filter-prompts,synthesize"]) == 1


def test_cli_missing_config_exit_code(tmp_path):
    assert main(["summarize", "--config", str(tmp_path / "nope.yaml"), "-q"]) == 2
