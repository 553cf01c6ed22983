import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechmix.corpus import (
    Manifest,
    ManifestError,
    Source,
    Split,
    load_manifest,
    rebase_manifest,
    resolve_audio_path,
    save_manifest,
    summarize,
    verify_durations,
)
from tests.conftest import build_corpus, make_utterance, write_manifest_lines, write_sine_wav


def _record(uid, **overrides):
    record = {
        "id": uid,
        "audio_path": f"audio/{uid}.wav",
        "text": "Ala ma kota",
        "duration_s": 2.5,
        "source": "BIGOS",
        "subset": "bigos-a",
        "split": "train",
    }
    record.update(overrides)
    return record


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    manifest = load_manifest(path)
    assert len(manifest) == 0


def test_load_preserves_order(tmp_path):
    path = write_manifest_lines(tmp_path / "m.jsonl", [_record("a"), _record("b")])
    manifest = load_manifest(path)
    assert manifest.ids() == ["a", "b"]
    assert manifest.utterances[0].source is Source.BIGOS
    assert manifest.utterances[0].split is Split.TRAIN


def test_duplicate_id_names_the_id(tmp_path):
    path = write_manifest_lines(tmp_path / "m.jsonl", [_record("utt1"), _record("x"), _record("utt1")])
    with pytest.raises(ManifestError, match="utt1"):
        load_manifest(path)


def test_missing_field_names_the_field(tmp_path):
    record = _record("a")
    del record["duration_s"]
    path = write_manifest_lines(tmp_path / "m.jsonl", [record])
    with pytest.raises(ManifestError, match="duration_s"):
        load_manifest(path)


def test_malformed_line_names_the_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps(_record("a")) + "\n{not json\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(path)


@pytest.mark.parametrize(
    "overrides,fragment",
    [
        ({"duration_s": 0}, "duration_s"),
        ({"duration_s": -1.0}, "duration_s"),
        ({"text": "   "}, "text"),
        ({"source": "UNKNOWN"}, "source"),
        ({"split": "dev-9"}, "split"),
    ],
)
def test_invalid_field_values(tmp_path, overrides, fragment):
    path = write_manifest_lines(tmp_path / "m.jsonl", [_record("a", **overrides)])
    with pytest.raises(ManifestError, match=fragment):
        load_manifest(path)


def test_round_trip_is_byte_identical(tmp_path):
    records = [
        _record("a"),
        _record("b", text="Żółć", extra_field="kept", another=3),
    ]
    src = write_manifest_lines(tmp_path / "m.jsonl", records)
    original = src.read_bytes()
    manifest = load_manifest(src)
    out = tmp_path / "copy.jsonl"
    save_manifest(manifest, out)
    assert out.read_bytes() == original


utterance_records = st.builds(
    lambda i, text, duration: _record(f"u{i}", text=text, duration_s=duration),
    i=st.integers(min_value=0, max_value=10**6),
    text=st.text(alphabet="aąbcćdeęłńóśźż .,!", min_size=1, max_size=30).filter(lambda t: t.strip()),
    duration=st.floats(min_value=0.01, max_value=10000.0, allow_nan=False),
)


@settings(max_examples=30, deadline=None)
@given(records=st.lists(utterance_records, max_size=8, unique_by=lambda r: r["id"]))
def test_save_load_save_is_stable(tmp_path_factory, records):
    # the canonical form is whatever save_manifest writes: saving a loaded
    # manifest must reproduce it byte for byte
    tmp_path = tmp_path_factory.mktemp("roundtrip")
    first = tmp_path / "first.jsonl"
    save_manifest(Manifest(name="m", utterances=tuple(load_manifest(write_manifest_lines(tmp_path / "raw.jsonl", records)).utterances)), first)
    second = tmp_path / "second.jsonl"
    save_manifest(load_manifest(first), second)
    assert second.read_bytes() == first.read_bytes()


def test_unknown_fields_preserved_in_order(tmp_path):
    path = write_manifest_lines(tmp_path / "m.jsonl", [_record("a", zeta=1, alpha=2)])
    utt = load_manifest(path).utterances[0]
    assert utt.extras == (("zeta", 1), ("alpha", 2))


def test_summarize_empty_manifest():
    summary = summarize(Manifest(name="empty", utterances=()))
    assert summary.grand_total().sample_count == 0
    assert summary.grand_total().duration_s == 0.0
    for split in Split:
        for source in Source:
            assert summary.cell(split, source).sample_count == 0


def test_summarize_counts_and_totals():
    utts = tuple(
        make_utterance(uid=f"b{i}", source=Source.BIGOS, split=Split.TRAIN) for i in range(3)
    ) + tuple(
        make_utterance(uid=f"p{i}", source=Source.PELCRA, split=Split.TRAIN) for i in range(5)
    ) + (make_utterance(uid="d0", source=Source.BIGOS, split=Split.DEV0),)
    summary = summarize(Manifest(name="m", utterances=utts))
    assert summary.cell(Split.TRAIN, Source.BIGOS).sample_count == 3
    assert summary.cell(Split.TRAIN, Source.PELCRA).sample_count == 5
    assert summary.split_total(Split.TRAIN).sample_count == 8
    assert summary.source_total(Source.BIGOS).sample_count == 4
    assert summary.grand_total().sample_count == len(utts)


def test_summarize_train_totals_at_corpus_scale():
    # unit-duration records: per-source counts must add up in the train row
    utts = tuple(
        make_utterance(uid=f"b{i}", source=Source.BIGOS, split=Split.TRAIN)
        for i in range(82025)
    ) + tuple(
        make_utterance(uid=f"p{i}", source=Source.PELCRA, split=Split.TRAIN)
        for i in range(229150)
    )
    summary = summarize(Manifest(name="big", utterances=utts))
    assert summary.split_total(Split.TRAIN).sample_count == 311175
    assert summary.cell(Split.TRAIN, Source.BIGOS).sample_count == 82025
    assert summary.cell(Split.TRAIN, Source.PELCRA).sample_count == 229150


def test_summarize_hours():
    utts = tuple(
        make_utterance(uid=f"u{i}", duration_s=3600.0) for i in range(3)
    )
    summary = summarize(Manifest(name="m", utterances=utts))
    assert summary.cell(Split.TRAIN, Source.BIGOS).duration_h == pytest.approx(3.0, rel=1e-9)


def test_summary_duration_matches_fsum():
    utts = tuple(make_utterance(uid=f"u{i}", duration_s=0.1 + i * 0.01) for i in range(100))
    summary = summarize(Manifest(name="m", utterances=utts))
    expected = math.fsum(u.duration_s for u in utts) / 3600.0
    assert summary.grand_total().duration_h == pytest.approx(expected, rel=1e-9)


def test_summary_render_and_dict():
    manifest = Manifest(name="m", utterances=(make_utterance(),))
    summary = summarize(manifest)
    payload = summary.to_dict()
    assert payload["splits"]["train"]["BIGOS"]["samples"] == 1
    text = summary.render_text()
    assert "BIGOS" in text and "Total" in text


def test_resolve_audio_path(tmp_path):
    path = write_manifest_lines(tmp_path / "m.jsonl", [_record("a")])
    manifest = load_manifest(path)
    assert resolve_audio_path(manifest, manifest.utterances[0]) == tmp_path / "audio/a.wav"
    absolute = make_utterance(audio_path="/abs/x.wav")
    assert str(resolve_audio_path(manifest, absolute)) == "/abs/x.wav"


def test_rebase_manifest_rewrites_relative_paths(tmp_path):
    src_dir = tmp_path / "src"
    path = write_manifest_lines(src_dir / "m.jsonl", [_record("a")])
    manifest = load_manifest(path)
    new_base = tmp_path / "elsewhere"
    rebased = rebase_manifest(manifest, new_base)
    resolved = resolve_audio_path(rebased, rebased.utterances[0])
    assert resolved.resolve() == (src_dir / "audio/a.wav").resolve()


def test_rebase_to_same_directory_is_identity(tmp_path):
    path = write_manifest_lines(tmp_path / "m.jsonl", [_record("a")])
    manifest = load_manifest(path)
    rebased = rebase_manifest(manifest, tmp_path)
    assert rebased.utterances[0].audio_path == "audio/a.wav"


def test_verify_durations(tmp_path):
    write_sine_wav(tmp_path / "audio/good.wav", 1.0)
    write_sine_wav(tmp_path / "audio/bad.wav", 1.0)
    records = [
        _record("good", audio_path="audio/good.wav", duration_s=1.0),
        _record("bad", audio_path="audio/bad.wav", duration_s=1.25),
    ]
    manifest = load_manifest(write_manifest_lines(tmp_path / "m.jsonl", records))
    mismatches = verify_durations(manifest, tol_s=0.001)
    assert [m.id for m in mismatches] == ["bad"]
    assert mismatches[0].decoded_s == pytest.approx(1.0)


def test_build_corpus_round_trip(tmp_path):
    path = build_corpus(tmp_path, n=6)
    manifest = load_manifest(path)
    assert len(manifest) == 6
    assert not verify_durations(manifest)
