"""Batch wire protocol for external recognizer/synthesizer executables.

The protocol is UTF-8 line-delimited JSON over standard streams: one
request per line on the tool's stdin, one response per line on its stdout.
Correspondence is carried by ids, not ordering, so tools may batch
internally.  Exit code 0 means success; diagnostics belong on stderr.
A file-based mode (requests file, responses file as two trailing
arguments) is provided for tools that cannot stream.

Deterministic mock implementations of both tool roles live here as well,
enabling hermetic end-to-end runs.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics import edit_distance
from .seeding import derive_rng
from .textnorm import NormMode, normalize

RECOGNIZE_REQUEST_FIELDS = ("id", "audio_path")
RECOGNIZE_RESPONSE_FIELDS = ("id", "hypothesis")
SYNTHESIZE_REQUEST_FIELDS = ("id", "text", "prompt_audio_path")
SYNTHESIZE_RESPONSE_FIELDS = ("id", "audio_path", "duration_s")


class ToolError(RuntimeError):
    """Tool failure; ``responses`` holds whatever arrived before it."""

    def __init__(self, message: str, responses: list[dict] | None = None, stderr: str = ""):
        super().__init__(message)
        self.responses = responses or []
        self.stderr = stderr


def encode_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False)


def decode_record(line: str) -> dict:
    record = json.loads(line)
    if not isinstance(record, dict) or "id" not in record:
        raise ValueError("protocol record must be a JSON object with an 'id' field")
    return record


def _match_responses(requests: list[dict], responses: list[dict], stderr: str) -> list[dict]:
    """Reorder responses to request order; ids must match exactly."""
    by_id: dict[str, dict] = {}
    for resp in responses:
        rid = resp["id"]
        if rid in by_id:
            raise ToolError(f"duplicate response id {rid!r}", responses, stderr)
        by_id[rid] = resp
    request_ids = [req["id"] for req in requests]
    unknown = set(by_id) - set(request_ids)
    if unknown:
        raise ToolError(f"response for unknown id {sorted(unknown)[0]!r}", responses, stderr)
    missing = [rid for rid in request_ids if rid not in by_id]
    if missing:
        raise ToolError(f"missing response for id {missing[0]!r}", responses, stderr)
    return [by_id[rid] for rid in request_ids]


def run_tool(command: Sequence[str], requests: Iterable[dict], timeout_s: float = 300.0) -> list[dict]:
    """Stream requests through a tool process and collect its responses.

    Responses are matched to requests by id and returned in request order.
    On nonzero exit, a missing/unknown id, or timeout, raises
    :class:`ToolError` carrying partial responses and captured stderr.
    """
    requests = list(requests)
    proc = subprocess.Popen(
        list(command),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        encoding="utf-8",
    )
    responses: list[dict] = []
    parse_errors: list[str] = []
    stderr_chunks: list[str] = []

    def feed() -> None:
        try:
            for req in requests:
                proc.stdin.write(encode_record(req) + "\n")
                proc.stdin.flush()
        except (BrokenPipeError, OSError):
            pass  # tool died early; surfaced via exit code
        finally:
            try:
                proc.stdin.close()
            except OSError:
                pass

    def collect_stdout() -> None:
        for line in proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                responses.append(decode_record(line))
            except ValueError as exc:
                parse_errors.append(f"{exc}: {line[:200]}")

    def collect_stderr() -> None:
        stderr_chunks.append(proc.stderr.read())

    threads = [threading.Thread(target=t, daemon=True) for t in (feed, collect_stdout, collect_stderr)]
    for t in threads:
        t.start()
    try:
        returncode = proc.wait(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
        for t in threads:
            t.join()
        raise ToolError(f"tool timed out after {timeout_s} s", responses, "".join(stderr_chunks)) from None
    for t in threads:
        t.join()
    stderr = "".join(stderr_chunks)
    if returncode != 0:
        raise ToolError(f"tool exited with status {returncode}: {stderr.strip()[-2000:]}", responses, stderr)
    if parse_errors:
        raise ToolError(f"unparseable response line: {parse_errors[0]}", responses, stderr)
    return _match_responses(requests, responses, stderr)


def run_tool_batchfile(command: Sequence[str], requests: Iterable[dict], timeout_s: float = 300.0) -> list[dict]:
    """File-based batch mode: the tool is invoked with two extra arguments,
    a requests file to read and a responses file to write."""
    requests = list(requests)
    with tempfile.TemporaryDirectory(prefix="speechmix-tool-") as tmp:
        req_path = Path(tmp) / "requests.jsonl"
        resp_path = Path(tmp) / "responses.jsonl"
        with req_path.open("w", encoding="utf-8") as fh:
            for req in requests:
                fh.write(encode_record(req) + "\n")
        try:
            done = subprocess.run(
                list(command) + [str(req_path), str(resp_path)],
                capture_output=True,
                text=True,
                timeout=timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise ToolError(f"tool timed out after {timeout_s} s", [], exc.stderr or "") from None
        if done.returncode != 0:
            raise ToolError(
                f"tool exited with status {done.returncode}: {done.stderr.strip()[-2000:]}",
                [],
                done.stderr,
            )
        responses = []
        if resp_path.exists():
            with resp_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        responses.append(decode_record(line))
        return _match_responses(requests, responses, done.stderr)


def run_tool_sharded(
    command: Sequence[str],
    requests: Iterable[dict],
    workers: int,
    timeout_s: float = 300.0,
) -> list[dict]:
    """Shard requests across concurrent tool processes, merging by id."""
    requests = list(requests)
    if workers <= 1 or len(requests) <= 1:
        return run_tool(command, requests, timeout_s)
    shards: list[list[dict]] = [[] for _ in range(min(workers, len(requests)))]
    for i, req in enumerate(requests):
        shards[i % len(shards)].append(req)
    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        futures = [pool.submit(run_tool, command, shard, timeout_s) for shard in shards]
        merged: list[dict] = []
        for future in futures:
            merged.extend(future.result())
    return _match_responses(requests, merged, "")


def corrupt_transcript(text: str, utt_id: str, cer_target: float, seed: int) -> str:
    """Seeded character substitutions reaching the target CER within one
    character.

    Substitution-only corruption keeps achieved-CER control simple: the
    distance to the reference grows by at most one per substitution, so the
    loop can stop exactly on target.
    """
    if not 0.0 <= cer_target <= 1.0:
        raise ValueError(f"cer_target must be in [0, 1], got {cer_target}")
    reference = normalize(text, NormMode.SCORING)
    chars = list(reference)
    if not chars or cer_target == 0.0:
        return reference
    target_errors = round(cer_target * len(chars))
    if target_errors == 0:
        return reference
    rng = derive_rng(seed, "mock-recognizer", utt_id)
    positions = rng.permutation(len(chars))
    alphabet = "0123456789"
    for pos in positions:
        original = chars[pos]
        replacement = alphabet[int(rng.integers(0, len(alphabet)))]
        if replacement == original:
            replacement = alphabet[(alphabet.index(replacement) + 1) % len(alphabet)]
        chars[pos] = replacement
        if edit_distance(list(reference), chars) >= target_errors:
            break
    return "".join(chars)


def mock_recognize(utt, cer_target: float, seed: int) -> str:
    """Deterministic mock hypothesis for an utterance (test oracle for
    prompt filtering)."""
    return corrupt_transcript(utt.text, utt.id, cer_target, seed)


def mock_synthesize(
    text: str,
    prompt_rate_cps: float,
    seed: int,
    sample_rate: int = 16000,
) -> tuple[np.ndarray, float]:
    """Deterministic sine-composite stand-in for zero-shot TTS.

    Duration is the scoring-normalized non-space character count divided by
    the prompt's speech rate, so synthetic speech-rate statistics track the
    prompts.  Returns (float32 samples, duration in seconds).
    """
    chars = len(normalize(text, NormMode.SCORING).replace(" ", ""))
    if chars == 0:
        raise ValueError("no speech content in synthesis text")
    if prompt_rate_cps <= 0:
        raise ValueError(f"prompt rate must be positive, got {prompt_rate_cps}")
    n_samples = round(chars / prompt_rate_cps * sample_rate)
    duration_s = n_samples / sample_rate
    rng = derive_rng(seed, "mock-synthesizer", text)
    t = np.arange(n_samples, dtype=np.float64) / sample_rate
    wave = np.zeros(n_samples)
    for amplitude in (0.3, 0.15, 0.08):
        freq = rng.uniform(120.0, 2400.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave += amplitude * np.sin(2.0 * np.pi * freq * t + phase)
    return wave.astype(np.float32), duration_s
