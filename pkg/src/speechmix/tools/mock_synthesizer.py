"""Mock synthesizer tool.

Reads synthesize requests (``{"id", "text", "prompt_audio_path"}``), writes
a deterministic sine-composite WAV per request under ``--out-dir``, and
responds with the absolute audio path and its duration.  The prompt's
speech rate is looked up from the supplied manifest (matching on the
resolved prompt path), so synthetic durations track prompt speaking rates.

Usage (streaming):
    python -m speechmix.tools.mock_synthesizer --manifest train.jsonl --out-dir wavs/
        [--seed 0] [--default-rate CPS]

Usage (file batch): append a requests file and a responses file path.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from urllib.parse import quote

from .. import audio
from ..corpus import load_manifest, resolve_audio_path
from ..dsp import speech_rate
from ..exttools import decode_record, encode_record, mock_synthesize

SAMPLE_RATE = 16000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", action="append", default=[], help="manifest(s) providing prompt transcripts and durations")
    parser.add_argument("--out-dir", required=True, help="directory for generated WAV files")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--default-rate", type=float, default=None, help="chars/s fallback for prompts not found in manifests")
    parser.add_argument("requests_file", nargs="?")
    parser.add_argument("responses_file", nargs="?")
    return parser


def prompt_rates(manifest_paths: list[str]) -> dict[str, float]:
    rates: dict[str, float] = {}
    for path in manifest_paths:
        manifest = load_manifest(path)
        for utt in manifest:
            resolved = resolve_audio_path(manifest, utt).resolve()
            rates[str(resolved)] = speech_rate(utt)
    return rates


def respond(request: dict, rates: dict[str, float], args, out_dir: Path) -> dict:
    rid = request["id"]
    text = request["text"]
    prompt = str(Path(request["prompt_audio_path"]).resolve())
    rate = rates.get(prompt, args.default_rate)
    if rate is None:
        raise KeyError(prompt)
    samples, duration_s = mock_synthesize(text, rate, args.seed, sample_rate=SAMPLE_RATE)
    wav_path = out_dir / (quote(rid, safe="") + ".wav")
    audio.write_wav(wav_path, samples, sample_rate=SAMPLE_RATE)
    return {"id": rid, "audio_path": str(wav_path.resolve()), "duration_s": duration_s}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rates = prompt_rates(args.manifest)

    def handle(line: str) -> dict:
        return respond(decode_record(line), rates, args, out_dir)

    try:
        if args.requests_file:
            if not args.responses_file:
                print("batch mode needs both a requests and a responses file", file=sys.stderr)
                return 2
            with open(args.requests_file, "r", encoding="utf-8") as fin, open(
                args.responses_file, "w", encoding="utf-8"
            ) as fout:
                for line in fin:
                    if line.strip():
                        fout.write(encode_record(handle(line)) + "\n")
        else:
            for line in sys.stdin:
                if not line.strip():
                    continue
                sys.stdout.write(encode_record(handle(line)) + "\n")
                sys.stdout.flush()
    except KeyError as exc:
        print(f"no speech rate known for prompt {exc.args[0]!r} (pass --manifest or --default-rate)", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"bad request: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
