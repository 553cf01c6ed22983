"""Mock recognizer tool.

Reads recognize requests (``{"id", "audio_path"}``) line by line, looks the
id up in the supplied manifests, and emits the reference transcript with
seeded substitutions at the requested CER.  Stands in for a real ASR
decoder in hermetic pipeline runs.

Usage (streaming):
    python -m speechmix.tools.mock_recognizer --manifest train.jsonl [--manifest dev.jsonl]
        [--cer-target 0.1] [--seed 0]

Usage (file batch): append a requests file and a responses file path.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..corpus import load_manifest
from ..exttools import corrupt_transcript, decode_record, encode_record


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", action="append", required=True, help="manifest(s) providing reference transcripts")
    parser.add_argument("--cer-target", type=float, default=0.0, help="character error rate to inject, as a fraction")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("requests_file", nargs="?", help="batch mode: requests file to read")
    parser.add_argument("responses_file", nargs="?", help="batch mode: responses file to write")
    return parser


def respond(request: dict, texts: dict[str, str], cer_target: float, seed: int) -> dict:
    rid = request["id"]
    if rid not in texts:
        raise KeyError(rid)
    hypothesis = corrupt_transcript(texts[rid], rid, cer_target, seed)
    return {"id": rid, "hypothesis": hypothesis}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    texts: dict[str, str] = {}
    for path in args.manifest:
        for utt in load_manifest(path):
            texts[utt.id] = utt.text

    def handle(line: str) -> dict:
        request = decode_record(line)
        return respond(request, texts, args.cer_target, args.seed)

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
        print(f"unknown utterance id {exc.args[0]!r}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"bad request: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
