#!/usr/bin/env python3
"""Regenerate the golden toy-backend transcripts under tests/testdata.

Only run this after a deliberate wire or algorithm change; the test suite
byte-compares fresh runs against these files.
"""

import argparse
import json
import pathlib

from hetauth.runner import record_transcript

SEEDS = (1, 7, 42)
OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "testdata"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=pathlib.Path, default=OUT)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for seed in SEEDS:
        path = args.out / f"golden_toy_seed{seed}.json"
        path.write_text(json.dumps(record_transcript(seed, "toy"), indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
