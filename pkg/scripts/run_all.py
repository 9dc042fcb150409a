"""Run every experiment config in configs/ and print a pass/fail table.

    python3 scripts/run_all.py [--out out] [--workers W] [--skip coupling-rate]

Each experiment writes results.csv, plotdata.csv and summary.json under
OUT/<config name>/.  Exit status is 1 if any experiment fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from levycoupling.harness.cli import main as cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip", nargs="*", default=[], help="config names to skip")
    args = ap.parse_args(argv)
    rows = []
    for cfg in sorted(CONFIGS.glob("*.cfg")):
        if cfg.stem in args.skip:
            continue
        out = args.out / cfg.stem
        code = cli(["run", "--config", str(cfg), "--out", str(out), "--workers", str(args.workers)])
        summary = json.loads((out / "summary.json").read_text())
        rows.append((cfg.stem, code, summary["runtime_seconds"], summary["failed"]))
    print()
    for name, code, secs, failed in rows:
        print(f"{'PASS' if code == 0 else 'FAIL'}  {name:<22} {secs:8.1f}s  {' '.join(failed)}")
    return 0 if all(code == 0 for _, code, _, _ in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
