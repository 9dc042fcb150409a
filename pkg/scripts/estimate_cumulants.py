"""Estimate and freeze the joint cumulants of the normalised vector X.

Writes src/levycoupling/data/cumulants_d{d}.json, which the Edgeworth
sub-coupler loads at run time.
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

import numpy as np

from levycoupling.levyarea import estimate_cumulants

DATA = Path(__file__).resolve().parents[1] / "src" / "levycoupling" / "data"


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--order", type=int, default=6, choices=[4, 6])
    ap.add_argument("--M", type=int, default=10**6)
    ap.add_argument("--n-sub", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=20240521)
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for d in args.d:
        t0 = time.time()
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(d,)))
        ce = estimate_cumulants(d, args.order, args.M, args.n_sub, rng)
        data = ce.to_json()
        data["seed"] = args.seed
        path = args.out / f"cumulants_d{d}.json"
        path.write_text(json.dumps(data, indent=1) + "\n")
        print(f"d={d}: wrote {path} in {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
