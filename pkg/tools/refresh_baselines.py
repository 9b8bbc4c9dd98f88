#!/usr/bin/env python3
"""Regenerate src/nls4d/baselines.json from the deterministic ensembles.

Run from the repository root after an intentional change to the ensemble
definitions; the acceptance suite compares against the stored values at
+-10%, so refresh only when the change is understood.
"""

import json
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from nls4d import regression


def main() -> None:
    t0 = time.perf_counter()
    baselines = regression.compute_baselines()
    elapsed = time.perf_counter() - t0
    out = (pathlib.Path(__file__).resolve().parents[1]
           / "src" / "nls4d" / "baselines.json")
    out.write_text(json.dumps(baselines, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} in {elapsed:.1f} s")
    for name, entry in baselines.items():
        print(f"  {name}: {entry}")


if __name__ == "__main__":
    main()
