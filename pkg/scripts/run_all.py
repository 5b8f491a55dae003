#!/usr/bin/env python3
"""Run every shipped experiment and collect the reports under out/.

Usage: python scripts/run_all.py [--out DIR]

Exercises the CLI exactly as a user would: verify on all four shipped
configs, the asymptotic sweep and the m-vs-m0 comparison on the standard
one.  Exits nonzero if any sub-run fails its gate.
"""
import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from shiftdet.cli import main as shiftdet_main  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

RUNS = [
    ("verify-standard", ["verify", "standard.json"]),
    ("verify-nonintegrable", ["verify", "nonintegrable.json"]),
    ("verify-trivial", ["verify", "trivial.json"]),
    ("verify-general", ["verify", "general.json"]),
    ("sweep-standard", ["sweep", "standard.json"]),
    ("sweep-trivial", ["sweep", "trivial.json"]),
    ("m-vs-m0-standard", ["m-vs-m0", "standard.json"]),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out", help="report directory root")
    opts = ap.parse_args()

    worst = 0
    for name, argv in RUNS:
        cmd, cfg = argv[0], os.path.join(CONFIG_DIR, argv[1])
        out_dir = os.path.join(opts.out, name)
        full = [cmd, cfg, "--out", out_dir]
        print(f"== {name}: shiftdet {' '.join(full)}")
        code = shiftdet_main(full)
        print(f"== {name}: exit {code}\n")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
