"""Run resolvent, solve and analyze on the demo configurations.

Usage: python demos/run_pipeline.py [--quick]

--quick skips the PDE solve (about 20 s) and analyses synthetic frames only.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from blowup_lab.cli import main

HERE = Path(__file__).resolve().parent


def run(*argv: str) -> int:
    print("$ blowup-lab", " ".join(argv))
    code = main(list(argv))
    print(f"exit {code}\n")
    return code


def pipeline(quick: bool) -> int:
    codes = [
        run("resolvent", "--config", str(HERE / "log_power_resolvent.ini")),
        run("analyze", "--config", str(HERE / "synthetic.ini")),
    ]
    if not quick:
        ref = str(HERE / "reference.ini")
        codes.append(run("resolvent", "--config", ref))
        codes.append(run("analyze", "--config", ref))  # solves first, then analyses the run
    return max(codes)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true")
    sys.exit(pipeline(parser.parse_args().quick))
