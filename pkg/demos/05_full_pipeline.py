#!/usr/bin/env python3
"""The whole two-stage recipe, end to end, at demo scale:

  stage 1: train, prune the smallest conv weights, rewind the survivors to
           their initial values, retrain; repeat
  stage 2: run each retrained network through the delta engine and count
           the significant multiplications that remain

Writes a run directory with checkpoints, a tradeoff-curve CSV, per-layer
tables, and a manifest. Uses the command-line entry point so the output
matches what `deltaq pipeline` produces. Takes a minute or two.

usage: python demos/05_full_pipeline.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

from deltaq.cli import main

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/demo-pipeline")
out.mkdir(parents=True, exist_ok=True)

config = """\
[env]
max_steps = 200
[training]
steps = 4000
epsilon_decay_steps = 2000
[pruning]
rate = 0.2
iterations = 2
[delta]
thresholds = 0,0.001
[eval]
episodes = 10
"""
cfg_path = Path(tempfile.mkstemp(suffix=".ini")[1])
cfg_path.write_text(config)

rc = main(["pipeline", "--config", str(cfg_path), "--seed", "7",
           "--out", str(out)])
print("exit code:", rc)
print("\ncurve.csv:")
print((out / "curve.csv").read_text())
print("tables.txt:")
print((out / "tables.txt").read_text())
