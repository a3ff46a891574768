"""The whole pipeline as restartable command-line stages.

Each stage writes its artifacts plus a hash of its inputs and resolved
configuration; re-running an up-to-date stage is a no-op, and changing the
config upstream invalidates everything downstream. Exit codes: 0 success,
2 config error, 3 missing artifact, 4 numeric failure.

This driver runs the chain into ./demo_pipeline/ with a deliberately tiny
corpus so it finishes in under a minute.
"""

import json
import sys
import tempfile
from pathlib import Path

import yaml

from startdetect.cli import main

root = Path(tempfile.mkdtemp(prefix="demo_pipeline_"))
config = root / "run.yaml"
config.write_text(yaml.safe_dump({
    "seed": 0,
    "synth": {"n_scenes": 8, "scenes_per_person": 2,
              "waiting_range_s": [1.0, 2.0], "moving_range_s": [1.0, 1.5]},
    "features": {"stat_windows_ms": [100, 500], "dft_windows_ms": [640]},
    "selection": {"max_rows": 1000, "gbt_trees": 5},
    "network": {"input_window": 10},
    "train": {"max_epochs": 3, "batch_size": 64,
              "max_windows_per_class": 200, "max_val_windows": 200,
              "dtype": "float32"},
    "detector": {"threshold": 0.5, "min_consecutive": 10},
    "evaluate": {"k_folds": 2, "thresholds": [0.3, 0.5, 0.7]},
}))

stages = [
    ["synth", "--out", root / "synth"],
    ["preprocess", "--scenes", root / "synth" / "scenes",
     "--out", root / "canon"],
    ["extract", "--scenes", root / "synth" / "scenes",
     "--canonical", root / "canon", "--features", "filter",
     "--out", root / "features"],
    ["select", "--scenes", root / "synth" / "scenes",
     "--features-dir", root / "features", "--out", root / "select"],
    ["train", "--scenes", root / "synth" / "scenes",
     "--features-dir", root / "features", "--select-dir", root / "select",
     "--out", root / "train0", "--fold", "0"],
    ["detect", "--scenes", root / "synth" / "scenes",
     "--features-dir", root / "features",
     "--checkpoint", root / "train0" / "checkpoint.bin",
     "--select-dir", root / "select", "--fold", "0",
     "--out", root / "probs0"],
    ["evaluate", "--scenes", root / "synth" / "scenes",
     "--probs", root / "probs0", "--out", root / "eval0"],
]

for argv in stages:
    print(f"$ startdetect --config run.yaml {' '.join(map(str, argv))}")
    code = main(["--config", str(config), *map(str, argv)])
    if code != 0:
        sys.exit(code)
    print()

print("re-running a finished stage is a no-op:")
main(["--config", str(config), *map(str, stages[4])])

report = json.loads((root / "eval0" / "report.json").read_text())
print(f"\nfold-0 report: F1 {report['f1']:.3f} "
      f"(TP {report['n_tp']}, FP {report['n_fp']}, FN {report['n_fn']})")
print(f"artifacts under {root}")
