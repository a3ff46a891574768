"""Command-line pipeline: synth -> preprocess -> extract -> select -> train
-> detect -> evaluate, plus a `report` runner for experiment grids.

Stages are restartable: each output directory carries a hash of its inputs
and resolved configuration, and re-running an up-to-date stage is a no-op.
Exit codes: 0 success, 2 configuration error, 3 missing upstream artifact,
4 numeric failure (NaN detected).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .config import ConfigError, RunConfig, load_config
from .evaluation import (DetectorConfig, PipelineConfig, aggregate,
                         cross_validate, evaluate_scene, person_folds,
                         threshold_sweep)
from .features import FeatureMatrix, FeatureSpec, assemble
from .model import NetworkSpec, StartNet, predict_scene, train
from .scenes import ImuScene, load_corpus
from .selection import SelectionReport, run_selection
from .signal import CHANNELS, CanonicalSignal, canonicalize
from .synth import generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERIC = 4


class MissingArtifactError(FileNotFoundError):
    pass


class NumericError(RuntimeError):
    pass


# -- plumbing -----------------------------------------------------------------

def _resolve_out(path: str) -> Path:
    root = os.environ.get("STARTDETECT_OUT")
    p = Path(path)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.mkdir(parents=True, exist_ok=True)
    return p


def _require_dir(path: str, stage: str) -> Path:
    p = Path(path)
    root = os.environ.get("STARTDETECT_OUT")
    if root and not p.is_absolute() and not p.exists():
        p = Path(root) / p
    if not p.exists():
        raise MissingArtifactError(
            f"missing input {path}; run the `{stage}` stage first")
    return p


def _digest_dir(path: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        if f.name == "stage.hash":
            continue
        h.update(str(f.relative_to(path)).encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def _stage_key(stage: str, config: RunConfig, extra: str,
               inputs: list[Path]) -> str:
    h = hashlib.sha256()
    h.update(stage.encode())
    h.update(config.resolved_yaml().encode())
    h.update(extra.encode())
    for p in inputs:
        h.update(_digest_dir(p).encode())
    return h.hexdigest()


def _up_to_date(out: Path, key: str) -> bool:
    hash_file = out / "stage.hash"
    return hash_file.exists() and hash_file.read_text().strip() == key


def _finish_stage(out: Path, key: str, config: RunConfig) -> None:
    (out / "config.resolved.yaml").write_text(config.resolved_yaml())
    (out / "stage.hash").write_text(key + "\n")


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"NaN/Inf detected in {what}")


def _load_features(features_dir: Path,
                   scenes: list[ImuScene]) -> list[FeatureMatrix]:
    out = []
    for scene in scenes:
        path = features_dir / f"{scene.id}.features.csv"
        if not path.exists():
            raise MissingArtifactError(
                f"missing {path}; run the `extract` stage first")
        out.append(FeatureMatrix.load_csv(path))
    return out


def _load_folds(path: Path) -> list[list[str]]:
    if not path.exists():
        raise MissingArtifactError(
            f"missing {path}; run the `select` stage first")
    return json.loads(path.read_text())["folds"]


def _fold_split(scenes: list[ImuScene], folds: list[list[str]], fold: int,
                val_fraction: float, seed: int):
    test_set = set(folds[fold])
    train_idx = [i for i, s in enumerate(scenes)
                 if s.person_id not in test_set]
    test_idx = [i for i, s in enumerate(scenes) if s.person_id in test_set]
    persons = sorted({scenes[i].person_id for i in train_idx})
    rng = np.random.default_rng(np.random.SeedSequence([seed, fold, 0x5A]))
    perm = [persons[i] for i in rng.permutation(len(persons))]
    n_val = max(1, int(round(val_fraction * len(perm))))
    n_val = min(n_val, len(perm) - 1)
    val_persons = set(perm[:n_val]) if n_val > 0 else set()
    return train_idx, test_idx, val_persons


# -- subcommands ----------------------------------------------------------------

def cmd_synth(args, config: RunConfig) -> int:
    out = _resolve_out(args.out)
    key = _stage_key("synth", config, "", [])
    if _up_to_date(out, key):
        print(f"synth: up to date ({out})")
        return EXIT_OK
    scenes = generate(config.synth)
    for scene in scenes:
        scene.save(out / "scenes")
    _finish_stage(out, key, config)
    print(f"synth: wrote {len(scenes)} scenes to {out / 'scenes'}")
    return EXIT_OK


def cmd_preprocess(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    out = _resolve_out(args.out)
    key = _stage_key("preprocess", config,
                     f"gravity={not args.keep_gravity}", [scenes_dir])
    if _up_to_date(out, key):
        print(f"preprocess: up to date ({out})")
        return EXIT_OK
    scenes = load_corpus(scenes_dir)
    for scene in scenes:
        sig = canonicalize(scene, gravity_removal=not args.keep_gravity)
        _check_finite(sig.values, f"canonical signal of {scene.id}")
        np.savetxt(out / f"{scene.id}.canonical.csv", sig.values,
                   delimiter=",", header=",".join(CHANNELS), comments="",
                   fmt="%.17g")
    _finish_stage(out, key, config)
    print(f"preprocess: wrote {len(scenes)} canonical signals to {out}")
    return EXIT_OK


def _canonical_matrix(path: Path, rate_hz: float) -> CanonicalSignal:
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return CanonicalSignal(values=values, rate_hz=rate_hz)


def cmd_extract(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    canon_dir = _require_dir(args.canonical, "preprocess")
    out = _resolve_out(args.out)
    kind = args.features or config.features.kind
    key = _stage_key("extract", config, f"kind={kind}",
                     [scenes_dir, canon_dir])
    if _up_to_date(out, key):
        print(f"extract: up to date ({out})")
        return EXIT_OK
    scenes = load_corpus(scenes_dir)
    base = config.features
    for scene in scenes:
        canon_path = canon_dir / f"{scene.id}.canonical.csv"
        if not canon_path.exists():
            raise MissingArtifactError(
                f"missing {canon_path}; run the `preprocess` stage first")
        sig = _canonical_matrix(canon_path, scene.rate_hz)
        if kind == "filter":
            fm = FeatureMatrix.hstack([
                assemble(sig, _respec(base, "stats")),
                assemble(sig, _respec(base, "dft"))])
        else:
            fm = assemble(sig, _respec(base, kind))
        fm.save_csv(out / f"{scene.id}.features.csv")
    _finish_stage(out, key, config)
    print(f"extract: wrote {kind} features for {len(scenes)} scenes to {out}")
    return EXIT_OK


def _respec(base: FeatureSpec, kind: str) -> FeatureSpec:
    return FeatureSpec(kind=kind, stat_windows_ms=base.stat_windows_ms,
                       dft_windows_ms=base.dft_windows_ms,
                       dft_degree=base.dft_degree,
                       polynomial_order=base.polynomial_order,
                       composite_columns=base.composite_columns)


def cmd_select(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    features_dir = _require_dir(args.features_dir, "extract")
    out = _resolve_out(args.out)
    k = args.folds or config.evaluate.k_folds
    key = _stage_key("select", config, f"folds={k}",
                     [scenes_dir, features_dir])
    if _up_to_date(out, key):
        print(f"select: up to date ({out})")
        return EXIT_OK
    scenes = load_corpus(scenes_dir)
    matrices = _load_features(features_dir, scenes)
    folds = person_folds(scenes, k, config.seed)
    (out / "folds.json").write_text(
        json.dumps({"k": k, "seed": config.seed, "folds": folds},
                   sort_keys=True, indent=1) + "\n")
    for fold, test_persons in enumerate(folds):
        test_set = set(test_persons)
        train_idx = [i for i, s in enumerate(scenes)
                     if s.person_id not in test_set]
        features = FeatureMatrix(
            columns=matrices[0].columns,
            values=np.vstack([matrices[i].values for i in train_idx]))
        labels = np.concatenate([scenes[i].labels for i in train_idx])
        report = run_selection(features, labels, config=config.selection,
                               fold_id=fold, seed=config.seed)
        report.save(out / f"selection.fold{fold}.json")
        print(f"select: fold {fold} union size {len(report.union)}")
    _finish_stage(out, key, config)
    return EXIT_OK


def cmd_train(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    features_dir = _require_dir(args.features_dir, "extract")
    select_dir = _require_dir(args.select_dir, "select")
    out = _resolve_out(args.out)
    fold = args.fold
    key = _stage_key("train", config, f"fold={fold}",
                     [scenes_dir, features_dir, select_dir])
    if _up_to_date(out, key):
        print(f"train: up to date ({out})")
        return EXIT_OK
    scenes = load_corpus(scenes_dir)
    matrices = _load_features(features_dir, scenes)
    folds = _load_folds(select_dir / "folds.json")
    if not 0 <= fold < len(folds):
        raise ConfigError(f"fold {fold} out of range (k={len(folds)})")

    sel_path = select_dir / f"selection.fold{fold}.json"
    columns = matrices[0].names
    if sel_path.exists():
        columns = SelectionReport.load(sel_path).union

    train_idx, _test_idx, val_persons = _fold_split(
        scenes, folds, fold, val_fraction=0.25, seed=config.seed)

    def data(i):
        fm = matrices[i]
        if fm.names != columns:
            fm = fm.subset(columns)
        return fm, scenes[i].labels

    tr = [data(i) for i in train_idx
          if scenes[i].person_id not in val_persons]
    va = [data(i) for i in train_idx if scenes[i].person_id in val_persons]
    if not va:
        va = tr
    spec = NetworkSpec.of(config.network.variant, config.network.input_window,
                          n_features=len(columns),
                          keep_prob=config.network.keep_prob)
    net, log = train(spec, tr, va, config=config.train, seed=config.seed)
    net.save(out / "checkpoint.bin")
    with open(out / "training_log.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss",
                                                "val_f1"])
        writer.writeheader()
        writer.writerows(log)
    _finish_stage(out, key, config)
    print(f"train: fold {fold} best val F1 "
          f"{max(r['val_f1'] for r in log):.4f}; checkpoint at "
          f"{out / 'checkpoint.bin'}")
    return EXIT_OK


def cmd_detect(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    features_dir = _require_dir(args.features_dir, "extract")
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.exists():
        raise MissingArtifactError(
            f"missing checkpoint {ckpt_path}; run the `train` stage first")
    out = _resolve_out(args.out)
    key = _stage_key("detect", config,
                     f"fold={args.fold}", [scenes_dir, features_dir,
                                           ckpt_path.parent])
    if _up_to_date(out, key):
        print(f"detect: up to date ({out})")
        return EXIT_OK
    scenes = load_corpus(scenes_dir)
    if args.fold is not None and args.select_dir:
        folds = _load_folds(Path(args.select_dir) / "folds.json")
        test_set = set(folds[args.fold])
        scenes = [s for s in scenes if s.person_id in test_set]
    matrices = _load_features(features_dir, scenes)
    net = StartNet.load(ckpt_path)
    for scene, fm in zip(scenes, matrices):
        if fm.names != net.feature_columns:
            fm = fm.subset(net.feature_columns)
        probs = predict_scene(net, fm)
        _check_finite(probs, f"probabilities of {scene.id}")
        data = np.column_stack([scene.t_ms, probs])
        np.savetxt(out / f"{scene.id}.probs.csv", data, delimiter=",",
                   header="t_ms,p_waiting,p_starting,p_moving", comments="",
                   fmt="%.17g")
    _finish_stage(out, key, config)
    print(f"detect: wrote probabilities for {len(scenes)} scenes to {out}")
    return EXIT_OK


def cmd_evaluate(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    probs_dir = _require_dir(args.probs, "detect")
    out = _resolve_out(args.out)
    detector = config.detector
    if args.threshold is not None:
        detector = DetectorConfig(threshold=args.threshold,
                                  min_consecutive=detector.min_consecutive,
                                  signal=detector.signal)
    key = _stage_key("evaluate", config, f"theta={detector.threshold}",
                     [scenes_dir, probs_dir])
    if _up_to_date(out, key):
        print(f"evaluate: up to date ({out})")
        return EXIT_OK
    all_scenes = load_corpus(scenes_dir)
    scenes, prob_seqs = [], []
    for scene in all_scenes:
        path = probs_dir / f"{scene.id}.probs.csv"
        if not path.exists():
            continue
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        _check_finite(data, f"probabilities of {scene.id}")
        scenes.append(scene)
        prob_seqs.append(data[:, 1:4])
    if not scenes:
        raise MissingArtifactError(
            f"no probability files in {probs_dir}; run `detect` first")

    evals = [evaluate_scene(s, p, detector)
             for s, p in zip(scenes, prob_seqs)]
    report = aggregate(evals)
    doc = report.to_dict()
    doc["detector"] = {"threshold": detector.threshold,
                       "min_consecutive": detector.min_consecutive,
                       "signal": detector.signal}
    doc["scenes"] = [{"id": e.scene_id, "outcome": e.outcome,
                      "detection_ms": e.detection_ms,
                      "delay_ms": e.delay_ms} for e in evals]
    (out / "report.json").write_text(
        json.dumps(doc, sort_keys=True, indent=1) + "\n")

    with open(out / "delays.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "delay_ms"])
        for e in evals:
            if e.outcome == "TP":
                writer.writerow([e.scene_id, repr(e.delay_ms)])
    with open(out / "kde.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delay_ms", "density"])
        for x, d in zip(report.kde_x, report.kde_density):
            writer.writerow([repr(x), repr(d)])
    sweep = threshold_sweep(prob_seqs, scenes, config.evaluate.thresholds,
                            min_consecutive=detector.min_consecutive,
                            signal=detector.signal)
    with open(out / "threshold_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall", "f1",
                         "mean_delay_ms"])
        for theta, rep in sweep:
            writer.writerow([repr(theta), repr(rep.precision),
                             repr(rep.recall), repr(rep.f1),
                             repr(rep.mean_delay_ms)
                             if rep.mean_delay_ms is not None else ""])
    _finish_stage(out, key, config)
    print(f"evaluate: F1 {report.f1:.4f} "
          f"(TP {report.n_tp}, FP {report.n_fp}, FN {report.n_fn}), "
          f"mean delay {report.mean_delay_ms} ms")
    return EXIT_OK


def cmd_report(args, config: RunConfig) -> int:
    scenes_dir = _require_dir(args.scenes, "synth")
    out = _resolve_out(args.out)
    key = _stage_key("report", config, "", [scenes_dir])
    if _up_to_date(out, key):
        print(f"report: up to date ({out})")
        return EXIT_OK
    scenes = load_corpus(scenes_dir)
    rows = []
    for exp in config.report.experiments:
        pconfig = PipelineConfig(
            features=exp.features, feature_spec=config.features,
            selection=config.selection, variant=exp.variant,
            input_window=exp.input_window, keep_prob=exp.keep_prob,
            train=config.train, detector=config.detector)
        result = cross_validate(scenes, k=config.report.k_folds,
                                config=pconfig, seed=config.seed)
        rep = result.pooled
        rows.append({"experiment": exp.name, "features": exp.features,
                     "variant": exp.variant, "window": exp.input_window,
                     "keep_prob": exp.keep_prob, "f1": rep.f1,
                     "precision": rep.precision, "recall": rep.recall,
                     "mean_delay_ms": rep.mean_delay_ms})
        print(f"report: {exp.name}: F1 {rep.f1:.4f}, "
              f"mean delay {rep.mean_delay_ms}")
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    lines = ["| experiment | features | window | F1 | mean delay (ms) |",
             "|---|---|---|---|---|"]
    for r in rows:
        delay = (f"{r['mean_delay_ms']:.0f}"
                 if r["mean_delay_ms"] is not None else "-")
        lines.append(f"| {r['experiment']} | {r['features']} | "
                     f"{r['window']} | {r['f1']:.3f} | {delay} |")
    (out / "comparison.md").write_text("\n".join(lines) + "\n")
    _finish_stage(out, key, config)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="startdetect",
        description="Cyclist starting-movement detection pipeline")
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="override the global seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene corpus")
    p.add_argument("--out", required=True)

    p = sub.add_parser("preprocess", help="canonicalize scenes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-gravity", action="store_true",
                   help="do not subtract gravity from world-frame z accel")

    p = sub.add_parser("extract", help="compute feature matrices")
    p.add_argument("--scenes", required=True)
    p.add_argument("--canonical", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--features",
                   choices=["raw4", "stats", "dft", "composite", "filter"])

    p = sub.add_parser("select", help="per-fold feature selection")
    p.add_argument("--scenes", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int)

    p = sub.add_parser("train", help="train a residual network on one fold")
    p.add_argument("--scenes", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--select-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--variant", choices=["small", "large"])
    p.add_argument("--window", type=int)
    p.add_argument("--keep-prob", type=float)

    p = sub.add_parser("detect", help="export per-scene class probabilities")
    p.add_argument("--scenes", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--select-dir")
    p.add_argument("--fold", type=int)

    p = sub.add_parser("evaluate", help="score detections against labels")
    p.add_argument("--scenes", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("report", help="run the experiment grid")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)

    return parser


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
            config.synth.seed = args.seed
        if args.command == "train":
            if args.variant:
                config.network.variant = args.variant
            if args.window:
                config.network.input_window = args.window
            if args.keep_prob is not None:
                config.network.keep_prob = args.keep_prob
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingArtifactError, FileNotFoundError) as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
