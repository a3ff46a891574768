"""Scene-level scoring: TP/FP/FN semantics, F1, detection delay.

A scene prediction is a per-time-step probability sequence. The detector
fires at the first step where the detection probability (by default
P(starting) + P(moving)) has stayed at or above the threshold for
`min_consecutive` steps. Outcomes:

* TP - detection at or after the first starting label (time s); the delay
  is measured against the first moving label (time m) and may be negative,
* FP - detection strictly before s,
* FN - no detection at all.

Delays enter the statistics for true positives only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.stats import gaussian_kde

from .features import FeatureMatrix, FeatureSpec, assemble
from .model import NetworkSpec, StartNet, TrainConfig, predict_scene, train
from .scenes import ImuScene
from .selection import SelectionConfig, SelectionReport, run_selection
from .signal import canonicalize

DETECTION_SIGNALS = ("non_waiting", "moving")


class EvaluationError(ValueError):
    pass


@dataclass
class DetectorConfig:
    threshold: float = 0.5
    min_consecutive: int = 1
    signal: str = "non_waiting"

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise EvaluationError(
                f"threshold must be in [0, 1], got {self.threshold}")
        if self.min_consecutive < 1:
            raise EvaluationError("min_consecutive must be >= 1")
        if self.signal not in DETECTION_SIGNALS:
            raise EvaluationError(f"unknown detection signal {self.signal!r}")


@dataclass
class SceneEvaluation:
    scene_id: str
    outcome: str                    # "TP" | "FP" | "FN"
    detection_ms: float | None = None
    delay_ms: float | None = None


@dataclass
class EvaluationReport:
    n_tp: int
    n_fp: int
    n_fn: int
    precision: float
    recall: float
    f1: float
    mean_delay_ms: float | None
    median_delay_ms: float | None
    delay_quantiles_ms: dict[str, float]
    delays_ms: list[float]
    kde_x: list[float] = field(default_factory=list)
    kde_density: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def detection_probability(probs: np.ndarray,
                          config: DetectorConfig) -> np.ndarray:
    """Collapse (T, 3) class probabilities to the detector's scalar signal."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim == 1:
        return probs
    if config.signal == "moving":
        return probs[:, 2]
    return probs[:, 1] + probs[:, 2]


def detect(prob_sequence: np.ndarray,
           config: DetectorConfig) -> int | None:
    """First step at which the detection criterion is satisfied, or None.

    The detector reports at the end of the qualifying run: the returned
    index is the min_consecutive-th consecutive step at or above the
    threshold (an online detector cannot report earlier).
    """
    p = detection_probability(prob_sequence, config)
    # summing two class probabilities can overshoot 1 by rounding
    # (single-precision inference rounds each term to ~1e-7)
    tol = 1e-6
    if np.any(~np.isfinite(p)) or np.any((p < -tol) | (p > 1 + tol)):
        raise EvaluationError("probabilities outside [0, 1]")
    above = p >= config.threshold
    run = 0
    for i, flag in enumerate(above):
        run = run + 1 if flag else 0
        if run >= config.min_consecutive:
            return i
    return None


def classify_outcome(scene: ImuScene,
                     detection_ms: float | None) -> SceneEvaluation:
    """Map a detection time (ms since scene start) to TP/FP/FN."""
    if scene.s_ms is None or scene.m_ms is None or \
            not np.isfinite(scene.s_ms) or not np.isfinite(scene.m_ms):
        raise EvaluationError(f"scene {scene.id} is missing s/m instants")
    if detection_ms is None:
        return SceneEvaluation(scene.id, "FN")
    if detection_ms >= scene.s_ms:
        return SceneEvaluation(scene.id, "TP", detection_ms,
                               detection_ms - scene.m_ms)
    return SceneEvaluation(scene.id, "FP", detection_ms)


def evaluate_scene(scene: ImuScene, probs: np.ndarray,
                   config: DetectorConfig) -> SceneEvaluation:
    idx = detect(probs, config)
    detection_ms = None if idx is None else float(scene.t_ms[idx])
    return classify_outcome(scene, detection_ms)


def aggregate(evaluations: list[SceneEvaluation]) -> EvaluationReport:
    """Precision/recall/F1 plus delay statistics and a Gaussian KDE."""
    if not evaluations:
        raise EvaluationError("nothing to aggregate")
    n_tp = sum(e.outcome == "TP" for e in evaluations)
    n_fp = sum(e.outcome == "FP" for e in evaluations)
    n_fn = sum(e.outcome == "FN" for e in evaluations)
    precision = n_tp / (n_tp + n_fp) if n_tp + n_fp else 0.0
    recall = n_tp / (n_tp + n_fn) if n_tp + n_fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)

    delays = np.array([e.delay_ms for e in evaluations
                       if e.outcome == "TP"], dtype=float)
    if len(delays):
        quantiles = {f"q{int(q * 100):02d}":
                     float(np.quantile(delays, q))
                     for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
        mean_delay = float(delays.mean())
        median_delay = float(np.median(delays))
    else:
        quantiles = {}
        mean_delay = None
        median_delay = None

    kde_x: list[float] = []
    kde_density: list[float] = []
    if len(delays) >= 2 and delays.std() > 0:
        kde = gaussian_kde(delays, bw_method="silverman")
        bw = float(np.sqrt(kde.covariance[0, 0]))
        grid = np.linspace(delays.min() - 3 * bw, delays.max() + 3 * bw, 200)
        kde_x = grid.tolist()
        kde_density = kde(grid).tolist()

    return EvaluationReport(
        n_tp=n_tp, n_fp=n_fp, n_fn=n_fn, precision=precision, recall=recall,
        f1=f1, mean_delay_ms=mean_delay, median_delay_ms=median_delay,
        delay_quantiles_ms=quantiles, delays_ms=delays.tolist(),
        kde_x=kde_x, kde_density=kde_density)


def threshold_sweep(prob_sequences: list[np.ndarray],
                    scenes: list[ImuScene], thetas: list[float],
                    min_consecutive: int = 1,
                    signal: str = "non_waiting",
                    ) -> list[tuple[float, EvaluationReport]]:
    """One evaluation report per threshold; thetas must be sorted ascending."""
    if list(thetas) != sorted(thetas):
        raise EvaluationError("thresholds must be sorted ascending")
    if len(prob_sequences) != len(scenes):
        raise EvaluationError("one probability sequence per scene required")
    out = []
    for theta in thetas:
        config = DetectorConfig(threshold=theta,
                                min_consecutive=min_consecutive,
                                signal=signal)
        evals = [evaluate_scene(scene, probs, config)
                 for scene, probs in zip(scenes, prob_sequences)]
        out.append((theta, aggregate(evals)))
    return out


# -- cross-validation ------------------------------------------------------------


@dataclass
class PipelineConfig:
    """Everything one end-to-end pipeline run needs."""

    features: str = "filter"          # raw4 | stats | dft | filter
    feature_spec: FeatureSpec = field(default_factory=FeatureSpec)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    variant: str = "small"
    input_window: int = 50
    keep_prob: float = 0.6
    train: TrainConfig = field(default_factory=TrainConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    gravity_removal: bool = True
    val_person_fraction: float = 0.25


@dataclass
class FoldResult:
    fold_id: int
    test_persons: list[str]
    report: EvaluationReport
    evaluations: list[SceneEvaluation]
    selection: SelectionReport | None
    training_log: list[dict]


@dataclass
class CrossValidationResult:
    fold_results: list[FoldResult]
    pooled: EvaluationReport

    def fold_reports(self) -> list[EvaluationReport]:
        return [f.report for f in self.fold_results]


def person_folds(scenes: list[ImuScene], k: int,
                 seed: int) -> list[list[str]]:
    """Partition person ids into k folds, invariant to scene order."""
    persons = sorted({s.person_id for s in scenes})
    if len(persons) < k:
        raise EvaluationError(
            f"need at least {k} distinct persons, got {len(persons)}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    perm = [persons[i] for i in rng.permutation(len(persons))]
    return [list(chunk) for chunk in np.array_split(perm, k)]


def base_feature_matrix(scene: ImuScene,
                        config: PipelineConfig) -> FeatureMatrix:
    """Feature matrix before any per-fold column selection."""
    sig = canonicalize(scene, gravity_removal=config.gravity_removal)
    spec = config.feature_spec
    if config.features == "filter":
        stats_spec = FeatureSpec(
            kind="stats", stat_windows_ms=spec.stat_windows_ms,
            dft_windows_ms=spec.dft_windows_ms, dft_degree=spec.dft_degree,
            polynomial_order=spec.polynomial_order)
        dft_spec = FeatureSpec(
            kind="dft", stat_windows_ms=spec.stat_windows_ms,
            dft_windows_ms=spec.dft_windows_ms, dft_degree=spec.dft_degree,
            polynomial_order=spec.polynomial_order)
        return FeatureMatrix.hstack([assemble(sig, stats_spec),
                                     assemble(sig, dft_spec)])
    kind_spec = FeatureSpec(
        kind=config.features, stat_windows_ms=spec.stat_windows_ms,
        dft_windows_ms=spec.dft_windows_ms, dft_degree=spec.dft_degree,
        polynomial_order=spec.polynomial_order,
        composite_columns=spec.composite_columns)
    return assemble(sig, kind_spec)


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def run_fold(scenes: list[ImuScene], matrices: list[FeatureMatrix],
             test_persons: list[str], config: PipelineConfig,
             fold_id: int, seed: int) -> FoldResult:
    """Select features, train and evaluate one fold."""
    test_set = set(test_persons)
    train_idx = [i for i, s in enumerate(scenes)
                 if s.person_id not in test_set]
    test_idx = [i for i, s in enumerate(scenes) if s.person_id in test_set]
    if not train_idx or not test_idx:
        raise EvaluationError(f"fold {fold_id}: empty train or test split")

    fold_seed = _fold_seed(seed, fold_id)

    selection = None
    columns = matrices[0].names
    if config.features == "filter":
        sel_features = FeatureMatrix(
            columns=matrices[0].columns,
            values=np.vstack([matrices[i].values for i in train_idx]))
        sel_labels = np.concatenate([scenes[i].labels for i in train_idx])
        selection = run_selection(sel_features, sel_labels,
                                  config=config.selection, fold_id=fold_id,
                                  seed=fold_seed)
        columns = selection.union

    # person-grouped train/validation split inside the fold
    train_persons = sorted({scenes[i].person_id for i in train_idx})
    rng = np.random.default_rng(np.random.SeedSequence([fold_seed, 0x5A]))
    perm = [train_persons[i] for i in rng.permutation(len(train_persons))]
    n_val = max(1, int(round(config.val_person_fraction * len(perm))))
    if n_val >= len(perm):
        n_val = len(perm) - 1
    val_persons = set(perm[:n_val]) if n_val > 0 else set()

    def scene_data(i):
        fm = matrices[i]
        if columns != fm.names:
            fm = fm.subset(columns)
        return fm, scenes[i].labels

    tr_data = [scene_data(i) for i in train_idx
               if scenes[i].person_id not in val_persons]
    va_data = [scene_data(i) for i in train_idx
               if scenes[i].person_id in val_persons]
    if not va_data:  # single training person: fall back to train scenes
        va_data = tr_data

    spec = NetworkSpec.of(config.variant, config.input_window,
                          n_features=len(columns),
                          keep_prob=config.keep_prob)
    net, log = train(spec, tr_data, va_data, config=config.train,
                     seed=fold_seed)
    if config.train.dtype == "float32":  # match training precision/speed
        net.cast(np.float32)

    evaluations = []
    # the detector fires on the first qualifying run, so inference can
    # stop as soon as a detection exists in the prefix
    first_crossing = lambda p: detect(p, config.detector) is not None
    for i in test_idx:
        fm, _ = scene_data(i)
        probs = predict_scene(net, fm, batch_size=256,
                              early_stop=first_crossing)
        evaluations.append(evaluate_scene(scenes[i], probs, config.detector))
    return FoldResult(fold_id=fold_id, test_persons=list(test_persons),
                      report=aggregate(evaluations),
                      evaluations=evaluations, selection=selection,
                      training_log=log)


def cross_validate(scenes: list[ImuScene], k: int = 5,
                   config: PipelineConfig | None = None,
                   seed: int = 0) -> CrossValidationResult:
    """Person-grouped k-fold cross-validation of the full pipeline.

    Feature selection and training happen inside each fold on training
    scenes only; the pooled report aggregates every test-fold evaluation.
    """
    config = config or PipelineConfig()
    folds = person_folds(scenes, k, seed)
    matrices = [base_feature_matrix(s, config) for s in scenes]
    fold_results = [run_fold(scenes, matrices, folds[i], config, i, seed)
                    for i in range(k)]
    pooled = aggregate([e for f in fold_results for e in f.evaluations])
    return CrossValidationResult(fold_results=fold_results, pooled=pooled)
