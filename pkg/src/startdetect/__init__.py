"""Detection of cyclist starting movements from smart-device inertial data.

Pipeline: attitude-invariant preprocessing -> sliding-window features ->
filter-ensemble feature selection -> residual-network classification ->
scene-level F1/delay evaluation. A synthetic scene generator provides
labeled corpora for end-to-end experiments.
"""

from .scenes import ImuSample, ImuScene, SceneError, load_corpus
from .signal import CanonicalSignal, canonicalize, rotate_to_world
from .features import (Column, FeatureMatrix, FeatureSpec, assemble,
                       window_dft, window_stats)
from .selection import (SelectionConfig, SelectionReport, mutual_information,
                        run_selection, select_elasticnet, select_gbt,
                        select_mifs, select_mrmr, union_select)
from .model import (NetworkSpec, StartNet, TrainConfig, build, predict_scene,
                    train)
from .evaluation import (CrossValidationResult, DetectorConfig,
                         EvaluationReport, PipelineConfig, SceneEvaluation,
                         aggregate, classify_outcome, cross_validate, detect,
                         evaluate_scene, threshold_sweep)
from .synth import SynthConfig, generate

__version__ = "0.1.0"
