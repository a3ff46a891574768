"""Train a small detector and watch it fire on a held-out scene.

The classifier sees sliding windows of the feature matrix and outputs
P(waiting), P(starting), P(moving) per time step. The detector fires when
P(starting) + P(moving) stays at or above a threshold for a run of
consecutive steps; firing before the labeled starting instant s is a false
positive, at or after s a true positive, and the delay is measured against
the first actual movement m (negative delay = anticipation).
"""

import numpy as np

from startdetect.evaluation import (DetectorConfig, base_feature_matrix,
                                    evaluate_scene, PipelineConfig)
from startdetect.model import NetworkSpec, TrainConfig, predict_scene, train
from startdetect.synth import SynthConfig, generate

scenes = generate(SynthConfig(n_scenes=10, scenes_per_person=2, seed=2))
held_out = scenes[-1]

pipe = PipelineConfig(features="raw4", input_window=10)
data = [(base_feature_matrix(s, pipe), s.labels) for s in scenes]

net, log = train(
    NetworkSpec.small(input_window=10, n_features=4, keep_prob=0.8),
    data[:8], data[8:9],
    config=TrainConfig(max_epochs=3, batch_size=64,
                       max_windows_per_class=300, max_val_windows=300,
                       dtype="float32"),
    seed=0)
for row in log:
    print(f"epoch {row['epoch']}: train loss {row['train_loss']:.3f}  "
          f"val F1 {row['val_f1']:.3f}")
print()

probs = predict_scene(net, data[-1][0])
detector = DetectorConfig(threshold=0.5, min_consecutive=10)
result = evaluate_scene(held_out, probs, detector)

print(f"held-out scene {held_out.id}: starting at s={held_out.s_ms:.0f} ms, "
      f"moving at m={held_out.m_ms:.0f} ms")
print(f"detector: {result.outcome} at {result.detection_ms} ms "
      f"(delay vs m: {result.delay_ms} ms)")
print()
print("P(starting)+P(moving) around the detection:")
idx = int(result.detection_ms / 10)
for t in range(max(idx - 3, 0), min(idx + 3, len(probs))):
    bar = "#" * int(30 * (probs[t, 1] + probs[t, 2]))
    print(f"  {held_out.t_ms[t]:6.0f} ms  {probs[t,1]+probs[t,2]:.3f} {bar}")
