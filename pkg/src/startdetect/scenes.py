"""Scene containers and on-disk scene format.

A scene is one recorded (or synthesized) episode of a cyclist going through
the phases waiting -> starting -> moving. Samples are 9-axis IMU readings
(accelerometer, gyroscope, device attitude quaternion) on a fixed-rate grid,
each carrying one phase label.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WAITING, STARTING, MOVING = 0, 1, 2
LABEL_NAMES = ("waiting", "starting", "moving")
LABEL_CODES = {name: code for code, name in enumerate(LABEL_NAMES)}

QUAT_NORM_TOL = 1e-6

SAMPLES_HEADER = ["t_ms", "ax", "ay", "az", "gx", "gy", "gz",
                  "qw", "qx", "qy", "qz", "label"]


class SceneError(ValueError):
    """Raised when a scene violates its structural invariants."""


@dataclass
class ImuSample:
    """One IMU reading: time, accel (m/s^2), gyro (rad/s), attitude quaternion.

    The quaternion (w, x, y, z) rotates device coordinates into the world
    frame (z up).
    """

    t: float
    acc: np.ndarray
    gyro: np.ndarray
    attitude: np.ndarray

    def __post_init__(self):
        self.acc = np.asarray(self.acc, dtype=float)
        self.gyro = np.asarray(self.gyro, dtype=float)
        self.attitude = np.asarray(self.attitude, dtype=float)


@dataclass
class ImuScene:
    """A labeled scene: sample arrays plus the key instants s and m.

    ``s`` is the time of the first *starting* label, ``m`` the time of the
    first *moving* label (first back-wheel movement), both in ms since scene
    start.
    """

    id: str
    person_id: str
    rate_hz: float
    t_ms: np.ndarray          # (n,)
    acc: np.ndarray           # (n, 3)
    gyro: np.ndarray          # (n, 3)
    attitude: np.ndarray      # (n, 4) quaternions, (w, x, y, z)
    labels: np.ndarray        # (n,) int codes
    s_ms: float
    m_ms: float

    def __post_init__(self):
        self.t_ms = np.asarray(self.t_ms, dtype=float)
        self.acc = np.asarray(self.acc, dtype=float)
        self.gyro = np.asarray(self.gyro, dtype=float)
        self.attitude = np.asarray(self.attitude, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self):
        return len(self.t_ms)

    def sample(self, i: int) -> ImuSample:
        return ImuSample(self.t_ms[i], self.acc[i], self.gyro[i],
                         self.attitude[i])

    def validate(self) -> None:
        """Check structural invariants; raise SceneError on violation."""
        n = len(self.t_ms)
        if n == 0:
            raise SceneError(f"scene {self.id}: empty")
        shapes = {"acc": (n, 3), "gyro": (n, 3), "attitude": (n, 4),
                  "labels": (n,)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise SceneError(
                    f"scene {self.id}: {name} has shape "
                    f"{getattr(self, name).shape}, expected {shape}")
        if np.any(np.diff(self.t_ms) <= 0):
            i = int(np.argmax(np.diff(self.t_ms) <= 0))
            raise SceneError(
                f"scene {self.id}: timestamps not strictly increasing at "
                f"index {i + 1}")
        norms = np.linalg.norm(self.attitude, axis=1)
        bad = np.abs(norms - 1.0) > QUAT_NORM_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SceneError(
                f"scene {self.id}: attitude quaternion at index {i} has "
                f"norm {norms[i]:.9f}, expected 1 +- {QUAT_NORM_TOL}")
        if np.any((self.labels < WAITING) | (self.labels > MOVING)):
            raise SceneError(f"scene {self.id}: unknown label code")
        if np.any(np.diff(self.labels) < 0):
            i = int(np.argmax(np.diff(self.labels) < 0))
            raise SceneError(
                f"scene {self.id}: labels not in waiting->starting->moving "
                f"order at index {i + 1}")
        if self.s_ms > self.m_ms:
            raise SceneError(
                f"scene {self.id}: s ({self.s_ms}) > m ({self.m_ms})")

    # -- persistence -------------------------------------------------------

    def save(self, directory: str | Path) -> Path:
        """Write scene.meta.json + scene.samples.csv under `directory/id/`."""
        out = Path(directory) / self.id
        out.mkdir(parents=True, exist_ok=True)
        meta = {"id": self.id, "person_id": self.person_id,
                "rate_hz": self.rate_hz, "s": self.s_ms, "m": self.m_ms}
        (out / "scene.meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=1) + "\n")
        with open(out / "scene.samples.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SAMPLES_HEADER)
            for i in range(len(self)):
                writer.writerow(
                    [repr(float(self.t_ms[i]))]
                    + [repr(float(v)) for v in self.acc[i]]
                    + [repr(float(v)) for v in self.gyro[i]]
                    + [repr(float(v)) for v in self.attitude[i]]
                    + [LABEL_NAMES[self.labels[i]]])
        return out

    @classmethod
    def load(cls, scene_dir: str | Path) -> "ImuScene":
        scene_dir = Path(scene_dir)
        meta_path = scene_dir / "scene.meta.json"
        samples_path = scene_dir / "scene.samples.csv"
        if not meta_path.exists() or not samples_path.exists():
            raise FileNotFoundError(f"not a scene directory: {scene_dir}")
        meta = json.loads(meta_path.read_text())
        rows = []
        with open(samples_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != SAMPLES_HEADER:
                raise SceneError(
                    f"{samples_path}: unexpected header {header}")
            rows = list(reader)
        n = len(rows)
        t = np.empty(n)
        acc = np.empty((n, 3))
        gyro = np.empty((n, 3))
        att = np.empty((n, 4))
        labels = np.empty(n, dtype=np.int64)
        for i, row in enumerate(rows):
            vals = [float(v) for v in row[:11]]
            t[i] = vals[0]
            acc[i] = vals[1:4]
            gyro[i] = vals[4:7]
            att[i] = vals[7:11]
            labels[i] = LABEL_CODES[row[11]]
        scene = cls(id=meta["id"], person_id=meta["person_id"],
                    rate_hz=meta["rate_hz"], t_ms=t, acc=acc, gyro=gyro,
                    attitude=att, labels=labels, s_ms=meta["s"],
                    m_ms=meta["m"])
        scene.validate()
        return scene


def load_corpus(directory: str | Path) -> list[ImuScene]:
    """Load every scene directory under `directory`, sorted by scene id."""
    directory = Path(directory)
    scene_dirs = sorted(p for p in directory.iterdir()
                        if (p / "scene.meta.json").exists())
    if not scene_dirs:
        raise FileNotFoundError(f"no scenes found under {directory}")
    return [ImuScene.load(p) for p in scene_dirs]
