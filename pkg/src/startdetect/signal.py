"""Attitude-invariant canonical representation of a scene.

Rotates accelerometer and gyroscope readings into the world frame (z up)
using the per-sample attitude quaternion, then collapses x/y into their
magnitude. The result is a 4-channel signal that no longer depends on how
the device was oriented in the pocket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenes import QUAT_NORM_TOL, ImuSample, ImuScene, SceneError

GRAVITY = 9.81  # m/s^2

CHANNELS = ("acc_mag_xy", "acc_z", "gyro_mag_xy", "gyro_z")

# accepted deviation of a timestamp from the nominal sample grid
JITTER_TOL_MS = 1.0


@dataclass
class CanonicalSignal:
    """4-channel attitude-invariant signal, one row per time step.

    Channel order: acc_mag_xy, acc_z, gyro_mag_xy, gyro_z.
    """

    values: np.ndarray  # (n, 4)
    rate_hz: float

    def __len__(self):
        return len(self.values)

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, CHANNELS.index(name)]


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors `v` by unit quaternions `q` (w, x, y, z).

    Both arguments broadcast: q is (..., 4), v is (..., 3).
    Uses v' = v + 2 w (u x v) + 2 u x (u x v) with u the vector part.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def rotate_to_world(sample: ImuSample) -> tuple[np.ndarray, np.ndarray]:
    """Rotate one sample's acc and gyro vectors into the world frame.

    Rejects samples whose attitude quaternion is not unit-norm.
    """
    norm = np.linalg.norm(sample.attitude)
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise SceneError(
            f"sample at t={sample.t} ms: attitude quaternion norm "
            f"{norm:.9f} deviates from 1 beyond {QUAT_NORM_TOL}")
    return (quat_rotate(sample.attitude, sample.acc),
            quat_rotate(sample.attitude, sample.gyro))


def _check_sampling(scene: ImuScene) -> None:
    """Verify the timestamps sit on the nominal grid within jitter tolerance."""
    period = 1000.0 / scene.rate_hz
    rel = scene.t_ms - scene.t_ms[0]
    idx = np.round(rel / period)
    off = np.abs(rel - idx * period)
    bad = off > JITTER_TOL_MS
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SceneError(
            f"scene {scene.id}: sample at index {i} (t={scene.t_ms[i]} ms) "
            f"is {off[i]:.3f} ms off the {period:.1f} ms grid "
            f"(tolerance {JITTER_TOL_MS} ms)")
    if np.any(np.diff(idx) != 1):
        i = int(np.argmax(np.diff(idx) != 1))
        gap = (scene.t_ms[i + 1] - scene.t_ms[i])
        raise SceneError(
            f"scene {scene.id}: irregular sampling between indices {i} and "
            f"{i + 1} (gap {gap:.3f} ms, expected {period:.1f} ms)")


def canonicalize(scene: ImuScene, gravity_removal: bool = True) -> CanonicalSignal:
    """Build the 4-channel canonical signal of a scene.

    Per time step: rotate acc/gyro to the world frame, take the xy magnitude
    and the z component of each; with `gravity_removal` the constant gravity
    g = 9.81 m/s^2 is subtracted from the world-frame z acceleration.
    """
    if len(scene) < 1:
        raise SceneError(f"scene {scene.id}: empty")
    norms = np.linalg.norm(scene.attitude, axis=1)
    bad = np.abs(norms - 1.0) > QUAT_NORM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SceneError(
            f"scene {scene.id}: non-unit attitude quaternion at index {i} "
            f"(norm {norms[i]:.9f})")
    _check_sampling(scene)

    acc_w = quat_rotate(scene.attitude, scene.acc)
    gyro_w = quat_rotate(scene.attitude, scene.gyro)
    acc_z = acc_w[:, 2] - GRAVITY if gravity_removal else acc_w[:, 2]
    out = np.column_stack([
        np.hypot(acc_w[:, 0], acc_w[:, 1]),
        acc_z,
        np.hypot(gyro_w[:, 0], gyro_w[:, 1]),
        gyro_w[:, 2],
    ])
    return CanonicalSignal(values=out, rate_hz=scene.rate_hz)
