"""Canonical 4-channel signal: rotation, invariance, sampling checks."""

import numpy as np
import pytest

from startdetect.scenes import ImuScene, SceneError
from startdetect.signal import (CHANNELS, GRAVITY, CanonicalSignal,
                                canonicalize, quat_rotate, rotate_to_world)

from conftest import make_scene, quat_to_matrix, random_unit_quaternion


class TestQuatRotate:
    def test_matches_rotation_matrix_oracle(self, rng):
        # [DERIVED] oracle: matrix form of the same quaternion
        for _ in range(50):
            q = random_unit_quaternion(rng)
            v = rng.normal(size=3)
            expected = quat_to_matrix(q) @ v
            np.testing.assert_allclose(quat_rotate(q, v), expected,
                                       atol=1e-12)

    def test_quarter_turn_about_z(self):
        # [DERIVED] 90 degrees about z maps (1, 2, 3) -> (-2, 1, 3)
        q = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])
        np.testing.assert_allclose(quat_rotate(q, np.array([1.0, 2.0, 3.0])),
                                   [-2.0, 1.0, 3.0], atol=1e-12)

    def test_identity_quaternion_is_noop(self, rng):
        v = rng.normal(size=(10, 3))
        np.testing.assert_allclose(
            quat_rotate(np.array([1.0, 0, 0, 0]), v), v, atol=1e-15)

    def test_preserves_norm(self, rng):
        # [TRIVIAL] rotations are isometries
        for _ in range(20):
            q = random_unit_quaternion(rng)
            v = rng.normal(size=3)
            assert np.linalg.norm(quat_rotate(q, v)) == \
                pytest.approx(np.linalg.norm(v), rel=1e-12)

    def test_vectorized_matches_loop(self, rng):
        qs = np.stack([random_unit_quaternion(rng) for _ in range(8)])
        vs = rng.normal(size=(8, 3))
        batch = quat_rotate(qs, vs)
        for i in range(8):
            np.testing.assert_allclose(batch[i], quat_rotate(qs[i], vs[i]),
                                       atol=1e-14)

    def test_rotate_to_world_rejects_non_unit_quaternion(self, rng):
        scene = make_scene(np.zeros((3, 3)), np.zeros((3, 3)),
                           np.array([1.0, 0, 0, 0]))
        sample = scene.sample(0)
        sample.attitude = np.array([1.0, 0.0, 0.1, 0.0])
        with pytest.raises(SceneError, match="norm"):
            rotate_to_world(sample)


class TestCanonicalize:
    def test_attitude_invariance(self, rng):
        # the same world-frame motion seen through two different fixed
        # device attitudes must canonicalize identically
        n = 64
        acc_w = rng.normal(size=(n, 3))
        acc_w[:, 2] += GRAVITY
        gyro_w = rng.normal(size=(n, 3))
        outs = []
        for _ in range(2):
            q = random_unit_quaternion(rng)
            sig = canonicalize(make_scene(acc_w.copy(), gyro_w.copy(), q))
            outs.append(sig.values)
        np.testing.assert_allclose(outs[0], outs[1], atol=1e-9)

    def test_z_rotation_of_world_motion_is_invisible(self, rng):
        # rotating the world-frame xy components about z changes neither
        # the xy magnitudes nor the z channels
        n = 32
        acc_w = rng.normal(size=(n, 3))
        gyro_w = rng.normal(size=(n, 3))
        ang = 1.234
        rz = np.array([[np.cos(ang), -np.sin(ang), 0],
                       [np.sin(ang), np.cos(ang), 0], [0, 0, 1.0]])
        a = canonicalize(make_scene(acc_w, gyro_w, np.array([1.0, 0, 0, 0]),
                                    rate_hz=100.0), gravity_removal=False)
        b = canonicalize(make_scene(acc_w @ rz.T, gyro_w @ rz.T,
                                    np.array([1.0, 0, 0, 0]), rate_hz=100.0),
                         gravity_removal=False)
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)

    def test_stationary_scene_with_gravity_removed_is_zero(self):
        n = 16
        acc_w = np.zeros((n, 3))
        acc_w[:, 2] = GRAVITY  # stationary device only measures gravity
        scene = make_scene(acc_w, np.zeros((n, 3)),
                           np.array([0.5, 0.5, 0.5, 0.5]))
        sig = canonicalize(scene, gravity_removal=True)
        np.testing.assert_allclose(sig.values, 0.0, atol=1e-9)

    def test_gravity_removal_flag(self):
        n = 8
        acc_w = np.zeros((n, 3))
        acc_w[:, 2] = GRAVITY
        scene = make_scene(acc_w, np.zeros((n, 3)), np.array([1.0, 0, 0, 0]))
        kept = canonicalize(scene, gravity_removal=False)
        np.testing.assert_allclose(kept.channel("acc_z"), GRAVITY,
                                   atol=1e-12)

    def test_channel_order(self):
        assert CHANNELS == ("acc_mag_xy", "acc_z", "gyro_mag_xy", "gyro_z")
        n = 4
        acc_w = np.tile([3.0, 4.0, 7.0], (n, 1))
        gyro_w = np.tile([0.6, 0.8, 2.0], (n, 1))
        sig = canonicalize(make_scene(acc_w, gyro_w,
                                      np.array([1.0, 0, 0, 0])),
                           gravity_removal=False)
        # [DERIVED] hypot(3,4)=5 and hypot(.6,.8)=1
        np.testing.assert_allclose(sig.values[0], [5.0, 7.0, 1.0, 2.0],
                                   atol=1e-12)

    def test_non_unit_quaternion_rejected(self, rng):
        scene = make_scene(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)),
                           np.array([1.0, 0, 0, 0]))
        scene.attitude[3] *= 1.001
        with pytest.raises(SceneError, match="index 3"):
            canonicalize(scene)


class TestSamplingChecks:
    def _scene(self, t_ms):
        n = len(t_ms)
        return ImuScene(id="s", person_id="p", rate_hz=100.0,
                        t_ms=np.asarray(t_ms, dtype=float),
                        acc=np.zeros((n, 3)), gyro=np.zeros((n, 3)),
                        attitude=np.tile([1.0, 0, 0, 0], (n, 1)),
                        labels=np.zeros(n, dtype=int), s_ms=0.0, m_ms=0.0)

    def test_jitter_within_tolerance_accepted(self):
        t = np.arange(20) * 10.0
        t[5] += 0.8  # below the 1 ms tolerance
        canonicalize(self._scene(t))

    def test_jitter_beyond_tolerance_rejected(self):
        t = np.arange(20) * 10.0
        t[7] += 2.0
        with pytest.raises(SceneError, match="index 7"):
            canonicalize(self._scene(t))

    def test_dropped_sample_rejected(self):
        t = np.concatenate([np.arange(10), np.arange(11, 20)]) * 10.0
        with pytest.raises(SceneError, match="irregular sampling"):
            canonicalize(self._scene(t))

    def test_channel_accessor(self):
        sig = CanonicalSignal(values=np.arange(8.0).reshape(2, 4),
                              rate_hz=100.0)
        np.testing.assert_array_equal(sig.channel("gyro_mag_xy"), [2.0, 6.0])
