"""Synthetic labeled cyclist scenes: waiting -> starting -> moving.

Each scene is built in the world frame (z up): a quiet waiting phase with
occasional fidget bursts (leg switches, pedal preparation), a ramping
acceleration/gyro envelope from the starting instant s, and sustained
pedaling oscillation from the moving instant m. The whole scene is then
rotated into a random fixed device attitude, which the stored quaternion
undoes - generated corpora exercise the rotation invariance of the
canonical representation end to end.

Ground-truth s and m are exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenes import MOVING, STARTING, WAITING, ImuScene
from .signal import GRAVITY


@dataclass
class SynthConfig:
    n_scenes: int = 200
    scenes_per_person: int = 10
    rate_hz: float = 100.0
    waiting_range_s: tuple[float, float] = (1.5, 4.5)
    starting_range_s: tuple[float, float] = (0.5, 1.5)
    moving_range_s: tuple[float, float] = (1.5, 3.0)
    acc_noise: float = 0.05       # m/s^2, all phases
    gyro_noise: float = 0.02      # rad/s
    start_acc_amplitude: float = 1.5
    start_gyro_amplitude: float = 0.6
    move_acc_amplitude: float = 2.5
    move_gyro_amplitude: float = 1.0
    cadence_range_hz: tuple[float, float] = (0.8, 1.5)
    fidget_rate_per_s: float = 0.45    # expected bursts per waiting second
    fidget_amp_range: tuple[float, float] = (0.25, 0.45)  # vs start amplitude
    fidget_len_range_ms: tuple[float, float] = (120.0, 350.0)
    seed: int = 0

    def validate(self) -> None:
        for name in ("waiting_range_s", "starting_range_s",
                     "moving_range_s"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise ValueError(f"{name} must be positive and ordered")
        if self.acc_noise < 0 or self.gyro_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if self.n_scenes < 1:
            raise ValueError("n_scenes must be >= 1")


def _random_unit_quaternion(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def _rotate_world_to_device(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Inverse rotation of the stored device-to-world attitude."""
    conj = np.array([q[0], -q[1], -q[2], -q[3]])
    w, u = conj[0], conj[1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def _generate_scene(scene_id: str, person_id: str, config: SynthConfig,
                    rng: np.random.Generator,
                    person_scale: float) -> ImuScene:
    dt_ms = 1000.0 / config.rate_hz
    wait_s = rng.uniform(*config.waiting_range_s)
    start_s = rng.uniform(*config.starting_range_s)
    move_s = rng.uniform(*config.moving_range_s)
    n_wait = max(1, int(round(wait_s * config.rate_hz)))
    n_start = max(1, int(round(start_s * config.rate_hz)))
    n_move = max(1, int(round(move_s * config.rate_hz)))
    n = n_wait + n_start + n_move
    t_ms = np.arange(n) * dt_ms
    s_ms = t_ms[n_wait]
    m_ms = t_ms[n_wait + n_start]
    labels = np.concatenate([np.full(n_wait, WAITING),
                             np.full(n_start, STARTING),
                             np.full(n_move, MOVING)])

    acc = np.zeros((n, 3))
    gyro = np.zeros((n, 3))
    t_s = t_ms / 1000.0

    # waiting: fidget bursts (half-sine envelope) on a random heading
    a_start = config.start_acc_amplitude * person_scale
    g_start = config.start_gyro_amplitude * person_scale
    n_bursts = rng.poisson(config.fidget_rate_per_s * wait_s)
    for _ in range(n_bursts):
        length = int(round(rng.uniform(*config.fidget_len_range_ms) / dt_ms))
        length = max(length, 2)
        begin = rng.integers(0, max(n_wait - length, 1))
        amp = rng.uniform(*config.fidget_amp_range) * a_start
        heading = rng.uniform(0, 2 * np.pi)
        envelope = np.sin(np.pi * np.arange(length) / (length - 1))
        seg = slice(begin, begin + length)
        acc[seg, 0] += amp * envelope * np.cos(heading)
        acc[seg, 1] += amp * envelope * np.sin(heading)
        gyro[seg, 2] += (amp / a_start) * g_start * envelope \
            * rng.choice([-1.0, 1.0])

    # starting: envelope ramps from 0 at s to 1 at m
    heading = rng.uniform(0, 2 * np.pi)
    seg = slice(n_wait, n_wait + n_start)
    ramp = np.arange(1, n_start + 1) / n_start
    wobble = 0.7 + 0.3 * np.sin(2 * np.pi * 2.0 * t_s[seg])
    acc[seg, 0] += a_start * ramp * wobble * np.cos(heading)
    acc[seg, 1] += a_start * ramp * wobble * np.sin(heading)
    acc[seg, 2] += 0.3 * a_start * ramp
    gyro[seg, 0] += g_start * ramp * np.sin(2 * np.pi * 1.5 * t_s[seg])
    gyro[seg, 1] += 0.5 * g_start * ramp
    gyro[seg, 2] += 0.3 * g_start * ramp

    # moving: sustained pedaling oscillation
    a_move = config.move_acc_amplitude * person_scale
    g_move = config.move_gyro_amplitude * person_scale
    cadence = rng.uniform(*config.cadence_range_hz)
    phase = rng.uniform(0, 2 * np.pi)
    seg = slice(n_wait + n_start, n)
    osc = np.sin(2 * np.pi * cadence * t_s[seg] + phase)
    osc2 = np.sin(4 * np.pi * cadence * t_s[seg] + 2 * phase)
    acc[seg, 0] += a_move * (0.6 + 0.4 * osc) * np.cos(heading)
    acc[seg, 1] += a_move * (0.6 + 0.4 * osc) * np.sin(heading)
    acc[seg, 2] += 0.4 * a_move * osc2
    gyro[seg, 0] += g_move * osc
    gyro[seg, 1] += 0.5 * g_move * osc2
    gyro[seg, 2] += 0.4 * g_move * (0.5 + 0.5 * osc)

    if config.acc_noise > 0:
        acc += rng.normal(0.0, config.acc_noise, size=acc.shape)
    if config.gyro_noise > 0:
        gyro += rng.normal(0.0, config.gyro_noise, size=gyro.shape)

    # gravity in the world frame, then rotate everything into the device
    acc[:, 2] += GRAVITY
    attitude = _random_unit_quaternion(rng)
    acc_dev = _rotate_world_to_device(attitude, acc)
    gyro_dev = _rotate_world_to_device(attitude, gyro)
    att = np.tile(attitude, (n, 1))

    return ImuScene(id=scene_id, person_id=person_id, rate_hz=config.rate_hz,
                    t_ms=t_ms, acc=acc_dev, gyro=gyro_dev, attitude=att,
                    labels=labels, s_ms=float(s_ms), m_ms=float(m_ms))


def generate(config: SynthConfig) -> list[ImuScene]:
    """Generate the configured corpus; deterministic given config.seed."""
    config.validate()
    # scene i depends only on (seed, i), never on n_scenes, so growing a
    # corpus keeps its prefix intact
    person_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, 0x9E75]))
    n_persons = -(-config.n_scenes // config.scenes_per_person)
    person_scales = person_rng.uniform(0.8, 1.2, size=n_persons)

    scenes = []
    for i in range(config.n_scenes):
        person = i // config.scenes_per_person
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, i]))
        scene = _generate_scene(
            scene_id=f"scene{i:04d}", person_id=f"person{person:03d}",
            config=config, rng=rng, person_scale=person_scales[person])
        scene.validate()
        scenes.append(scene)
    return scenes
