"""Shared test fixtures and numeric helpers."""

from __future__ import annotations

import numpy as np
import pytest

from startdetect.scenes import ImuScene


def random_unit_quaternion(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z); textbook formula."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def make_scene(acc_world: np.ndarray, gyro_world: np.ndarray,
               attitude: np.ndarray, rate_hz: float = 100.0,
               labels: np.ndarray | None = None,
               s_ms: float | None = None, m_ms: float | None = None,
               scene_id: str = "s0", person_id: str = "p0") -> ImuScene:
    """Scene whose stored readings are the world-frame signals rotated into
    the device frame described by `attitude` (one quaternion, or (n, 4))."""
    n = len(acc_world)
    att = np.atleast_2d(attitude)
    if att.shape[0] == 1:
        att = np.tile(att, (n, 1))
    # the stored attitude rotates device -> world, so device readings are
    # obtained with the inverse rotation
    acc_dev = np.empty_like(acc_world)
    gyro_dev = np.empty_like(gyro_world)
    for i in range(n):
        r = quat_to_matrix(att[i])
        acc_dev[i] = r.T @ acc_world[i]
        gyro_dev[i] = r.T @ gyro_world[i]
    if labels is None:
        labels = np.zeros(n, dtype=int)
    if s_ms is None:
        s_ms = (n - 1) * 1000.0 / rate_hz
    if m_ms is None:
        m_ms = s_ms
    return ImuScene(id=scene_id, person_id=person_id, rate_hz=rate_hz,
                    t_ms=np.arange(n) * 1000.0 / rate_hz, acc=acc_dev,
                    gyro=gyro_dev, attitude=att, labels=labels,
                    s_ms=s_ms, m_ms=m_ms)


def finite_difference_check(f, params: dict[str, np.ndarray],
                            grads: dict[str, np.ndarray],
                            h: float = 1e-5, tol: float = 1e-4,
                            rng: np.random.Generator | None = None,
                            max_entries: int = 6) -> float:
    """Compare analytic grads to central differences of the scalar f().

    Acceptance: |num - ana| <= tol * max(|num|, |ana|, 1e-3). The absolute
    floor matters for structurally-zero gradients (e.g. a conv bias feeding
    a batch-norm layer, which cancels constant shifts); relative error is
    ill-conditioned at zero. Returns the worst scaled error seen.

    A probe whose numeric estimate is unstable in h (the h and h/4 central
    differences disagree) sits on a non-differentiable point - a relu input
    crossing zero within the step - where finite differences say nothing
    about the analytic gradient; such probes are skipped. A genuine gradient
    bug gives h-stable numeric estimates that disagree with the analytic
    value, which still fails.
    """
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        idxs = rng.choice(flat.size, size=min(max_entries, flat.size),
                          replace=False)
        for i in idxs:
            orig = flat[i]

            def central(step):
                flat[i] = orig + step
                fp = f()
                flat[i] = orig - step
                fm = f()
                flat[i] = orig
                return (fp - fm) / (2 * step)

            num = central(h)
            ana = grads[name].reshape(-1)[i]
            scale = max(abs(num), abs(ana), 1e-3)
            err = abs(num - ana) / scale
            if err > tol:
                num_small = central(h / 4)
                if abs(num - num_small) / scale > 10 * tol:
                    continue  # kink within the step: probe is meaningless
                num = num_small
                scale = max(abs(num), abs(ana), 1e-3)
                err = abs(num - ana) / scale
            worst = max(worst, err)
            assert err <= tol, (
                f"gradient mismatch for {name}[{i}]: "
                f"numeric {num:.8e} vs analytic {ana:.8e} "
                f"(scaled error {err:.2e} > {tol})")
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
