"""Synthetic labeled point-cloud dataset: six analytic surface classes.

Each sample is drawn from the surface of a canonical shape, jittered with
small Gaussian noise, randomly rotated and scaled, then unit-ball
normalized. Generation is bitwise deterministic for a fixed seed.
"""

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, normalize_unit_ball
from .rng import stage_rng

CLASS_NAMES = ("sphere", "cube", "cylinder", "torus", "cone", "plane")


@dataclass(frozen=True)
class SyntheticDataset:
    samples: list  # list[PointCloud], label set on each cloud
    seed: int
    class_names: tuple = CLASS_NAMES
    jitter: float = 0.01

    def __len__(self):
        return len(self.samples)

    def points_array(self) -> np.ndarray:
        """Stacked (n_samples, n_points, 3) coordinates."""
        return np.stack([s.points for s in self.samples])

    def labels_array(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix via a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    cc = 1.0 - c
    return np.array([
        [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
        [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
        [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
    ])


def random_pose(rng: np.random.Generator, max_tilt: float) -> np.ndarray:
    """Random rotation about the z axis composed with a bounded random tilt.

    Full in-plane spin keeps orientation non-trivial while the tilt bound
    keeps the six classes separable by the small classifier.
    """
    spin = _axis_angle(np.array([0.0, 0.0, 1.0]), rng.uniform(0.0, 2.0 * np.pi))
    phi = rng.uniform(0.0, 2.0 * np.pi)
    tilt_axis = np.array([np.cos(phi), np.sin(phi), 0.0])
    tilt = _axis_angle(tilt_axis, rng.uniform(-max_tilt, max_tilt))
    return tilt @ spin


def _sphere(n, rng):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cube(n, rng):
    # pick one of six unit-area faces of [-1, 1]^3, uniform within the face
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -1.0, 1.0)
    for a in range(3):
        m = axis == a
        others = [o for o in range(3) if o != a]
        pts[m, a] = sign[m]
        pts[m, others[0]] = uv[m, 0]
        pts[m, others[1]] = uv[m, 1]
    return pts


def _cylinder(n, rng):
    radius = rng.uniform(0.4, 0.9)
    half_height = rng.uniform(0.5, 1.0)
    lateral = 2.0 * np.pi * radius * (2.0 * half_height)
    cap = np.pi * radius ** 2
    p_lateral = lateral / (lateral + 2.0 * cap)
    u = rng.random(n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.empty((n, 3))
    on_side = u < p_lateral
    pts[on_side, 0] = radius * np.cos(theta[on_side])
    pts[on_side, 1] = radius * np.sin(theta[on_side])
    pts[on_side, 2] = rng.uniform(-half_height, half_height, size=on_side.sum())
    n_cap = (~on_side).sum()
    r = radius * np.sqrt(rng.random(n_cap))
    pts[~on_side, 0] = r * np.cos(theta[~on_side])
    pts[~on_side, 1] = r * np.sin(theta[~on_side])
    pts[~on_side, 2] = np.where(rng.random(n_cap) < 0.5, -half_height, half_height)
    return pts


def _torus(n, rng):
    major = rng.uniform(0.55, 0.85)
    minor = rng.uniform(0.15, 0.45) * major
    # tube angle needs rejection sampling: surface element scales with
    # (major + minor*cos(t)), so plain uniform t would over-sample the bore
    ratio = minor / major
    t = np.empty(n)
    have = 0
    while have < n:
        cand = rng.uniform(0.0, 2.0 * np.pi, size=2 * (n - have))
        accept = rng.random(cand.size) < (1.0 + ratio * np.cos(cand)) / (1.0 + ratio)
        take = cand[accept][: n - have]
        t[have : have + take.size] = take
        have += take.size
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    ring = major + minor * np.cos(t)
    return np.column_stack([ring * np.cos(phi), ring * np.sin(phi), minor * np.sin(t)])


def _cone(n, rng):
    radius = rng.uniform(0.5, 1.0)
    apex_z, base_z = rng.uniform(0.6, 1.2), -0.5
    height = apex_z - base_z
    slant = np.sqrt(radius ** 2 + height ** 2)
    lateral = np.pi * radius * slant
    base = np.pi * radius ** 2
    u = rng.random(n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    # distance from apex along the slant, area-uniform => sqrt law
    frac = np.sqrt(rng.random(n))
    pts = np.empty((n, 3))
    on_side = u < lateral / (lateral + base)
    f = frac[on_side]
    pts[on_side, 0] = radius * f * np.cos(theta[on_side])
    pts[on_side, 1] = radius * f * np.sin(theta[on_side])
    pts[on_side, 2] = apex_z - height * f
    r = radius * frac[~on_side]
    pts[~on_side, 0] = r * np.cos(theta[~on_side])
    pts[~on_side, 1] = r * np.sin(theta[~on_side])
    pts[~on_side, 2] = base_z
    return pts


def _plane(n, rng):
    pts = np.zeros((n, 3))
    pts[:, :2] = rng.uniform(-1.0, 1.0, size=(n, 2))
    aspect = rng.uniform(0.5, 1.0)
    pts[:, 1] *= aspect
    return pts


_SAMPLERS = {
    "sphere": _sphere,
    "cube": _cube,
    "cylinder": _cylinder,
    "torus": _torus,
    "cone": _cone,
    "plane": _plane,
}


def shape_points(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample n points from the canonical surface of a named shape class."""
    if kind not in _SAMPLERS:
        raise ValueError(f"unknown shape {kind!r}, choose from {CLASS_NAMES}")
    return _SAMPLERS[kind](n, rng)


def make_cloud(kind: str, n: int, rng: np.random.Generator,
               jitter: float = 0.01, max_tilt: float = 0.35) -> np.ndarray:
    """Jittered, rotated, scaled, unit-ball-normalized sample of one shape."""
    pts = shape_points(kind, n, rng)
    if jitter > 0.0:
        pts = pts + rng.normal(0.0, jitter, size=pts.shape)
    pts = pts @ random_pose(rng, max_tilt).T
    pts = pts * rng.uniform(0.5, 1.5)  # erased by normalization; kept for realism
    return normalize_unit_ball(pts)


def gen_synthetic(per_class: int, n_points: int, seed: int,
                  jitter: float = 0.01, max_tilt: float = 0.35) -> SyntheticDataset:
    """Balanced dataset: per_class samples of each of the six shape classes."""
    rng = stage_rng(seed, "synthetic")
    samples = []
    for label, kind in enumerate(CLASS_NAMES):
        for _ in range(per_class):
            pts = make_cloud(kind, n_points, rng, jitter=jitter, max_tilt=max_tilt)
            samples.append(PointCloud(points=pts, label=label))
    return SyntheticDataset(samples=samples, seed=seed, jitter=jitter)
